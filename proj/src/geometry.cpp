#include "rlihf/geometry.hpp"

#include <algorithm>
#include <limits>
#include <stdexcept>

namespace rlihf::env {

double point_segment_distance(const Vec2& p, const Vec2& a, const Vec2& b) {
    const Vec2 ab = b - a;
    const double len2 = ab.squaredNorm();
    const double t = len2 > 0.0 ? std::clamp((p - a).dot(ab) / len2, 0.0, 1.0) : 0.0;
    return (a + t * ab - p).norm();
}

Polyline::Polyline(std::vector<Vec2> points) : points_(std::move(points)) {
    if (points_.empty()) throw std::invalid_argument("polyline needs at least one point");
    cumulative_.reserve(points_.size());
    cumulative_.push_back(0.0);
    for (std::size_t i = 1; i < points_.size(); ++i)
        cumulative_.push_back(cumulative_.back() + (points_[i] - points_[i - 1]).norm());
}

Projection Polyline::project(const Vec2& p) const { return project(p, 0, segment_count()); }

Projection Polyline::project(const Vec2& p, std::size_t first, std::size_t last) const {
    if (points_.empty()) throw std::logic_error("projection onto an empty polyline");
    if (segment_count() == 0 || first >= last) {
        const std::size_t v = std::min(first, points_.size() - 1);
        return {(points_[v] - p).norm(), cumulative_[v], points_[v]};
    }
    Projection best{std::numeric_limits<double>::infinity(), 0.0, points_.front()};
    for (std::size_t i = first; i < std::min(last, segment_count()); ++i) {
        const Vec2& a = points_[i];
        const Vec2 ab = points_[i + 1] - a;
        const double len2 = ab.squaredNorm();
        const double t = len2 > 0.0 ? std::clamp((p - a).dot(ab) / len2, 0.0, 1.0) : 0.0;
        const Vec2 q = a + t * ab;
        const double d = (q - p).norm();
        if (d < best.distance) best = {d, cumulative_[i] + t * std::sqrt(len2), q};
    }
    return best;
}

Vec2 Polyline::point_at(double s) const {
    if (points_.size() == 1 || s <= 0.0) return points_.front();
    if (s >= length()) return points_.back();
    const auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), s);
    const std::size_t i = static_cast<std::size_t>(it - cumulative_.begin()) - 1;
    const double seg = cumulative_[i + 1] - cumulative_[i];
    const double t = seg > 0.0 ? (s - cumulative_[i]) / seg : 0.0;
    return points_[i] + t * (points_[i + 1] - points_[i]);
}

}  // namespace rlihf::env
