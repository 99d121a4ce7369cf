#pragma once

#include <cstddef>
#include <vector>

#include <Eigen/Dense>

namespace rlihf::env {

using Vec2 = Eigen::Vector2d;

struct Circle {
    Vec2 centre = Vec2::Zero();
    double radius = 0.0;
};

struct Rect {
    Vec2 lo = Vec2::Zero();
    Vec2 hi = Vec2::Ones();

    bool contains(const Vec2& p) const {
        return p.x() >= lo.x() && p.x() <= hi.x() && p.y() >= lo.y() && p.y() <= hi.y();
    }
    Vec2 clamp(const Vec2& p) const { return p.cwiseMax(lo).cwiseMin(hi); }
};

struct Projection {
    double distance = 0.0;    // to the closest point
    double arc_length = 0.0;  // along the polyline, from its first vertex
    Vec2 point = Vec2::Zero();
};

double point_segment_distance(const Vec2& p, const Vec2& a, const Vec2& b);

class Polyline {
public:
    Polyline() = default;
    explicit Polyline(std::vector<Vec2> points);

    const std::vector<Vec2>& points() const { return points_; }
    std::size_t segment_count() const { return points_.size() < 2 ? 0 : points_.size() - 1; }
    double length() const { return cumulative_.empty() ? 0.0 : cumulative_.back(); }
    /// Arc length at vertex i.
    double arc_at(std::size_t vertex) const { return cumulative_[vertex]; }

    Projection project(const Vec2& p) const;
    /// Projection restricted to segments [first, last).
    Projection project(const Vec2& p, std::size_t first_segment, std::size_t last_segment) const;
    Vec2 point_at(double arc_length) const;

private:
    std::vector<Vec2> points_;
    std::vector<double> cumulative_;
};

}  // namespace rlihf::env
