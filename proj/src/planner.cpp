#include <algorithm>
#include <cmath>
#include <limits>
#include <queue>

#include "rlihf/env.hpp"

namespace rlihf::env {
namespace {

struct Grid {
    Rect area;
    double cell = 0.01;
    int nx = 0, ny = 0;
    std::vector<double> clearance;

    Grid(const Scenario& s, double cell_size) : area(s.workspace), cell(cell_size) {
        nx = std::max(1, static_cast<int>(std::ceil((area.hi.x() - area.lo.x()) / cell - 1e-9)));
        ny = std::max(1, static_cast<int>(std::ceil((area.hi.y() - area.lo.y()) / cell - 1e-9)));
        clearance.resize(static_cast<std::size_t>(nx) * ny);
        for (int j = 0; j < ny; ++j)
            for (int i = 0; i < nx; ++i) clearance[index(i, j)] = s.clearance(centre(i, j));
    }
    std::size_t index(int i, int j) const { return static_cast<std::size_t>(j) * nx + i; }
    Vec2 centre(int i, int j) const { return area.lo + Vec2((i + 0.5) * cell, (j + 0.5) * cell); }
    Vec2 centre(std::size_t k) const { return centre(static_cast<int>(k % nx), static_cast<int>(k / nx)); }
    std::size_t snap(const Vec2& p) const {
        const int i = std::clamp(static_cast<int>((p.x() - area.lo.x()) / cell), 0, nx - 1);
        const int j = std::clamp(static_cast<int>((p.y() - area.lo.y()) / cell), 0, ny - 1);
        return index(i, j);
    }
};

// Returns cell indices from start to goal, or an empty vector.
template <typename Allowed>
std::vector<std::size_t> astar(const Grid& g, std::size_t start, std::size_t goal, Allowed allowed,
                               double d_safe, double weight) {
    if (!allowed(start) || !allowed(goal)) return {};
    const double inf = std::numeric_limits<double>::infinity();
    std::vector<double> cost(g.clearance.size(), inf);
    std::vector<std::size_t> parent(g.clearance.size(), std::numeric_limits<std::size_t>::max());
    std::vector<char> closed(g.clearance.size(), 0);
    const int gx = static_cast<int>(goal % g.nx), gy = static_cast<int>(goal / g.nx);
    auto heuristic = [&](std::size_t k) {
        const double dx = std::abs(static_cast<int>(k % g.nx) - gx);
        const double dy = std::abs(static_cast<int>(k / g.nx) - gy);
        return g.cell * (std::max(dx, dy) + (std::sqrt(2.0) - 1.0) * std::min(dx, dy));
    };
    using Item = std::pair<double, std::size_t>;
    std::priority_queue<Item, std::vector<Item>, std::greater<>> open;
    cost[start] = 0.0;
    open.push({heuristic(start), start});
    while (!open.empty()) {
        const auto [f, k] = open.top();
        open.pop();
        if (closed[k]) continue;
        closed[k] = 1;
        if (k == goal) break;
        const int x = static_cast<int>(k % g.nx), y = static_cast<int>(k / g.nx);
        for (int dy = -1; dy <= 1; ++dy) {
            for (int dx = -1; dx <= 1; ++dx) {
                if (dx == 0 && dy == 0) continue;
                const int nx = x + dx, ny = y + dy;
                if (nx < 0 || ny < 0 || nx >= g.nx || ny >= g.ny) continue;
                const std::size_t n = g.index(nx, ny);
                if (closed[n] || !allowed(n)) continue;
                const double step = g.cell * ((dx != 0 && dy != 0) ? std::sqrt(2.0) : 1.0);
                const double short_by = std::max(0.0, d_safe - g.clearance[n]);
                const double c = cost[k] + step + weight * short_by * short_by;
                if (c < cost[n]) {
                    cost[n] = c;
                    parent[n] = k;
                    open.push({c + heuristic(n), n});
                }
            }
        }
    }
    if (!closed[goal]) return {};
    std::vector<std::size_t> path;
    for (std::size_t k = goal; k != start; k = parent[k]) path.push_back(k);
    path.push_back(start);
    std::reverse(path.begin(), path.end());
    return path;
}

double segment_clearance(const Scenario& s, const Vec2& a, const Vec2& b) {
    double best = std::numeric_limits<double>::infinity();
    for (const auto& o : s.obstacles) best = std::min(best, point_segment_distance(o.centre, a, b) - o.radius);
    return best;
}

std::vector<Vec2> drop_collinear(const std::vector<Vec2>& pts) {
    if (pts.size() < 3) return pts;
    std::vector<Vec2> out{pts.front()};
    for (std::size_t i = 1; i + 1 < pts.size(); ++i) {
        const Vec2 a = pts[i] - out.back();
        const Vec2 b = pts[i + 1] - pts[i];
        const double cross = a.x() * b.y() - a.y() * b.x();
        if (std::abs(cross) > 1e-12 * (a.norm() * b.norm() + 1e-30)) out.push_back(pts[i]);
    }
    out.push_back(pts.back());
    return out;
}

// Greedy visibility shortcutting: jump to the farthest later vertex whose
// chord keeps at least the clearance the replaced stretch had (capped at d_safe).
std::vector<Vec2> shortcut(const Scenario& s, const std::vector<Vec2>& pts) {
    if (pts.size() < 3) return pts;
    std::vector<double> vertex_clearance(pts.size());
    for (std::size_t k = 0; k < pts.size(); ++k) vertex_clearance[k] = s.clearance(pts[k]);
    std::vector<Vec2> out{pts.front()};
    std::size_t i = 0;
    while (i + 1 < pts.size()) {
        std::size_t next = i + 1;
        for (std::size_t j = pts.size() - 1; j > i + 1; --j) {
            double floor = s.d_safe;
            for (std::size_t k = i; k <= j; ++k) floor = std::min(floor, vertex_clearance[k]);
            const double c = segment_clearance(s, pts[i], pts[j]);
            if (c > 0.0 && c >= floor - 1e-12) {
                next = j;
                break;
            }
        }
        out.push_back(pts[next]);
        i = next;
    }
    return out;
}

std::vector<Vec2> plan_leg(const Scenario& s, const Grid& g, const Vec2& from, const Vec2& to,
                           const PlannerConfig& cfg) {
    const std::size_t a = g.snap(from), b = g.snap(to);
    // Half a cell of margin keeps chords between neighbouring cell centres outside the band.
    const double strict = s.d_safe + 0.5 * g.cell;
    auto cells = astar(g, a, b, [&](std::size_t k) { return g.clearance[k] >= strict; }, s.d_safe, cfg.clearance_weight);
    if (cells.empty())
        cells = astar(g, a, b, [&](std::size_t k) { return g.clearance[k] > 0.0; }, s.d_safe, cfg.clearance_weight);
    if (cells.empty()) throw NoPathError("no collision-free path between waypoints");

    std::vector<Vec2> pts{from};
    for (std::size_t k = 1; k + 1 < cells.size(); ++k) pts.push_back(g.centre(cells[k]));
    pts.push_back(to);
    return shortcut(s, drop_collinear(pts));
}

}  // namespace

IdealPath compute_ideal_path(const Scenario& scenario, const PlannerConfig& cfg) {
    scenario.validate();
    if (!(cfg.cell > 0.0)) throw std::invalid_argument("planner cell size must be positive");
    const Grid grid(scenario, cfg.cell);
    auto leg1 = plan_leg(scenario, grid, scenario.start, scenario.pick, cfg);
    const auto leg2 = plan_leg(scenario, grid, scenario.pick, scenario.place, cfg);
    IdealPath path;
    path.pick_vertex = leg1.size() - 1;
    leg1.insert(leg1.end(), leg2.begin() + 1, leg2.end());
    path.polyline = Polyline(std::move(leg1));
    return path;
}

}  // namespace rlihf::env
