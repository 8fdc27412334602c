#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <unordered_map>
#include <vector>

#include "semfusion/geometry.hpp"

namespace semfusion {

/// Uniform hash grid over 3D points for exact nearest-neighbour queries.
class PointGrid {
 public:
  explicit PointGrid(double cell = 0.05) : cell_(cell) {}

  PointGrid(const std::vector<Vec3>& points, double cell) : cell_(cell) {
    for (const auto& p : points) insert(p);
  }

  void insert(const Vec3& p) {
    const auto k = key_of(p);
    cells_[hash(k)].push_back(points_.size());
    points_.push_back(p);
    if (points_.size() == 1) {
      lo_ = hi_ = k;
    } else {
      for (int i = 0; i < 3; ++i) {
        lo_[i] = std::min(lo_[i], k[i]);
        hi_[i] = std::max(hi_[i], k[i]);
      }
    }
  }

  std::size_t size() const { return points_.size(); }
  bool empty() const { return points_.empty(); }
  const Vec3& point(std::size_t i) const { return points_[i]; }

  /// Index of the nearest point within `max_dist` (unbounded by default);
  /// the lowest index wins on exact ties.
  std::optional<std::size_t> nearest(const Vec3& q,
                                     double max_dist = std::numeric_limits<double>::infinity()) const {
    if (points_.empty() || !std::isfinite(q.squaredNorm())) return std::nullopt;
    const auto c = key_of(q);
    int max_ring = 0;
    for (int i = 0; i < 3; ++i)
      max_ring = std::max({max_ring, static_cast<int>(std::abs(c[i] - lo_[i])),
                           static_cast<int>(std::abs(hi_[i] - c[i]))});
    if (std::isfinite(max_dist)) max_ring = std::min(max_ring, static_cast<int>(std::ceil(max_dist / cell_)) + 1);

    const double limit = max_dist * max_dist;
    double best = limit;
    std::optional<std::size_t> best_i;
    // far from the cloud the rings are mostly empty; a plain scan is cheaper
    auto scan_all = [&] {
      best = limit;
      best_i.reset();
      for (std::size_t i = 0; i < points_.size(); ++i) {
        const double d = (points_[i] - q).squaredNorm();
        if (d <= limit && (!best_i || d < best)) best = d, best_i = i;
      }
      return best_i;
    };
    const double cells = std::pow(2.0 * max_ring + 1.0, 3);
    std::size_t visited = 0;
    for (int r = 0; r <= max_ring; ++r) {
      visited += r == 0 ? 1 : static_cast<std::size_t>(24 * r * r + 2);
      if (visited > 4 * points_.size() + 64 && cells > 4.0 * points_.size()) return scan_all();
      // everything in ring r is at least (r - 1) cells away
      if (best_i && r >= 1 && std::pow((r - 1) * cell_, 2) > best) break;
      for (int dz = -r; dz <= r; ++dz)
        for (int dy = -r; dy <= r; ++dy)
          for (int dx = -r; dx <= r; dx += (std::abs(dy) == r || std::abs(dz) == r || dx == r) ? 1 : 2 * r) {
            auto it = cells_.find(hash({c[0] + dx, c[1] + dy, c[2] + dz}));
            if (it == cells_.end()) continue;
            for (std::size_t i : it->second) {
              const double d = (points_[i] - q).squaredNorm();
              if (d > limit) continue;
              if (!best_i || d < best || (d == best && i < *best_i)) {
                best = d;
                best_i = i;
              }
            }
          }
    }
    return best_i;
  }

 private:
  using Key = std::array<std::int64_t, 3>;

  Key key_of(const Vec3& p) const {
    return {static_cast<std::int64_t>(std::floor(p.x() / cell_)), static_cast<std::int64_t>(std::floor(p.y() / cell_)),
            static_cast<std::int64_t>(std::floor(p.z() / cell_))};
  }
  static std::uint64_t hash(const Key& k) {
    return static_cast<std::uint64_t>(k[0]) * 73856093ULL ^ static_cast<std::uint64_t>(k[1]) * 19349663ULL ^
           static_cast<std::uint64_t>(k[2]) * 83492791ULL;
  }

  double cell_;
  std::vector<Vec3> points_;
  std::unordered_map<std::uint64_t, std::vector<std::size_t>> cells_;
  Key lo_{}, hi_{};
};

}  // namespace semfusion
