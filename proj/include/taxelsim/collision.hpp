#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <unordered_map>
#include <vector>

#include "taxelsim/kinematics.hpp"

namespace taxelsim {

struct CellKey {
  std::int64_t x = 0;
  std::int64_t y = 0;
  std::int64_t z = 0;
  bool operator==(const CellKey&) const = default;
};

struct CellKeyHash {
  std::size_t operator()(const CellKey& k) const noexcept {
    std::uint64_t h = static_cast<std::uint64_t>(k.x) * 0x9E3779B97F4A7C15ULL;
    h ^= static_cast<std::uint64_t>(k.y) * 0xC2B2AE3D27D4EB4FULL + (h << 6) + (h >> 2);
    h ^= static_cast<std::uint64_t>(k.z) * 0x165667B19E3779F9ULL + (h << 6) + (h >> 2);
    return static_cast<std::size_t>(h);
  }
};

/// Uniform spatial hash over world spheres. Each sphere is listed in every
/// cell its radius-inflated AABB overlaps, in insertion order.
class SpatialHashGrid {
 public:
  SpatialHashGrid(std::vector<WorldSphere> spheres, double cell_size);

  double cell_size() const { return cell_size_; }
  double max_radius() const { return max_radius_; }
  std::span<const WorldSphere> spheres() const { return spheres_; }
  std::size_t occupied_cells() const { return cells_.size(); }

  CellKey cell_of(const Vec3& p) const;

  /// Sphere indices stored in one cell (empty span if unoccupied).
  std::span<const std::uint32_t> cell(const CellKey& key) const;

  /// Visits the index of every sphere stored in a cell overlapping [lo, hi].
  /// An index may be visited more than once.
  template <typename Visitor>
  void for_each_in_aabb(const Vec3& lo, const Vec3& hi, Visitor&& visit) const {
    if (spheres_.empty()) return;
    const CellKey a = cell_of(lo);
    const CellKey b = cell_of(hi);
    const double span_cells = double(b.x - a.x + 1) * double(b.y - a.y + 1) * double(b.z - a.z + 1);
    if (span_cells > double(cells_.size())) {
      // Query box covers more cells than are occupied: scan the occupied ones.
      for (const auto& [key, range] : cells_) {
        if (key.x < a.x || key.x > b.x || key.y < a.y || key.y > b.y || key.z < a.z || key.z > b.z) {
          continue;
        }
        for (std::uint32_t i = 0; i < range.count; ++i) visit(entries_[range.begin + i]);
      }
      return;
    }
    for (std::int64_t x = a.x; x <= b.x; ++x) {
      for (std::int64_t y = a.y; y <= b.y; ++y) {
        for (std::int64_t z = a.z; z <= b.z; ++z) {
          auto it = cells_.find(CellKey{x, y, z});
          if (it == cells_.end()) continue;
          for (std::uint32_t i = 0; i < it->second.count; ++i) visit(entries_[it->second.begin + i]);
        }
      }
    }
  }

  /// Query box for a taxel: the deflection segment inflated by taxel radius + max_radius().
  void taxel_query_box(const TaxelWorldFrame& frame, double taxel_radius, double max_deflection,
                       Vec3& lo, Vec3& hi) const;

 private:
  struct Range {
    std::uint32_t begin = 0;
    std::uint32_t count = 0;
  };

  std::vector<WorldSphere> spheres_;
  double cell_size_;
  double max_radius_ = 0.0;
  std::unordered_map<CellKey, Range, CellKeyHash> cells_;
  std::vector<std::uint32_t> entries_;
};

SpatialHashGrid build_grid(std::vector<WorldSphere> spheres, double cell_size);

/// 2 * (largest sphere radius + largest taxel radius), floored at 1e-3 m.
double default_cell_size(double max_sphere_radius, double max_taxel_radius);

/// Superset of the spheres that overlap the taxel; sorted, no duplicates.
std::vector<std::size_t> candidate_spheres(const SpatialHashGrid& grid,
                                           const TaxelWorldFrame& frame, double taxel_radius,
                                           double max_deflection);

/// Smallest d >= 0 that pushes the taxel sphere (moving along -normal) out of
/// the object sphere.
inline double required_deflection(const Vec3& rest_center, const Vec3& normal,
                                  double taxel_radius, const Vec3& sphere_center,
                                  double sphere_radius) {
  const Vec3 w = rest_center - sphere_center;
  const double reach = taxel_radius + sphere_radius;
  const double w2 = w.squaredNorm();
  if (w2 >= reach * reach) return 0.0;
  const double wn = w.dot(normal);
  const double gap = reach * reach - w2;
  // Roots of d^2 - 2(w.n)d - gap have opposite signs when gap > 0; take the
  // positive one, in the form that avoids cancellation.
  const double disc = std::sqrt(wn * wn + gap);
  return wn >= 0.0 ? wn + disc : gap / (disc - wn);
}

}  // namespace taxelsim
