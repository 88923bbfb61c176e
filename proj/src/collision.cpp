#include "taxelsim/collision.hpp"

#include <algorithm>
#include <stdexcept>

namespace taxelsim {

SpatialHashGrid::SpatialHashGrid(std::vector<WorldSphere> spheres, double cell_size)
    : spheres_(std::move(spheres)), cell_size_(cell_size) {
  if (!(cell_size > 0.0) || !std::isfinite(cell_size)) {
    throw std::invalid_argument("spatial hash cell size must be finite and > 0");
  }

  // Two passes: count per cell (in first-touch order), then fill.
  std::vector<std::pair<CellKey, std::uint32_t>> touches;
  touches.reserve(spheres_.size() * 8);
  for (std::uint32_t i = 0; i < spheres_.size(); ++i) {
    const auto& s = spheres_[i];
    max_radius_ = std::max(max_radius_, s.radius);
    const Vec3 r = Vec3::Constant(s.radius);
    const CellKey a = cell_of(s.center - r);
    const CellKey b = cell_of(s.center + r);
    for (std::int64_t x = a.x; x <= b.x; ++x) {
      for (std::int64_t y = a.y; y <= b.y; ++y) {
        for (std::int64_t z = a.z; z <= b.z; ++z) touches.emplace_back(CellKey{x, y, z}, i);
      }
    }
  }

  cells_.reserve(touches.size());
  for (const auto& [key, _] : touches) ++cells_[key].count;
  std::uint32_t offset = 0;
  for (auto& [key, range] : cells_) {
    range.begin = offset;
    offset += range.count;
    range.count = 0;
  }
  entries_.resize(touches.size());
  for (const auto& [key, index] : touches) {
    Range& range = cells_[key];
    entries_[range.begin + range.count++] = index;
  }
}

namespace {

std::int64_t cell_coord(double x, double cell_size) {
  constexpr double kLimit = 4.0e15;
  return static_cast<std::int64_t>(std::clamp(std::floor(x / cell_size), -kLimit, kLimit));
}

}  // namespace

CellKey SpatialHashGrid::cell_of(const Vec3& p) const {
  return CellKey{cell_coord(p.x(), cell_size_), cell_coord(p.y(), cell_size_),
                 cell_coord(p.z(), cell_size_)};
}

std::span<const std::uint32_t> SpatialHashGrid::cell(const CellKey& key) const {
  auto it = cells_.find(key);
  if (it == cells_.end()) return {};
  return {entries_.data() + it->second.begin, it->second.count};
}

void SpatialHashGrid::taxel_query_box(const TaxelWorldFrame& frame, double taxel_radius,
                                      double max_deflection, Vec3& lo, Vec3& hi) const {
  const Vec3 end = frame.rest_center - max_deflection * frame.normal;
  const Vec3 pad = Vec3::Constant(taxel_radius + max_radius_);
  lo = frame.rest_center.cwiseMin(end) - pad;
  hi = frame.rest_center.cwiseMax(end) + pad;
}

SpatialHashGrid build_grid(std::vector<WorldSphere> spheres, double cell_size) {
  return SpatialHashGrid(std::move(spheres), cell_size);
}

double default_cell_size(double max_sphere_radius, double max_taxel_radius) {
  return std::max(2.0 * (max_sphere_radius + max_taxel_radius), 1e-3);
}

std::vector<std::size_t> candidate_spheres(const SpatialHashGrid& grid,
                                           const TaxelWorldFrame& frame, double taxel_radius,
                                           double max_deflection) {
  std::vector<std::size_t> out;
  Vec3 lo, hi;
  grid.taxel_query_box(frame, taxel_radius, max_deflection, lo, hi);
  grid.for_each_in_aabb(lo, hi, [&](std::uint32_t i) { out.push_back(i); });
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

}  // namespace taxelsim
