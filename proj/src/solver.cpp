#include "taxelsim/solver.hpp"

#include <algorithm>
#include <cmath>

namespace taxelsim {

namespace {

// Range of travel d (along -normal) over which the taxel sphere overlaps s.
struct Span {
  double enter;
  double exit;
};

bool overlap_span(const TaxelWorldFrame& f, double taxel_radius, const WorldSphere& s, Span& out) {
  const Vec3 w = f.rest_center - s.center;
  const double reach = taxel_radius + s.radius;
  const double wn = w.dot(f.normal);
  const double gap = reach * reach - w.squaredNorm();
  const double q = wn * wn + gap;
  if (q <= 0.0) return false;
  const double disc = std::sqrt(q);
  // Roots of d^2 - 2 wn d - gap; pick the forms without cancellation.
  out.exit = wn >= 0.0 ? wn + disc : gap / (disc - wn);
  if (!(out.exit > 0.0)) return false;
  out.enter = wn > 0.0 ? -gap / (wn + disc) : wn - disc;
  return true;
}

}  // namespace

StepResult solve_step(std::span<const TaxelWorldFrame> frames, std::span<const Taxel> taxels,
                      const SpatialHashGrid& grid, const Executor* exec) {
  if (frames.size() != taxels.size()) {
    throw std::invalid_argument("solve_step: frames and taxels differ in length");
  }
  const std::size_t n = frames.size();
  StepResult result;
  result.deflections.assign(n, 0.0);
  std::vector<unsigned char> saturated(n, 0);
  if (grid.spheres().empty()) return result;

  const auto spheres = grid.spheres();
  auto body = [&](std::size_t begin, std::size_t end) {
    Vec3 lo, hi;
    std::vector<Span> spans;
    for (std::size_t i = begin; i < end; ++i) {
      const auto& f = frames[i];
      const auto& tx = taxels[i];
      grid.taxel_query_box(f, tx.radius, tx.max_deflection, lo, hi);
      spans.clear();
      Span sp;
      grid.for_each_in_aabb(lo, hi, [&](std::uint32_t j) {
        if (overlap_span(f, tx.radius, spheres[j], sp)) spans.push_back(sp);
      });
      // Walk forward until the taxel is clear of every sphere. With all contacts
      // in front of the taxel this is the deepest single push; a sphere behind
      // the taxel can only extend it.
      double d = 0.0;
      for (bool moved = true; moved && d <= tx.max_deflection;) {
        moved = false;
        for (const auto& s : spans) {
          if (s.enter < d && d < s.exit) {
            d = s.exit;
            moved = true;
          }
        }
      }
      if (d > tx.max_deflection) {
        result.deflections[i] = tx.max_deflection;
        saturated[i] = 1;
      } else {
        result.deflections[i] = d;
      }
    }
  };
  if (exec != nullptr) {
    exec->parallel_for(n, body);
  } else {
    body(0, n);
  }

  for (std::size_t i = 0; i < n; ++i) {
    if (saturated[i]) result.saturated.push_back(i);
  }
  return result;
}

double support_force(std::span<const double> deflections, std::span<const TaxelWorldFrame> frames,
                     std::span<const Taxel> taxels, const Vec3& gravity_dir) {
  double total = 0.0;
  for (std::size_t i = 0; i < deflections.size(); ++i) {
    if (deflections[i] == 0.0) continue;
    const double lift = std::max(0.0, -frames[i].normal.dot(gravity_dir));
    total += taxels[i].stiffness * deflections[i] * lift;
  }
  return total;
}

double settle_object(const World& world, std::size_t object_index,
                     std::span<const TaxelWorldFrame> frames, std::span<const Taxel> taxels,
                     double warm_start, const SettleTolerances& tol, const Executor* exec) {
  const auto& object = world.objects.at(object_index);
  const auto* mode = std::get_if<SettleMode>(&object.mode);
  if (mode == nullptr || !mode->mass) {
    throw std::invalid_argument("settle_object: object '" + object.id + "' is not a settle object");
  }
  const Vec3 g_hat = gravity_direction(world.gravity);
  const double weight = *mode->mass * world.gravity.norm();

  double max_sphere = 0.0;
  for (const auto& s : object.spheres) max_sphere = std::max(max_sphere, s.radius);
  double max_taxel = 0.0;
  double step = 0.0;
  for (const auto& tx : taxels) {
    max_taxel = std::max(max_taxel, tx.radius);
    step = std::max(step, tx.max_deflection);
  }
  auto unsupported = [&](const std::string& why) {
    return SimulationError(SimulationError::Kind::Unsupported,
                           "object '" + object.id + "' is unsupported: " + why);
  };
  if (taxels.empty()) throw unsupported("the world has no taxels");

  const double cell = default_cell_size(max_sphere, max_taxel);
  auto force_at = [&](double s) {
    const Pose pose = Pose::from_translation(s * g_hat) * mode->initial;
    std::vector<WorldSphere> spheres;
    spheres.reserve(object.spheres.size());
    for (const auto& sp : object.spheres) {
      spheres.push_back({pose.transform_point(sp.center), sp.radius, object_index});
    }
    const SpatialHashGrid grid(std::move(spheres), cell);
    const StepResult r = solve_step(frames, taxels, grid, exec);
    return support_force(r.deflections, frames, taxels, g_hat);
  };

  // Bracket [lo, hi] with F(lo) < W <= F(hi).
  double lo = warm_start;
  double f_lo = force_at(lo);
  double hi = lo;
  double f_hi = f_lo;
  if (f_lo >= weight) {
    // Warm start is already over-supported: back off against gravity.
    while (f_lo >= weight) {
      hi = lo;
      f_hi = f_lo;
      lo -= step;
      if (warm_start - lo > tol.max_travel) {
        throw unsupported("support force never drops below the weight");
      }
      f_lo = force_at(lo);
    }
  } else {
    hi = lo + step;
    f_hi = force_at(hi);
    while (f_hi < weight) {
      lo = hi;
      f_lo = f_hi;
      hi += step;
      if (hi - warm_start > tol.max_travel) {
        throw unsupported("no support within " + std::to_string(tol.max_travel) + " m of travel");
      }
      f_hi = force_at(hi);
    }
  }

  while (hi - lo > tol.offset) {
    const double mid = lo + 0.5 * (hi - lo);
    if (mid <= lo || mid >= hi) break;
    const double f_mid = force_at(mid);
    if (std::abs(f_mid - weight) <= tol.force) return mid;
    if (f_mid < weight) {
      lo = mid;
      f_lo = f_mid;
    } else {
      hi = mid;
      f_hi = f_mid;
    }
  }
  return (weight - f_lo) < (f_hi - weight) ? lo : hi;
}

std::vector<Taxel> catalog_taxels(const World& world) {
  std::vector<Taxel> out;
  for (const auto& p : world.patches) out.insert(out.end(), p.taxels.begin(), p.taxels.end());
  return out;
}

Simulator::Simulator(World world, SimulationOptions options)
    : world_(std::move(world)), exec_(options.threads) {
  require_valid(world_);
  catalog_ = taxel_catalog(world_);
  taxels_ = catalog_taxels(world_);
  steps_ = taxelsim::step_count(world_.duration, world_.dt);

  double max_sphere = 0.0;
  for (const auto& obj : world_.objects) {
    for (const auto& s : obj.spheres) max_sphere = std::max(max_sphere, s.radius);
    if (std::holds_alternative<SettleMode>(obj.mode)) settle_offsets_[obj.id] = 0.0;
  }
  double max_taxel = 0.0;
  for (const auto& tx : taxels_) max_taxel = std::max(max_taxel, tx.radius);
  cell_size_ = default_cell_size(max_sphere, max_taxel);
}

StepResult Simulator::step(std::size_t k) {
  const double t = time_of(k);
  try {
    world_taxel_frames(world_, t, frames_);
    for (std::size_t oi = 0; oi < world_.objects.size(); ++oi) {
      const auto& obj = world_.objects[oi];
      if (!std::holds_alternative<SettleMode>(obj.mode)) continue;
      double& offset = settle_offsets_.at(obj.id);
      offset = settle_object(world_, oi, frames_, taxels_, offset, {}, &exec_);
    }
    const SpatialHashGrid grid(object_sphere_positions(world_, t, settle_offsets_), cell_size_);
    return solve_step(frames_, taxels_, grid, &exec_);
  } catch (const SimulationError& e) {
    throw SimulationError(e.kind(),
                          std::string(e.what()) + " (step " + std::to_string(k) + ", t = " +
                              std::to_string(t) + " s)",
                          k);
  }
}

Trace Simulator::run() {
  Trace trace;
  trace.catalog = catalog_;
  trace.dt = world_.dt;
  trace.quantity = Quantity::Displacement;
  trace.times.reserve(steps_);
  trace.values.reserve(steps_ * catalog_.size());
  for (std::size_t k = 0; k < steps_; ++k) {
    StepResult r = step(k);
    trace.times.push_back(time_of(k));
    trace.values.insert(trace.values.end(), r.deflections.begin(), r.deflections.end());
    for (std::size_t i : r.saturated) trace.saturated.push_back({k, i});
  }
  return trace;
}

Trace simulate(const World& world, SimulationOptions options) {
  return Simulator(world, options).run();
}

}  // namespace taxelsim
