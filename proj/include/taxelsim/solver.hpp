#pragma once

#include <map>
#include <span>
#include <string>
#include <vector>

#include "taxelsim/collision.hpp"
#include "taxelsim/core.hpp"
#include "taxelsim/kinematics.hpp"
#include "taxelsim/parallel.hpp"

namespace taxelsim {

struct StepResult {
  std::vector<double> deflections;
  std::vector<std::size_t> saturated;  // ascending taxel indices
};

/// Per-taxel quasi-static deflection: the smallest push along -normal that
/// clears every candidate sphere, clamped to max_deflection. Unless a sphere
/// sits behind the taxel this is the deepest single required_deflection. Taxels are independent, so the loop
/// runs on exec when one is given.
StepResult solve_step(std::span<const TaxelWorldFrame> frames, std::span<const Taxel> taxels,
                      const SpatialHashGrid& grid, const Executor* exec = nullptr);

/// Total spring force opposing gravity: sum k_i d_i max(0, n_i . -g_hat).
double support_force(std::span<const double> deflections, std::span<const TaxelWorldFrame> frames,
                     std::span<const Taxel> taxels, const Vec3& gravity_dir);

/// Bracketing and bisection limits for settle solves.
struct SettleTolerances {
  double force = 1e-6;   // N
  double offset = 1e-9;  // m
  double max_travel = 1.0;  // m
};

/// Offset along gravity at which the skin carries the weight of a Settle-mode
/// object. frames are the taxel frames at the current time; other objects are
/// ignored. Throws SimulationError (Unsupported / ZeroGravity).
double settle_object(const World& world, std::size_t object_index,
                     std::span<const TaxelWorldFrame> frames, std::span<const Taxel> taxels,
                     double warm_start = 0.0, const SettleTolerances& tol = {},
                     const Executor* exec = nullptr);

struct SimulationOptions {
  std::size_t threads = 0;  // 0 = all cores
};

/// Stepping loop over a validated world. Steps must be taken in order for
/// settle warm starts to apply; any order gives the same rows.
class Simulator {
 public:
  explicit Simulator(World world, SimulationOptions options = {});

  const World& world() const { return world_; }
  const std::vector<TaxelRef>& catalog() const { return catalog_; }
  std::size_t step_count() const { return steps_; }
  double time_of(std::size_t k) const { return static_cast<double>(k) * world_.dt; }
  double cell_size() const { return cell_size_; }
  const std::map<std::string, double>& settle_offsets() const { return settle_offsets_; }

  /// Computes row k. SimulationError is rethrown with k attached.
  StepResult step(std::size_t k);

  Trace run();

 private:
  World world_;
  std::vector<TaxelRef> catalog_;
  std::vector<Taxel> taxels_;
  std::vector<TaxelWorldFrame> frames_;
  std::map<std::string, double> settle_offsets_;
  std::size_t steps_ = 0;
  double cell_size_ = 0.0;
  Executor exec_;
};

Trace simulate(const World& world, SimulationOptions options = {});

/// Taxel parameters flattened in catalog order.
std::vector<Taxel> catalog_taxels(const World& world);

}  // namespace taxelsim
