#include "taxelsim/signals.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "taxelsim/collision.hpp"

namespace taxelsim {

namespace {

const Taxel& resolve(const World& world, const TaxelRef& ref) {
  const SkinPatch* patch = find_patch(world, ref.patch_id);
  if (patch == nullptr) throw CatalogMismatch("trace references unknown patch '" + ref.patch_id + "'");
  if (ref.index >= patch->taxels.size()) {
    throw CatalogMismatch("trace references taxel " + std::to_string(ref.index) + " of patch '" +
                          ref.patch_id + "', which has only " +
                          std::to_string(patch->taxels.size()) + " taxels");
  }
  return patch->taxels[ref.index];
}

// Trace columns of one patch, in patch taxel order. Every taxel must be present.
std::vector<std::size_t> patch_columns(const Trace& trace, const SkinPatch& patch) {
  std::vector<std::size_t> cols(patch.taxels.size(), trace.taxels());
  for (std::size_t c = 0; c < trace.taxels(); ++c) {
    const auto& ref = trace.catalog[c];
    if (ref.patch_id != patch.id) continue;
    if (ref.index >= cols.size()) {
      throw CatalogMismatch("trace column " + std::to_string(c) + " is out of range for patch '" +
                            patch.id + "'");
    }
    cols[ref.index] = c;
  }
  for (std::size_t i = 0; i < cols.size(); ++i) {
    if (cols[i] == trace.taxels()) {
      throw CatalogMismatch("trace is missing taxel " + std::to_string(i) + " of patch '" +
                            patch.id + "'");
    }
  }
  return cols;
}

}  // namespace

Trace displacements_to_forces(const Trace& trace, const World& world, ForceOptions options) {
  if (trace.quantity != Quantity::Displacement) {
    throw std::invalid_argument("displacements_to_forces: trace does not hold displacements");
  }
  if (trace.values.size() != trace.steps() * trace.taxels()) {
    throw CatalogMismatch("trace matrix size does not match its catalog and times");
  }
  std::vector<const Taxel*> params;
  params.reserve(trace.taxels());
  for (const auto& ref : trace.catalog) params.push_back(&resolve(world, ref));

  Trace out = trace;
  out.quantity = Quantity::Force;
  const std::size_t n = trace.taxels();
  for (std::size_t k = 0; k < trace.steps(); ++k) {
    for (std::size_t i = 0; i < n; ++i) {
      const double d = trace.at(k, i);
      const double rate = k == 0 ? 0.0 : (d - trace.at(k - 1, i)) / trace.dt;
      const double f = params[i]->stiffness * d + params[i]->damping * rate;
      out.values[k * n + i] = options.clamp ? std::max(0.0, f) : f;
    }
  }
  return out;
}

double GaussianStream::next_normal() {
  const double u1 = static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;
  const double u2 = static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

Trace add_noise(const Trace& trace, const NoiseSpec& spec, const Executor* exec) {
  if (!(spec.sigma >= 0.0) || !std::isfinite(spec.sigma)) {
    throw std::invalid_argument("noise sigma must be finite and >= 0");
  }
  Trace out = trace;
  out.noise = NoiseRecord{std::string(kNoiseAlgorithm), spec.seed, spec.sigma};
  if (spec.sigma == 0.0) return out;

  auto body = [&](std::size_t begin, std::size_t end) {
    for (std::size_t k = begin; k < end; ++k) {
      GaussianStream rng(spec.seed ^ static_cast<std::uint64_t>(k));
      for (double& v : out.row(k)) v += spec.sigma * rng.next_normal();
    }
  };
  if (exec != nullptr) {
    exec->parallel_for(out.steps(), body);
  } else {
    body(0, out.steps());
  }
  return out;
}

SignalFrame add_noise(const SignalFrame& frame, const NoiseSpec& spec) {
  if (!(spec.sigma >= 0.0) || !std::isfinite(spec.sigma)) {
    throw std::invalid_argument("noise sigma must be finite and >= 0");
  }
  SignalFrame out = frame;
  if (spec.sigma == 0.0) return out;
  GaussianStream rng(spec.seed);
  for (double& v : out.values) v += spec.sigma * rng.next_normal();
  return out;
}

GaussianSmoother::GaussianSmoother(const SkinPatch& patch, double sigma) {
  if (!(sigma > 0.0) || !std::isfinite(sigma)) {
    throw std::invalid_argument("smoothing sigma must be finite and > 0");
  }
  const std::size_t n = patch.taxels.size();
  // exp(-r^2 / 2 sigma^2) < 1e-12 beyond this radius.
  const double cutoff = sigma * std::sqrt(2.0 * std::log(1e12));
  const double inv_two_var = 1.0 / (2.0 * sigma * sigma);

  std::vector<WorldSphere> points;
  points.reserve(n);
  double extent = 1.0;
  for (std::size_t i = 0; i < n; ++i) {
    points.push_back({patch.taxels[i].rest_center, 0.0, 0});
    extent = std::max(extent, patch.taxels[i].rest_center.cwiseAbs().maxCoeff());
  }
  const SpatialHashGrid grid(std::move(points), std::max(cutoff, 1e-9 * extent));
  const auto pts = grid.spheres();

  offsets_.reserve(n + 1);
  offsets_.push_back(0);
  std::vector<std::pair<std::uint32_t, double>> row;
  for (std::size_t i = 0; i < n; ++i) {
    row.clear();
    const Vec3& p = pts[i].center;
    const Vec3 r = Vec3::Constant(cutoff);
    grid.for_each_in_aabb(p - r, p + r, [&](std::uint32_t j) {
      const double w = std::exp(-(pts[j].center - p).squaredNorm() * inv_two_var);
      if (w >= 1e-12 || j == i) row.emplace_back(j, w);
    });
    std::sort(row.begin(), row.end());
    double total = 0.0;
    for (const auto& [j, w] : row) total += w;
    for (const auto& [j, w] : row) {
      neighbors_.push_back(j);
      weights_.push_back(w / total);
    }
    offsets_.push_back(neighbors_.size());
  }
}

void GaussianSmoother::apply(std::span<const double> in, std::span<double> out) const {
  if (in.size() != size() || out.size() != size()) {
    throw std::invalid_argument("smoothing input does not match the patch taxel count");
  }
  for (std::size_t i = 0; i < size(); ++i) {
    double acc = 0.0;
    double lo = in[neighbors_[offsets_[i]]];
    double hi = lo;
    for (std::size_t e = offsets_[i]; e < offsets_[i + 1]; ++e) {
      const double v = in[neighbors_[e]];
      acc += weights_[e] * v;
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
    // A convex combination stays inside its inputs' range; undo rounding drift.
    out[i] = std::clamp(acc, lo, hi);
  }
}

SignalFrame gaussian_smooth(const SignalFrame& frame, const SkinPatch& patch, double sigma) {
  if (frame.values.size() != patch.taxels.size()) {
    throw CatalogMismatch("frame has " + std::to_string(frame.values.size()) +
                          " values but patch '" + patch.id + "' has " +
                          std::to_string(patch.taxels.size()) + " taxels");
  }
  const GaussianSmoother smoother(patch, sigma);
  SignalFrame out = frame;
  smoother.apply(frame.values, out.values);
  return out;
}

Trace smooth_trace(const Trace& trace, const World& world, double sigma) {
  Trace out = trace;
  std::vector<std::string> seen;
  for (const auto& ref : trace.catalog) {
    if (std::find(seen.begin(), seen.end(), ref.patch_id) != seen.end()) continue;
    seen.push_back(ref.patch_id);
    const SkinPatch* patch = find_patch(world, ref.patch_id);
    if (patch == nullptr) throw CatalogMismatch("trace references unknown patch '" + ref.patch_id + "'");
    const auto cols = patch_columns(trace, *patch);
    const GaussianSmoother smoother(*patch, sigma);
    std::vector<double> in(cols.size()), res(cols.size());
    for (std::size_t k = 0; k < trace.steps(); ++k) {
      for (std::size_t i = 0; i < cols.size(); ++i) in[i] = trace.at(k, cols[i]);
      smoother.apply(in, res);
      for (std::size_t i = 0; i < cols.size(); ++i) out.row(k)[cols[i]] = res[i];
    }
  }
  return out;
}

SignalFrame extract_frame(const Trace& trace, const std::string& patch_id, double t) {
  if (trace.steps() == 0) throw std::out_of_range("trace has no rows");
  const double last = trace.times.back();
  if (!std::isfinite(t) || t < 0.0 || t > last + 0.5 * trace.dt) {
    throw std::out_of_range("time " + std::to_string(t) + " s is outside the trace [0, " +
                            std::to_string(last) + "]");
  }
  auto it = std::upper_bound(trace.times.begin(), trace.times.end(), t);
  std::size_t k = it == trace.times.begin() ? 0 : static_cast<std::size_t>(it - trace.times.begin()) - 1;
  if (k + 1 < trace.steps()) {
    const double before = t - trace.times[k];
    const double after = trace.times[k + 1] - t;
    // Exact halfway points rarely survive rounding; treat near-ties as ties.
    if (after < before - 1e-9 * trace.dt) ++k;
  }

  SignalFrame frame;
  frame.patch_id = patch_id;
  frame.quantity = trace.quantity;
  bool found = false;
  for (std::size_t c = 0; c < trace.taxels(); ++c) {
    if (trace.catalog[c].patch_id != patch_id) continue;
    found = true;
    frame.values.push_back(trace.at(k, c));
  }
  if (!found) throw std::out_of_range("trace has no patch '" + patch_id + "'");
  return frame;
}

}  // namespace taxelsim
