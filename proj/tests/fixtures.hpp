#pragma once

#include <cmath>
#include <random>
#include <string>

#include "taxelsim/core.hpp"

namespace taxelsim::testing {

inline SkinPatch grid_patch(const std::string& id, std::size_t rows, std::size_t cols,
                            double spacing, double radius, double stiffness = 1000.0,
                            double damping = 0.0, double max_deflection = 0.01) {
  SkinPatch p;
  p.id = id;
  p.grid_dims = GridDims{rows, cols};
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) {
      Taxel t;
      t.rest_center = Vec3(double(c) * spacing, double(r) * spacing, 0.0);
      t.radius = radius;
      t.stiffness = stiffness;
      t.damping = damping;
      t.max_deflection = max_deflection;
      t.grid_index = GridIndex{r, c};
      p.taxels.push_back(t);
    }
  }
  return p;
}

inline Taxel single_taxel(double radius = 0.5, double stiffness = 1000.0,
                          double max_deflection = 1.0) {
  Taxel t;
  t.radius = radius;
  t.stiffness = stiffness;
  t.max_deflection = max_deflection;
  return t;
}

inline SphereUnionObject fixed_object(const std::string& id, std::vector<Sphere> spheres,
                                      const Pose& pose = Pose()) {
  return SphereUnionObject{id, std::move(spheres), FixedMode{pose}};
}

inline Vec3 random_unit(std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  Vec3 v;
  do {
    v = Vec3(n(rng), n(rng), n(rng));
  } while (v.norm() < 1e-6);
  return v.normalized();
}

inline Vec3 random_vec(std::mt19937_64& rng, double lo, double hi) {
  std::uniform_real_distribution<double> u(lo, hi);
  return Vec3(u(rng), u(rng), u(rng));
}

inline Quaternion random_rotation(std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  Quaternion q(n(rng), n(rng), n(rng), n(rng));
  q.normalize();
  return q;
}

}  // namespace taxelsim::testing
