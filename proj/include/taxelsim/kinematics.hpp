#pragma once

#include <map>
#include <span>
#include <string>
#include <vector>

#include "taxelsim/core.hpp"

namespace taxelsim {

struct TaxelWorldFrame {
  Vec3 rest_center = Vec3::Zero();
  Vec3 normal = Vec3::UnitZ();
};

/// A sphere of some object, placed in the world frame. object indexes World::objects.
struct WorldSphere {
  Vec3 center = Vec3::Zero();
  double radius = 0.0;
  std::size_t object = 0;
};

/// Clamped piecewise-linear translation with shortest-arc slerp rotation.
Pose interpolate_pose(const Trajectory& trajectory, double t);

/// Clamped piecewise-linear interpolation.
double interpolate_scalar(std::span<const ScalarWaypoint> waypoints, double t);

Pose joint_transform(const Joint& joint, double q);

/// Link poses in the world frame at time t.
std::map<std::string, Pose> forward_kinematics(const Robot& robot, double t);

/// World pose of a patch substrate at time t.
Pose patch_pose(const World& world, const SkinPatch& patch, double t);

/// Rest centers and normals of every taxel, in catalog order.
std::vector<TaxelWorldFrame> world_taxel_frames(const World& world, double t);
void world_taxel_frames(const World& world, double t, std::vector<TaxelWorldFrame>& out);

/// Unit vector along gravity. Throws SimulationError(ZeroGravity) for g = 0.
Vec3 gravity_direction(const Vec3& gravity);

/// Pose of one object at time t; settle_offset is only read for Settle mode.
Pose object_pose(const SphereUnionObject& object, double t, double settle_offset,
                 const Vec3& gravity);

/// World-frame spheres of all objects. Settle objects need an entry in
/// settle_offsets (missing entries count as 0).
std::vector<WorldSphere> object_sphere_positions(
    const World& world, double t, const std::map<std::string, double>& settle_offsets);

}  // namespace taxelsim
