#include "taxelsim/kinematics.hpp"

#include <algorithm>
#include <cmath>
#include <deque>

namespace taxelsim {

namespace {

// Index of the last waypoint with time <= t, given t strictly inside the range.
template <typename W>
std::size_t segment_start(std::span<const W> w, double t) {
  auto it = std::upper_bound(w.begin(), w.end(), t,
                             [](double value, const W& wp) { return value < wp.time; });
  return static_cast<std::size_t>(it - w.begin()) - 1;
}

}  // namespace

Pose interpolate_pose(const Trajectory& trajectory, double t) {
  std::span<const Waypoint> w(trajectory.waypoints);
  if (w.empty()) throw std::invalid_argument("interpolate_pose: empty trajectory");
  if (t <= w.front().time) return w.front().pose;
  if (t >= w.back().time) return w.back().pose;

  const std::size_t i = segment_start(w, t);
  const Waypoint& a = w[i];
  const Waypoint& b = w[i + 1];
  if (t == a.time) return a.pose;
  const double s = (t - a.time) / (b.time - a.time);
  // Eigen's slerp negates one endpoint when dot < 0, i.e. takes the short arc.
  const Quaternion q = a.pose.rotation().slerp(s, b.pose.rotation());
  const Vec3 p = a.pose.translation() + s * (b.pose.translation() - a.pose.translation());
  return Pose(q, p);
}

double interpolate_scalar(std::span<const ScalarWaypoint> w, double t) {
  if (w.empty()) throw std::invalid_argument("interpolate_scalar: no waypoints");
  if (t <= w.front().time) return w.front().value;
  if (t >= w.back().time) return w.back().value;

  const std::size_t i = segment_start(w, t);
  const auto& a = w[i];
  const auto& b = w[i + 1];
  if (t == a.time) return a.value;
  const double s = (t - a.time) / (b.time - a.time);
  return a.value + s * (b.value - a.value);
}

Pose joint_transform(const Joint& joint, double q) {
  if (q == 0.0) return joint.origin;
  switch (joint.kind) {
    case JointKind::Revolute:
      return joint.origin * Pose(Quaternion(Eigen::AngleAxisd(q, joint.axis)), Vec3::Zero());
    case JointKind::Prismatic:
      return joint.origin * Pose::from_translation(q * joint.axis);
  }
  return joint.origin;
}

std::map<std::string, Pose> forward_kinematics(const Robot& robot, double t) {
  std::map<std::string, Pose> poses;
  if (robot.links.empty()) return poses;

  std::map<std::string, std::vector<const Joint*>> children;
  std::map<std::string, bool> is_child;
  for (const auto& j : robot.joints) {
    children[j.parent_link].push_back(&j);
    is_child[j.child_link] = true;
  }
  std::string base = robot.links.front();
  for (const auto& l : robot.links) {
    if (!is_child.contains(l)) {
      base = l;
      break;
    }
  }

  poses.emplace(base, robot.base_pose);
  std::deque<std::string> queue{base};
  while (!queue.empty()) {
    const std::string link = queue.front();
    queue.pop_front();
    auto it = children.find(link);
    if (it == children.end()) continue;
    const Pose& parent = poses.at(link);
    for (const Joint* j : it->second) {
      double q = 0.0;
      if (auto traj = robot.joint_trajectories.find(j->id); traj != robot.joint_trajectories.end()) {
        q = interpolate_scalar(traj->second, t);
      }
      poses.insert_or_assign(j->child_link, parent * joint_transform(*j, q));
      queue.push_back(j->child_link);
    }
  }
  return poses;
}

Pose patch_pose(const World& world, const SkinPatch& patch, double t) {
  if (const auto* fixed = std::get_if<WorldFixed>(&patch.attachment)) return fixed->pose;
  const auto& la = std::get<LinkAttached>(patch.attachment);
  const Robot* robot = find_robot(world, la.robot);
  if (robot == nullptr) throw std::invalid_argument("patch '" + patch.id + "' references unknown robot");
  const auto links = forward_kinematics(*robot, t);
  auto it = links.find(la.link);
  if (it == links.end()) throw std::invalid_argument("patch '" + patch.id + "' references unknown link");
  return it->second * la.relative;
}

void world_taxel_frames(const World& world, double t, std::vector<TaxelWorldFrame>& out) {
  std::size_t total = 0;
  for (const auto& p : world.patches) total += p.taxels.size();
  out.resize(total);

  std::map<std::string, std::map<std::string, Pose>> fk_cache;
  std::size_t k = 0;
  for (const auto& patch : world.patches) {
    Pose pose;
    if (const auto* fixed = std::get_if<WorldFixed>(&patch.attachment)) {
      pose = fixed->pose;
    } else {
      const auto& la = std::get<LinkAttached>(patch.attachment);
      auto cached = fk_cache.find(la.robot);
      if (cached == fk_cache.end()) {
        const Robot* robot = find_robot(world, la.robot);
        if (robot == nullptr) {
          throw std::invalid_argument("patch '" + patch.id + "' references unknown robot");
        }
        cached = fk_cache.emplace(la.robot, forward_kinematics(*robot, t)).first;
      }
      pose = cached->second.at(la.link) * la.relative;
    }

    const Eigen::Matrix3d rot = pose.rotation().toRotationMatrix();
    const Vec3& trans = pose.translation();
    for (const auto& taxel : patch.taxels) {
      auto& f = out[k++];
      f.rest_center = rot * taxel.rest_center + trans;
      f.normal = (rot * taxel.normal).normalized();
    }
  }
}

std::vector<TaxelWorldFrame> world_taxel_frames(const World& world, double t) {
  std::vector<TaxelWorldFrame> out;
  world_taxel_frames(world, t, out);
  return out;
}

Vec3 gravity_direction(const Vec3& gravity) {
  const double n = gravity.norm();
  if (!(n > 0.0) || !std::isfinite(n)) {
    throw SimulationError(SimulationError::Kind::ZeroGravity,
                          "gravity is zero: settle objects have no direction to settle in");
  }
  return gravity / n;
}

Pose object_pose(const SphereUnionObject& object, double t, double settle_offset,
                 const Vec3& gravity) {
  return std::visit(
      [&](const auto& mode) -> Pose {
        using M = std::decay_t<decltype(mode)>;
        if constexpr (std::is_same_v<M, FixedMode>) {
          return mode.pose;
        } else if constexpr (std::is_same_v<M, ScriptedMode>) {
          return interpolate_pose(mode.trajectory, t);
        } else {
          const Vec3 g = gravity_direction(gravity);
          return Pose::from_translation(settle_offset * g) * mode.initial;
        }
      },
      object.mode);
}

std::vector<WorldSphere> object_sphere_positions(
    const World& world, double t, const std::map<std::string, double>& settle_offsets) {
  std::vector<WorldSphere> out;
  for (std::size_t oi = 0; oi < world.objects.size(); ++oi) {
    const auto& obj = world.objects[oi];
    double offset = 0.0;
    if (auto it = settle_offsets.find(obj.id); it != settle_offsets.end()) offset = it->second;
    const Pose pose = object_pose(obj, t, offset, world.gravity);
    for (const auto& s : obj.spheres) {
      out.push_back({pose.transform_point(s.center), s.radius, oi});
    }
  }
  return out;
}

}  // namespace taxelsim
