#include "taxelsim/core.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

namespace taxelsim {

bool is_finite(const Vec3& v) {
  return std::isfinite(v.x()) && std::isfinite(v.y()) && std::isfinite(v.z());
}

Pose::Pose() : rotation_(Quaternion::Identity()), translation_(Vec3::Zero()) {}

Pose::Pose(const Quaternion& rotation, const Vec3& translation)
    : rotation_(rotation), translation_(translation) {
  const auto& c = rotation_.coeffs();
  if (!std::isfinite(c.x()) || !std::isfinite(c.y()) || !std::isfinite(c.z()) ||
      !std::isfinite(c.w())) {
    throw std::invalid_argument("pose rotation has non-finite components");
  }
  if (!is_finite(translation_)) {
    throw std::invalid_argument("pose translation has non-finite components");
  }
  const double norm = rotation_.norm();
  if (norm < 1e-12) {
    throw std::invalid_argument("pose rotation quaternion has zero norm");
  }
  // Leave already-unit quaternions untouched so renormalization is idempotent.
  if (std::abs(norm - 1.0) > 1e-12) {
    rotation_.coeffs() /= norm;
  }
}

Pose Pose::from_translation(const Vec3& translation) {
  return Pose(Quaternion::Identity(), translation);
}

Pose Pose::from_axis_angle(const Vec3& axis, double angle, const Vec3& translation) {
  return Pose(Quaternion(Eigen::AngleAxisd(angle, axis.normalized())), translation);
}

Pose Pose::operator*(const Pose& rhs) const {
  Pose out;
  out.rotation_ = rotation_ * rhs.rotation_;
  // Composition drifts off unit norm by a few ulps; keep the invariant tight.
  const double norm = out.rotation_.norm();
  if (std::abs(norm - 1.0) > 1e-12) out.rotation_.coeffs() /= norm;
  out.translation_ = rotation_ * rhs.translation_ + translation_;
  return out;
}

InvalidWorld::InvalidWorld(std::vector<Violation> violations)
    : std::runtime_error([&] {
        std::ostringstream os;
        os << "invalid world (" << violations.size() << " violation"
           << (violations.size() == 1 ? "" : "s") << ")";
        for (const auto& v : violations) os << "\n  " << v.path << ": " << v.message;
        return os.str();
      }()),
      violations_(std::move(violations)) {}

namespace {

class Checker {
 public:
  void add(std::string path, std::string message) {
    out.push_back({std::move(path), std::move(message)});
  }

  void positive(const std::string& path, double v) {
    if (!std::isfinite(v) || !(v > 0.0)) add(path, "must be finite and > 0");
  }

  void nonnegative(const std::string& path, double v) {
    if (!std::isfinite(v) || !(v >= 0.0)) add(path, "must be finite and >= 0");
  }

  void finite(const std::string& path, const Vec3& v) {
    if (!is_finite(v)) add(path, "components must be finite");
  }

  void unit(const std::string& path, const Vec3& v) {
    if (!is_finite(v)) {
      add(path, "components must be finite");
    } else if (std::abs(v.norm() - 1.0) > 1e-9) {
      add(path, "must be a unit vector");
    }
  }

  std::vector<Violation> out;
};

std::string idx(const std::string& base, std::size_t i) {
  return base + "[" + std::to_string(i) + "]";
}

void check_taxel(Checker& c, const std::string& p, const Taxel& t) {
  c.finite(p + ".rest_center", t.rest_center);
  c.unit(p + ".normal", t.normal);
  c.positive(p + ".radius", t.radius);
  c.positive(p + ".stiffness", t.stiffness);
  c.nonnegative(p + ".damping", t.damping);
  c.positive(p + ".max_deflection", t.max_deflection);
}

void check_robot(Checker& c, const std::string& p, const Robot& robot) {
  if (robot.id.empty()) c.add(p + ".id", "must be nonempty");

  std::set<std::string> links;
  for (std::size_t i = 0; i < robot.links.size(); ++i) {
    const auto& l = robot.links[i];
    if (l.empty()) c.add(idx(p + ".links", i), "must be nonempty");
    if (!links.insert(l).second) c.add(idx(p + ".links", i), "duplicate link id '" + l + "'");
  }
  if (robot.links.empty()) c.add(p + ".links", "robot needs at least a base link");

  std::set<std::string> joint_ids;
  std::map<std::string, std::string> parent_of;  // child link -> parent link
  for (std::size_t j = 0; j < robot.joints.size(); ++j) {
    const auto& joint = robot.joints[j];
    const std::string jp = idx(p + ".joints", j);
    if (joint.id.empty()) c.add(jp + ".id", "must be nonempty");
    if (!joint_ids.insert(joint.id).second) c.add(jp + ".id", "duplicate joint id '" + joint.id + "'");
    c.unit(jp + ".axis", joint.axis);
    if (!links.contains(joint.parent_link)) {
      c.add(jp + ".parent", "unknown link '" + joint.parent_link + "'");
    }
    if (!links.contains(joint.child_link)) {
      c.add(jp + ".child", "unknown link '" + joint.child_link + "'");
    }
    if (joint.parent_link == joint.child_link) {
      c.add(jp + ".child", "parent and child link must differ");
    } else if (!parent_of.emplace(joint.child_link, joint.parent_link).second) {
      c.add(jp + ".child", "link '" + joint.child_link + "' already has a parent joint");
    }

    const std::string tp = p + ".trajectories." + joint.id;
    auto it = robot.joint_trajectories.find(joint.id);
    if (it == robot.joint_trajectories.end() || it->second.empty()) {
      c.add(tp, "every joint needs a nonempty trajectory");
    } else {
      const auto& w = it->second;
      for (std::size_t k = 0; k < w.size(); ++k) {
        if (!std::isfinite(w[k].time) || w[k].time < 0.0) {
          c.add(idx(tp, k) + ".time", "must be finite and >= 0");
        }
        if (!std::isfinite(w[k].value)) c.add(idx(tp, k) + ".value", "must be finite");
        if (k > 0 && !(w[k].time > w[k - 1].time)) {
          c.add(idx(tp, k) + ".time", "waypoint times must be strictly increasing");
        }
      }
    }
  }
  for (const auto& [jid, _] : robot.joint_trajectories) {
    if (!joint_ids.contains(jid)) c.add(p + ".trajectories." + jid, "no joint with this id");
  }

  // Tree check: exactly one root, every link reachable from it.
  std::vector<std::string> roots;
  for (const auto& l : robot.links) {
    if (!parent_of.contains(l)) roots.push_back(l);
  }
  if (!robot.links.empty()) {
    if (roots.size() != 1) {
      c.add(p + ".joints", "joint graph must form a tree with exactly one base link (found " +
                               std::to_string(roots.size()) + " roots)");
    } else {
      for (const auto& l : robot.links) {
        std::string cur = l;
        std::size_t hops = 0;
        while (parent_of.contains(cur) && hops <= robot.links.size()) {
          cur = parent_of.at(cur);
          ++hops;
        }
        if (cur != roots.front()) {
          c.add(p + ".joints", "link '" + l + "' is not connected to the base link");
          break;
        }
      }
    }
  }
}

}  // namespace

std::vector<Violation> validate_world(const World& world) {
  Checker c;
  c.finite("world.gravity", world.gravity);
  c.positive("world.dt", world.dt);
  c.nonnegative("world.duration", world.duration);

  std::set<std::string> robot_ids;
  for (std::size_t r = 0; r < world.robots.size(); ++r) {
    const std::string p = idx("robots", r);
    if (!robot_ids.insert(world.robots[r].id).second) {
      c.add(p + ".id", "duplicate robot id '" + world.robots[r].id + "'");
    }
    check_robot(c, p, world.robots[r]);
  }

  std::set<std::string> patch_ids;
  for (std::size_t pi = 0; pi < world.patches.size(); ++pi) {
    const auto& patch = world.patches[pi];
    const std::string p = idx("patches", pi);
    if (patch.id.empty()) c.add(p + ".id", "must be nonempty");
    if (!patch_ids.insert(patch.id).second) c.add(p + ".id", "duplicate patch id '" + patch.id + "'");

    if (const auto* la = std::get_if<LinkAttached>(&patch.attachment)) {
      const Robot* robot = find_robot(world, la->robot);
      if (robot == nullptr) {
        c.add(p + ".attachment.robot", "unknown robot '" + la->robot + "'");
      } else if (std::find(robot->links.begin(), robot->links.end(), la->link) == robot->links.end()) {
        c.add(p + ".attachment.link", "robot '" + la->robot + "' has no link '" + la->link + "'");
      }
    }

    for (std::size_t t = 0; t < patch.taxels.size(); ++t) {
      check_taxel(c, idx(p + ".taxels", t), patch.taxels[t]);
    }

    if (patch.grid_dims) {
      const auto dims = *patch.grid_dims;
      if (dims.rows == 0 || dims.cols == 0) c.add(p + ".grid_dims", "rows and cols must be > 0");
      std::set<GridIndex> seen;
      std::optional<GridIndex> prev;
      for (std::size_t t = 0; t < patch.taxels.size(); ++t) {
        const std::string tp = idx(p + ".taxels", t) + ".grid_index";
        const auto& gi = patch.taxels[t].grid_index;
        if (!gi) {
          c.add(tp, "grid patch taxels need a grid index");
          continue;
        }
        if (gi->row >= dims.rows || gi->col >= dims.cols) c.add(tp, "outside grid dimensions");
        if (!seen.insert(*gi).second) {
          c.add(tp, "duplicate grid index");
        } else if (prev && *gi < *prev) {
          c.add(tp, "grid patch taxels must be in row-major order");
        }
        prev = *gi;
      }
    }
  }

  std::set<std::string> object_ids;
  for (std::size_t oi = 0; oi < world.objects.size(); ++oi) {
    const auto& obj = world.objects[oi];
    const std::string p = idx("objects", oi);
    if (obj.id.empty()) c.add(p + ".id", "must be nonempty");
    if (!object_ids.insert(obj.id).second) c.add(p + ".id", "duplicate object id '" + obj.id + "'");
    if (obj.spheres.empty()) c.add(p + ".spheres", "object needs at least one sphere");
    for (std::size_t s = 0; s < obj.spheres.size(); ++s) {
      c.finite(idx(p + ".spheres", s) + ".center", obj.spheres[s].center);
      c.positive(idx(p + ".spheres", s) + ".radius", obj.spheres[s].radius);
    }
    if (const auto* scripted = std::get_if<ScriptedMode>(&obj.mode)) {
      const auto& w = scripted->trajectory.waypoints;
      if (w.empty()) c.add(p + ".waypoints", "trajectory needs at least one waypoint");
      for (std::size_t k = 0; k < w.size(); ++k) {
        if (!std::isfinite(w[k].time) || w[k].time < 0.0) {
          c.add(idx(p + ".waypoints", k) + ".time", "must be finite and >= 0");
        }
        if (k > 0 && !(w[k].time > w[k - 1].time)) {
          c.add(idx(p + ".waypoints", k) + ".time", "waypoint times must be strictly increasing");
        }
      }
    } else if (const auto* settle = std::get_if<SettleMode>(&obj.mode)) {
      if (!settle->mass) {
        c.add(p + ".mass", "settle objects require a mass");
      } else {
        c.positive(p + ".mass", *settle->mass);
      }
    }
  }

  return std::move(c.out);
}

void require_valid(const World& world) {
  auto violations = validate_world(world);
  if (!violations.empty()) throw InvalidWorld(std::move(violations));
}

std::vector<TaxelRef> taxel_catalog(const World& world) {
  std::vector<TaxelRef> out;
  for (const auto& patch : world.patches) {
    for (std::size_t i = 0; i < patch.taxels.size(); ++i) out.push_back({patch.id, i});
  }
  return out;
}

std::size_t step_count(double duration, double dt) {
  const double ratio = duration / dt;
  double k = std::floor(ratio);
  // duration = n*dt rarely divides exactly in binary; absorb the rounding.
  if (ratio - k > 1.0 - 1e-9) k += 1.0;
  return static_cast<std::size_t>(k) + 1;
}

const SkinPatch* find_patch(const World& world, const std::string& id) {
  for (const auto& p : world.patches) {
    if (p.id == id) return &p;
  }
  return nullptr;
}

const Robot* find_robot(const World& world, const std::string& id) {
  for (const auto& r : world.robots) {
    if (r.id == id) return &r;
  }
  return nullptr;
}

}  // namespace taxelsim
