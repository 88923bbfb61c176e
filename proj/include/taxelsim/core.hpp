#pragma once

#include <compare>
#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace taxelsim {

using Vec3 = Eigen::Vector3d;
using Quaternion = Eigen::Quaterniond;

bool is_finite(const Vec3& v);

/// Rigid transform. The rotation is kept unit-norm: construction normalizes
/// any finite, nonzero quaternion and rejects everything else.
class Pose {
 public:
  Pose();
  Pose(const Quaternion& rotation, const Vec3& translation);

  static Pose identity() { return Pose(); }
  static Pose from_translation(const Vec3& translation);
  static Pose from_axis_angle(const Vec3& axis, double angle,
                              const Vec3& translation = Vec3::Zero());

  const Quaternion& rotation() const { return rotation_; }
  const Vec3& translation() const { return translation_; }

  /// this ∘ rhs: maps rhs-frame points into the frame this pose is expressed in.
  Pose operator*(const Pose& rhs) const;

  Vec3 transform_point(const Vec3& p) const { return rotation_ * p + translation_; }
  Vec3 rotate(const Vec3& v) const { return rotation_ * v; }

  friend bool operator==(const Pose& a, const Pose& b) {
    return a.rotation_.coeffs() == b.rotation_.coeffs() &&
           a.translation_ == b.translation_;
  }

 private:
  Quaternion rotation_;
  Vec3 translation_;
};

struct GridIndex {
  std::size_t row = 0;
  std::size_t col = 0;
  auto operator<=>(const GridIndex&) const = default;
};

struct GridDims {
  std::size_t rows = 0;
  std::size_t cols = 0;
  bool operator==(const GridDims&) const = default;
};

/// One sphere-spring-damper sensing element, expressed in its patch frame.
/// The sphere only moves along -normal; max_deflection is where it bottoms out.
struct Taxel {
  Vec3 rest_center = Vec3::Zero();
  Vec3 normal = Vec3::UnitZ();
  double radius = 0.0;
  double stiffness = 0.0;
  double damping = 0.0;
  double max_deflection = 0.0;
  std::optional<GridIndex> grid_index;

  bool operator==(const Taxel&) const = default;
};

struct WorldFixed {
  Pose pose;
  bool operator==(const WorldFixed&) const = default;
};

struct LinkAttached {
  std::string robot;
  std::string link;
  Pose relative;
  bool operator==(const LinkAttached&) const = default;
};

using Attachment = std::variant<WorldFixed, LinkAttached>;

struct SkinPatch {
  std::string id;
  Attachment attachment = WorldFixed{};
  std::vector<Taxel> taxels;
  std::optional<GridDims> grid_dims;

  bool operator==(const SkinPatch&) const = default;
};

struct Sphere {
  Vec3 center = Vec3::Zero();
  double radius = 0.0;
  bool operator==(const Sphere&) const = default;
};

struct Waypoint {
  double time = 0.0;
  Pose pose;
  bool operator==(const Waypoint&) const = default;
};

struct Trajectory {
  std::vector<Waypoint> waypoints;
  bool operator==(const Trajectory&) const = default;
};

struct FixedMode {
  Pose pose;
  bool operator==(const FixedMode&) const = default;
};

struct ScriptedMode {
  Trajectory trajectory;
  bool operator==(const ScriptedMode&) const = default;
};

/// Object dropped along gravity until the skin carries its weight.
struct SettleMode {
  Pose initial;
  std::optional<double> mass;
  bool operator==(const SettleMode&) const = default;
};

using ObjectMode = std::variant<FixedMode, ScriptedMode, SettleMode>;

struct SphereUnionObject {
  std::string id;
  std::vector<Sphere> spheres;
  ObjectMode mode = FixedMode{};

  bool operator==(const SphereUnionObject&) const = default;
};

enum class JointKind { Revolute, Prismatic };

struct Joint {
  std::string id;
  JointKind kind = JointKind::Revolute;
  std::string parent_link;
  std::string child_link;
  Pose origin;
  Vec3 axis = Vec3::UnitZ();

  bool operator==(const Joint&) const = default;
};

struct ScalarWaypoint {
  double time = 0.0;
  double value = 0.0;
  bool operator==(const ScalarWaypoint&) const = default;
};

struct Robot {
  std::string id;
  Pose base_pose;
  std::vector<std::string> links;
  std::vector<Joint> joints;
  std::map<std::string, std::vector<ScalarWaypoint>> joint_trajectories;

  bool operator==(const Robot&) const = default;
};

struct World {
  Vec3 gravity = Vec3(0.0, 0.0, -9.81);
  double dt = 1e-3;
  double duration = 0.0;
  std::vector<SkinPatch> patches;
  std::vector<SphereUnionObject> objects;
  std::vector<Robot> robots;

  bool operator==(const World&) const = default;
};

// ---------------------------------------------------------------------------
// Traces and frames

struct TaxelRef {
  std::string patch_id;
  std::size_t index = 0;
  bool operator==(const TaxelRef&) const = default;
};

enum class Quantity : std::uint32_t { Displacement = 0, Force = 1 };

struct SaturationFlag {
  std::size_t step = 0;
  std::size_t taxel = 0;
  auto operator<=>(const SaturationFlag&) const = default;
};

/// Provenance of noise applied to a trace.
struct NoiseRecord {
  std::string algorithm;
  std::uint64_t seed = 0;
  double sigma = 0.0;
  bool operator==(const NoiseRecord&) const = default;
};

/// Time-indexed per-taxel signal matrix, stored row-major (one row per step).
struct Trace {
  std::vector<TaxelRef> catalog;
  double dt = 0.0;
  std::vector<double> times;
  std::vector<double> values;
  std::vector<SaturationFlag> saturated;  // sorted, unique
  Quantity quantity = Quantity::Displacement;
  std::optional<NoiseRecord> noise;

  std::size_t steps() const { return times.size(); }
  std::size_t taxels() const { return catalog.size(); }
  double at(std::size_t step, std::size_t taxel) const {
    return values[step * catalog.size() + taxel];
  }
  std::span<const double> row(std::size_t step) const {
    return {values.data() + step * catalog.size(), catalog.size()};
  }
  std::span<double> row(std::size_t step) {
    return {values.data() + step * catalog.size(), catalog.size()};
  }

  bool operator==(const Trace&) const = default;
};

struct SignalFrame {
  std::string patch_id;
  std::vector<double> values;
  Quantity quantity = Quantity::Displacement;
  bool operator==(const SignalFrame&) const = default;
};

// ---------------------------------------------------------------------------
// Validation

struct Violation {
  std::string path;
  std::string message;
  bool operator==(const Violation&) const = default;
};

std::vector<Violation> validate_world(const World& world);

class InvalidWorld : public std::runtime_error {
 public:
  explicit InvalidWorld(std::vector<Violation> violations);
  const std::vector<Violation>& violations() const { return violations_; }

 private:
  std::vector<Violation> violations_;
};

/// Failure of the stepping loop. step is the time index it happened at, when known.
class SimulationError : public std::runtime_error {
 public:
  enum class Kind { Unsupported, ZeroGravity };

  SimulationError(Kind kind, const std::string& what, std::optional<std::size_t> step = {})
      : std::runtime_error(what), kind_(kind), step_(step) {}

  Kind kind() const { return kind_; }
  std::optional<std::size_t> step() const { return step_; }

 private:
  Kind kind_;
  std::optional<std::size_t> step_;
};

/// Throws InvalidWorld when validate_world reports anything.
void require_valid(const World& world);

/// Canonical signal ordering: patches in declaration order, taxels in patch order.
std::vector<TaxelRef> taxel_catalog(const World& world);

/// Number of trace rows: floor(duration / dt) + 1, both endpoints inclusive.
std::size_t step_count(double duration, double dt);

const SkinPatch* find_patch(const World& world, const std::string& id);
const Robot* find_robot(const World& world, const std::string& id);

}  // namespace taxelsim
