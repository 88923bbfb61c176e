#include <cmath>
#include <numbers>
#include <random>

#include "doctest.h"

#include "fixtures.hpp"
#include "taxelsim/kinematics.hpp"

using namespace taxelsim;
using namespace taxelsim::testing;
using std::numbers::pi;

namespace {

bool near(const Vec3& a, const Vec3& b, double tol = 1e-12) { return (a - b).norm() <= tol; }

Pose rot_z(double angle) { return Pose::from_axis_angle(Vec3::UnitZ(), angle); }

// q^s computed through axis-angle, independent of any slerp routine.
Quaternion quat_power(const Quaternion& q, double s) {
  const Eigen::AngleAxisd aa(q);
  return Quaternion(Eigen::AngleAxisd(aa.angle() * s, aa.axis()));
}

}  // namespace

TEST_CASE("interpolate_pose clamps outside the waypoint range") {
  const Pose p = Pose::from_translation(Vec3(1, 2, 3));
  const Trajectory single{{{0.0, p}}};
  CHECK(interpolate_pose(single, 5.0) == p);
  CHECK(interpolate_pose(single, -1.0) == p);
}

TEST_CASE("interpolate_pose linear translation midpoint") {
  const Trajectory traj{{{0.0, Pose()}, {2.0, Pose::from_translation(Vec3(0, 0, -2))}}};
  CHECK(near(interpolate_pose(traj, 1.0).translation(), Vec3(0, 0, -1)));
}

TEST_CASE("interpolate_pose slerp midpoint matches q0 (q0^-1 q1)^1/2") {
  const Pose q0 = Pose();
  const Pose q1 = rot_z(pi / 2);
  const Trajectory traj{{{0.0, q0}, {2.0, q1}}};
  const Pose mid = interpolate_pose(traj, 1.0);

  const Quaternion expected =
      q0.rotation() * quat_power(q0.rotation().inverse() * q1.rotation(), 0.5);
  CHECK(std::abs(std::abs(mid.rotation().dot(expected)) - 1.0) < 1e-12);
  const double h = std::sqrt(2.0) / 2.0;
  CHECK(near(mid.rotate(Vec3(1, 0, 0)), Vec3(h, h, 0)));

  SUBCASE("antipodal endpoint still takes the short arc") {
    const Pose neg(Quaternion(-q1.rotation().coeffs()), Vec3::Zero());
    const Trajectory flipped{{{0.0, q0}, {2.0, neg}}};
    CHECK(near(interpolate_pose(flipped, 1.0).rotate(Vec3(1, 0, 0)), Vec3(h, h, 0)));
  }
}

TEST_CASE("interpolation is exact at waypoints") {
  std::mt19937_64 rng(7);
  Trajectory traj;
  for (int i = 0; i < 6; ++i) {
    traj.waypoints.push_back({0.3 * i, Pose(random_rotation(rng), random_vec(rng, -1, 1))});
  }
  for (const auto& w : traj.waypoints) CHECK(interpolate_pose(traj, w.time) == w.pose);

  const std::vector<ScalarWaypoint> s{{0, 0}, {1, 1}, {3, 5}};
  for (const auto& w : s) CHECK(interpolate_scalar(s, w.time) == w.value);
}

TEST_CASE("interpolate_scalar examples") {
  const std::vector<ScalarWaypoint> a{{0, 0}, {1, 2}};
  CHECK(interpolate_scalar(a, 0.5) == doctest::Approx(1.0).epsilon(1e-15));
  const std::vector<ScalarWaypoint> b{{0, 3}};
  CHECK(interpolate_scalar(b, 10.0) == 3.0);
  const std::vector<ScalarWaypoint> c{{0, 0}, {1, 1}, {3, 5}};
  CHECK(interpolate_scalar(c, 2.0) == doctest::Approx(3.0).epsilon(1e-15));
  CHECK(interpolate_scalar(c, -4.0) == 0.0);
  CHECK(interpolate_scalar(c, 40.0) == 5.0);
}

TEST_CASE("joint_transform") {
  Joint rev;
  rev.kind = JointKind::Revolute;
  rev.axis = Vec3::UnitZ();
  CHECK(near(joint_transform(rev, pi / 2).transform_point(Vec3(1, 0, 0)), Vec3(0, 1, 0)));

  Joint pri;
  pri.kind = JointKind::Prismatic;
  pri.axis = Vec3::UnitX();
  CHECK(near(joint_transform(pri, 0.3).transform_point(Vec3::Zero()), Vec3(0.3, 0, 0)));

  rev.origin = Pose(Quaternion(Eigen::AngleAxisd(0.4, Vec3::UnitY())), Vec3(1, 2, 3));
  CHECK(joint_transform(rev, 0.0) == rev.origin);
  pri.origin = rev.origin;
  CHECK(joint_transform(pri, 0.0) == pri.origin);
}

namespace {

Robot two_link_arm() {
  Robot r;
  r.id = "arm";
  r.links = {"base", "l1", "l2"};
  Joint j1;
  j1.id = "j1";
  j1.kind = JointKind::Revolute;
  j1.parent_link = "base";
  j1.child_link = "l1";
  j1.axis = Vec3::UnitZ();
  Joint j2;
  j2.id = "j2";
  j2.kind = JointKind::Prismatic;
  j2.parent_link = "l1";
  j2.child_link = "l2";
  j2.axis = Vec3::UnitX();
  r.joints = {j1, j2};
  r.joint_trajectories["j1"] = {{0.0, pi / 2}};
  r.joint_trajectories["j2"] = {{0.0, 1.0}};
  return r;
}

}  // namespace

TEST_CASE("forward_kinematics") {
  SUBCASE("zero-joint robot") {
    Robot r;
    r.id = "r";
    r.links = {"base"};
    r.base_pose = Pose::from_translation(Vec3(1, 1, 1));
    const auto fk = forward_kinematics(r, 3.0);
    REQUIRE(fk.size() == 1);
    CHECK(fk.at("base") == r.base_pose);
  }
  SUBCASE("single prismatic joint following q(t) = -t") {
    Robot r;
    r.id = "r";
    r.links = {"base", "slider"};
    Joint j;
    j.id = "z";
    j.kind = JointKind::Prismatic;
    j.parent_link = "base";
    j.child_link = "slider";
    j.axis = Vec3::UnitZ();
    r.joints = {j};
    r.joint_trajectories["z"] = {{0.0, 0.0}, {1.0, -1.0}};
    CHECK(near(forward_kinematics(r, 0.5).at("slider").translation(), Vec3(0, 0, -0.5)));
  }
  SUBCASE("revolute then prismatic chain") {
    // Rz(pi/2) then translate x by 1 in the rotated frame lands on +y.
    const auto fk = forward_kinematics(two_link_arm(), 0.0);
    CHECK(near(fk.at("l2").translation(), Vec3(0, 1, 0)));
  }
  SUBCASE("constant trajectories are time invariant") {
    const Robot r = two_link_arm();
    const auto a = forward_kinematics(r, 0.0);
    const auto b = forward_kinematics(r, 17.5);
    CHECK(a == b);
  }
}

TEST_CASE("world_taxel_frames") {
  World w;
  w.patches.push_back(grid_patch("p", 2, 3, 0.01, 0.004));

  SUBCASE("world-fixed identity patch keeps patch-local values") {
    const auto frames = world_taxel_frames(w, 0.0);
    REQUIRE(frames.size() == 6);
    for (std::size_t i = 0; i < 6; ++i) {
      CHECK(frames[i].rest_center == w.patches[0].taxels[i].rest_center);
      CHECK(frames[i].normal == w.patches[0].taxels[i].normal);
    }
  }
  SUBCASE("patch on a translated link") {
    Robot r;
    r.id = "r";
    r.links = {"base", "lift"};
    Joint j;
    j.id = "z";
    j.kind = JointKind::Prismatic;
    j.parent_link = "base";
    j.child_link = "lift";
    j.axis = Vec3::UnitZ();
    r.joints = {j};
    r.joint_trajectories["z"] = {{0.0, 1.0}};
    w.robots.push_back(r);
    w.patches[0].attachment = LinkAttached{"r", "lift", Pose()};
    const auto frames = world_taxel_frames(w, 0.0);
    for (std::size_t i = 0; i < 6; ++i) {
      CHECK(near(frames[i].rest_center, w.patches[0].taxels[i].rest_center + Vec3(0, 0, 1)));
      CHECK(near(frames[i].normal, Vec3::UnitZ()));
    }
  }
  SUBCASE("patch flipped about x") {
    w.patches[0].attachment = WorldFixed{Pose::from_axis_angle(Vec3::UnitX(), pi)};
    const auto frames = world_taxel_frames(w, 0.0);
    for (const auto& f : frames) {
      CHECK(near(f.normal, Vec3(0, 0, -1)));
      CHECK(std::abs(f.normal.norm() - 1.0) < 1e-9);
    }
  }
}

TEST_CASE("object_sphere_positions") {
  World w;
  w.gravity = Vec3(0, 0, -9.81);
  w.objects.push_back(fixed_object("f", {{Vec3(0.1, 0, 0), 0.02}}, Pose::from_translation(Vec3(0, 0, 1))));
  w.objects.push_back({"s", {{Vec3(0, 0, 0), 0.01}, {Vec3(0.05, 0, 0), 0.02}}, SettleMode{Pose(), 1.0}});
  const Trajectory traj{{{0.0, Pose()}, {1.0, Pose(rot_z(pi / 2).rotation(), Vec3(2, 0, 0))}}};
  w.objects.push_back({"m", {{Vec3(1, 0, 0), 0.03}}, ScriptedMode{traj}});

  const auto at0 = object_sphere_positions(w, 0.0, {{"s", 0.01}});
  const auto at1 = object_sphere_positions(w, 0.7, {{"s", 0.01}});
  REQUIRE(at0.size() == 4);

  CHECK(at0[0].center == at1[0].center);
  CHECK(near(at0[0].center, Vec3(0.1, 0, 1)));
  CHECK(at0[0].object == 0);

  CHECK(near(at0[1].center, Vec3(0, 0, -0.01)));
  CHECK(near(at0[2].center, Vec3(0.05, 0, -0.01)));
  CHECK(at0[2].radius == 0.02);

  // Midpoint of the scripted motion: rotate 45 degrees about z, translate (1, 0, 0).
  const auto mid = object_sphere_positions(w, 0.5, {{"s", 0.0}});
  const double h = std::sqrt(2.0) / 2.0;
  CHECK(near(mid[3].center, Vec3(1 + h, h, 0)));
  CHECK(mid[3].object == 2);

  w.gravity = Vec3::Zero();
  CHECK_THROWS_AS(object_sphere_positions(w, 0.0, {{"s", 0.0}}), SimulationError);
}

TEST_CASE("rigid maps preserve pairwise sphere distances") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 50; ++trial) {
    World w;
    SphereUnionObject obj;
    obj.id = "o";
    for (int i = 0; i < 5; ++i) obj.spheres.push_back({random_vec(rng, -0.2, 0.2), 0.01});
    Trajectory traj;
    for (int k = 0; k < 4; ++k) {
      traj.waypoints.push_back({0.25 * k, Pose(random_rotation(rng), random_vec(rng, -1, 1))});
    }
    obj.mode = ScriptedMode{traj};
    w.objects.push_back(obj);
    std::uniform_real_distribution<double> time(-0.2, 1.2);
    const double t = time(rng);
    const auto spheres = object_sphere_positions(w, t, {});
    for (std::size_t a = 0; a < 5; ++a) {
      for (std::size_t b = a + 1; b < 5; ++b) {
        const double local = (obj.spheres[a].center - obj.spheres[b].center).norm();
        const double world = (spheres[a].center - spheres[b].center).norm();
        CHECK(std::abs(local - world) <= 1e-9);
      }
    }
  }
}
