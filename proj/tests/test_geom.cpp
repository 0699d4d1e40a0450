#include <catch2/catch_amalgamated.hpp>

#include "hfvc/geom.hpp"
#include "hfvc/rand.hpp"

using namespace hfvc;
using namespace hfvc::geom;

namespace {

RigidTransform random_pose(Rng& rng, double t_range = 0.3) {
  const Vec3 axis = Vec3(rng.normal(), rng.normal(), rng.normal()).normalized();
  const double angle = rng.uniform(0.0, M_PI);
  return RigidTransform::from_axis_angle(
      axis, angle,
      Vec3(rng.uniform(-t_range, t_range), rng.uniform(-t_range, t_range),
           rng.uniform(-t_range, t_range)));
}

}  // namespace

TEST_CASE("rigid transform compose/invert round trip") {
  Rng rng(11);
  for (int i = 0; i < 50; ++i) {
    const RigidTransform t = random_pose(rng);
    REQUIRE(std::abs(t.rotation.norm() - 1.0) < 1e-9);
    const RigidTransform id = t * t.inverse();
    const auto pd = pose_distance(id, RigidTransform::identity());
    REQUIRE(pd.d < 1e-9);
    REQUIRE(pd.theta < 1e-9);
  }
}

TEST_CASE("interpolate_pose endpoints and midpoint") {
  Rng rng(12);
  const RigidTransform a = random_pose(rng);
  const RigidTransform b = random_pose(rng);

  auto at0 = interpolate_pose(a, b, 0.0);
  auto at1 = interpolate_pose(a, b, 1.0);
  REQUIRE(pose_distance(at0, a).d < 1e-12);
  REQUIRE(pose_distance(at0, a).theta < 1e-9);
  REQUIRE(pose_distance(at1, b).d < 1e-12);
  REQUIRE(pose_distance(at1, b).theta < 1e-9);

  const RigidTransform quarter =
      RigidTransform::from_axis_angle(Vec3::UnitZ(), M_PI / 2.0);
  const auto mid = interpolate_pose(RigidTransform::identity(), quarter, 0.5);
  const auto expect = RigidTransform::from_axis_angle(Vec3::UnitZ(), M_PI / 4.0);
  REQUIRE(pose_distance(mid, expect).theta < 1e-12);

  REQUIRE_THROWS_AS(interpolate_pose(a, b, -0.1), std::invalid_argument);
  REQUIRE_THROWS_AS(interpolate_pose(a, b, 1.1), std::invalid_argument);
}

TEST_CASE("interpolation distance to start is monotone in s") {
  Rng rng(13);
  for (int trial = 0; trial < 20; ++trial) {
    const RigidTransform a = random_pose(rng);
    const RigidTransform b = random_pose(rng);
    double prev_d = -1.0, prev_theta = -1.0;
    for (int k = 0; k <= 20; ++k) {
      const auto pd = pose_distance(interpolate_pose(a, b, k / 20.0), a);
      REQUIRE(pd.d >= prev_d - 1e-12);
      REQUIRE(pd.theta >= prev_theta - 1e-10);
      prev_d = pd.d;
      prev_theta = pd.theta;
    }
  }
}

TEST_CASE("pose_distance basics") {
  const RigidTransform id;
  const auto same = pose_distance(id, id);
  REQUIRE(same.d == 0.0);
  REQUIRE(same.theta == 0.0);

  const auto shift = pose_distance(id, RigidTransform::from_translation(Vec3(0.1, 0, 0)));
  REQUIRE(shift.d == Catch::Approx(0.1));
  REQUIRE(shift.theta < 1e-12);

  const auto rot = pose_distance(id, RigidTransform::from_axis_angle(Vec3::UnitZ(), M_PI / 2));
  REQUIRE(rot.d < 1e-12);
  REQUIRE(rot.theta == Catch::Approx(M_PI / 2));
}

TEST_CASE("add_metric basics and brute-force corner case") {
  std::vector<Vec3> pts = {{0.5, 0.5, 0.0}, {-0.5, 0.5, 0.0}, {-0.5, -0.5, 0.0}, {0.5, -0.5, 0.0}};
  const RigidTransform id;
  REQUIRE(add_metric(pts, id, id) == 0.0);

  const RigidTransform shifted = RigidTransform::from_translation(Vec3(0.0, 0.0, 0.07));
  REQUIRE(add_metric(pts, id, shifted) == Catch::Approx(0.07));

  // 90 deg z-rotation about the centroid: every unit-square corner moves by
  // the chord length sqrt(2)*r with r = sqrt(0.5).
  const RigidTransform rot = RigidTransform::from_axis_angle(Vec3::UnitZ(), M_PI / 2);
  double brute = 0.0;
  for (const auto& p : pts) brute += (rot * p - p).norm();
  brute /= pts.size();
  REQUIRE(add_metric(pts, id, rot) == Catch::Approx(brute));
  REQUIRE(brute == Catch::Approx(std::sqrt(2.0) * std::sqrt(0.5)));

  REQUIRE_THROWS_AS(add_metric({}, id, id), std::invalid_argument);
}

TEST_CASE("add_metric is a pseudo-metric on random triples") {
  Rng rng(14);
  std::vector<Vec3> pts;
  for (int i = 0; i < 12; ++i) {
    pts.emplace_back(rng.uniform(-0.1, 0.1), rng.uniform(-0.1, 0.1), rng.uniform(-0.1, 0.1));
  }
  for (int trial = 0; trial < 50; ++trial) {
    const auto a = random_pose(rng), b = random_pose(rng), c = random_pose(rng);
    const double ab = add_metric(pts, a, b);
    const double ba = add_metric(pts, b, a);
    const double ac = add_metric(pts, a, c);
    const double cb = add_metric(pts, c, b);
    REQUIRE(ab == Catch::Approx(ba).margin(1e-12));
    REQUIRE(ab <= ac + cb + 1e-9);
    REQUIRE(add_metric(pts, a, a) < 1e-12);
  }
}

TEST_CASE("project_onto_plane") {
  const Vec3 n = Vec3::UnitY();
  REQUIRE((project_onto_plane(Vec3(1, 1, 0), n) - Vec3(1, 0, 0)).norm() < 1e-15);
  REQUIRE(project_onto_plane(n, n).norm() < 1e-15);
  const Vec3 in_plane(0.3, 0.0, -0.2);
  REQUIRE((project_onto_plane(in_plane, n) - in_plane).norm() < 1e-15);
  REQUIRE_THROWS_AS(project_onto_plane(Vec3(1, 0, 0), Vec3(0, 2, 0)), std::invalid_argument);
}

TEST_CASE("projection is idempotent and never increases norm") {
  Rng rng(15);
  for (int i = 0; i < 200; ++i) {
    const Vec3 v(rng.normal(), rng.normal(), rng.normal());
    const Vec3 n = Vec3(rng.normal(), rng.normal(), rng.normal()).normalized();
    const Vec3 once = project_onto_plane(v, n);
    REQUIRE(once.norm() <= v.norm() + 1e-12);
    REQUIRE((project_onto_plane(once, n) - once).norm() < 1e-12);
    REQUIRE(std::abs(once.dot(n)) < 1e-12);
  }
}

TEST_CASE("se3 exp/log round trip") {
  Rng rng(16);
  for (int i = 0; i < 100; ++i) {
    BodyTwist xi{Vec3(rng.normal(), rng.normal(), rng.normal()) * 0.2,
                 Vec3(rng.normal(), rng.normal(), rng.normal()) * 0.8};
    const RigidTransform t = se3_exp(xi);
    const BodyTwist back = se3_log(t);
    REQUIRE((back.stacked() - xi.stacked()).norm() < 1e-9);
  }
  // Zero twist integrates to identity motion.
  const RigidTransform id = se3_exp(BodyTwist::zero());
  REQUIRE(pose_distance(id, RigidTransform::identity()).d < 1e-15);
  REQUIRE(pose_distance(id, RigidTransform::identity()).theta < 1e-15);
}

TEST_CASE("relative twist integrates back to the goal") {
  Rng rng(17);
  for (int i = 0; i < 50; ++i) {
    const RigidTransform a = random_pose(rng);
    const RigidTransform b = random_pose(rng);
    const BodyTwist xi = relative_twist(a, b);
    const RigidTransform reached = integrate_pose(a, xi, 1.0);
    REQUIRE(pose_distance(reached, b).d < 1e-9);
    REQUIRE(pose_distance(reached, b).theta < 1e-9);
  }
}

TEST_CASE("tangent basis is right handed and matches the z convention") {
  const auto [t1, t2] = tangent_basis(Vec3::UnitZ());
  REQUIRE((t1 - Vec3::UnitX()).norm() < 1e-12);
  REQUIRE((t2 - Vec3::UnitY()).norm() < 1e-12);
  Rng rng(18);
  for (int i = 0; i < 50; ++i) {
    const Vec3 n = Vec3(rng.normal(), rng.normal(), rng.normal()).normalized();
    const auto [a, b] = tangent_basis(n);
    REQUIRE(std::abs(a.dot(n)) < 1e-12);
    REQUIRE(std::abs(b.dot(n)) < 1e-12);
    REQUIRE((a.cross(b) - n).norm() < 1e-12);
  }
}
