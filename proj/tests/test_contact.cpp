#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <set>

#include "hfvc/contact.hpp"
#include "hfvc/rand.hpp"

using namespace hfvc;
using namespace hfvc::contact;
using geom::RigidTransform;
using scene::ObjectPrimitive;
using scene::ShelfEnv;

namespace {

ShelfEnv default_shelf() {
  ShelfEnv env;
  env.interior = Vec3(0.4, 0.3, 0.25);
  env.has_ceiling = true;
  return env;
}

ObjectPrimitive unit_cube(double side = 0.1) {
  return ObjectPrimitive::cuboid(Vec3(side, side, side), 0.1, 0.5);
}

RigidTransform resting_pose(const ObjectPrimitive& prim, const Vec3& xy = Vec3::Zero()) {
  return RigidTransform::from_translation(Vec3(xy.x(), xy.y(), prim.half_extents().z()));
}

}  // namespace

TEST_CASE("cube resting on the floor has four floor contacts") {
  const auto prim = unit_cube();
  const auto env = default_shelf();
  const auto contacts = detect_contacts(resting_pose(prim), prim, env, 1e-3);
  REQUIRE(contacts.size() == 4);
  for (const auto& c : contacts) {
    REQUIRE(c.plane_id == 0);
    REQUIRE((c.normal - Vec3::UnitZ()).norm() < 1e-12);
    REQUIRE(std::abs(c.position.z()) < 1e-9);
    REQUIRE(c.owner == ContactOwner::Environment);
  }
}

TEST_CASE("floating cube has no contacts") {
  const auto prim = unit_cube();
  const auto env = default_shelf();
  const auto pose = RigidTransform::from_translation(Vec3(0, 0, prim.half_extents().z() + 0.05));
  REQUIRE(detect_contacts(pose, prim, env, 1e-3).empty());
}

TEST_CASE("corner contact matches a brute-force vertex-plane check") {
  const auto prim = unit_cube();
  const auto env = default_shelf();
  // Flush against the left wall: x centered at -interior/2 + half extent.
  const Vec3 xy(-0.5 * env.interior.x() + prim.half_extents().x(), 0.0, 0.0);
  const auto pose = resting_pose(prim, xy);
  const auto contacts = detect_contacts(pose, prim, env, 1e-3);

  // Oracle: enumerate every (plane, vertex) pair directly.
  int floor_hits = 0, wall_hits = 0;
  for (const auto& plane : env.planes()) {
    for (const auto& v : prim.vertices()) {
      if (std::abs(plane.signed_distance(pose * v)) <= 1e-3) {
        if (plane.id == 0) ++floor_hits;
        if (plane.id == 1) ++wall_hits;
      }
    }
  }
  REQUIRE(floor_hits == 4);
  REQUIRE(wall_hits == 4);
  REQUIRE(contacts.size() == 8);

  const auto n_wall = std::count_if(contacts.begin(), contacts.end(),
                                    [](const Contact& c) { return c.plane_id == 1; });
  REQUIRE(n_wall == 4);
}

TEST_CASE("object far outside the shelf is a degenerate scene") {
  const auto prim = unit_cube();
  const auto env = default_shelf();
  const auto pose = RigidTransform::from_translation(Vec3(5.0, 0.0, 0.05));
  REQUIRE_THROWS_AS(detect_contacts(pose, prim, env, 1e-3), DegenerateSceneError);
}

TEST_CASE("detection order is deterministic by (plane, vertex)") {
  const auto prim = unit_cube();
  const auto env = default_shelf();
  const Vec3 xy(-0.5 * env.interior.x() + prim.half_extents().x(), 0.0, 0.0);
  const auto contacts = detect_contacts(resting_pose(prim, xy), prim, env, 1e-3);
  std::set<std::pair<int, int>> keys;
  for (const auto& c : contacts) keys.insert({c.plane_id, c.vertex_id});
  REQUIRE(keys.size() == contacts.size());
  REQUIRE(std::is_sorted(contacts.begin(), contacts.end(), [](const Contact& a, const Contact& b) {
    return std::tie(a.plane_id, a.vertex_id) < std::tie(b.plane_id, b.vertex_id);
  }));
}

TEST_CASE("contact modes from start and goal poses") {
  const auto prim = unit_cube();
  const auto env = default_shelf();
  const auto start = resting_pose(prim);
  auto contacts = detect_contacts(start, prim, env, 1e-3);

  SECTION("lift straight up separates all floor contacts") {
    const auto goal = start * RigidTransform::from_translation(Vec3(0, 0, 0.05));
    for (const auto& c : derive_contact_modes(contacts, start, goal)) {
      REQUIRE(c.mode == ContactMode::Separating);
    }
  }
  SECTION("translate along the floor slides all floor contacts") {
    const auto goal = RigidTransform::from_translation(Vec3(0.05, 0, 0)) * start;
    for (const auto& c : derive_contact_modes(contacts, start, goal)) {
      REQUIRE(c.mode == ContactMode::Sliding);
      REQUIRE((c.slip_direction - Vec3::UnitX()).norm() < 1e-9);
    }
  }
  SECTION("zero motion sticks everything") {
    for (const auto& c : derive_contact_modes(contacts, start, start)) {
      REQUIRE(c.mode == ContactMode::Sticking);
    }
  }
}

TEST_CASE("velocity constraint row counts follow the mode rules") {
  const auto prim = unit_cube();
  const auto env = default_shelf();
  const auto pose = resting_pose(prim);
  const RigidTransform ee = RigidTransform::from_translation(Vec3(0, 0, 0.1));

  SECTION("no contacts, no rows") {
    const auto vc = build_velocity_constraint({}, pose, ee);
    REQUIRE(vc.n.rows() == 0);
  }

  SECTION("single sticking robot point couples object and hand") {
    Contact rc;
    rc.owner = ContactOwner::Robot;
    rc.mode = ContactMode::Sticking;
    rc.position = Vec3(0, 0, 0.1);
    rc.normal = -Vec3::UnitZ();
    const auto vc = build_velocity_constraint({rc}, pose, ee);
    REQUIRE(vc.n.rows() == 3);
    REQUIRE(vc.n.leftCols(6).cwiseAbs().maxCoeff() > 0.0);
    REQUIRE(vc.n.rightCols(6).cwiseAbs().maxCoeff() > 0.0);
  }

  SECTION("4 sticking floor contacts + robot point: 15 rows, rank <= 12") {
    auto contacts = derive_contact_modes(detect_contacts(pose, prim, env, 1e-3), pose, pose);
    Contact rc;
    rc.owner = ContactOwner::Robot;
    rc.mode = ContactMode::Sticking;
    rc.position = Vec3(0, 0, 0.1);
    rc.normal = -Vec3::UnitZ();
    contacts.push_back(rc);
    const auto vc = build_velocity_constraint(contacts, pose, ee);
    REQUIRE(vc.n.rows() == 15);
    Eigen::JacobiSVD<MatX> svd(vc.n);
    int rank = 0;
    for (int i = 0; i < svd.singularValues().size(); ++i) {
      if (svd.singularValues()(i) > 1e-9 * svd.singularValues()(0)) ++rank;
    }
    REQUIRE(rank <= 12);
  }

  SECTION("zero twists always satisfy the constraint") {
    auto contacts = derive_contact_modes(detect_contacts(pose, prim, env, 1e-3), pose,
                                         RigidTransform::from_translation(Vec3(0.03, 0, 0)) * pose);
    const auto vc = build_velocity_constraint(contacts, pose, ee);
    REQUIRE((vc.n * VecX::Zero(12)).lpNorm<Eigen::Infinity>() == 0.0);
  }

  SECTION("unset mode is a contract violation") {
    Contact c;
    c.owner = ContactOwner::Environment;
    c.mode = ContactMode::Unset;
    REQUIRE_THROWS_AS(build_velocity_constraint({c}, pose, ee), ContractViolation);
  }
}

TEST_CASE("friction pyramid geometry") {
  SECTION("mu = 0 collapses onto the normal") {
    const auto fp = friction_pyramid(Vec3::UnitZ(), 0.0, 4);
    for (const auto& g : fp.generators) REQUIRE((g - Vec3::UnitZ()).norm() < 1e-12);
  }

  SECTION("mu = 1, k = 4 tilts 45 degrees toward +-x, +-y") {
    const auto fp = friction_pyramid(Vec3::UnitZ(), 1.0, 4);
    REQUIRE(fp.generators.size() == 4);
    const double c = std::sqrt(0.5);
    REQUIRE((fp.generators[0] - Vec3(c, 0, c)).norm() < 1e-12);
    REQUIRE((fp.generators[1] - Vec3(0, c, c)).norm() < 1e-12);
    REQUIRE((fp.generators[2] - Vec3(-c, 0, c)).norm() < 1e-12);
    REQUIRE((fp.generators[3] - Vec3(0, -c, c)).norm() < 1e-12);
  }

  SECTION("generators sit exactly on the quadratic cone boundary") {
    Rng rng(71);
    for (int trial = 0; trial < 30; ++trial) {
      const Vec3 n = Vec3(rng.normal(), rng.normal(), rng.normal()).normalized();
      const double mu = rng.uniform(0.05, 1.2);
      const auto fp = friction_pyramid(n, mu, 4 + (trial % 5));
      for (const auto& g : fp.generators) {
        const double angle = std::acos(std::clamp(g.dot(n), -1.0, 1.0));
        REQUIRE(std::abs(angle - std::atan(mu)) < 1e-9);
      }
    }
  }

  SECTION("nonnegative combinations stay inside the quadratic cone") {
    Rng rng(72);
    const Vec3 n = Vec3(0.2, -0.3, 0.9).normalized();
    const double mu = 0.6;
    const auto fp = friction_pyramid(n, mu, 4);
    for (int trial = 0; trial < 1000; ++trial) {
      Vec3 f = Vec3::Zero();
      for (const auto& g : fp.generators) f += rng.uniform(0.0, 1.0) * g;
      if (f.norm() < 1e-12) continue;
      const double normal_part = f.dot(n);
      const double tangential = (f - normal_part * n).norm();
      REQUIRE(normal_part >= 0.0);
      REQUIRE(tangential <= mu * normal_part + 1e-9);
    }
  }

  SECTION("argument validation") {
    REQUIRE_THROWS_AS(friction_pyramid(Vec3::UnitZ(), 0.5, 2), std::invalid_argument);
    REQUIRE_THROWS_AS(friction_pyramid(Vec3::UnitZ(), -0.1, 4), std::invalid_argument);
  }
}
