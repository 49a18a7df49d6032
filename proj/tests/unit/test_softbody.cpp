#include <cmath>

#include <gtest/gtest.h>

#include "lapkit/envcore.hpp"
#include "lapkit/error.hpp"
#include "lapkit/softbody.hpp"

namespace lapkit {
namespace {

double max_relative_violation(const SoftWorld& world) {
  double worst = 0.0;
  for (const auto& c : world.distance_constraints()) {
    const double len = (world.particles()[c.i].position - world.particles()[c.j].position).norm();
    worst = std::max(worst, std::abs(len - c.rest_length) / c.rest_length);
  }
  return worst;
}

TEST(Softbody, ProjectDistanceSplitsByInverseMass) {
  Particle a{Vec3(0, 0, 0), Vec3::Zero(), Vec3::Zero(), 1.0};
  Particle b{Vec3(2, 0, 0), Vec3::Zero(), Vec3::Zero(), 3.0};
  const DistanceConstraint c{0, 0, 1, 1.0, 1.0};
  const DistanceCorrection d = project_distance(a, b, c);
  // violation 1 mm split 1:3 toward each other
  EXPECT_NEAR((d.delta_i - Vec3(0.25, 0, 0)).norm(), 0.0, 1e-15);
  EXPECT_NEAR((d.delta_j - Vec3(-0.75, 0, 0)).norm(), 0.0, 1e-15);
}

TEST(Softbody, ProjectDistanceScalesWithStiffnessAndSkipsPinned) {
  Particle a{Vec3(0, 0, 0), Vec3::Zero(), Vec3::Zero(), 0.0};
  Particle b{Vec3(0, 3, 0), Vec3::Zero(), Vec3::Zero(), 1.0};
  const DistanceConstraint c{0, 0, 1, 1.0, 0.5};
  const DistanceCorrection d = project_distance(a, b, c);
  EXPECT_EQ(d.delta_i, Vec3::Zero());
  EXPECT_NEAR((d.delta_j - Vec3(0, -1.0, 0)).norm(), 0.0, 1e-15);
}

TEST(Softbody, ProjectDistanceRejectsCoincident) {
  Particle a;
  Particle b;
  try {
    project_distance(a, b, DistanceConstraint{});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kCoincidentParticles);
  }
}

TEST(Softbody, FreeFallMatchesSemiImplicitEuler) {
  SoftWorld world;
  world.add_particle(Vec3::Zero(), 1.0);
  const double dt = 0.01;
  const SolverSettings s{1, 1, 1e6, 0.0};
  for (int n = 1; n <= 20; ++n) {
    step_world(world, {}, dt, s);
    // x_n = g dt^2 n (n + 1) / 2 under v += g dt; x += v dt
    EXPECT_NEAR(world.particles()[0].position.z(), -9810.0 * dt * dt * n * (n + 1) / 2.0, 1e-9);
    EXPECT_NEAR(world.particles()[0].velocity.z(), -9810.0 * dt * n, 1e-9);
  }
}

TEST(Softbody, GroundStopsParticle) {
  SoftWorld world;
  world.ground_height = 0.0;
  world.add_particle(Vec3(0, 0, 5), 1.0);
  world.add_body({"ball", BodyKind::kOther, 0, 1, false, true, 1.5});
  for (int i = 0; i < 100; ++i) step_world(world, {}, 0.01, {});
  EXPECT_DOUBLE_EQ(world.particles()[0].position.z(), 1.5);
}

TEST(Softbody, HangingRopeSettles) {
  SoftWorld world;
  ChainSpec spec;
  spec.start = Vec3(0, 0, 100);
  spec.end = Vec3(45, 0, 100);
  spec.particles = 10;
  spec.pinned_head = 1;
  add_chain(world, spec);
  const SolverSettings s{4, 20, 1e5, 2.0};
  for (int i = 0; i < 200; ++i) step_world(world, {}, 0.01, s);
  EXPECT_LT(max_relative_violation(world), 0.01);
  // Hangs below the pin.
  const Vec3 tail = world.particles()[9].position;
  EXPECT_LT(tail.z(), 60.0);
  EXPECT_LT(std::abs(tail.x()), 15.0);
}

TEST(Softbody, StepIsDeterministic) {
  auto build = [] {
    SoftWorld w;
    PatchSpec p;
    p.resolution = 6;
    add_patch(w, p);
    return w;
  };
  SoftWorld a = build();
  SoftWorld b = build();
  ToolCapsule tool{Vec3(10, 10, 20), Vec3(10, 10, -2), 2.0};
  for (int i = 0; i < 50; ++i) {
    step_world(a, std::span(&tool, 1), 0.01, {2, 8, 1e5, 1.0});
    step_world(b, std::span(&tool, 1), 0.01, {2, 8, 1e5, 1.0});
  }
  for (std::size_t i = 0; i < a.particles().size(); ++i) {
    EXPECT_EQ(a.particles()[i].position, b.particles()[i].position);
  }
}

TEST(Softbody, PatchLayoutAndPins) {
  SoftWorld world;
  PatchSpec p;
  p.origin = Vec3(1, 2, 3);
  p.resolution = 4;
  p.spacing = 2.0;
  const BodyId id = add_patch(world, p);
  const Body& body = world.body(id);
  EXPECT_EQ(body.count, 16u);
  // (row 2, col 3) -> origin + 3 * 2 u + 2 * 2 v
  EXPECT_EQ(world.particles()[body.first + 2 * 4 + 3].position, Vec3(7, 6, 3));
  for (std::uint32_t c = 0; c < 4; ++c) EXPECT_TRUE(world.particles()[body.first + c].pinned());
  EXPECT_FALSE(world.particles()[body.first + 4].pinned());
  EXPECT_EQ(connected_components(world, id), 1u);
}

TEST(Softbody, CutSplitsRope) {
  SoftWorld world;
  ChainSpec spec;
  spec.start = Vec3(-10, 0, 0);
  spec.end = Vec3(10, 0, 0);
  spec.particles = 11;
  spec.bend_stiffness = 0.5;
  const BodyId rope = add_chain(world, spec);
  const std::size_t before = world.constraint_count_in(rope);
  ToolCapsule tool{Vec3(1, 0, 10), Vec3(1, 0, -10), 0.5, true};
  const auto removed = cut(world, tool);
  EXPECT_FALSE(removed.empty());
  EXPECT_EQ(world.constraint_count_in(rope), before - removed.size());
  EXPECT_EQ(connected_components(world, rope), 2u);
  EXPECT_EQ(world.particles().size(), 11u);

  tool.active = false;
  tool.endpoint_a.x() = tool.endpoint_b.x() = -5.0;
  EXPECT_TRUE(cut(world, tool).empty());
}

TEST(Softbody, GraspNearestAndRelease) {
  SoftWorld world;
  ChainSpec spec;
  spec.start = Vec3(0, 0, 0);
  spec.end = Vec3(9, 0, 0);
  spec.particles = 10;
  spec.graspable = true;
  add_chain(world, spec);
  const ToolId tool_id = world.register_tool();
  ToolCapsule tool{Vec3(3.2, 0, 20), Vec3(3.2, 0, 0.5), 1.0};
  tool.jaw_closed = true;
  EXPECT_TRUE(grasp(world, tool_id, tool, 2.0));
  ASSERT_EQ(world.attachments().size(), 1u);
  EXPECT_EQ(world.attachments()[0].particle, 3u);

  // The attached particle follows the tool.
  ToolCapsule moved = tool;
  moved.endpoint_a += Vec3(0, 0, 10);
  moved.endpoint_b += Vec3(0, 0, 10);
  step_world(world, std::span(&moved, 1), 0.01, {1, 10, 1e6, 0.0});
  EXPECT_NEAR((world.particles()[3].position - Vec3(3, 0, 10)).norm(), 0.0, 1e-9);
  EXPECT_EQ(release(world, tool_id), 1u);
  EXPECT_TRUE(world.attachments().empty());

  ToolCapsule far{Vec3(3, 40, 20), Vec3(3, 40, 0), 1.0};
  far.jaw_closed = true;
  EXPECT_FALSE(grasp(world, tool_id, far, 2.0));
}

TEST(Softbody, CapsuleCollisionPushesToSurface) {
  const ToolCapsule c{Vec3(0, 0, 0), Vec3(0, 0, 10), 2.0};
  const Vec3 out = resolve_capsule_collision(Vec3(1, 0, 5), c);
  EXPECT_NEAR((out - Vec3(2, 0, 5)).norm(), 0.0, 1e-12);
  const Vec3 cap = resolve_capsule_collision(Vec3(0, 0, 11), c);
  EXPECT_NEAR((cap - Vec3(0, 0, 12)).norm(), 0.0, 1e-12);
  EXPECT_EQ(resolve_capsule_collision(Vec3(5, 0, 5), c), Vec3(5, 0, 5));
  const Vec3 axis = resolve_capsule_collision(Vec3(0, 0, 5), c);
  EXPECT_NEAR((axis - Vec3(0, 0, 5)).norm(), 2.0, 1e-12);
}

TEST(Softbody, SpeedCeilingRaisesUnstable) {
  SoftWorld world;
  world.add_particle(Vec3::Zero(), 1.0);
  world.particles()[0].velocity = Vec3(0, 0, 500);
  try {
    step_world(world, {}, 0.01, {1, 1, 100.0, 0.0});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kUnstableSimulation);
  }
}

TEST(Softbody, HollowCylinderKeepsParticleInside) {
  SoftWorld world;
  world.gravity = Vec3::Zero();
  world.cylinders.push_back({Vec3(0, 0, 0), 5.0, 7.0, 20.0, true});
  world.add_particle(Vec3(4.5, 0, 10), 1.0);
  world.add_body({"bead", BodyKind::kOther, 0, 1, false, true, 1.0});
  world.particles()[0].velocity = Vec3(20, 0, 0);
  for (int i = 0; i < 20; ++i) step_world(world, {}, 0.01, {});
  const Vec3 p = world.particles()[0].position;
  EXPECT_LE(std::hypot(p.x(), p.y()), 4.0 + 1e-9);
}

TEST(Softbody, AddBodyRejectsOverlap) {
  SoftWorld world;
  for (int i = 0; i < 4; ++i) world.add_particle(Vec3(i, 0, 0), 1.0);
  world.add_body({"a", BodyKind::kOther, 0, 3});
  EXPECT_THROW(world.add_body({"b", BodyKind::kOther, 2, 2}), Error);
}

}  // namespace
}  // namespace lapkit
