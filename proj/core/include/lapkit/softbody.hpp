#pragma once

// Deterministic position-based dynamics for ropes, stalks and tissue patches.
//
// The solver is classic PBD: explicit prediction under gravity, Gauss-Seidel
// projection of every constraint in storage order, then velocities from
// position deltas. All loops run in index order, so identical worlds step to
// bitwise-identical results.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "lapkit/kinematics.hpp"

namespace lapkit {

struct Particle {
  Vec3 position = Vec3::Zero();
  Vec3 previous_position = Vec3::Zero();
  Vec3 velocity = Vec3::Zero();  // mm/s
  double inverse_mass = 1.0;     // 1/g, 0 = pinned

  bool pinned() const { return inverse_mass == 0.0; }
};

using ConstraintId = std::uint32_t;
using BodyId = std::uint32_t;
using ToolId = std::uint32_t;

struct DistanceConstraint {
  ConstraintId id = 0;
  std::uint32_t i = 0;
  std::uint32_t j = 0;
  double rest_length = 1.0;  // mm
  double stiffness = 1.0;    // [0, 1]
};

// Keeps the angle at `j` between (i - j) and (k - j) at rest_angle.
struct BendingConstraint {
  ConstraintId id = 0;
  std::uint32_t i = 0;
  std::uint32_t j = 0;
  std::uint32_t k = 0;
  double rest_angle = 0.0;  // rad
  double stiffness = 1.0;
};

enum class BodyKind { kRope, kStalk, kTissue, kOther };

struct Body {
  std::string name;
  BodyKind kind = BodyKind::kOther;
  std::uint32_t first = 0;
  std::uint32_t count = 0;
  bool graspable = false;
  bool collides_with_tools = true;
  // Particles of this body are treated as spheres of this radius in collisions.
  double collision_radius = 0.0;

  bool contains(std::uint32_t particle) const {
    return particle >= first && particle < first + count;
  }
};

struct ToolCapsule {
  Vec3 endpoint_a = Vec3::Zero();  // proximal
  Vec3 endpoint_b = Vec3::Zero();  // tip
  double radius = 1.0;
  bool active = false;  // electrocautery on
  bool jaw_closed = false;

  Vec3 tip() const { return endpoint_b; }
};

struct Attachment {
  std::uint32_t particle = 0;
  ToolId tool = 0;
  Vec3 offset = Vec3::Zero();  // in the tool frame, relative to the tip
};

// Open-topped hollow cylinder standing on `base` with its axis along +z.
struct HollowCylinder {
  Vec3 base = Vec3::Zero();
  double inner_radius = 5.0;
  double outer_radius = 6.0;
  double height = 20.0;
  bool closed_bottom = true;
};

struct SolverSettings {
  int substeps = 1;
  int iterations = 10;
  double max_speed = 1e5;  // mm/s, UnstableSimulation above this
  double damping = 0.0;    // 1/s, linear velocity damping

  bool operator==(const SolverSettings&) const = default;
};

class SoftWorld {
 public:
  Vec3 gravity{0.0, 0.0, -9810.0};  // mm/s^2
  std::optional<double> ground_height;
  std::vector<HollowCylinder> cylinders;

  std::uint32_t add_particle(const Vec3& position, double inverse_mass);
  ConstraintId add_distance(std::uint32_t i, std::uint32_t j, double stiffness,
                            std::optional<double> rest_length = std::nullopt);
  ConstraintId add_bending(std::uint32_t i, std::uint32_t j, std::uint32_t k, double stiffness,
                           std::optional<double> rest_angle = std::nullopt);
  // Registers particles [first, first + count) as a named body. Ranges must be disjoint.
  BodyId add_body(Body body);
  ToolId register_tool();

  std::span<Particle> particles() { return particles_; }
  std::span<const Particle> particles() const { return particles_; }
  const std::vector<DistanceConstraint>& distance_constraints() const { return distance_; }
  const std::vector<BendingConstraint>& bending_constraints() const { return bending_; }
  const std::vector<Body>& bodies() const { return bodies_; }
  const std::vector<Attachment>& attachments() const { return attachments_; }
  std::size_t tool_count() const { return jaw_closed_.size(); }

  const Body& body(BodyId id) const { return bodies_.at(id); }
  // Body owning the particle, if any.
  std::optional<BodyId> body_of(std::uint32_t particle) const;
  std::size_t constraint_count_in(BodyId id) const;
  Vec3 center_of_mass(BodyId id) const;

 private:
  friend void step_world(SoftWorld&, std::span<const ToolCapsule>, double, const SolverSettings&);
  friend bool grasp(SoftWorld&, ToolId, const ToolCapsule&, double);
  friend std::size_t release(SoftWorld&, ToolId);
  friend std::vector<ConstraintId> cut(SoftWorld&, const ToolCapsule&);
  friend void attach(SoftWorld&, ToolId, std::uint32_t, const ToolCapsule&);

  std::vector<Particle> particles_;
  std::vector<std::int32_t> owner_;
  std::vector<DistanceConstraint> distance_;
  std::vector<BendingConstraint> bending_;
  std::vector<Body> bodies_;
  std::vector<Attachment> attachments_;
  std::vector<bool> jaw_closed_;
  ConstraintId next_id_ = 0;
};

// Advances the world by dt seconds. Tools are addressed by ToolId = index
// into `tools`. Throws UnstableSimulation on non-finite positions or speeds
// above settings.max_speed.
void step_world(SoftWorld& world, std::span<const ToolCapsule> tools, double dt,
                const SolverSettings& settings);

struct DistanceCorrection {
  Vec3 delta_i;
  Vec3 delta_j;
};

// Position corrections for one distance constraint. Throws CoincidentParticles
// when the particles are closer than 1e-9 mm.
DistanceCorrection project_distance(const Particle& p_i, const Particle& p_j,
                                    const DistanceConstraint& c);

// Attaches the particle nearest to the tool tip (ties go to the lower index)
// when the jaw closes and a graspable, unpinned particle lies within
// grasp_radius. Returns whether an attachment was created.
bool grasp(SoftWorld& world, ToolId tool_id, const ToolCapsule& tool, double grasp_radius);
// Removes all attachments of the tool; returns how many were removed.
std::size_t release(SoftWorld& world, ToolId tool_id);
// Unconditional attachment keeping the particle's current offset to the tool.
void attach(SoftWorld& world, ToolId tool_id, std::uint32_t particle, const ToolCapsule& tool);

// With an active tool, removes every distance and bending constraint whose
// segment intersects the capsule. Particles are never removed.
std::vector<ConstraintId> cut(SoftWorld& world, const ToolCapsule& tool);

// Projects a point strictly inside the capsule to its surface. Points on the
// axis are pushed along the capsule frame's +x.
Vec3 resolve_capsule_collision(const Vec3& position, const ToolCapsule& capsule);

// Number of connected components of a body under its remaining constraints.
std::size_t connected_components(const SoftWorld& world, BodyId body);

struct ChainSpec {
  std::string name;
  BodyKind kind = BodyKind::kRope;
  Vec3 start = Vec3::Zero();
  Vec3 end = Vec3::UnitX();
  std::uint32_t particles = 10;
  double total_mass = 1.0;  // g
  double stretch_stiffness = 1.0;
  double bend_stiffness = 0.0;  // 0 = no bending constraints
  std::uint32_t pinned_head = 0;  // number of pinned particles at the start
  bool pin_tail = false;
  bool graspable = false;
  bool collides_with_tools = true;
  double collision_radius = 0.0;
};

BodyId add_chain(SoftWorld& world, const ChainSpec& spec);

struct PatchSpec {
  std::string name;
  Vec3 origin = Vec3::Zero();
  Vec3 u_axis = Vec3::UnitX();  // row direction
  Vec3 v_axis = Vec3::UnitY();  // column direction
  std::uint32_t resolution = 9;  // N x N particles
  double spacing = 5.0;          // mm
  double total_mass = 5.0;       // g
  double stiffness = 1.0;
  bool pin_first_row = true;  // the row at v = 0
  bool graspable = true;
  double collision_radius = 0.0;
};

// N x N grid with structural and shear constraints. Particle (row r, col c)
// sits at origin + c * spacing * u + r * spacing * v, index first + r * N + c.
BodyId add_patch(SoftWorld& world, const PatchSpec& spec);

}  // namespace lapkit
