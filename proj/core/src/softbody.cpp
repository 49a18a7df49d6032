#include "lapkit/softbody.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "lapkit/error.hpp"
#include "lapkit/geometry.hpp"

namespace lapkit {

namespace {

constexpr double kCoincident = 1e-9;

Mat3 tool_frame(const ToolCapsule& tool) {
  return geom::frame_from_axis(tool.endpoint_b - tool.endpoint_a);
}

Vec3 attachment_target(const Attachment& a, const ToolCapsule& tool) {
  return tool.tip() + tool_frame(tool) * a.offset;
}

// Same projection as project_distance, but with explicit inverse masses and
// without throwing; returns false when the constraint was skipped.
bool apply_distance(Vec3& x_i, Vec3& x_j, double w_i, double w_j, const DistanceConstraint& c) {
  const double w = w_i + w_j;
  if (w <= 0.0) return true;
  const Vec3 d = x_i - x_j;
  const double len = d.norm();
  if (len < kCoincident) return false;
  const Vec3 n = d / len;
  const double violation = len - c.rest_length;
  x_i -= (c.stiffness * violation * w_i / w) * n;
  x_j += (c.stiffness * violation * w_j / w) * n;
  return true;
}

void apply_bending(Vec3& x_i, Vec3& x_j, Vec3& x_k, double w_i, double w_j, double w_k,
                   const BendingConstraint& c) {
  const Vec3 e1 = x_i - x_j;
  const Vec3 e2 = x_k - x_j;
  const double l1 = e1.norm();
  const double l2 = e2.norm();
  if (l1 < kCoincident || l2 < kCoincident) return;
  const Vec3 n1 = e1 / l1;
  const Vec3 n2 = e2 / l2;
  const double cos_angle = std::clamp(n1.dot(n2), -1.0, 1.0);
  const double sin_angle = std::sqrt(std::max(0.0, 1.0 - cos_angle * cos_angle));
  if (sin_angle < 1e-9) return;
  const double angle = std::acos(cos_angle);
  const Vec3 grad_i = -(n2 - cos_angle * n1) / (l1 * sin_angle);
  const Vec3 grad_k = -(n1 - cos_angle * n2) / (l2 * sin_angle);
  const Vec3 grad_j = -(grad_i + grad_k);
  const double denom =
      w_i * grad_i.squaredNorm() + w_j * grad_j.squaredNorm() + w_k * grad_k.squaredNorm();
  if (denom <= 0.0) return;
  const double lambda = -c.stiffness * (angle - c.rest_angle) / denom;
  x_i += lambda * w_i * grad_i;
  x_j += lambda * w_j * grad_j;
  x_k += lambda * w_k * grad_k;
}

Vec3 resolve_cylinder(const Vec3& p, const HollowCylinder& cyl, double radius) {
  const double bottom = cyl.base.z();
  const double top = bottom + cyl.height;
  if (p.z() < bottom - radius || p.z() > top + radius) return p;
  const Eigen::Vector2d offset(p.x() - cyl.base.x(), p.y() - cyl.base.y());
  const double r = offset.norm();
  const double inner = cyl.inner_radius - radius;
  const double outer = cyl.outer_radius + radius;
  if (r > inner && r < outer && p.z() >= bottom) {
    const Eigen::Vector2d dir = r > 1e-12 ? Eigen::Vector2d(offset / r) : Eigen::Vector2d(1, 0);
    const double to_inner = r - inner;
    const double to_outer = outer - r;
    const double to_top = top + radius - p.z();
    Vec3 out = p;
    if (to_top <= to_inner && to_top <= to_outer) {
      out.z() = top + radius;
    } else if (to_inner <= to_outer) {
      const Eigen::Vector2d xy = dir * std::max(inner, 0.0);
      out.x() = cyl.base.x() + xy.x();
      out.y() = cyl.base.y() + xy.y();
    } else {
      const Eigen::Vector2d xy = dir * outer;
      out.x() = cyl.base.x() + xy.x();
      out.y() = cyl.base.y() + xy.y();
    }
    return out;
  }
  if (cyl.closed_bottom && r <= inner && p.z() < bottom + radius && p.z() > bottom - radius) {
    Vec3 out = p;
    out.z() = bottom + radius;
    return out;
  }
  return p;
}

void check_stable(const SoftWorld& world, double max_speed) {
  const auto particles = world.particles();
  for (std::size_t i = 0; i < particles.size(); ++i) {
    const Particle& p = particles[i];
    if (!p.position.allFinite() || !p.velocity.allFinite()) {
      fail(ErrorCode::kUnstableSimulation,
           "particle " + std::to_string(i) + " has a non-finite state");
    }
    if (p.velocity.norm() > max_speed) {
      fail(ErrorCode::kUnstableSimulation, "particle " + std::to_string(i) +
                                               " exceeds the speed ceiling of " +
                                               std::to_string(max_speed) + " mm/s");
    }
  }
}

}  // namespace

std::uint32_t SoftWorld::add_particle(const Vec3& position, double inverse_mass) {
  if (!position.allFinite()) fail(ErrorCode::kInvalidConfig, "particle position must be finite");
  if (!(inverse_mass >= 0.0)) fail(ErrorCode::kInvalidConfig, "inverse mass must be >= 0");
  particles_.push_back({position, position, Vec3::Zero(), inverse_mass});
  owner_.push_back(-1);
  return static_cast<std::uint32_t>(particles_.size() - 1);
}

ConstraintId SoftWorld::add_distance(std::uint32_t i, std::uint32_t j, double stiffness,
                                     std::optional<double> rest_length) {
  if (i == j || i >= particles_.size() || j >= particles_.size()) {
    fail(ErrorCode::kInvalidConfig, "distance constraint indices invalid");
  }
  const double rest = rest_length.value_or((particles_[i].position - particles_[j].position).norm());
  if (!(rest > 0.0)) fail(ErrorCode::kInvalidConfig, "rest length must be positive");
  if (!(stiffness >= 0.0 && stiffness <= 1.0)) {
    fail(ErrorCode::kInvalidConfig, "stiffness must lie in [0, 1]");
  }
  distance_.push_back({next_id_, i, j, rest, stiffness});
  return next_id_++;
}

ConstraintId SoftWorld::add_bending(std::uint32_t i, std::uint32_t j, std::uint32_t k,
                                    double stiffness, std::optional<double> rest_angle) {
  const auto n = particles_.size();
  if (i == j || j == k || i == k || i >= n || j >= n || k >= n) {
    fail(ErrorCode::kInvalidConfig, "bending constraint indices invalid");
  }
  if (!(stiffness >= 0.0 && stiffness <= 1.0)) {
    fail(ErrorCode::kInvalidConfig, "stiffness must lie in [0, 1]");
  }
  double angle = 0.0;
  if (rest_angle) {
    angle = *rest_angle;
  } else {
    const Vec3 e1 = (particles_[i].position - particles_[j].position).normalized();
    const Vec3 e2 = (particles_[k].position - particles_[j].position).normalized();
    angle = std::acos(std::clamp(e1.dot(e2), -1.0, 1.0));
  }
  bending_.push_back({next_id_, i, j, k, angle, stiffness});
  return next_id_++;
}

BodyId SoftWorld::add_body(Body body) {
  if (body.count == 0 || body.first + body.count > particles_.size()) {
    fail(ErrorCode::kInvalidConfig, "body '" + body.name + "' has an invalid particle range");
  }
  for (std::uint32_t p = body.first; p < body.first + body.count; ++p) {
    if (owner_[p] >= 0) {
      fail(ErrorCode::kInvalidConfig, "body '" + body.name + "' overlaps an existing body");
    }
  }
  const auto id = static_cast<BodyId>(bodies_.size());
  for (std::uint32_t p = body.first; p < body.first + body.count; ++p) {
    owner_[p] = static_cast<std::int32_t>(id);
  }
  bodies_.push_back(std::move(body));
  return id;
}

ToolId SoftWorld::register_tool() {
  jaw_closed_.push_back(false);
  return static_cast<ToolId>(jaw_closed_.size() - 1);
}

std::optional<BodyId> SoftWorld::body_of(std::uint32_t particle) const {
  if (particle >= owner_.size() || owner_[particle] < 0) return std::nullopt;
  return static_cast<BodyId>(owner_[particle]);
}

std::size_t SoftWorld::constraint_count_in(BodyId id) const {
  const Body& b = body(id);
  std::size_t n = 0;
  for (const auto& c : distance_) n += b.contains(c.i) ? 1 : 0;
  for (const auto& c : bending_) n += b.contains(c.j) ? 1 : 0;
  return n;
}

Vec3 SoftWorld::center_of_mass(BodyId id) const {
  const Body& b = body(id);
  Vec3 sum = Vec3::Zero();
  for (std::uint32_t p = b.first; p < b.first + b.count; ++p) sum += particles_[p].position;
  return sum / static_cast<double>(b.count);
}

void step_world(SoftWorld& world, std::span<const ToolCapsule> tools, double dt,
                const SolverSettings& settings) {
  if (!(dt > 0.0)) fail(ErrorCode::kInvalidConfig, "dt must be positive");
  if (settings.substeps < 1 || settings.iterations < 1) {
    fail(ErrorCode::kInvalidConfig, "substeps and iterations must be >= 1");
  }
  auto& particles = world.particles_;
  const std::size_t n = particles.size();

  std::vector<double> w(n);
  for (std::size_t i = 0; i < n; ++i) w[i] = particles[i].inverse_mass;
  std::vector<Vec3> targets;
  targets.reserve(world.attachments_.size());
  for (const auto& a : world.attachments_) {
    if (a.tool >= tools.size()) {
      fail(ErrorCode::kInvalidConfig, "attachment refers to unknown tool " + std::to_string(a.tool));
    }
    w[a.particle] = 0.0;
    targets.push_back(attachment_target(a, tools[a.tool]));
  }

  // Per-particle collision radius and tool interaction, resolved once.
  std::vector<double> radius(n, 0.0);
  std::vector<char> tool_contact(n, 1);
  for (std::size_t i = 0; i < n; ++i) {
    if (auto b = world.body_of(static_cast<std::uint32_t>(i))) {
      radius[i] = world.bodies_[*b].collision_radius;
      tool_contact[i] = world.bodies_[*b].collides_with_tools ? 1 : 0;
    }
  }

  const double h = dt / settings.substeps;
  const double keep = std::max(0.0, 1.0 - settings.damping * h);

  for (int s = 0; s < settings.substeps; ++s) {
    for (std::size_t i = 0; i < n; ++i) {
      Particle& p = particles[i];
      p.previous_position = p.position;
      if (w[i] == 0.0) continue;
      p.velocity = (p.velocity + world.gravity * h) * keep;
      p.position += p.velocity * h;
    }
    for (std::size_t a = 0; a < targets.size(); ++a) {
      particles[world.attachments_[a].particle].position = targets[a];
    }

    for (int it = 0; it < settings.iterations; ++it) {
      for (const auto& c : world.distance_) {
        apply_distance(particles[c.i].position, particles[c.j].position, w[c.i], w[c.j], c);
      }
      for (const auto& c : world.bending_) {
        apply_bending(particles[c.i].position, particles[c.j].position, particles[c.k].position,
                      w[c.i], w[c.j], w[c.k], c);
      }
      for (std::size_t i = 0; i < n; ++i) {
        if (w[i] == 0.0) continue;
        Vec3& x = particles[i].position;
        if (world.ground_height && x.z() < *world.ground_height + radius[i]) {
          x.z() = *world.ground_height + radius[i];
        }
        for (const auto& cyl : world.cylinders) x = resolve_cylinder(x, cyl, radius[i]);
        if (!tool_contact[i]) continue;
        for (const auto& tool : tools) {
          ToolCapsule inflated = tool;
          inflated.radius += radius[i];
          x = resolve_capsule_collision(x, inflated);
        }
      }
    }

    for (std::size_t i = 0; i < n; ++i) {
      Particle& p = particles[i];
      p.velocity = p.pinned() ? Vec3::Zero() : Vec3((p.position - p.previous_position) / h);
    }
    check_stable(world, settings.max_speed);
  }
}

DistanceCorrection project_distance(const Particle& p_i, const Particle& p_j,
                                    const DistanceConstraint& c) {
  const double separation = (p_i.position - p_j.position).norm();
  if (separation < kCoincident) {
    fail(ErrorCode::kCoincidentParticles,
         "particles " + std::to_string(c.i) + " and " + std::to_string(c.j) + " coincide");
  }
  Vec3 x_i = p_i.position;
  Vec3 x_j = p_j.position;
  apply_distance(x_i, x_j, p_i.inverse_mass, p_j.inverse_mass, c);
  return {x_i - p_i.position, x_j - p_j.position};
}

void attach(SoftWorld& world, ToolId tool_id, std::uint32_t particle, const ToolCapsule& tool) {
  if (tool_id >= world.jaw_closed_.size()) {
    fail(ErrorCode::kInvalidConfig, "tool " + std::to_string(tool_id) + " is not registered");
  }
  if (particle >= world.particles_.size()) {
    fail(ErrorCode::kInvalidConfig, "particle index out of range");
  }
  const Vec3 offset =
      tool_frame(tool).transpose() * (world.particles_[particle].position - tool.tip());
  world.attachments_.push_back({particle, tool_id, offset});
}

bool grasp(SoftWorld& world, ToolId tool_id, const ToolCapsule& tool, double grasp_radius) {
  if (tool_id >= world.jaw_closed_.size()) {
    fail(ErrorCode::kInvalidConfig, "tool " + std::to_string(tool_id) + " is not registered");
  }
  const bool was_closed = world.jaw_closed_[tool_id];
  world.jaw_closed_[tool_id] = tool.jaw_closed;
  if (!tool.jaw_closed || was_closed) return false;

  std::vector<char> attached(world.particles_.size(), 0);
  for (const auto& a : world.attachments_) attached[a.particle] = 1;

  std::optional<std::uint32_t> best;
  double best_distance = grasp_radius;
  for (const auto& body : world.bodies_) {
    if (!body.graspable) continue;
    for (std::uint32_t p = body.first; p < body.first + body.count; ++p) {
      if (world.particles_[p].pinned() || attached[p]) continue;
      const double d = (world.particles_[p].position - tool.tip()).norm();
      if (d < best_distance || (d == best_distance && (!best || p < *best))) {
        best = p;
        best_distance = d;
      }
    }
  }
  if (!best) return false;
  attach(world, tool_id, *best, tool);
  return true;
}

std::size_t release(SoftWorld& world, ToolId tool_id) {
  return std::erase_if(world.attachments_, [&](const Attachment& a) { return a.tool == tool_id; });
}

std::vector<ConstraintId> cut(SoftWorld& world, const ToolCapsule& tool) {
  std::vector<ConstraintId> removed;
  if (!tool.active) return removed;
  const auto& x = world.particles_;
  auto hits = [&](std::uint32_t i, std::uint32_t j) {
    return geom::closest_points_segments(x[i].position, x[j].position, tool.endpoint_a,
                                         tool.endpoint_b)
               .distance <= tool.radius;
  };
  std::erase_if(world.distance_, [&](const DistanceConstraint& c) {
    if (!hits(c.i, c.j)) return false;
    removed.push_back(c.id);
    return true;
  });
  std::erase_if(world.bending_, [&](const BendingConstraint& c) {
    if (!hits(c.i, c.j) && !hits(c.j, c.k)) return false;
    removed.push_back(c.id);
    return true;
  });
  std::sort(removed.begin(), removed.end());
  return removed;
}

Vec3 resolve_capsule_collision(const Vec3& position, const ToolCapsule& capsule) {
  const Vec3 closest = geom::closest_point_on_segment(position, capsule.endpoint_a, capsule.endpoint_b);
  const Vec3 offset = position - closest;
  const double distance = offset.norm();
  if (distance >= capsule.radius) return position;
  const Vec3 normal = distance > 1e-12 ? Vec3(offset / distance) : Vec3(tool_frame(capsule).col(0));
  return closest + normal * capsule.radius;
}

std::size_t connected_components(const SoftWorld& world, BodyId id) {
  const Body& b = world.body(id);
  std::vector<std::uint32_t> parent(b.count);
  std::iota(parent.begin(), parent.end(), 0u);
  auto find = [&](std::uint32_t v) {
    while (parent[v] != v) v = parent[v] = parent[parent[v]];
    return v;
  };
  auto join = [&](std::uint32_t u, std::uint32_t v) {
    if (!b.contains(u) || !b.contains(v)) return;
    parent[find(u - b.first)] = find(v - b.first);
  };
  for (const auto& c : world.distance_constraints()) join(c.i, c.j);
  for (const auto& c : world.bending_constraints()) {
    join(c.i, c.j);
    join(c.j, c.k);
  }
  std::size_t roots = 0;
  for (std::uint32_t v = 0; v < b.count; ++v) roots += find(v) == v ? 1 : 0;
  return roots;
}

BodyId add_chain(SoftWorld& world, const ChainSpec& spec) {
  if (spec.particles < 2) fail(ErrorCode::kInvalidConfig, "a chain needs at least 2 particles");
  if (!(spec.total_mass > 0.0)) fail(ErrorCode::kInvalidConfig, "chain mass must be positive");
  const double inv_mass = spec.particles / spec.total_mass;
  const std::uint32_t first = static_cast<std::uint32_t>(world.particles().size());
  for (std::uint32_t k = 0; k < spec.particles; ++k) {
    const double t = static_cast<double>(k) / (spec.particles - 1);
    const bool pinned = k < spec.pinned_head || (spec.pin_tail && k + 1 == spec.particles);
    world.add_particle(spec.start + t * (spec.end - spec.start), pinned ? 0.0 : inv_mass);
  }
  for (std::uint32_t k = 0; k + 1 < spec.particles; ++k) {
    world.add_distance(first + k, first + k + 1, spec.stretch_stiffness);
  }
  if (spec.bend_stiffness > 0.0) {
    for (std::uint32_t k = 0; k + 2 < spec.particles; ++k) {
      world.add_bending(first + k, first + k + 1, first + k + 2, spec.bend_stiffness);
    }
  }
  return world.add_body({spec.name, spec.kind, first, spec.particles, spec.graspable,
                         spec.collides_with_tools, spec.collision_radius});
}

BodyId add_patch(SoftWorld& world, const PatchSpec& spec) {
  const std::uint32_t n = spec.resolution;
  if (n < 2) fail(ErrorCode::kInvalidConfig, "a patch needs at least 2x2 particles");
  if (!(spec.total_mass > 0.0) || !(spec.spacing > 0.0)) {
    fail(ErrorCode::kInvalidConfig, "patch mass and spacing must be positive");
  }
  const double inv_mass = static_cast<double>(n * n) / spec.total_mass;
  const Vec3 u = spec.u_axis.normalized() * spec.spacing;
  const Vec3 v = spec.v_axis.normalized() * spec.spacing;
  const std::uint32_t first = static_cast<std::uint32_t>(world.particles().size());
  for (std::uint32_t r = 0; r < n; ++r) {
    for (std::uint32_t c = 0; c < n; ++c) {
      const bool pinned = spec.pin_first_row && r == 0;
      world.add_particle(spec.origin + c * u + r * v, pinned ? 0.0 : inv_mass);
    }
  }
  auto at = [&](std::uint32_t r, std::uint32_t c) { return first + r * n + c; };
  for (std::uint32_t r = 0; r < n; ++r) {
    for (std::uint32_t c = 0; c < n; ++c) {
      if (c + 1 < n) world.add_distance(at(r, c), at(r, c + 1), spec.stiffness);
      if (r + 1 < n) world.add_distance(at(r, c), at(r + 1, c), spec.stiffness);
      if (r + 1 < n && c + 1 < n) {
        world.add_distance(at(r, c), at(r + 1, c + 1), spec.stiffness);
        world.add_distance(at(r, c + 1), at(r + 1, c), spec.stiffness);
      }
    }
  }
  return world.add_body({spec.name, BodyKind::kTissue, first, n * n, spec.graspable, true,
                         spec.collision_radius});
}

}  // namespace lapkit
