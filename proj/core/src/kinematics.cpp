#include "lapkit/kinematics.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "lapkit/error.hpp"

namespace lapkit {

double deg2rad(double deg) { return deg * std::numbers::pi / 180.0; }
double rad2deg(double rad) { return rad * 180.0 / std::numbers::pi; }

double wrap_degrees(double deg) {
  double x = std::fmod(deg + 180.0, 360.0);
  if (x <= 0.0) x += 360.0;
  return x - 180.0;
}

Mat3 euler_xyz(const Vec3& angles_deg) {
  const Eigen::AngleAxisd rx(deg2rad(angles_deg.x()), Vec3::UnitX());
  const Eigen::AngleAxisd ry(deg2rad(angles_deg.y()), Vec3::UnitY());
  const Eigen::AngleAxisd rz(deg2rad(angles_deg.z()), Vec3::UnitZ());
  return (rx * ry * rz).toRotationMatrix();
}

Mat4 Pose::matrix() const {
  Mat4 m = Mat4::Identity();
  m.topLeftCorner<3, 3>() = rotation();
  m.topRightCorner<3, 1>() = position;
  return m;
}

void InstrumentLimits::validate() const {
  const auto lo = ptsd_low.as_array();
  const auto hi = ptsd_high.as_array();
  const auto vel = velocity_limits.as_array();
  for (std::size_t i = 0; i < 4; ++i) {
    if (!std::isfinite(lo[i]) || !std::isfinite(hi[i]) || lo[i] > hi[i]) {
      fail(ErrorCode::kInvalidConfig,
           "instrument limits: ptsd_low must be <= ptsd_high on axis " + std::to_string(i));
    }
    if (!std::isfinite(vel[i]) || vel[i] < 0.0) {
      fail(ErrorCode::kInvalidConfig,
           "instrument limits: velocity limit must be finite and >= 0 on axis " +
               std::to_string(i));
    }
  }
  if ((cartesian_box.max.array() < cartesian_box.min.array()).any()) {
    fail(ErrorCode::kInvalidConfig, "instrument limits: cartesian box has negative extent");
  }
}

Pose ptsd_to_pose(const PtsdState& ptsd, const RcmFrame& rcm) {
  const Mat3 rotation = euler_xyz(rcm.orientation) * euler_xyz({ptsd.tilt, ptsd.pan, ptsd.spin});
  Pose pose;
  pose.position = rcm.position + rotation * Vec3(0.0, 0.0, ptsd.depth);
  pose.orientation = Quat(rotation).normalized();
  return pose;
}

PtsdState pose_to_ptsd(const Vec3& tip, const RcmFrame& rcm, double spin) {
  const Vec3 local = euler_xyz(rcm.orientation).transpose() * (tip - rcm.position);
  const double depth = local.norm();
  if (!(depth > 1e-6)) {
    fail(ErrorCode::kDegenerateTip, "tip coincides with the remote center of motion");
  }
  const Vec3 dir = local / depth;
  // Rx(tilt) * Ry(pan) * e_z = (sin pan, -sin tilt cos pan, cos tilt cos pan)
  const double pan = std::asin(std::clamp(dir.x(), -1.0, 1.0));
  const double tilt = std::atan2(-dir.y(), dir.z());
  return {wrap_degrees(rad2deg(tilt)), wrap_degrees(rad2deg(pan)), wrap_degrees(spin), depth};
}

ClampResult clamp_action(const PtsdState& ptsd, std::span<const double> action,
                         const InstrumentLimits& limits, const RcmFrame& rcm, double dt) {
  if (action.size() != 4) {
    fail(ErrorCode::kInvalidAction,
         "TPSD action must have 4 components, got " + std::to_string(action.size()));
  }
  for (double a : action) {
    if (!std::isfinite(a) || a < -1.0 || a > 1.0) {
      fail(ErrorCode::kInvalidAction, "action component outside [-1, 1]: " + std::to_string(a));
    }
  }
  if (!(dt > 0.0)) fail(ErrorCode::kInvalidConfig, "dt must be positive");

  const auto current = ptsd.as_array();
  const auto lo = limits.ptsd_low.as_array();
  const auto hi = limits.ptsd_high.as_array();
  const auto vel = limits.velocity_limits.as_array();

  ClampResult out;
  std::array<double, 4> candidate{};
  for (std::size_t i = 0; i < 4; ++i) {
    const double moved = current[i] + action[i] * vel[i] * dt;
    candidate[i] = std::clamp(moved, lo[i], hi[i]);
    if (candidate[i] != moved) out.flags.state_limit_violated = true;
  }
  PtsdState next = PtsdState::from_array(candidate);
  if (!limits.cartesian_box.contains(ptsd_to_pose(next, rcm).position)) {
    out.flags.workspace_violated = true;
    next = ptsd;
  }
  next.tilt = wrap_degrees(next.tilt);
  next.pan = wrap_degrees(next.pan);
  next.spin = wrap_degrees(next.spin);
  out.state = next;
  return out;
}

Pose oblique_camera_pose(const PtsdState& ptsd, const RcmFrame& rcm, double optic_angle,
                         double optic_rotation) {
  Pose pose = ptsd_to_pose(ptsd, rcm);
  if (optic_angle == 0.0) return pose;
  const Vec3 hinge = Eigen::AngleAxisd(deg2rad(optic_rotation), Vec3::UnitZ()) * Vec3::UnitX();
  pose.orientation =
      (pose.orientation * Quat(Eigen::AngleAxisd(deg2rad(optic_angle), hinge))).normalized();
  return pose;
}

RcmFrame rcm_looking_at(const Vec3& position, const Vec3& target) {
  const Vec3 dir = (target - position).normalized();
  const double pan = std::asin(std::clamp(dir.x(), -1.0, 1.0));
  const double tilt = std::atan2(-dir.y(), dir.z());
  return {position, Vec3(rad2deg(tilt), rad2deg(pan), 0.0)};
}

}  // namespace lapkit
