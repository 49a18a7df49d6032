#pragma once

// Pivotized (remote-center-of-motion) instrument kinematics.
//
// Conventions:
//   * lengths in mm, angles in degrees at the API boundary;
//   * rotations use intrinsic XYZ Euler angles, R = Rx(a) * Ry(b) * Rz(c);
//   * the instrument shaft is the local +z axis, the tip sits at depth mm
//     along it from the RCM.
//
// A TPSD state (tilt, pan, spin, depth) therefore maps to
//   T = Trans(rcm.position) * Rxyz(rcm.orientation) * Rxyz(tilt, pan, spin) * Trans(0, 0, depth).

#include <array>
#include <span>

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace lapkit {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Mat4 = Eigen::Matrix4d;
using Quat = Eigen::Quaterniond;

struct PtsdState {
  double tilt = 0.0;   // deg, about local x
  double pan = 0.0;    // deg, about local y
  double spin = 0.0;   // deg, about the shaft axis
  double depth = 0.0;  // mm along the shaft

  std::array<double, 4> as_array() const { return {tilt, pan, spin, depth}; }
  static PtsdState from_array(std::span<const double, 4> v) { return {v[0], v[1], v[2], v[3]}; }
  bool operator==(const PtsdState&) const = default;
};

struct RcmFrame {
  Vec3 position = Vec3::Zero();
  Vec3 orientation = Vec3::Zero();  // XYZ Euler, deg

  bool operator==(const RcmFrame&) const = default;
};

struct Pose {
  Vec3 position = Vec3::Zero();
  Quat orientation = Quat::Identity();

  Mat3 rotation() const { return orientation.toRotationMatrix(); }
  // Local +z expressed in world coordinates.
  Vec3 axis() const { return rotation().col(2); }
  Mat4 matrix() const;
};

struct Aabb {
  Vec3 min = Vec3::Zero();
  Vec3 max = Vec3::Zero();

  bool contains(const Vec3& p) const {
    return (p.array() >= min.array()).all() && (p.array() <= max.array()).all();
  }
  bool operator==(const Aabb&) const = default;
};

struct InstrumentLimits {
  PtsdState ptsd_low{-90.0, -90.0, -180.0, 0.0};
  PtsdState ptsd_high{90.0, 90.0, 180.0, 300.0};
  Aabb cartesian_box{Vec3::Constant(-1e6), Vec3::Constant(1e6)};
  // Max rate per TPSD axis: deg/s for the angles, mm/s for depth.
  PtsdState velocity_limits{10.0, 10.0, 10.0, 10.0};

  // Throws InvalidConfig on low > high, negative box extents or non-positive rates.
  void validate() const;
  bool operator==(const InstrumentLimits&) const = default;
};

struct ClampFlags {
  bool state_limit_violated = false;
  bool workspace_violated = false;
};

struct ClampResult {
  PtsdState state;
  ClampFlags flags;
};

double deg2rad(double deg);
double rad2deg(double rad);
// Wraps into (-180, 180].
double wrap_degrees(double deg);

// Intrinsic XYZ Euler rotation (degrees).
Mat3 euler_xyz(const Vec3& angles_deg);

Pose ptsd_to_pose(const PtsdState& ptsd, const RcmFrame& rcm);

// Inverse of ptsd_to_pose for the tip position; spin is passed through.
// Throws DegenerateTip when |tip - rcm.position| <= 1e-6 mm.
PtsdState pose_to_ptsd(const Vec3& tip, const RcmFrame& rcm, double spin);

// Integrates a normalized action in [-1, 1]^4 over dt seconds, clamps to the
// TPSD bounds and rejects the move when the tip would leave the Cartesian box.
ClampResult clamp_action(const PtsdState& ptsd, std::span<const double> action,
                         const InstrumentLimits& limits, const RcmFrame& rcm, double dt);

// Camera pose behind an angled optic. optic_angle tilts the view away from
// the shaft; optic_rotation turns the tilt direction about the shaft. At
// rotation 0 the view tilts toward local -y, at 90 toward local +x.
Pose oblique_camera_pose(const PtsdState& ptsd, const RcmFrame& rcm, double optic_angle,
                         double optic_rotation);

// RCM frame at `position` whose local +z points at `target`.
RcmFrame rcm_looking_at(const Vec3& position, const Vec3& target);

}  // namespace lapkit
