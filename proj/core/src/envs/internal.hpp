#pragma once

#include "lapkit/envs.hpp"

namespace lapkit::detail {

inline CameraModel look_at_camera(const Vec3& position, const Vec3& target, const EnvConfig& config) {
  const RcmFrame frame = rcm_looking_at(position, target);
  CameraModel cam;
  cam.pose = ptsd_to_pose(PtsdState{0.0, 0.0, 0.0, 0.0}, frame);
  cam.fov_deg = config.camera.fov_deg;
  cam.near = config.camera.near;
  cam.far = config.camera.far;
  cam.resolution = config.resolution;
  return cam;
}

// Rendering palette and segmentation ids shared by the environments.
inline constexpr Color kInstrumentGray{150, 150, 160};
inline constexpr Color kTargetGreen{60, 200, 90};
inline constexpr Color kBoardColor{110, 90, 70};
inline constexpr Color kTissueColor{200, 120, 120};

inline void set_feature(Features& out, const char* id, double value) { out.push_back({id, value}); }

}  // namespace lapkit::detail
