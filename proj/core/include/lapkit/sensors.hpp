#pragma once

// Observation generation: a deterministic software rasterizer producing RGB,
// depth and segmentation planes, pinhole projection, and depth unprojection.
//
// Camera convention: the camera looks along its local +z axis; image u grows
// along local +x and v along local +y. Pixel (col, row) covers
// [col, col + 1) x [row, row + 1); its center is at (col + 0.5, row + 0.5).

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "lapkit/kinematics.hpp"

namespace lapkit {

struct Color {
  std::uint8_t r = 0;
  std::uint8_t g = 0;
  std::uint8_t b = 0;
  bool operator==(const Color&) const = default;
};

struct CameraModel {
  Pose pose;
  double fov_deg = 45.0;  // vertical
  int resolution = 64;    // square
  double near = 1.0;      // mm
  double far = 1000.0;    // mm

  void validate() const;
  double focal_px() const;
  double principal_point() const { return resolution / 2.0; }
};

// Tessellation of the capsule side wall; spheres and caps are exact.
inline constexpr int kCapsuleSlices = 16;

struct SceneTriangle {
  Vec3 a;
  Vec3 b;
  Vec3 c;
  std::uint32_t object_id = 0;
  Color color;
};

// Ray-cast per pixel rather than tessellated.
struct SceneSphere {
  Vec3 center;
  double radius = 1.0;
  std::uint32_t object_id = 0;
  Color color;
};

class RenderScene {
 public:
  void add_triangle(const Vec3& a, const Vec3& b, const Vec3& c, std::uint32_t id, Color color);
  void add_sphere(const Vec3& center, double radius, std::uint32_t id, Color color);
  // Cylinder between a and b with hemispherical caps.
  void add_capsule(const Vec3& a, const Vec3& b, double radius, std::uint32_t id, Color color);
  void add_box(const Aabb& box, std::uint32_t id, Color color);
  // Two-sided quad a-b-c-d.
  void add_quad(const Vec3& a, const Vec3& b, const Vec3& c, const Vec3& d, std::uint32_t id,
                Color color);

  const std::vector<SceneTriangle>& triangles() const { return triangles_; }
  const std::vector<SceneSphere>& spheres() const { return spheres_; }
  bool empty() const { return triangles_.empty() && spheres_.empty(); }

 private:
  std::vector<SceneTriangle> triangles_;
  std::vector<SceneSphere> spheres_;
};

struct FrameBuffer {
  int resolution = 0;
  std::vector<std::uint8_t> rgb;            // row-major, 3 bytes per pixel
  std::vector<float> depth;                 // mm, camera-space z; far where empty
  std::vector<std::uint32_t> segmentation;  // object id, 0 = background

  std::size_t pixel_count() const { return static_cast<std::size_t>(resolution) * resolution; }
};

inline constexpr Color kBackground{24, 24, 32};

FrameBuffer render(const RenderScene& scene, const CameraModel& camera);

struct PixelCoord {
  double u = 0.0;
  double v = 0.0;
};

// Pinhole projection; throws BehindCamera when camera-space z <= near.
PixelCoord project(const Vec3& point, const CameraModel& camera);
Vec3 to_camera_frame(const Vec3& point, const CameraModel& camera);

struct CloudPoint {
  Vec3 position;
  std::uint32_t object_id = 0;
};

// One world-space point per pixel with depth < far. Throws ResolutionMismatch
// when the frame was not rendered at the camera's resolution.
std::vector<CloudPoint> depth_to_pointcloud(const FrameBuffer& frame, const CameraModel& camera);

enum class ObservationType { kState, kRgb, kRgbd };

std::string to_string(ObservationType type);
ObservationType observation_type_from_string(const std::string& name);

// STATE: `state` holds the vector. RGB: `rgb` holds res*res*3 bytes. RGBD:
// `rgb` plus `depth`, the depth plane normalized to [0, 1] by (d - near) / (far - near).
struct Observation {
  ObservationType type = ObservationType::kState;
  std::vector<float> state;
  int resolution = 0;
  std::vector<std::uint8_t> rgb;
  std::vector<float> depth;

  std::vector<std::size_t> shape() const;
  bool operator==(const Observation&) const = default;
};

Observation image_observation(const FrameBuffer& frame, const CameraModel& camera,
                              ObservationType type);

// Frame dumps: binary PPM (P6, maxval 255); depth and segmentation as an 8-byte
// magic ("LGDEPTH1" / "LGSEG001") followed by the raw little-endian plane
// (float32 / uint32), row-major. Frames are square, so the resolution follows
// from the file size.
void write_ppm(const std::filesystem::path& path, const FrameBuffer& frame);
void write_depth_plane(const std::filesystem::path& path, const FrameBuffer& frame);
void write_segmentation_plane(const std::filesystem::path& path, const FrameBuffer& frame);
std::vector<float> read_depth_plane(const std::filesystem::path& path);
std::vector<std::uint32_t> read_segmentation_plane(const std::filesystem::path& path);

}  // namespace lapkit
