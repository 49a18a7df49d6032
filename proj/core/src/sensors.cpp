#include "lapkit/sensors.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <fstream>
#include <numbers>

#include "lapkit/error.hpp"
#include "lapkit/geometry.hpp"

namespace lapkit {

namespace {

constexpr char kDepthMagic[8] = {'L', 'G', 'D', 'E', 'P', 'T', 'H', '1'};
constexpr char kSegMagic[8] = {'L', 'G', 'S', 'E', 'G', '0', '0', '1'};

// Sutherland-Hodgman against the plane z = near; keeps z >= near.
std::vector<Vec3> clip_near(const std::array<Vec3, 3>& tri, double near) {
  std::vector<Vec3> out;
  out.reserve(4);
  for (std::size_t i = 0; i < 3; ++i) {
    const Vec3& cur = tri[i];
    const Vec3& nxt = tri[(i + 1) % 3];
    const bool cur_in = cur.z() >= near;
    const bool nxt_in = nxt.z() >= near;
    if (cur_in) out.push_back(cur);
    if (cur_in != nxt_in) {
      const double t = (near - cur.z()) / (nxt.z() - cur.z());
      Vec3 hit = cur + t * (nxt - cur);
      hit.z() = near;
      out.push_back(hit);
    }
  }
  return out;
}

void put_u32_le(std::ostream& os, std::uint32_t v) {
  const char bytes[4] = {static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff),
                         static_cast<char>((v >> 16) & 0xff), static_cast<char>((v >> 24) & 0xff)};
  os.write(bytes, 4);
}

std::uint32_t get_u32_le(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) fail(ErrorCode::kIo, "cannot open " + path.string() + " for writing");
  return os;
}

std::vector<unsigned char> read_plane_bytes(const std::filesystem::path& path,
                                            const char (&magic)[8]) {
  std::ifstream is(path, std::ios::binary);
  if (!is) fail(ErrorCode::kIo, "cannot open " + path.string());
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(is)), {});
  if (bytes.size() < 8 || !std::equal(magic, magic + 8, bytes.begin(),
                                      [](char a, unsigned char b) { return a == static_cast<char>(b); })) {
    fail(ErrorCode::kCorrupt, path.string() + ": bad plane header");
  }
  const std::size_t payload = bytes.size() - 8;
  const auto side = static_cast<std::size_t>(std::llround(std::sqrt(payload / 4.0)));
  if (payload % 4 != 0 || side * side * 4 != payload) {
    fail(ErrorCode::kCorrupt, path.string() + ": plane is not square");
  }
  bytes.erase(bytes.begin(), bytes.begin() + 8);
  return bytes;
}

}  // namespace

void CameraModel::validate() const {
  if (!(near > 0.0 && near < far)) fail(ErrorCode::kInvalidConfig, "camera requires 0 < near < far");
  if (!(fov_deg > 0.0 && fov_deg < 180.0)) {
    fail(ErrorCode::kInvalidConfig, "camera field of view must lie in (0, 180)");
  }
  if (resolution < 1) fail(ErrorCode::kInvalidConfig, "camera resolution must be positive");
}

double CameraModel::focal_px() const {
  return (resolution / 2.0) / std::tan(deg2rad(fov_deg) / 2.0);
}

void RenderScene::add_triangle(const Vec3& a, const Vec3& b, const Vec3& c, std::uint32_t id,
                               Color color) {
  triangles_.push_back({a, b, c, id, color});
}

void RenderScene::add_quad(const Vec3& a, const Vec3& b, const Vec3& c, const Vec3& d,
                           std::uint32_t id, Color color) {
  add_triangle(a, b, c, id, color);
  add_triangle(a, c, d, id, color);
}

void RenderScene::add_sphere(const Vec3& center, double radius, std::uint32_t id, Color color) {
  if (!(radius > 0.0)) fail(ErrorCode::kInvalidConfig, "sphere radius must be positive");
  spheres_.push_back({center, radius, id, color});
}

void RenderScene::add_capsule(const Vec3& a, const Vec3& b, double radius, std::uint32_t id,
                              Color color) {
  const Mat3 frame = geom::frame_from_axis(b - a);
  for (int j = 0; j < kCapsuleSlices; ++j) {
    const double phi0 = 2.0 * std::numbers::pi * j / kCapsuleSlices;
    const double phi1 = 2.0 * std::numbers::pi * (j + 1) / kCapsuleSlices;
    const Vec3 r0 = radius * (std::cos(phi0) * frame.col(0) + std::sin(phi0) * frame.col(1));
    const Vec3 r1 = radius * (std::cos(phi1) * frame.col(0) + std::sin(phi1) * frame.col(1));
    add_quad(a + r0, b + r0, b + r1, a + r1, id, color);
  }
  add_sphere(a, radius, id, color);
  add_sphere(b, radius, id, color);
}

void RenderScene::add_box(const Aabb& box, std::uint32_t id, Color color) {
  const Vec3& l = box.min;
  const Vec3& h = box.max;
  const std::array<Vec3, 8> v = {Vec3(l.x(), l.y(), l.z()), Vec3(h.x(), l.y(), l.z()),
                                 Vec3(h.x(), h.y(), l.z()), Vec3(l.x(), h.y(), l.z()),
                                 Vec3(l.x(), l.y(), h.z()), Vec3(h.x(), l.y(), h.z()),
                                 Vec3(h.x(), h.y(), h.z()), Vec3(l.x(), h.y(), h.z())};
  add_quad(v[0], v[1], v[2], v[3], id, color);
  add_quad(v[4], v[5], v[6], v[7], id, color);
  add_quad(v[0], v[1], v[5], v[4], id, color);
  add_quad(v[1], v[2], v[6], v[5], id, color);
  add_quad(v[2], v[3], v[7], v[6], id, color);
  add_quad(v[3], v[0], v[4], v[7], id, color);
}

Vec3 to_camera_frame(const Vec3& point, const CameraModel& camera) {
  return camera.pose.rotation().transpose() * (point - camera.pose.position);
}

PixelCoord project(const Vec3& point, const CameraModel& camera) {
  const Vec3 p = to_camera_frame(point, camera);
  if (p.z() <= camera.near) fail(ErrorCode::kBehindCamera, "point lies behind the near plane");
  const double f = camera.focal_px();
  const double c = camera.principal_point();
  return {f * p.x() / p.z() + c, f * p.y() / p.z() + c};
}

FrameBuffer render(const RenderScene& scene, const CameraModel& camera) {
  camera.validate();
  const int res = camera.resolution;
  FrameBuffer fb;
  fb.resolution = res;
  fb.rgb.resize(fb.pixel_count() * 3);
  for (std::size_t i = 0; i < fb.pixel_count(); ++i) {
    fb.rgb[3 * i] = kBackground.r;
    fb.rgb[3 * i + 1] = kBackground.g;
    fb.rgb[3 * i + 2] = kBackground.b;
  }
  fb.depth.assign(fb.pixel_count(), static_cast<float>(camera.far));
  fb.segmentation.assign(fb.pixel_count(), 0);
  // Exact comparisons use double depths; the float plane stores the result.
  std::vector<double> zbuf(fb.pixel_count(), camera.far);

  const Mat3 to_cam = camera.pose.rotation().transpose();
  const Vec3 origin = camera.pose.position;
  const double f = camera.focal_px();
  const double c = camera.principal_point();
  const Vec3 light = Vec3(0.3, -0.5, -0.8).normalized();  // camera frame

  auto shade_color = [&](const Color& col, double shade, std::size_t idx) {
    fb.rgb[3 * idx] = static_cast<std::uint8_t>(std::lround(col.r * shade));
    fb.rgb[3 * idx + 1] = static_cast<std::uint8_t>(std::lround(col.g * shade));
    fb.rgb[3 * idx + 2] = static_cast<std::uint8_t>(std::lround(col.b * shade));
  };

  for (const auto& tri : scene.triangles()) {
    const std::array<Vec3, 3> cam = {to_cam * (tri.a - origin), to_cam * (tri.b - origin),
                                     to_cam * (tri.c - origin)};
    const Vec3 normal = (cam[1] - cam[0]).cross(cam[2] - cam[0]);
    const double nlen = normal.norm();
    if (nlen <= 0.0) continue;
    const double shade = 0.35 + 0.65 * std::abs(normal.dot(light) / nlen);

    const std::vector<Vec3> poly = clip_near(cam, camera.near);
    for (std::size_t k = 1; k + 1 < poly.size(); ++k) {
      const std::array<Vec3, 3> v = {poly[0], poly[k], poly[k + 1]};
      std::array<double, 3> su{};
      std::array<double, 3> sv{};
      std::array<double, 3> inv_z{};
      for (int q = 0; q < 3; ++q) {
        su[q] = f * v[q].x() / v[q].z() + c;
        sv[q] = f * v[q].y() / v[q].z() + c;
        inv_z[q] = 1.0 / v[q].z();
      }
      const double area = (su[1] - su[0]) * (sv[2] - sv[0]) - (sv[1] - sv[0]) * (su[2] - su[0]);
      if (area == 0.0) continue;
      const int x0 = std::max(0, static_cast<int>(std::floor(std::min({su[0], su[1], su[2]}))));
      const int x1 = std::min(res - 1, static_cast<int>(std::ceil(std::max({su[0], su[1], su[2]}))));
      const int y0 = std::max(0, static_cast<int>(std::floor(std::min({sv[0], sv[1], sv[2]}))));
      const int y1 = std::min(res - 1, static_cast<int>(std::ceil(std::max({sv[0], sv[1], sv[2]}))));
      for (int y = y0; y <= y1; ++y) {
        const double py = y + 0.5;
        for (int x = x0; x <= x1; ++x) {
          const double px = x + 0.5;
          const double w0 = ((su[2] - su[1]) * (py - sv[1]) - (sv[2] - sv[1]) * (px - su[1])) / area;
          const double w1 = ((su[0] - su[2]) * (py - sv[2]) - (sv[0] - sv[2]) * (px - su[2])) / area;
          const double w2 = 1.0 - w0 - w1;
          if (w0 < 0.0 || w1 < 0.0 || w2 < 0.0) continue;
          const double z = 1.0 / (w0 * inv_z[0] + w1 * inv_z[1] + w2 * inv_z[2]);
          const std::size_t idx = static_cast<std::size_t>(y) * res + x;
          if (!(z < zbuf[idx]) || z > camera.far) continue;
          zbuf[idx] = z;
          fb.depth[idx] = static_cast<float>(z);
          fb.segmentation[idx] = tri.object_id;
          shade_color(tri.color, shade, idx);
        }
      }
    }
  }

  for (const auto& sph : scene.spheres()) {
    const Vec3 center = to_cam * (sph.center - origin);
    const double r = sph.radius;
    if (center.z() + r < camera.near || center.z() - r > camera.far) continue;
    int x0 = 0, x1 = res - 1, y0 = 0, y1 = res - 1;
    if (center.z() - r > camera.near) {
      // Bound by the projected corners of the sphere's camera-space box.
      double umin = 1e300, umax = -1e300, vmin = 1e300, vmax = -1e300;
      for (int corner = 0; corner < 8; ++corner) {
        const Vec3 p = center + r * Vec3(corner & 1 ? 1 : -1, corner & 2 ? 1 : -1, corner & 4 ? 1 : -1);
        const double u = f * p.x() / p.z() + c;
        const double v = f * p.y() / p.z() + c;
        umin = std::min(umin, u);
        umax = std::max(umax, u);
        vmin = std::min(vmin, v);
        vmax = std::max(vmax, v);
      }
      if (umax < 0.0 || vmax < 0.0 || umin > res || vmin > res) continue;
      x0 = std::max(0, static_cast<int>(std::floor(umin)));
      x1 = std::min(res - 1, static_cast<int>(std::ceil(umax)));
      y0 = std::max(0, static_cast<int>(std::floor(vmin)));
      y1 = std::min(res - 1, static_cast<int>(std::ceil(vmax)));
    }
    const double cc = center.squaredNorm() - r * r;
    for (int y = y0; y <= y1; ++y) {
      for (int x = x0; x <= x1; ++x) {
        // Ray t * d with d.z = 1, so t is the camera-space depth.
        const Vec3 d((x + 0.5 - c) / f, (y + 0.5 - c) / f, 1.0);
        const double a = d.squaredNorm();
        const double half_b = d.dot(center);
        const double disc = half_b * half_b - a * cc;
        if (disc < 0.0) continue;
        const double root = std::sqrt(disc);
        double z = (half_b - root) / a;
        if (z < camera.near) z = (half_b + root) / a;
        const std::size_t idx = static_cast<std::size_t>(y) * res + x;
        if (z < camera.near || !(z < zbuf[idx]) || z > camera.far) continue;
        const Vec3 normal = (z * d - center) / r;
        zbuf[idx] = z;
        fb.depth[idx] = static_cast<float>(z);
        fb.segmentation[idx] = sph.object_id;
        shade_color(sph.color, 0.35 + 0.65 * std::abs(normal.dot(light)), idx);
      }
    }
  }
  return fb;
}

std::vector<CloudPoint> depth_to_pointcloud(const FrameBuffer& frame, const CameraModel& camera) {
  camera.validate();
  if (frame.resolution != camera.resolution || frame.depth.size() != frame.pixel_count() ||
      frame.segmentation.size() != frame.pixel_count()) {
    fail(ErrorCode::kResolutionMismatch, "frame resolution " + std::to_string(frame.resolution) +
                                             " does not match camera resolution " +
                                             std::to_string(camera.resolution));
  }
  const Mat3 rot = camera.pose.rotation();
  const double f = camera.focal_px();
  const double c = camera.principal_point();
  std::vector<CloudPoint> cloud;
  for (int y = 0; y < frame.resolution; ++y) {
    for (int x = 0; x < frame.resolution; ++x) {
      const std::size_t idx = static_cast<std::size_t>(y) * frame.resolution + x;
      const double z = frame.depth[idx];
      if (!(z < camera.far)) continue;
      const Vec3 local((x + 0.5 - c) * z / f, (y + 0.5 - c) * z / f, z);
      cloud.push_back({camera.pose.position + rot * local, frame.segmentation[idx]});
    }
  }
  return cloud;
}

std::string to_string(ObservationType type) {
  switch (type) {
    case ObservationType::kState: return "STATE";
    case ObservationType::kRgb: return "RGB";
    case ObservationType::kRgbd: return "RGBD";
  }
  return "STATE";
}

ObservationType observation_type_from_string(const std::string& name) {
  if (name == "STATE") return ObservationType::kState;
  if (name == "RGB") return ObservationType::kRgb;
  if (name == "RGBD") return ObservationType::kRgbd;
  fail(ErrorCode::kInvalidConfig, "unknown observation type '" + name + "' (STATE, RGB, RGBD)");
}

std::vector<std::size_t> Observation::shape() const {
  const auto r = static_cast<std::size_t>(resolution);
  switch (type) {
    case ObservationType::kState: return {state.size()};
    case ObservationType::kRgb: return {r, r, 3};
    case ObservationType::kRgbd: return {r, r, 4};
  }
  return {};
}

Observation image_observation(const FrameBuffer& frame, const CameraModel& camera,
                              ObservationType type) {
  Observation obs;
  obs.type = type;
  obs.resolution = frame.resolution;
  obs.rgb = frame.rgb;
  if (type == ObservationType::kRgbd) {
    obs.depth.resize(frame.depth.size());
    const double span = camera.far - camera.near;
    for (std::size_t i = 0; i < frame.depth.size(); ++i) {
      obs.depth[i] = static_cast<float>(std::clamp((frame.depth[i] - camera.near) / span, 0.0, 1.0));
    }
  }
  return obs;
}

void write_ppm(const std::filesystem::path& path, const FrameBuffer& frame) {
  auto os = open_out(path);
  os << "P6\n" << frame.resolution << ' ' << frame.resolution << "\n255\n";
  os.write(reinterpret_cast<const char*>(frame.rgb.data()),
           static_cast<std::streamsize>(frame.rgb.size()));
  if (!os) fail(ErrorCode::kIo, "failed writing " + path.string());
}

void write_depth_plane(const std::filesystem::path& path, const FrameBuffer& frame) {
  auto os = open_out(path);
  os.write(kDepthMagic, 8);
  for (float d : frame.depth) put_u32_le(os, std::bit_cast<std::uint32_t>(d));
  if (!os) fail(ErrorCode::kIo, "failed writing " + path.string());
}

void write_segmentation_plane(const std::filesystem::path& path, const FrameBuffer& frame) {
  auto os = open_out(path);
  os.write(kSegMagic, 8);
  for (std::uint32_t s : frame.segmentation) put_u32_le(os, s);
  if (!os) fail(ErrorCode::kIo, "failed writing " + path.string());
}

std::vector<float> read_depth_plane(const std::filesystem::path& path) {
  const auto bytes = read_plane_bytes(path, kDepthMagic);
  std::vector<float> out(bytes.size() / 4);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::bit_cast<float>(get_u32_le(&bytes[4 * i]));
  return out;
}

std::vector<std::uint32_t> read_segmentation_plane(const std::filesystem::path& path) {
  const auto bytes = read_plane_bytes(path, kSegMagic);
  std::vector<std::uint32_t> out(bytes.size() / 4);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = get_u32_le(&bytes[4 * i]);
  return out;
}

}  // namespace lapkit
