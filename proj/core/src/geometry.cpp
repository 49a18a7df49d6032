#include "lapkit/geometry.hpp"

#include <algorithm>
#include <cmath>

namespace lapkit::geom {

double closest_param_on_segment(const Vec3& p, const Vec3& a, const Vec3& b) {
  const Vec3 ab = b - a;
  const double len2 = ab.squaredNorm();
  if (len2 <= 0.0) return 0.0;
  return std::clamp((p - a).dot(ab) / len2, 0.0, 1.0);
}

Vec3 closest_point_on_segment(const Vec3& p, const Vec3& a, const Vec3& b) {
  return a + closest_param_on_segment(p, a, b) * (b - a);
}

double point_segment_distance(const Vec3& p, const Vec3& a, const Vec3& b) {
  return (p - closest_point_on_segment(p, a, b)).norm();
}

// Ericson, Real-Time Collision Detection, 5.1.9.
SegmentPair closest_points_segments(const Vec3& p0, const Vec3& p1, const Vec3& q0,
                                    const Vec3& q1) {
  constexpr double kEps = 1e-12;
  const Vec3 d1 = p1 - p0;
  const Vec3 d2 = q1 - q0;
  const Vec3 r = p0 - q0;
  const double a = d1.squaredNorm();
  const double e = d2.squaredNorm();
  const double f = d2.dot(r);
  double s = 0.0;
  double t = 0.0;
  if (a <= kEps && e <= kEps) {
    // both degenerate
  } else if (a <= kEps) {
    t = std::clamp(f / e, 0.0, 1.0);
  } else {
    const double c = d1.dot(r);
    if (e <= kEps) {
      s = std::clamp(-c / a, 0.0, 1.0);
    } else {
      const double b = d1.dot(d2);
      const double denom = a * e - b * b;
      s = denom > kEps ? std::clamp((b * f - c * e) / denom, 0.0, 1.0) : 0.0;
      t = (b * s + f) / e;
      if (t < 0.0) {
        t = 0.0;
        s = std::clamp(-c / a, 0.0, 1.0);
      } else if (t > 1.0) {
        t = 1.0;
        s = std::clamp((b - c) / a, 0.0, 1.0);
      }
    }
  }
  SegmentPair out{p0 + d1 * s, q0 + d2 * t, 0.0};
  out.distance = (out.on_first - out.on_second).norm();
  return out;
}

double point_aabb_distance(const Vec3& p, const Aabb& box) {
  const Vec3 clamped = p.cwiseMax(box.min).cwiseMin(box.max);
  return (p - clamped).norm();
}

double segment_aabb_distance(const Vec3& a, const Vec3& b, const Aabb& box) {
  // Distance to a convex set along a segment is convex in the segment
  // parameter, so golden-section search finds the minimum.
  constexpr double kInvPhi = 0.6180339887498949;
  auto dist = [&](double t) { return point_aabb_distance(a + t * (b - a), box); };
  double lo = 0.0;
  double hi = 1.0;
  double x1 = hi - kInvPhi * (hi - lo);
  double x2 = lo + kInvPhi * (hi - lo);
  double f1 = dist(x1);
  double f2 = dist(x2);
  for (int i = 0; i < 80; ++i) {
    if (f1 <= f2) {
      hi = x2;
      x2 = x1;
      f2 = f1;
      x1 = hi - kInvPhi * (hi - lo);
      f1 = dist(x1);
    } else {
      lo = x1;
      x1 = x2;
      f1 = f2;
      x2 = lo + kInvPhi * (hi - lo);
      f2 = dist(x2);
    }
  }
  return std::min({f1, f2, dist(0.0), dist(1.0)});
}

Mat3 frame_from_axis(const Vec3& axis) {
  Vec3 z = axis;
  const double n = z.norm();
  z = n > 0.0 ? Vec3(z / n) : Vec3(Vec3::UnitZ());
  const Vec3 helper = std::abs(z.x()) < 0.9 ? Vec3::UnitX() : Vec3::UnitY();
  const Vec3 x = (helper - z * z.dot(helper)).normalized();
  const Vec3 y = z.cross(x);
  Mat3 frame;
  frame.col(0) = x;
  frame.col(1) = y;
  frame.col(2) = z;
  return frame;
}

}  // namespace lapkit::geom
