#pragma once

#include "lapkit/kinematics.hpp"

namespace lapkit::geom {

// Parameter t in [0, 1] of the point on segment [a, b] closest to p.
double closest_param_on_segment(const Vec3& p, const Vec3& a, const Vec3& b);
Vec3 closest_point_on_segment(const Vec3& p, const Vec3& a, const Vec3& b);
double point_segment_distance(const Vec3& p, const Vec3& a, const Vec3& b);

struct SegmentPair {
  Vec3 on_first;
  Vec3 on_second;
  double distance;
};

// Closest points between segments [p0, p1] and [q0, q1]; handles degenerate segments.
SegmentPair closest_points_segments(const Vec3& p0, const Vec3& p1, const Vec3& q0,
                                    const Vec3& q1);

double segment_aabb_distance(const Vec3& a, const Vec3& b, const Aabb& box);
double point_aabb_distance(const Vec3& p, const Aabb& box);

// Orthonormal frame whose third column is `axis` (normalized). The first column
// is chosen deterministically from the world axes.
Mat3 frame_from_axis(const Vec3& axis);

}  // namespace lapkit::geom
