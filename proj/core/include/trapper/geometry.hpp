#pragma once

#include <cmath>

namespace trapper {

// Table-plane coordinates in meters. z is constant while the ball is on the
// surface but carried along so traces and goals stay 3-component.
struct Vec3 {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;

  Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
  Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
  Vec3 operator*(double s) const { return {x * s, y * s, z * s}; }
  Vec3& operator+=(const Vec3& o) {
    x += o.x;
    y += o.y;
    z += o.z;
    return *this;
  }
  bool operator==(const Vec3& o) const = default;
};

inline bool finite(const Vec3& v) {
  return std::isfinite(v.x) && std::isfinite(v.y) && std::isfinite(v.z);
}

inline double planar_norm(const Vec3& v) { return std::hypot(v.x, v.y); }

inline double planar_dist(const Vec3& a, const Vec3& b) {
  return std::hypot(a.x - b.x, a.y - b.y);
}

// Chebyshev distance in the plane; the box footprint is an axis-aligned
// square, so capture is an L-inf test.
inline double chebyshev_dist(const Vec3& a, const Vec3& b) {
  return std::max(std::abs(a.x - b.x), std::abs(a.y - b.y));
}

}  // namespace trapper
