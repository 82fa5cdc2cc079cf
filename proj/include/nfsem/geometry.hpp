#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <utility>

namespace nfsem {

struct Vec3 {
  double x = 0.0, y = 0.0, z = 0.0;

  Vec3() = default;
  Vec3(double x_, double y_, double z_) : x(x_), y(y_), z(z_) {}

  Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
  Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
  Vec3 operator*(double s) const { return {x * s, y * s, z * s}; }
  Vec3 operator/(double s) const { return {x / s, y / s, z / s}; }
  Vec3 operator-() const { return {-x, -y, -z}; }
  Vec3& operator+=(const Vec3& o) {
    x += o.x;
    y += o.y;
    z += o.z;
    return *this;
  }
  double operator[](int i) const { return i == 0 ? x : (i == 1 ? y : z); }
};

inline Vec3 operator*(double s, const Vec3& v) { return v * s; }
inline double dot(const Vec3& a, const Vec3& b) { return a.x * b.x + a.y * b.y + a.z * b.z; }
inline Vec3 cross(const Vec3& a, const Vec3& b) {
  return {a.y * b.z - a.z * b.y, a.z * b.x - a.x * b.z, a.x * b.y - a.y * b.x};
}
inline double norm(const Vec3& v) { return std::sqrt(dot(v, v)); }
inline Vec3 normalized(const Vec3& v) {
  const double n = norm(v);
  return n > 0.0 ? v / n : Vec3{0.0, 0.0, 0.0};
}
inline Vec3 min(const Vec3& a, const Vec3& b) {
  return {std::fmin(a.x, b.x), std::fmin(a.y, b.y), std::fmin(a.z, b.z)};
}
inline Vec3 max(const Vec3& a, const Vec3& b) {
  return {std::fmax(a.x, b.x), std::fmax(a.y, b.y), std::fmax(a.z, b.z)};
}
inline Vec3 abs(const Vec3& v) { return {std::fabs(v.x), std::fabs(v.y), std::fabs(v.z)}; }

// Row-major 3x3 rotation.
struct Mat3 {
  std::array<double, 9> m{1, 0, 0, 0, 1, 0, 0, 0, 1};

  static Mat3 identity() { return {}; }

  static Mat3 rotation_x(double a) {
    Mat3 r;
    const double c = std::cos(a), s = std::sin(a);
    r.m = {1, 0, 0, 0, c, -s, 0, s, c};
    return r;
  }
  static Mat3 rotation_y(double a) {
    Mat3 r;
    const double c = std::cos(a), s = std::sin(a);
    r.m = {c, 0, s, 0, 1, 0, -s, 0, c};
    return r;
  }
  static Mat3 rotation_z(double a) {
    Mat3 r;
    const double c = std::cos(a), s = std::sin(a);
    r.m = {c, -s, 0, s, c, 0, 0, 0, 1};
    return r;
  }

  Vec3 operator*(const Vec3& v) const {
    return {m[0] * v.x + m[1] * v.y + m[2] * v.z, m[3] * v.x + m[4] * v.y + m[5] * v.z,
            m[6] * v.x + m[7] * v.y + m[8] * v.z};
  }
  Mat3 operator*(const Mat3& o) const {
    Mat3 r;
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) {
        double s = 0.0;
        for (int k = 0; k < 3; ++k) s += m[i * 3 + k] * o.m[k * 3 + j];
        r.m[i * 3 + j] = s;
      }
    return r;
  }
  Mat3 transposed() const {
    Mat3 r;
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) r.m[i * 3 + j] = m[j * 3 + i];
    return r;
  }
  double operator()(int i, int j) const { return m[i * 3 + j]; }
};

// Rigid camera-to-world transform.
struct Pose {
  Mat3 rot;       // camera axes in world coordinates
  Vec3 trans;     // camera origin in world coordinates

  Vec3 to_world(const Vec3& p_cam) const { return rot * p_cam + trans; }
  Vec3 dir_to_world(const Vec3& d_cam) const { return rot * d_cam; }
  Vec3 to_camera(const Vec3& p_world) const { return rot.transposed() * (p_world - trans); }
  Vec3 dir_to_camera(const Vec3& d_world) const { return rot.transposed() * d_world; }
};

struct Ray {
  Vec3 origin;
  Vec3 dir;  // unit length
  double t_near = 0.0;
  double t_far = 0.0;

  Vec3 at(double t) const { return origin + dir * t; }
};

// Slab intersection with an axis-aligned box; returns false when the ray
// misses. On success t0 <= t1 and both are clamped to t >= 0.
inline bool intersect_box(const Vec3& origin, const Vec3& dir, const Vec3& lo, const Vec3& hi,
                          double& t0, double& t1) {
  double tmin = 0.0;
  double tmax = 1e30;
  const double o[3] = {origin.x, origin.y, origin.z};
  const double d[3] = {dir.x, dir.y, dir.z};
  const double l[3] = {lo.x, lo.y, lo.z};
  const double h[3] = {hi.x, hi.y, hi.z};
  for (int i = 0; i < 3; ++i) {
    if (std::fabs(d[i]) < 1e-15) {
      if (o[i] < l[i] || o[i] > h[i]) return false;
      continue;
    }
    double ta = (l[i] - o[i]) / d[i];
    double tb = (h[i] - o[i]) / d[i];
    if (ta > tb) std::swap(ta, tb);
    tmin = std::fmax(tmin, ta);
    tmax = std::fmin(tmax, tb);
  }
  if (tmin > tmax) return false;
  t0 = tmin;
  t1 = tmax;
  return true;
}

constexpr double kPi = 3.14159265358979323846;

inline double deg_to_rad(double d) { return d * kPi / 180.0; }
inline double rad_to_deg(double r) { return r * 180.0 / kPi; }

}  // namespace nfsem
