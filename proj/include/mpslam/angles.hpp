#pragma once

#include <Eigen/Core>
#include <cmath>
#include <numbers>

namespace mpslam {

using Vec2 = Eigen::Vector2d;

inline constexpr double kPi = std::numbers::pi;
inline constexpr double kTwoPi = 2.0 * std::numbers::pi;
inline constexpr double kSpeedOfLight = 299792458.0;

/// Wraps an angle to [-pi, pi).
inline double wrap_angle(double a) {
    if (a >= -kPi && a < kPi) return a;
    if (a >= kPi && a < 3.0 * kPi) return a - kTwoPi;
    if (a < -kPi && a >= -3.0 * kPi) return a + kTwoPi;
    double w = std::fmod(a + kPi, kTwoPi);
    if (w < 0.0) w += kTwoPi;
    w -= kPi;
    // fmod can land exactly on +pi after the shift for inputs just below -pi
    if (w >= kPi) w -= kTwoPi;
    return w;
}

/// Direction of the vector from `from` to `to`, atan2 semantics.
inline double bearing(const Vec2& from, const Vec2& to) {
    return std::atan2(to.y() - from.y(), to.x() - from.x());
}

inline Vec2 unit_vector(double angle) { return {std::cos(angle), std::sin(angle)}; }

inline Vec2 rotate(const Vec2& v, double angle) {
    const double c = std::cos(angle);
    const double s = std::sin(angle);
    return {c * v.x() - s * v.y(), s * v.x() + c * v.y()};
}

inline double deg2rad(double deg) { return deg * kPi / 180.0; }
inline double rad2deg(double rad) { return rad * 180.0 / kPi; }

}  // namespace mpslam
