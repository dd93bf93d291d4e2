#pragma once

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace rescam {

inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

inline double wrap_angle(double a) {
  double w = std::fmod(a, kTwoPi);
  if (w < 0.0) w += kTwoPi;
  // fmod can round a tiny negative up to exactly 2*pi
  return w >= kTwoPi ? 0.0 : w;
}

inline double deg2rad(double deg) { return deg * std::numbers::pi / 180.0; }
inline double rad2deg(double rad) { return rad * 180.0 / std::numbers::pi; }

// Smallest signed difference a - b, in (-pi, pi].
inline double angle_diff(double a, double b) {
  double d = wrap_angle(a - b);
  return d > std::numbers::pi ? d - kTwoPi : d;
}

struct Pose2 {
  double x = 0.0;
  double y = 0.0;
};

inline double distance(const Pose2& a, const Pose2& b) { return std::hypot(a.x - b.x, a.y - b.y); }

struct RelativeCoord {
  double l = 0.0;      // meters
  double theta = 0.0;  // radians, counter-clockwise from the object->robot ray
};

// Object-centred frame whose +y axis points at the robot. `f` is the world
// heading of the object->robot ray.
struct ObjectFrame {
  Pose2 origin;
  double f = 0.0;

  static ObjectFrame facing(const Pose2& object, const Pose2& robot) {
    if (object.x == robot.x && object.y == robot.y)
      throw std::invalid_argument("object and robot coincide; frame heading undefined");
    return {object, wrap_angle(std::atan2(robot.y - object.y, robot.x - object.x))};
  }
};

inline Pose2 to_world(const ObjectFrame& frame, const RelativeCoord& rel) {
  const double heading = frame.f + rel.theta;
  return {frame.origin.x + rel.l * std::cos(heading), frame.origin.y + rel.l * std::sin(heading)};
}

inline RelativeCoord to_relative(const Pose2& trainer, const ObjectFrame& frame) {
  const double dx = trainer.x - frame.origin.x;
  const double dy = trainer.y - frame.origin.y;
  if (dx == 0.0 && dy == 0.0) throw std::domain_error("trainer coincides with the object");
  return {std::hypot(dx, dy), wrap_angle(std::atan2(dy, dx) - frame.f)};
}

}  // namespace rescam
