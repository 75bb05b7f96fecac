// Copyright 2026 The dynlabel Authors
// SPDX-License-Identifier: Apache-2.0
//
// Scene description for the synthetic LiDAR simulator: static boxes and
// planes, moving primitives on piecewise-linear paths, and a spinning sensor.

#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "dynlabel/scan_model.hpp"

namespace dynlabel {

struct Waypoint {
  Vec3 position = Vec3::Zero();
  /// Speed (m/s) on the leg leaving this waypoint. Zero parks the path here.
  double speed = 1.0;
  /// Dwell time (s) at this waypoint before leaving it.
  double pause = 0.0;
};

/// Piecewise-linear path. A closed path loops back to its first waypoint.
class Path {
 public:
  Path() = default;
  Path(std::vector<Waypoint> waypoints, bool closed);

  const std::vector<Waypoint>& waypoints() const { return waypoints_; }
  bool closed() const { return closed_; }

  Vec3 position_at(double t) const;
  /// Instantaneous speed; zero while pausing or parked.
  double speed_at(double t) const;
  /// Unit heading of the current (or last) leg; +x for a degenerate path.
  Vec3 heading_at(double t) const;
  /// Times at which the motion changes (arrivals, departures), within [0, horizon].
  std::vector<double> knot_times(double horizon) const;

 private:
  struct Phase {
    double t0 = 0.0;
    double t1 = 0.0;
    Vec3 from = Vec3::Zero();
    Vec3 to = Vec3::Zero();
    double speed = 0.0;  // 0 for a dwell
    Vec3 heading = Vec3::UnitX();
  };
  const Phase* phase_at(double t, double* local_t) const;

  std::vector<Waypoint> waypoints_;
  bool closed_ = false;
  std::vector<Phase> phases_;
  double period_ = 0.0;
  bool cyclic_ = false;
  Vec3 rest_position_ = Vec3::Zero();
  Vec3 rest_heading_ = Vec3::UnitX();
};

struct StaticBox {
  Vec3 min = Vec3::Zero();
  Vec3 max = Vec3::Zero();
  float intensity = 0.5F;
};

/// Infinite plane n.p = offset.
struct StaticPlane {
  Vec3 normal = Vec3::UnitZ();
  double offset = 0.0;
  float intensity = 0.3F;
};

enum class MoverShape : std::uint8_t { kSphere, kBox, kCylinder, kBiped };

const char* to_string(MoverShape s);
std::optional<MoverShape> parse_mover_shape(const std::string& s);

/// Moving primitive. The path tracks: the sphere center, the box center, the
/// cylinder base center, or the biped's feet midpoint.
struct Mover {
  std::string name;
  MoverShape shape = MoverShape::kSphere;
  /// sphere: (radius, -, -); box: full extents; cylinder: (radius, height, -);
  /// biped: (shoulder half-width, height, -).
  Vec3 size = Vec3(0.5, 0.5, 0.5);
  Path path;
  float intensity = 0.8F;
};

struct SensorSpec {
  std::uint32_t rows = 64;
  std::uint32_t cols = 2048;
  double vfov_up_deg = 16.6;
  double vfov_down_deg = -16.6;
  double rate_hz = 10.0;
  Path path;
  double yaw0 = 0.0;
  double yaw_rate = 0.0;

  /// Beam elevation (rad) of a row; row 0 is the top beam.
  double row_elevation(std::uint32_t row) const;
  /// Beam azimuth (rad) of a column in the sensor frame.
  double col_azimuth(std::uint32_t col) const;
  Pose pose_at(double t) const;
};

struct SceneSpec {
  std::string name;
  std::vector<StaticBox> boxes;
  std::vector<StaticPlane> planes;
  std::vector<Mover> movers;
  SensorSpec sensor;
  double duration = 10.0;
  double noise_sigma = 0.0;
  std::uint64_t seed = 0;

  std::size_t scan_count() const;
  /// Throws Error(kInvalidConfig) on a malformed scene.
  void validate() const;
};

/// Human-readable JSON scene files.
SceneSpec scene_from_json(const std::string& text);
std::string scene_to_json(const SceneSpec& scene);
SceneSpec load_scene(const std::string& path);

/// Built-in scenes: static-room, movers-mixed, stop-and-go, crowd.
std::vector<std::string> preset_names();
SceneSpec preset_scene(const std::string& name);

}  // namespace dynlabel
