// Copyright 2026 The dynlabel Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

#include "dynlabel/scan_model.hpp"
#include "dynlabel/scene.hpp"

namespace dynlabel {

/// Ground truth for one rendered scan.
struct GroundTruth {
  /// 1 iff the pixel's first hit is a mover moving faster than 1e-3 m/s.
  std::vector<std::uint32_t> labels;
  /// 0 for static geometry or no hit, else 1 + mover index, regardless of speed.
  std::vector<std::uint32_t> instance;
};

struct RenderedScan {
  OrganizedScan scan;
  GroundTruth truth;
};

inline constexpr double kMoverSpeedThreshold = 1e-3;
inline constexpr double kMaxSensorRange = 120.0;

struct RayHit {
  double range = 0.0;
  /// 0 = static geometry, else 1 + mover index.
  std::uint32_t object = 0;
  float intensity = 0.0F;
};

/// Nearest hit of a world ray at scene time t (movers posed at t).
/// `include_movers` = false casts against static geometry only.
std::optional<RayHit> cast_ray(const SceneSpec& scene, double t, const Vec3& origin,
                               const Vec3& direction, bool include_movers = true);

/// Renders one revolution starting at t. Column c is sampled at
/// t + c / (cols * rate) with the sensor and every mover posed at that time.
RenderedScan render_scan(const SceneSpec& scene, double t, unsigned threads = 1);

/// Scan k starts at k / rate.
RenderedScan render_scan_index(const SceneSpec& scene, std::size_t k, unsigned threads = 1);

/// Exact sensor trajectory: 100 Hz samples merged with every path knot.
Trajectory sensor_trajectory(const SceneSpec& scene);

struct SequenceFiles {
  std::size_t scan_count = 0;
  std::filesystem::path scan_dir;
  std::filesystem::path truth_dir;
  std::filesystem::path trajectory;
  std::filesystem::path manifest;
};

/// Writes scans/NNNNNN.scan, truth/NNNNNN.label, trajectory.txt and
/// manifest.json under out_dir.
SequenceFiles generate_sequence(const SceneSpec& scene, const std::filesystem::path& out_dir,
                                unsigned threads = 1);

}  // namespace dynlabel
