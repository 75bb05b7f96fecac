// Copyright 2026 The dynlabel Authors
// SPDX-License-Identifier: Apache-2.0
//
// Ground and ceiling removal: per-column elevation angles, constrained RANSAC
// support planes, and region growing over the range image.

#pragma once

#include <cstdint>
#include <vector>

#include "dynlabel/scan_model.hpp"

namespace dynlabel {

/// One flag per pixel, 1 = ground or ceiling.
using GroundMask = std::vector<std::uint8_t>;

struct SupportPlane {
  /// Unit normal with positive z; plane is normal.p = offset.
  Vec3 normal = Vec3::UnitZ();
  double offset = 0.0;
  double inlier_threshold = 0.25;
  bool ceiling = false;
  /// Sorted pixel indices within inlier_threshold of the plane.
  std::vector<std::size_t> inliers;

  double distance(const Vec3& p) const { return std::abs(normal.dot(p) - offset); }
};

struct GroundParams {
  double max_elevation_deg = 30.0;
  double inlier_threshold = 0.25;
  double max_tilt_deg = 30.0;
  double growth_angle_deg = 10.0;
  /// Growth never flags a point farther than this from its seed plane.
  double max_growth_distance = 0.5;
  int ransac_iterations = 200;
  std::size_t min_ground_inliers = 100;
  std::size_t min_ceiling_eligible = 500;
  /// Pairs straddling an occlusion edge read as flat, so open scenes offer a
  /// few hundred eligible points above the sensor that happen to line up.
  /// A real ceiling contributes thousands.
  std::size_t min_ceiling_inliers = 1000;
};

/// Degrees; 90 for points lacking a valid vertical neighbor. The neighbor is
/// the row below, or the row above on the last row.
std::vector<float> compute_elevation_angles(const OrganizedScan& scan);

/// Ground plane from eligible points below `sensor_origin.z`, plus a ceiling
/// plane when enough eligible points lie above it and the fit keeps at least
/// min_ceiling_inliers of them. Throws Error(kNoPlane)
/// when the ground fit has fewer than min_ground_inliers inliers.
std::vector<SupportPlane> fit_support_planes(const OrganizedScan& scan,
                                             const std::vector<float>& angles,
                                             const Vec3& sensor_origin,
                                             const GroundParams& params, std::uint64_t seed);

/// Breadth-first growth from plane inliers over 4-adjacent pixels (azimuth
/// wrap) whose pairwise elevation angle is below growth_angle_deg. A joining
/// pixel must itself be locally flat (column elevation angle below
/// max_elevation_deg), which keeps growth off vertical surfaces where
/// same-row neighbors are level.
GroundMask grow_ground_mask(const OrganizedScan& scan, const std::vector<SupportPlane>& planes,
                            const GroundParams& params);

/// The full chain; a scan without a detectable ground yields an empty mask.
GroundMask segment_ground(const OrganizedScan& scan, const Vec3& sensor_origin,
                          const GroundParams& params, std::uint64_t seed,
                          std::vector<SupportPlane>* planes_out = nullptr);

}  // namespace dynlabel
