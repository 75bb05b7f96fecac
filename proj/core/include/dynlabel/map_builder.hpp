// Copyright 2026 The dynlabel Authors
// SPDX-License-Identifier: Apache-2.0
//
// Smoothness-based edge/plane features with static/dynamic tagging, and
// aggregation of labeled scans into a downsampled static map.

#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <vector>

#include "dynlabel/labeling_pipeline.hpp"
#include "dynlabel/labels.hpp"
#include "dynlabel/scan_model.hpp"

namespace dynlabel {

enum class FeatureKind : std::uint8_t { kEdge, kPlane };
enum class FeatureClass : std::uint8_t { kUnclassified, kStatic, kDynamic };

struct Feature {
  FeatureKind kind = FeatureKind::kPlane;
  std::size_t index = 0;
  double smoothness = 0.0;
  /// The point itself and its same-row neighborhood.
  std::vector<std::size_t> contributing_indices;
  FeatureClass classification = FeatureClass::kUnclassified;
};

struct FeatureParams {
  /// Neighbors on each side within the row.
  std::uint32_t half_window = 5;
  std::uint32_t sectors_per_row = 6;
  std::uint32_t edges_per_sector = 2;
  std::uint32_t planes_per_sector = 4;
};

/// c = |sum_j (r_j - r_i)| / (|N| r_i) over the same-row neighborhood; NaN
/// where the neighborhood leaves the row or touches an invalid pixel.
std::vector<double> compute_smoothness(const OrganizedScan& scan, std::uint32_t half_window = 5);

std::vector<Feature> extract_features(const OrganizedScan& scan, const FeatureParams& params = {});

/// Static iff no contributing point is labeled dynamic. Throws
/// kMisalignedSequences when an index falls outside the label array.
std::vector<Feature> classify_features(std::vector<Feature> features, const LabeledScan& labels);

struct MapPoint {
  float x = 0.0F;
  float y = 0.0F;
  float z = 0.0F;
  float intensity = 0.0F;
  std::uint32_t label = kLabelStatic;
};

struct AggregateMap {
  double downsample = 0.1;
  std::vector<MapPoint> static_points;
  std::vector<MapPoint> dynamic_points;
};

struct MapParams {
  double max_range = 30.0;
  double downsample = 0.1;
  bool dynamic_layer = true;
};

/// Undistorts each scan, keeps valid points with sensor range <= max_range,
/// splits them by label (2 counts as static) and keeps one point per
/// downsample voxel: the one nearest the voxel centroid. Scans are read twice
/// (centroids, then representatives) instead of being held in memory.
AggregateMap build_clean_map(const ScanSource& scans,
                             const std::function<LabeledScan(std::size_t)>& labels,
                             const Trajectory& traj, const MapParams& params = {});

/// One-voxel-per-point downsampling of an in-memory point list.
std::vector<MapPoint> downsample_points(const std::vector<MapPoint>& points, double voxel);

/// Binary little-endian PLY with x,y,z,intensity (float) and label (uint);
/// `colorize` appends red,green,blue (uchar) derived from the label.
void write_ply(const std::filesystem::path& path, const std::vector<MapPoint>& points,
               bool colorize = false);
std::vector<MapPoint> read_ply(const std::filesystem::path& path);

/// Valid points of one labeled scan, in the scan's own coordinates.
std::vector<MapPoint> labeled_points(const OrganizedScan& scan, const LabeledScan& labels);

}  // namespace dynlabel
