// Copyright 2026 The dynlabel Authors
// SPDX-License-Identifier: Apache-2.0
//
// Candidate points -> seed clusters (euclidean) -> full clusters (range-image
// growth) -> accept/reject by candidate ratio.

#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "dynlabel/ground_segmentation.hpp"
#include "dynlabel/scan_model.hpp"

namespace dynlabel {

struct CandidatePointSet {
  std::uint64_t scan_id = 0;
  /// Sorted pixel indices.
  std::vector<std::size_t> indices;
};

enum class Verdict : std::uint8_t { kPending, kAccepted, kRejectedRatio, kRejectedSize };

const char* to_string(Verdict v);

struct Cluster {
  /// Sorted pixel indices.
  std::vector<std::size_t> point_indices;
  std::size_t candidate_count = 0;
  double diameter = 0.0;
  Verdict verdict = Verdict::kPending;

  double candidate_ratio() const {
    return point_indices.empty()
               ? 0.0
               : static_cast<double>(candidate_count) / static_cast<double>(point_indices.size());
  }
};

struct ClusteringParams {
  double voxel_size = 0.3;
  double seed_radius_factor = 2.0;
  double min_seed_diameter = 0.2;
  double beta_deg = 10.0;
  double ratio_threshold = 0.6;
  std::size_t min_points = 5;
  /// Above this size the diameter is the bounding-box diagonal.
  std::size_t exact_diameter_limit = 5000;
};

/// Max pairwise distance; bounding-box diagonal above `exact_limit` points.
double cluster_diameter(const OrganizedScan& scan, std::span<const std::size_t> indices,
                        std::size_t exact_limit = 5000);

/// Connected components under distance <= seed_radius_factor * voxel_size,
/// keeping only components whose diameter exceeds min_seed_diameter.
std::vector<std::vector<std::size_t>> cluster_candidates_stage1(const CandidatePointSet& points,
                                                                const OrganizedScan& scan,
                                                                const ClusteringParams& params);

/// Depth-clustering angle between two neighboring returns separated by the
/// angular step `step_rad`; large values mean one continuous surface.
double depth_cluster_angle(double range_a, double range_b, double step_rad);

/// Range-image growth from the seed pixels. A neighbor joins when its
/// depth-cluster angle exceeds beta_deg; growth stops at invalid pixels;
/// ground pixels join but do not expand; seeds reached by one growth merge.
/// `scan` must carry sensor-frame coordinates (ray directions).
std::vector<Cluster> grow_clusters_stage2(const std::vector<std::vector<std::size_t>>& seeds,
                                          const OrganizedScan& scan, const GroundMask& ground,
                                          const std::vector<std::uint8_t>& is_candidate,
                                          const ClusteringParams& params);

/// Accepted iff size >= min_points and candidate ratio >= ratio_threshold;
/// RejectedSize wins when both fail.
Verdict validate_cluster(std::size_t points, std::size_t candidates, double ratio_threshold,
                         std::size_t min_points);
std::vector<Cluster> validate_clusters(std::vector<Cluster> clusters,
                                       const ClusteringParams& params);

}  // namespace dynlabel
