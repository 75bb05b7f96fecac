// Copyright 2026 The dynlabel Authors
// SPDX-License-Identifier: Apache-2.0
//
// Two-pass offline labeling: a free-space pass builds the voxel grid prior,
// then an occupancy pass detects free->occupied changes and turns them into
// validated dynamic clusters.

#pragma once

#include <cstdint>
#include <deque>
#include <filesystem>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "dynlabel/dynamic_clustering.hpp"
#include "dynlabel/ground_segmentation.hpp"
#include "dynlabel/labels.hpp"
#include "dynlabel/scan_model.hpp"
#include "dynlabel/voxel_grid.hpp"

namespace dynlabel {

struct SequenceConfig {
  double voxel_size = 0.3;
  std::uint32_t window = 5;
  double ratio_threshold = 0.6;
  std::uint32_t min_cluster_points = 5;
  double min_seed_diameter = 0.2;
  double seed_radius_factor = 2.0;
  double ground_max_elevation_deg = 30.0;
  double ground_inlier_threshold = 0.25;
  double ground_growth_deg = 10.0;
  double cluster_beta_deg = 10.0;
  /// Feed accepted-cluster voxels of scan n-1 back as candidates for scan n.
  bool use_feedback = true;
  /// Write label 2 for ground/ceiling points.
  bool emit_ground_debug = false;
  std::uint64_t seed = 0;
  /// 0 = one per hardware core.
  unsigned threads = 1;

  /// Throws Error(kInvalidConfig).
  void validate() const;

  /// Sets one field from its key=value text form; throws kInvalidConfig on an
  /// unknown key or malformed value.
  void set(const std::string& key, const std::string& value);
  /// Every field as key -> text, in a stable order.
  std::map<std::string, std::string> to_map() const;

  GroundParams ground_params() const;
  ClusteringParams clustering_params() const;
};

/// Flat `key = value` lines; `#` starts a comment.
SequenceConfig parse_config(const std::string& text, SequenceConfig base = {});
SequenceConfig load_config(const std::filesystem::path& path, SequenceConfig base = {});

/// Random-access scan provider; scans are loaded on demand so sequences are
/// streamed rather than held in memory.
class ScanSource {
 public:
  virtual ~ScanSource() = default;
  virtual std::size_t size() const = 0;
  virtual OrganizedScan load(std::size_t i) const = 0;
  /// Basename used for the label file.
  virtual std::string name(std::size_t i) const;
};

class DirectoryScanSource : public ScanSource {
 public:
  explicit DirectoryScanSource(const std::filesystem::path& dir);
  std::size_t size() const override { return files_.size(); }
  OrganizedScan load(std::size_t i) const override;
  std::string name(std::size_t i) const override;
  const std::vector<std::filesystem::path>& files() const { return files_; }

 private:
  std::vector<std::filesystem::path> files_;
};

class FunctionScanSource : public ScanSource {
 public:
  FunctionScanSource(std::size_t n, std::function<OrganizedScan(std::size_t)> fn)
      : n_(n), fn_(std::move(fn)) {}
  std::size_t size() const override { return n_; }
  OrganizedScan load(std::size_t i) const override { return fn_(i); }

 private:
  std::size_t n_;
  std::function<OrganizedScan(std::size_t)> fn_;
};

struct StageTimings {
  double io = 0.0;
  double undistort = 0.0;
  double integrate = 0.0;
  double ground = 0.0;
  double cluster = 0.0;
  double validate = 0.0;

  double total() const { return io + undistort + integrate + ground + cluster + validate; }
};

/// Diagnostics for one occupancy-pass scan.
struct ScanReport {
  std::uint64_t scan_id = 0;
  std::size_t candidate_voxels = 0;
  std::size_t candidate_points = 0;
  std::size_t feedback_points = 0;
  std::size_t ground_points = 0;
  /// Sorted pixel indices of this scan's candidate points.
  std::vector<std::size_t> candidates;
  std::vector<Cluster> clusters;
  std::size_t dynamic_points = 0;
  StageTimings timings;
};

/// Pass 1: integrates every scan in order with IntegrationMode::kFreeSpaceOnly.
VoxelGrid run_free_space_pass(const ScanSource& scans, const Trajectory& traj,
                              const SequenceConfig& cfg,
                              std::vector<StageTimings>* timings = nullptr);

/// Pass 2 for one scan at a time, holding the candidate window and the
/// feedback voxels between calls. Scans must arrive in temporal order.
class OccupancyLabeler {
 public:
  OccupancyLabeler(VoxelGrid& grid, const Trajectory& traj, const SequenceConfig& cfg);

  LabeledScan process(const OrganizedScan& scan, std::uint64_t scan_id,
                      ScanReport* report = nullptr);

 private:
  VoxelGrid& grid_;
  const Trajectory& traj_;
  SequenceConfig cfg_;
  std::deque<std::vector<VoxelIndex>> window_;
  std::vector<VoxelIndex> feedback_;
};

/// Pass 2 over the whole sequence.
std::vector<LabeledScan> run_occupancy_pass(const ScanSource& scans, const Trajectory& traj,
                                            VoxelGrid& grid, const SequenceConfig& cfg,
                                            std::vector<ScanReport>* reports = nullptr);

struct LabelSummary {
  std::size_t scan_count = 0;
  std::uint64_t valid_points = 0;
  std::uint64_t dynamic_points = 0;
  double dynamic_fraction = 0.0;
  double mean_seconds_per_scan = 0.0;
  /// Per-scan occupancy-pass stage timings (pass-1 time is folded into
  /// mean_seconds_per_scan).
  std::vector<StageTimings> stage_timings;
};

/// End-to-end driver: reads scans/trajectory, writes `<basename>.label` per
/// scan plus manifest.json into out_dir. Outputs are staged and moved into
/// place only on success.
LabelSummary label_sequence(const std::filesystem::path& scan_dir,
                            const std::filesystem::path& traj_path, const SequenceConfig& cfg,
                            const std::filesystem::path& out_dir);

/// Mixes a base seed with a scan id for per-scan random streams.
std::uint64_t scan_seed(std::uint64_t base, std::uint64_t scan_id);

}  // namespace dynlabel
