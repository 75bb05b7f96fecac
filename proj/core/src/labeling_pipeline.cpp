// Copyright 2026 The dynlabel Authors
// SPDX-License-Identifier: Apache-2.0

#include "dynlabel/labeling_pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <unordered_set>

#include "dynlabel/errors.hpp"
#include "dynlabel/io.hpp"

namespace dynlabel {

namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

using VoxelSet = std::unordered_set<VoxelIndex, VoxelIndexHash>;

// Rethrows with the scan name prepended so failures point at their input.
template <typename Fn>
auto with_scan_context(const ScanSource& scans, std::size_t i, Fn&& fn) {
  try {
    return fn();
  } catch (const Error& e) {
    throw Error(e.code(), "scan " + scans.name(i) + ": " + e.what());
  }
}

}  // namespace

std::uint64_t scan_seed(std::uint64_t base, std::uint64_t scan_id) {
  std::uint64_t x = base ^ (scan_id * 0x9E3779B97F4A7C15ULL);
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

std::string ScanSource::name(std::size_t i) const {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%06zu", i);
  return buf;
}

DirectoryScanSource::DirectoryScanSource(const fs::path& dir) : files_(list_files(dir, ".scan")) {}

OrganizedScan DirectoryScanSource::load(std::size_t i) const { return read_scan(files_.at(i)); }

std::string DirectoryScanSource::name(std::size_t i) const {
  return files_.at(i).stem().string();
}

VoxelGrid run_free_space_pass(const ScanSource& scans, const Trajectory& traj,
                              const SequenceConfig& cfg, std::vector<StageTimings>* timings) {
  cfg.validate();
  VoxelGrid grid(cfg.voxel_size);
  for (std::size_t i = 0; i < scans.size(); ++i) {
    StageTimings st;
    with_scan_context(scans, i, [&] {
      auto t0 = Clock::now();
      const OrganizedScan scan = scans.load(i);
      st.io = seconds_since(t0);
      t0 = Clock::now();
      const OrganizedScan world = undistort(scan, traj);
      const Vec3 origin = interpolate_pose(traj, scan_reference_time(scan)).translation;
      st.undistort = seconds_since(t0);
      t0 = Clock::now();
      const BlockedRays blocked = detect_blocked_rays(scan, cfg.voxel_size);
      integrate_scan(grid, world, blocked, origin, IntegrationMode::kFreeSpaceOnly);
      st.integrate = seconds_since(t0);
      return 0;
    });
    if (timings != nullptr) {
      timings->push_back(st);
    }
  }
  return grid;
}

OccupancyLabeler::OccupancyLabeler(VoxelGrid& grid, const Trajectory& traj,
                                   const SequenceConfig& cfg)
    : grid_(grid), traj_(traj), cfg_(cfg) {
  cfg_.validate();
  if (grid.voxel_size() != cfg.voxel_size) {
    throw Error(ErrorCode::kInvalidArgument, "grid voxel size differs from config");
  }
}

LabeledScan OccupancyLabeler::process(const OrganizedScan& scan, std::uint64_t scan_id,
                                      ScanReport* report) {
  ScanReport local;
  ScanReport& rep = report != nullptr ? *report : local;
  rep = ScanReport{};
  rep.scan_id = scan_id;
  const double vs = cfg_.voxel_size;

  auto t0 = Clock::now();
  const OrganizedScan world = undistort(scan, traj_);
  const Vec3 origin = interpolate_pose(traj_, scan_reference_time(scan)).translation;
  rep.timings.undistort = seconds_since(t0);

  t0 = Clock::now();
  const BlockedRays blocked = detect_blocked_rays(scan, vs);
  ScanIntegrationResult res =
      integrate_scan(grid_, world, blocked, origin, IntegrationMode::kOccupancy);
  rep.candidate_voxels = res.candidate_voxels.size();
  window_.push_back(std::move(res.candidate_voxels));
  while (window_.size() > static_cast<std::size_t>(cfg_.window) + 1) {
    window_.pop_front();
  }
  VoxelSet window_set;
  for (const auto& w : window_) {
    window_set.insert(w.begin(), w.end());
  }
  const VoxelSet feedback_set(feedback_.begin(), feedback_.end());
  rep.timings.integrate = seconds_since(t0);

  t0 = Clock::now();
  const GroundMask ground =
      segment_ground(world, origin, cfg_.ground_params(), scan_seed(cfg_.seed, scan_id));
  rep.timings.ground = seconds_since(t0);

  t0 = Clock::now();
  std::vector<std::uint8_t> is_candidate(scan.size(), 0);
  CandidatePointSet cands;
  cands.scan_id = scan_id;
  if (!window_set.empty() || !feedback_set.empty()) {
    for (std::size_t i = 0; i < world.size(); ++i) {
      const PointRecord& p = world[i];
      if (!p.valid) {
        continue;
      }
      if (ground[i] != 0) {
        ++rep.ground_points;
        continue;
      }
      const VoxelIndex v = grid_.index_of(p.position());
      bool cand = window_set.contains(v);
      if (!cand && cfg_.use_feedback && feedback_set.contains(v) && grid_.query(v).ever_free) {
        cand = true;
        ++rep.feedback_points;
      }
      if (cand) {
        is_candidate[i] = 1;
        cands.indices.push_back(i);
      }
    }
  }
  rep.candidate_points = cands.indices.size();
  rep.candidates = cands.indices;
  const ClusteringParams cp = cfg_.clustering_params();
  const auto seeds = cluster_candidates_stage1(cands, world, cp);
  std::vector<Cluster> clusters = grow_clusters_stage2(seeds, scan, ground, is_candidate, cp);
  rep.timings.cluster = seconds_since(t0);

  t0 = Clock::now();
  clusters = validate_clusters(std::move(clusters), cp);
  LabeledScan out;
  out.scan_id = scan_id;
  out.rows = scan.rows();
  out.cols = scan.cols();
  out.labels.assign(scan.size(), kLabelStatic);
  if (cfg_.emit_ground_debug) {
    for (std::size_t i = 0; i < scan.size(); ++i) {
      if (ground[i] != 0) {
        out.labels[i] = kLabelGround;
      }
    }
  }
  feedback_.clear();
  for (const auto& c : clusters) {
    if (c.verdict != Verdict::kAccepted) {
      continue;
    }
    for (const std::size_t i : c.point_indices) {
      out.labels[i] = kLabelDynamic;
      feedback_.push_back(grid_.index_of(world[i].position()));
      ++rep.dynamic_points;
    }
  }
  std::sort(feedback_.begin(), feedback_.end());
  feedback_.erase(std::unique(feedback_.begin(), feedback_.end()), feedback_.end());
  rep.timings.validate = seconds_since(t0);
  rep.clusters = std::move(clusters);
  return out;
}

std::vector<LabeledScan> run_occupancy_pass(const ScanSource& scans, const Trajectory& traj,
                                            VoxelGrid& grid, const SequenceConfig& cfg,
                                            std::vector<ScanReport>* reports) {
  OccupancyLabeler labeler(grid, traj, cfg);
  std::vector<LabeledScan> out;
  out.reserve(scans.size());
  for (std::size_t i = 0; i < scans.size(); ++i) {
    with_scan_context(scans, i, [&] {
      const auto t0 = Clock::now();
      const OrganizedScan scan = scans.load(i);
      const double io = seconds_since(t0);
      ScanReport rep;
      out.push_back(labeler.process(scan, i, &rep));
      rep.timings.io = io;
      if (reports != nullptr) {
        reports->push_back(std::move(rep));
      }
      return 0;
    });
  }
  return out;
}

namespace {

// Scratch directory removed on scope exit.
class StagingDir {
 public:
  explicit StagingDir(fs::path p) : path_(std::move(p)) {
    std::error_code ec;
    fs::remove_all(path_, ec);
    fs::create_directories(path_, ec);
    if (ec) {
      throw Error(ErrorCode::kIo, "cannot create " + path_.string() + ": " + ec.message());
    }
  }
  ~StagingDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  StagingDir(const StagingDir&) = delete;
  StagingDir& operator=(const StagingDir&) = delete;
  const fs::path& path() const { return path_; }

 private:
  fs::path path_;
};

std::string sequence_id_for(const fs::path& scan_dir) {
  const fs::path input_manifest = scan_dir.parent_path() / "manifest.json";
  std::error_code ec;
  if (fs::is_regular_file(input_manifest, ec)) {
    try {
      return read_manifest(input_manifest).sequence_id;
    } catch (const Error&) {
      // Not one of ours; fall back to the directory name.
    }
  }
  fs::path p = fs::absolute(scan_dir).lexically_normal();
  if (!p.has_filename()) {
    p = p.parent_path();
  }
  if (p.filename() == "scans" && p.has_parent_path()) {
    return p.parent_path().filename().string();
  }
  return p.filename().string();
}

}  // namespace

LabelSummary label_sequence(const fs::path& scan_dir, const fs::path& traj_path,
                            const SequenceConfig& cfg, const fs::path& out_dir) {
  cfg.validate();
  const auto start = Clock::now();
  const Trajectory traj = read_trajectory(traj_path);
  const DirectoryScanSource scans(scan_dir);

  fs::path out_abs = fs::absolute(out_dir).lexically_normal();
  if (!out_abs.has_filename()) {
    out_abs = out_abs.parent_path();
  }
  StagingDir staging(out_abs.parent_path() / ("." + out_abs.filename().string() + ".staging"));

  LabelSummary summary;
  summary.scan_count = scans.size();
  VoxelGrid grid = run_free_space_pass(scans, traj, cfg);
  OccupancyLabeler labeler(grid, traj, cfg);

  Manifest manifest;
  manifest.sequence_id = sequence_id_for(scan_dir);
  manifest.scan_count = scans.size();
  manifest.parameters = cfg.to_map();
  std::vector<std::string> names;
  for (std::size_t i = 0; i < scans.size(); ++i) {
    with_scan_context(scans, i, [&] {
      auto t0 = Clock::now();
      const OrganizedScan scan = scans.load(i);
      const double io_in = seconds_since(t0);
      ScanReport rep;
      const LabeledScan labels = labeler.process(scan, i, &rep);
      t0 = Clock::now();
      const std::string name = scans.name(i) + ".label";
      write_labels(labels, staging.path() / name);
      manifest.files.push_back(hash_file(staging.path(), staging.path() / name));
      names.push_back(name);
      rep.timings.io = io_in + seconds_since(t0);
      summary.valid_points += scan.valid_count();
      summary.dynamic_points += rep.dynamic_points;
      summary.stage_timings.push_back(rep.timings);
      return 0;
    });
  }
  summary.dynamic_fraction =
      summary.valid_points == 0
          ? 0.0
          : static_cast<double>(summary.dynamic_points) / static_cast<double>(summary.valid_points);
  manifest.info["valid_points"] = std::to_string(summary.valid_points);
  manifest.info["dynamic_points"] = std::to_string(summary.dynamic_points);
  {
    char crc[9];
    std::snprintf(crc, sizeof(crc), "%08x", crc32_file(traj_path));
    manifest.info["trajectory_crc32"] = crc;
  }
  write_manifest(manifest, staging.path() / "manifest.json");

  std::error_code ec;
  fs::create_directories(out_abs, ec);
  if (ec) {
    throw Error(ErrorCode::kIo, "cannot create " + out_abs.string() + ": " + ec.message());
  }
  names.push_back("manifest.json");
  for (const auto& n : names) {
    fs::rename(staging.path() / n, out_abs / n, ec);
    if (ec) {
      throw Error(ErrorCode::kIo, "cannot move " + n + " into " + out_abs.string() + ": " +
                                      ec.message());
    }
  }
  summary.mean_seconds_per_scan =
      summary.scan_count == 0 ? 0.0 : seconds_since(start) / static_cast<double>(summary.scan_count);
  return summary;
}

}  // namespace dynlabel
