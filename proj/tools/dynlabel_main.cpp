// Copyright 2026 The dynlabel Authors
// SPDX-License-Identifier: Apache-2.0
//
// dynlabel: simulate | label | eval | clean-map | export-ply

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "dynlabel/errors.hpp"
#include "dynlabel/evaluation.hpp"
#include "dynlabel/io.hpp"
#include "dynlabel/labeling_pipeline.hpp"
#include "dynlabel/map_builder.hpp"
#include "dynlabel/scene.hpp"
#include "dynlabel/simulator.hpp"

namespace fs = std::filesystem;
using namespace dynlabel;

namespace {

constexpr int kExitValidation = 1;
constexpr int kExitIo = 2;

struct GlobalOptions {
  std::string config;
  std::optional<unsigned> threads;
  std::optional<std::uint64_t> seed;
};

struct SequenceInputs {
  std::string sequence;
  std::string scans;
  std::string trajectory;

  void add_to(CLI::App* app) {
    app->add_option("--sequence", sequence,
                    "Sequence directory holding scans/ and trajectory.txt");
    app->add_option("--scans", scans, "Directory of .scan files");
    app->add_option("--trajectory", trajectory, "Trajectory file (timestamp tx ty tz qx qy qz qw)");
  }
  fs::path scan_dir() const {
    if (!scans.empty()) return scans;
    if (!sequence.empty()) return fs::path(sequence) / "scans";
    throw Error(ErrorCode::kInvalidArgument, "--scans or --sequence is required");
  }
  fs::path trajectory_path() const {
    if (!trajectory.empty()) return trajectory;
    if (!sequence.empty()) return fs::path(sequence) / "trajectory.txt";
    throw Error(ErrorCode::kInvalidArgument, "--trajectory or --sequence is required");
  }
};

SequenceConfig effective_config(const GlobalOptions& g, const std::vector<std::string>& sets) {
  SequenceConfig cfg;
  if (!g.config.empty()) {
    cfg = load_config(g.config);
  }
  for (const auto& kv : sets) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) {
      throw Error(ErrorCode::kInvalidConfig, "--set expects key=value, got '" + kv + "'");
    }
    cfg.set(kv.substr(0, eq), kv.substr(eq + 1));
  }
  if (g.threads) cfg.threads = *g.threads;
  if (g.seed) cfg.seed = *g.seed;
  cfg.validate();
  return cfg;
}

int run_simulate(const GlobalOptions& g, const std::string& scene_path, const std::string& preset,
                 const std::string& out, std::optional<std::uint64_t> seed) {
  if (scene_path.empty() == preset.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "give exactly one of --scene or --preset");
  }
  SceneSpec scene = scene_path.empty() ? preset_scene(preset) : load_scene(scene_path);
  if (seed) {
    scene.seed = *seed;
  } else if (g.seed) {
    scene.seed = *g.seed;
  }
  const SequenceFiles files = generate_sequence(scene, out, g.threads.value_or(1));
  std::cout << "wrote " << files.scan_count << " scans of '" << scene.name << "' to " << out
            << "\n";
  return 0;
}

int run_label(const GlobalOptions& g, const SequenceInputs& in, const std::string& out,
              const std::vector<std::string>& sets, bool timings) {
  const SequenceConfig cfg = effective_config(g, sets);
  const LabelSummary s = label_sequence(in.scan_dir(), in.trajectory_path(), cfg, out);
  std::printf("scans %zu\nvalid_points %llu\ndynamic_points %llu\ndynamic_fraction %.6f\n"
              "mean_seconds_per_scan %.4f\n",
              s.scan_count, static_cast<unsigned long long>(s.valid_points),
              static_cast<unsigned long long>(s.dynamic_points), s.dynamic_fraction,
              s.mean_seconds_per_scan);
  if (timings) {
    std::cout << throughput_text(measure_throughput(s.stage_timings));
  }
  return 0;
}

int run_eval(const std::string& pred, const std::string& truth, const std::string& scans,
             const std::string& report, std::uint32_t rows, std::uint32_t cols) {
  std::optional<fs::path> scan_dir;
  if (!scans.empty()) {
    scan_dir = scans;
  }
  const IoUReport r = evaluate_directories(pred, truth, scan_dir, rows, cols);
  if (!report.empty()) {
    const bool json = fs::path(report).extension() == ".json";
    write_text(report, json ? iou_report_json(r) : iou_report_text(r));
  }
  std::printf("sequence_iou %.6f\nmean_iou %.6f\ntp %llu fp %llu fn %llu\n", r.sequence_iou,
              r.mean_iou, static_cast<unsigned long long>(r.tp),
              static_cast<unsigned long long>(r.fp), static_cast<unsigned long long>(r.fn));
  return 0;
}

int run_clean_map(const SequenceInputs& in, const std::string& labels_dir, const std::string& out,
                  const std::string& dynamic_out, const MapParams& params) {
  const DirectoryScanSource scans(in.scan_dir());
  const Trajectory traj = read_trajectory(in.trajectory_path());
  const fs::path ldir = labels_dir;
  std::uint32_t rows = 0;
  std::uint32_t cols = 0;
  if (scans.size() > 0) {
    const OrganizedScan head = scans.load(0);
    rows = head.rows();
    cols = head.cols();
  }
  auto labels = [&](std::size_t k) {
    return read_labels(ldir / (scans.name(k) + ".label"), rows, cols, k);
  };
  MapParams p = params;
  p.dynamic_layer = !dynamic_out.empty();
  const AggregateMap map = build_clean_map(scans, labels, traj, p);
  write_ply(out, map.static_points);
  if (!dynamic_out.empty()) {
    write_ply(dynamic_out, map.dynamic_points);
  }
  std::cout << "static points " << map.static_points.size() << "\ndynamic points "
            << map.dynamic_points.size() << "\n";
  return 0;
}

int run_export_ply(const std::string& scan_path, const std::string& labels_path,
                   const std::string& traj_path, const std::string& out) {
  OrganizedScan scan = read_scan(scan_path);
  if (!traj_path.empty()) {
    scan = undistort(scan, read_trajectory(traj_path));
  }
  LabeledScan labels;
  if (labels_path.empty()) {
    labels.rows = scan.rows();
    labels.cols = scan.cols();
    labels.labels.assign(scan.size(), kLabelStatic);
  } else {
    labels = read_labels(labels_path, scan.rows(), scan.cols());
  }
  const auto pts = labeled_points(scan, labels);
  write_ply(out, pts, true);
  std::cout << "wrote " << pts.size() << " points to " << out << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Offline dynamic-object labeling for organized LiDAR scans"};
  app.require_subcommand(1);
  app.fallthrough();
  GlobalOptions g;
  app.add_option("--config", g.config, "key=value labeling config file");
  app.add_option("--threads", g.threads, "Worker threads, 0 = one per core");
  app.add_option("--seed", g.seed, "Seed for all stochastic components");

  auto* sim = app.add_subcommand("simulate", "Render a synthetic sequence");
  std::string scene_path;
  std::string preset;
  std::string sim_out;
  std::optional<std::uint64_t> sim_seed;
  sim->add_option("--scene", scene_path, "Scene JSON file");
  sim->add_option("--preset", preset, "Built-in scene")
      ->check(CLI::IsMember(preset_names()));
  sim->add_option("--out", sim_out, "Output directory")->required();
  sim->add_option("--seed", sim_seed, "Override the scene seed");

  auto* label = app.add_subcommand("label", "Label a scan sequence");
  SequenceInputs label_in;
  label_in.add_to(label);
  std::string label_out;
  std::vector<std::string> sets;
  bool timings = false;
  label->add_option("--out", label_out, "Output directory for .label files")->required();
  label->add_option("--set", sets, "Config override key=value (repeatable)");
  label->add_flag("--timings", timings, "Print the per-stage timing breakdown");

  auto* eval = app.add_subcommand("eval", "Score predicted labels against ground truth");
  std::string pred_dir;
  std::string truth_dir;
  std::string eval_scans;
  std::string report;
  std::uint32_t rows = 0;
  std::uint32_t cols = 0;
  eval->add_option("--pred", pred_dir, "Predicted label directory")->required();
  eval->add_option("--truth", truth_dir, "Ground-truth label directory")->required();
  eval->add_option("--report", report, "Report path (.json for JSON, otherwise text)");
  eval->add_option("--scans", eval_scans, "Scan directory (dimensions and validity)");
  eval->add_option("--rows", rows, "Rows when no scans are given");
  eval->add_option("--cols", cols, "Columns when no scans are given");

  auto* clean = app.add_subcommand("clean-map", "Aggregate static points into a PLY map");
  SequenceInputs clean_in;
  clean_in.add_to(clean);
  std::string labels_dir;
  std::string map_out;
  std::string dyn_out;
  MapParams map_params;
  clean->add_option("--labels", labels_dir, "Label directory")->required();
  clean->add_option("--out", map_out, "Static map PLY")->required();
  clean->add_option("--dynamic-out", dyn_out, "Dynamic layer PLY");
  clean->add_option("--max-range", map_params.max_range, "Sensor range filter (m)");
  clean->add_option("--downsample", map_params.downsample, "Downsample voxel (m)");

  auto* exp = app.add_subcommand("export-ply", "Convert one labeled scan to colorized PLY");
  std::string exp_scan;
  std::string exp_labels;
  std::string exp_traj;
  std::string exp_out;
  exp->add_option("--scan", exp_scan, "Scan file")->required();
  exp->add_option("--labels", exp_labels, "Label file (default all static)");
  exp->add_option("--trajectory", exp_traj, "Undistort into the world frame");
  exp->add_option("--out", exp_out, "Output PLY")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitValidation;
  }

  try {
    if (*sim) return run_simulate(g, scene_path, preset, sim_out, sim_seed);
    if (*label) return run_label(g, label_in, label_out, sets, timings);
    if (*eval) return run_eval(pred_dir, truth_dir, eval_scans, report, rows, cols);
    if (*clean) return run_clean_map(clean_in, labels_dir, map_out, dyn_out, map_params);
    if (*exp) return run_export_ply(exp_scan, exp_labels, exp_traj, exp_out);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return e.is_io() ? kExitIo : kExitValidation;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitIo;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitValidation;
  }
  return kExitValidation;
}
