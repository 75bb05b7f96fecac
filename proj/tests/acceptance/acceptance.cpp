// Copyright 2026 The dynlabel Authors
// SPDX-License-Identifier: Apache-2.0
//
// End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
// exits non-zero if any selected criterion fails, except those listed with
// --expect-fail, which must fail.

#include <algorithm>
#include <array>
#include <bit>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include <CLI11.hpp>

#include "dynlabel/dynamic_clustering.hpp"
#include "dynlabel/evaluation.hpp"
#include "dynlabel/ground_segmentation.hpp"
#include "dynlabel/io.hpp"
#include "dynlabel/labeling_pipeline.hpp"
#include "dynlabel/map_builder.hpp"
#include "dynlabel/simulator.hpp"
#include "test_support.hpp"

namespace fs = std::filesystem;
using namespace dynlabel;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof(buf), f, args...);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// Simulated sequences are generated once and shared between criteria.
class Workspace {
 public:
  explicit Workspace(fs::path root) : root_(std::move(root)) { fs::create_directories(root_); }

  const SequenceFiles& sequence(const std::string& preset) {
    auto it = sequences_.find(preset);
    if (it == sequences_.end()) {
      it = sequences_.emplace(preset, generate_sequence(preset_scene(preset), root_ / preset))
               .first;
    }
    return it->second;
  }

  struct Labeled {
    fs::path dir;
    LabelSummary summary;
  };
  const Labeled& labels(const std::string& preset) {
    auto it = labeled_.find(preset);
    if (it == labeled_.end()) {
      const SequenceFiles& seq = sequence(preset);
      const fs::path out = root_ / (preset + "-labels");
      LabelSummary s = label_sequence(seq.scan_dir, seq.trajectory, SequenceConfig{}, out);
      it = labeled_.emplace(preset, Labeled{out, std::move(s)}).first;
    }
    return it->second;
  }

  const fs::path& root() const { return root_; }

 private:
  fs::path root_;
  std::unordered_map<std::string, SequenceFiles> sequences_;
  std::unordered_map<std::string, Labeled> labeled_;
};

Outcome criterion1(Workspace& ws) {
  const auto t0 = std::chrono::steady_clock::now();
  const SceneSpec scene = preset_scene("movers-mixed");
  std::set<MoverShape> shapes;
  bool vertical = false;
  for (const auto& m : scene.movers) {
    shapes.insert(m.shape);
    for (const auto& w : m.path.waypoints()) {
      vertical |= std::abs(w.position.z() - m.path.waypoints().front().position.z()) > 0.5;
    }
  }
  const SequenceFiles& seq = ws.sequence("movers-mixed");
  const auto& lab = ws.labels("movers-mixed");
  const IoUReport r = evaluate_directories(lab.dir, seq.truth_dir, seq.scan_dir);
  const bool setup = seq.scan_count >= 200 && shapes.size() >= 4 && vertical &&
                     scene.noise_sigma == 0.02;
  return {setup && r.sequence_iou >= 0.90,
          fmt("movers-mixed IoU %.4f (mean per-scan %.4f) over %zu scans, %zu shapes, "
              "vertical=%d, %.0f s",
              r.sequence_iou, r.mean_iou, seq.scan_count, shapes.size(), vertical ? 1 : 0,
              seconds_since(t0))};
}

Outcome criterion2(Workspace& ws) {
  const auto& lab = ws.labels("static-room");
  return {lab.summary.scan_count == 100 && lab.summary.dynamic_points == 0,
          fmt("static-room: %llu dynamic points over %zu scans",
              static_cast<unsigned long long>(lab.summary.dynamic_points),
              lab.summary.scan_count)};
}

// During a pause the walker's motion-based truth is static, so coverage is
// scored against instance truth: every point whose first hit is a mover.
Outcome criterion3(Workspace& ws) {
  const SceneSpec scene = preset_scene("stop-and-go");
  const SequenceFiles& seq = ws.sequence("stop-and-go");
  const auto& lab = ws.labels("stop-and-go");
  const auto pred_files = list_files(lab.dir, ".label");
  std::size_t pause_scans = 0;
  double worst = 1.0;
  std::uint64_t worst_id = 0;
  double sum = 0.0;
  for (std::size_t k = 0; k < seq.scan_count; ++k) {
    const RenderedScan rs = render_scan_index(scene, k);
    std::size_t walker = 0;
    std::size_t walker_moving = 0;
    for (std::size_t i = 0; i < rs.scan.size(); ++i) {
      if (rs.truth.instance[i] == 1) {
        ++walker;
        walker_moving += rs.truth.labels[i];
      }
    }
    if (walker == 0 || walker_moving > 0) {
      continue;
    }
    const LabeledScan pred = read_labels(pred_files[k], rs.scan.rows(), rs.scan.cols(), k);
    std::uint64_t tp = 0;
    std::uint64_t fp = 0;
    std::uint64_t fn = 0;
    for (std::size_t i = 0; i < rs.scan.size(); ++i) {
      if (!rs.scan[i].valid) {
        continue;
      }
      const bool t = rs.truth.instance[i] != 0;
      const bool p = pred.is_dynamic(i);
      tp += (t && p) ? 1 : 0;
      fp += (!t && p) ? 1 : 0;
      fn += (t && !p) ? 1 : 0;
    }
    const double iou = iou_from_counts(tp, fp, fn);
    ++pause_scans;
    sum += iou;
    if (iou < worst) {
      worst = iou;
      worst_id = k;
    }
  }
  return {pause_scans > 0 && worst >= 0.8,
          fmt("%zu pause scans, min per-scan IoU %.4f (scan %llu), mean %.4f", pause_scans, worst,
              static_cast<unsigned long long>(worst_id),
              pause_scans ? sum / static_cast<double>(pause_scans) : 0.0)};
}

Outcome criterion4(Workspace& ws) {
  const SequenceFiles& seq = ws.sequence("movers-mixed");
  const auto& lab = ws.labels("movers-mixed");
  const OrganizedScan head = read_scan(list_files(seq.scan_dir, ".scan").front());
  std::string stages;
  for (const auto& s : measure_throughput(lab.summary.stage_timings)) {
    stages += fmt(" %s=%.3f/%.3f", s.stage.c_str(), s.mean, s.p95);
  }
  const bool full_res = head.rows() == 64 && head.cols() == 2048;
  return {full_res && lab.summary.mean_seconds_per_scan < 2.0,
          fmt("%ux%u scans, mean %.3f s/scan; pass-2 stages mean/p95 s:%s", head.rows(),
              head.cols(), lab.summary.mean_seconds_per_scan, stages.c_str())};
}

Outcome criterion5() {
  std::mt19937_64 rng(0x7a3c5eULL);
  std::uniform_real_distribution<double> pos(-6.0, 6.0);
  std::uniform_real_distribution<double> len(0.05, 9.0);
  std::uniform_real_distribution<double> vsize(0.1, 0.5);
  std::normal_distribution<double> gauss(0.0, 1.0);
  constexpr int kRays = 10000;
  int checked = 0;
  int excluded = 0;
  int mismatched = 0;
  int attempts = 0;
  while (checked < kRays && attempts < 4 * kRays) {
    ++attempts;
    const double vs = (attempts % 2 == 0) ? 0.3 : vsize(rng);
    const Vec3 o(pos(rng), pos(rng), pos(rng));
    Vec3 dir(gauss(rng), gauss(rng), gauss(rng));
    dir.normalize();
    const Vec3 e = o + len(rng) * dir;
    const auto oracle = testing::dense_traversal_oracle(o, e, vs, 1e-3);
    if (!oracle) {
      ++excluded;
      continue;
    }
    ++checked;
    std::vector<VoxelIndex> got = traverse_ray(o, e, vs);
    std::vector<VoxelIndex> want = *oracle;
    std::sort(got.begin(), got.end());
    std::sort(want.begin(), want.end());
    mismatched += got == want ? 0 : 1;
  }
  return {checked == kRays && mismatched == 0,
          fmt("%d rays checked, %d mismatches, %d excluded near edges/corners", checked,
              mismatched, excluded)};
}

Outcome criterion6() {
  constexpr std::uint32_t kRows = 16;
  constexpr std::uint32_t kCols = 96;
  constexpr double kVoxel = 0.3;
  std::mt19937_64 rng(0x51c0ffeeULL);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  int identical = 0;
  std::size_t candidates = 0;
  for (int s = 0; s < 20; ++s) {
    const Vec3 origin(u(rng) * 4.0 - 2.0, u(rng) * 4.0 - 2.0, 1.0 + u(rng));
    // The prior scan frees long rays; the test scan lands some points inside
    // that free space so there are candidates to compare.
    std::vector<double> far(kRows * kCols);
    std::vector<double> near(kRows * kCols);
    for (auto& r : far) r = 6.0 + 4.0 * u(rng);
    for (auto& r : near) {
      const double x = u(rng);
      r = x < 0.05 ? -1.0 : 1.0 + 9.0 * u(rng);
    }
    const OrganizedScan prior = testing::make_beam_scan(
        kRows, kCols, origin, 30.0, [&](auto r, auto c) { return far[r * kCols + c]; });
    const OrganizedScan scan = testing::make_beam_scan(
        kRows, kCols, origin, 30.0, [&](auto r, auto c) { return near[r * kCols + c]; });
    const BlockedRays blocked = detect_blocked_rays(scan, kVoxel);

    auto run = [&](const std::vector<std::size_t>& perm, std::string* dump) {
      VoxelGrid grid(kVoxel);
      integrate_scan(grid, prior, detect_blocked_rays(prior, kVoxel), origin,
                     IntegrationMode::kFreeSpaceOnly);
      std::vector<PointRecord> pts(scan.size());
      BlockedRays b;
      b.blocked_from.resize(scan.size());
      for (std::size_t j = 0; j < perm.size(); ++j) {
        pts[j] = scan[perm[j]];
        b.blocked_from[j] = blocked.blocked_from[perm[j]];
      }
      const OrganizedScan shuffled(kRows, kCols, 0.0, std::move(pts));
      ScanIntegrationResult res =
          integrate_scan(grid, shuffled, b, origin, IntegrationMode::kOccupancy);
      std::ostringstream os;
      grid.dump(os);
      *dump = os.str();
      return res;
    };

    std::vector<std::size_t> perm(scan.size());
    for (std::size_t i = 0; i < perm.size(); ++i) perm[i] = i;
    std::string base_dump;
    const ScanIntegrationResult base = run(perm, &base_dump);
    candidates += base.candidate_voxels.size();
    bool same = true;
    for (int p = 0; p < 5; ++p) {
      std::shuffle(perm.begin(), perm.end(), rng);
      std::string dump;
      const ScanIntegrationResult res = run(perm, &dump);
      same = same && dump == base_dump && res.candidate_voxels == base.candidate_voxels &&
             res.occupied_voxels == base.occupied_voxels;
    }
    identical += same ? 1 : 0;
  }
  return {identical == 20 && candidates > 0,
          fmt("%d/20 scans identical under 5 permutations each (%zu candidate voxels total)",
              identical, candidates)};
}

Outcome criterion7() {
  // Independent oracle in integer arithmetic: R_c >= 3/5  <=>  5c >= 3n.
  auto oracle = [](std::size_t n, std::size_t c) {
    if (n < 5) return Verdict::kRejectedSize;
    return 5 * c >= 3 * n ? Verdict::kAccepted : Verdict::kRejectedRatio;
  };
  std::mt19937_64 rng(0x7e57ULL);
  std::vector<Cluster> clusters;
  std::vector<std::pair<std::size_t, std::size_t>> cases = {
      {10, 6}, {5, 3}, {5, 5}, {4, 4}, {5, 2}, {15, 9}, {15, 8}, {1000, 600}, {1000, 599},
      {0, 0},  {3, 2}, {6, 4}, {6, 3}};
  for (int k = 0; k < 200000; ++k) {
    const std::size_t n = std::uniform_int_distribution<std::size_t>(0, 60)(rng);
    cases.emplace_back(n, std::uniform_int_distribution<std::size_t>(0, n)(rng));
  }
  for (const auto& [n, c] : cases) {
    Cluster cl;
    cl.point_indices.resize(n);
    for (std::size_t i = 0; i < n; ++i) cl.point_indices[i] = i;
    cl.candidate_count = c;
    clusters.push_back(std::move(cl));
  }
  const auto out = validate_clusters(clusters, ClusteringParams{});
  std::size_t wrong = 0;
  for (std::size_t k = 0; k < out.size(); ++k) {
    wrong += out[k].verdict == oracle(cases[k].first, cases[k].second) ? 0 : 1;
  }
  const bool boundaries = out[0].verdict == Verdict::kAccepted &&
                          out[1].verdict == Verdict::kAccepted &&
                          out[2].verdict == Verdict::kAccepted &&
                          out[3].verdict == Verdict::kRejectedSize;
  return {wrong == 0 && boundaries && out.size() == cases.size(),
          fmt("%zu clusters, %zu disagreements with the integer oracle; boundaries "
              "6/10, 3/5, 5/5 accepted, 4/4 size-rejected: %s",
              out.size(), wrong, boundaries ? "yes" : "no")};
}

Outcome criterion8() {
  // Truth from a noise-free render (floor hits have z == 0 exactly), scored
  // on the same rays rendered with noise.
  std::size_t floor_total = 0;
  std::size_t floor_masked = 0;
  std::size_t high_total = 0;
  std::size_t high_masked = 0;
  const Vec3 spots[] = {{0.0, 0.0, 1.5}, {-2.0, 3.0, 1.5}, {5.0, -3.0, 1.5}, {1.0, 4.0, 1.5}};
  for (const Vec3& at : spots) {
    const SceneSpec clean = testing::with_static_sensor(testing::floor_boxes_scene(64, 2048), at);
    SceneSpec noisy = clean;
    noisy.noise_sigma = 0.02;
    const RenderedScan truth = render_scan(clean, 0.0);
    const RenderedScan obs = render_scan(noisy, 0.0);
    const Trajectory traj = sensor_trajectory(noisy);
    const OrganizedScan world = undistort(obs.scan, traj);
    const GroundMask mask = segment_ground(world, at, GroundParams{}, 17);
    for (std::size_t i = 0; i < world.size(); ++i) {
      if (!truth.scan[i].valid || !world[i].valid) {
        continue;
      }
      const double zt = truth.scan[i].z + at.z();
      if (std::abs(zt) < 1e-4) {
        ++floor_total;
        floor_masked += mask[i];
      } else if (zt > 0.5) {
        ++high_total;
        high_masked += mask[i];
      }
    }
  }
  const double floor_rate = static_cast<double>(floor_masked) / static_cast<double>(floor_total);
  const double high_rate = static_cast<double>(high_masked) / static_cast<double>(high_total);
  return {floor_rate >= 0.99 && high_rate <= 0.005,
          fmt("floor masked %.4f (%zu/%zu), points > 0.5 m masked %.4f (%zu/%zu)", floor_rate,
              floor_masked, floor_total, high_rate, high_masked, high_total)};
}

struct FloatKey {
  std::array<std::uint32_t, 3> bits;
  bool operator==(const FloatKey&) const = default;
};
struct FloatKeyHash {
  std::size_t operator()(const FloatKey& k) const noexcept {
    std::uint64_t h = 0x9e3779b97f4a7c15ULL;
    for (auto b : k.bits) h = (h ^ b) * 0x100000001b3ULL;
    return static_cast<std::size_t>(h ^ (h >> 31));
  }
};
FloatKey key_of(float x, float y, float z) {
  return {{std::bit_cast<std::uint32_t>(x), std::bit_cast<std::uint32_t>(y),
           std::bit_cast<std::uint32_t>(z)}};
}

struct MapAudit {
  std::size_t points = 0;
  std::size_t traced = 0;
  std::size_t dynamic = 0;
  std::size_t far = 0;
  bool one_per_voxel = false;
  bool clean() const {
    return dynamic == 0 && far == 0 && one_per_voxel && traced == points;
  }
};

// Every map point is a real measurement, so its provenance (sensor range,
// truth label) is recovered by matching coordinates against the scans.
MapAudit audit_map(const SequenceFiles& seq,
                   const std::function<LabeledScan(std::size_t)>& labels) {
  const DirectoryScanSource scans(seq.scan_dir);
  const Trajectory traj = read_trajectory(seq.trajectory);
  const OrganizedScan head = scans.load(0);
  const auto truth_files = list_files(seq.truth_dir, ".label");
  const AggregateMap map = build_clean_map(scans, labels, traj, MapParams{});

  MapAudit a;
  a.points = map.static_points.size();
  std::unordered_set<FloatKey, FloatKeyHash> in_map;
  std::set<std::array<std::int64_t, 3>> voxels;
  for (const auto& p : map.static_points) {
    in_map.insert(key_of(p.x, p.y, p.z));
    voxels.insert({static_cast<std::int64_t>(std::floor(p.x / 0.1)),
                   static_cast<std::int64_t>(std::floor(p.y / 0.1)),
                   static_cast<std::int64_t>(std::floor(p.z / 0.1))});
  }
  a.one_per_voxel = voxels.size() == a.points;
  std::unordered_set<FloatKey, FloatKeyHash> seen;
  for (std::size_t k = 0; k < scans.size(); ++k) {
    const OrganizedScan world = undistort(scans.load(k), traj);
    const LabeledScan truth = read_labels(truth_files[k], head.rows(), head.cols(), k);
    for (std::size_t i = 0; i < world.size(); ++i) {
      const PointRecord& p = world[i];
      if (!p.valid) continue;
      const FloatKey key = key_of(p.x, p.y, p.z);
      if (!in_map.contains(key)) continue;
      if (seen.insert(key).second) ++a.traced;
      a.dynamic += truth.is_dynamic(i) ? 1 : 0;
      a.far += p.range > 30.0F ? 1 : 0;
    }
  }
  return a;
}

Outcome criterion9(Workspace& ws) {
  const SequenceFiles& seq = ws.sequence("movers-mixed");
  const auto& lab = ws.labels("movers-mixed");
  const OrganizedScan head = read_scan(list_files(seq.scan_dir, ".scan").front());
  const auto label_files = list_files(lab.dir, ".label");
  const auto truth_files = list_files(seq.truth_dir, ".label");
  const MapAudit pipeline = audit_map(seq, [&](std::size_t k) {
    return read_labels(label_files[k], head.rows(), head.cols(), k);
  });
  // Same map from ground-truth labels separates map construction from
  // labeling recall.
  const MapAudit oracle = audit_map(seq, [&](std::size_t k) {
    return read_labels(truth_files[k], head.rows(), head.cols(), k);
  });
  return {pipeline.clean(),
          fmt("movers-mixed map from pipeline labels: %zu points (%zu traced), %zu ground-truth "
              "dynamic, %zu beyond 30 m, one per 0.1 m voxel: %s; from truth labels: %zu points, "
              "%zu dynamic, %zu beyond 30 m, one per voxel: %s",
              pipeline.points, pipeline.traced, pipeline.dynamic, pipeline.far,
              pipeline.one_per_voxel ? "yes" : "no", oracle.points, oracle.dynamic, oracle.far,
              oracle.one_per_voxel ? "yes" : "no")};
}

Outcome criterion10(Workspace& ws) {
  const SequenceFiles& seq = ws.sequence("stop-and-go");
  const fs::path a = ws.root() / "repro-a";
  const fs::path b = ws.root() / "repro-b";
  SequenceConfig cfg;
  cfg.seed = 1234;
  label_sequence(seq.scan_dir, seq.trajectory, cfg, a);
  label_sequence(seq.scan_dir, seq.trajectory, cfg, b);
  std::vector<fs::path> files_a;
  for (const auto& e : fs::directory_iterator(a)) files_a.push_back(e.path().filename());
  std::sort(files_a.begin(), files_a.end());
  std::size_t differing = 0;
  std::size_t compared = 0;
  for (const auto& name : files_a) {
    ++compared;
    if (!fs::exists(b / name) || read_file(a / name) != read_file(b / name)) ++differing;
  }
  std::size_t count_b = 0;
  for ([[maybe_unused]] const auto& e : fs::directory_iterator(b)) ++count_b;
  const bool manifest = fs::exists(a / "manifest.json");
  return {differing == 0 && count_b == compared && manifest && compared == seq.scan_count + 1,
          fmt("%zu files compared (labels + manifest), %zu differ", compared, differing)};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"dynlabel acceptance checks"};
  std::string work = (fs::temp_directory_path() / "dynlabel-acceptance").string();
  std::vector<int> only;
  std::vector<int> expect_fail;
  bool keep = false;
  app.add_option("--work", work, "Scratch directory for generated sequences");
  app.add_option("--only", only, "Run only these criteria (1-10)");
  app.add_option("--expect-fail", expect_fail,
                 "Criteria known to fail; the exit code then flags only unexpected outcomes");
  app.add_flag("--keep", keep, "Keep the scratch directory");
  CLI11_PARSE(app, argc, argv);

  fs::remove_all(work);
  Workspace ws(work);
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria = {
      {"simulated-sequence IoU >= 0.90", [&] { return criterion1(ws); }},
      {"static scene labels 0 dynamic points", [&] { return criterion2(ws); }},
      {"stop-and-go pause IoU >= 0.8", [&] { return criterion3(ws); }},
      {"throughput < 2.0 s per 64x2048 scan", [&] { return criterion4(ws); }},
      {"traversal matches dense oracle", [] { return criterion5(); }},
      {"integration is permutation invariant", [] { return criterion6(); }},
      {"validation thresholds exact", [] { return criterion7(); }},
      {"ground segmentation coverage", [] { return criterion8(); }},
      {"clean map", [&] { return criterion9(ws); }},
      {"label reproducibility", [&] { return criterion10(ws); }},
  };
  int unexpected = 0;
  for (std::size_t k = 0; k < criteria.size(); ++k) {
    const int id = static_cast<int>(k + 1);
    if (!only.empty() && std::find(only.begin(), only.end(), id) == only.end()) {
      continue;
    }
    Outcome o;
    try {
      o = criteria[k].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const bool expected_fail =
        std::find(expect_fail.begin(), expect_fail.end(), id) != expect_fail.end();
    unexpected += o.pass == expected_fail ? 1 : 0;
    std::printf("criterion %d %s: %s | %s%s\n", id, o.pass ? "PASS" : "FAIL", criteria[k].first,
                o.detail.c_str(),
                expected_fail ? (o.pass ? " [expected FAIL, now passes]" : " [known failure]")
                              : "");
    std::fflush(stdout);
  }
  if (!keep) {
    fs::remove_all(work);
  }
  return unexpected == 0 ? 0 : 1;
}
