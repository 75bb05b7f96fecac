// Copyright 2026 The dynlabel Authors
// SPDX-License-Identifier: Apache-2.0

#include "dynlabel/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include <json.hpp>

#include "dynlabel/errors.hpp"
#include "dynlabel/io.hpp"

namespace dynlabel {

namespace fs = std::filesystem;

double iou_from_counts(std::uint64_t tp, std::uint64_t fp, std::uint64_t fn) {
  const std::uint64_t denom = tp + fp + fn;
  return denom == 0 ? 1.0 : static_cast<double>(tp) / static_cast<double>(denom);
}

ScanIoU score_scan(const LabeledScan& pred, const LabeledScan& truth,
                   const std::vector<std::uint8_t>* valid) {
  if (pred.scan_id != truth.scan_id) {
    throw Error(ErrorCode::kMisalignedSequences,
                "scan ids differ: " + std::to_string(pred.scan_id) + " vs " +
                    std::to_string(truth.scan_id));
  }
  if (pred.rows != truth.rows || pred.cols != truth.cols || pred.size() != truth.size() ||
      (valid != nullptr && !valid->empty() && valid->size() != truth.size())) {
    throw Error(ErrorCode::kMisalignedSequences,
                "dimensions differ for scan " + std::to_string(truth.scan_id));
  }
  ScanIoU s;
  s.scan_id = truth.scan_id;
  const bool use_valid = valid != nullptr && !valid->empty();
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (use_valid && (*valid)[i] == 0) {
      continue;
    }
    const bool p = pred.labels[i] == kLabelDynamic;
    const bool t = truth.labels[i] == kLabelDynamic;
    s.tp += (p && t) ? 1 : 0;
    s.fp += (p && !t) ? 1 : 0;
    s.fn += (!p && t) ? 1 : 0;
  }
  s.defined = s.tp + s.fp + s.fn > 0;
  s.iou = iou_from_counts(s.tp, s.fp, s.fn);
  return s;
}

IoUReport compute_iou(const std::vector<LabeledScan>& pred, const std::vector<LabeledScan>& truth,
                      const std::vector<std::vector<std::uint8_t>>& valid) {
  if (pred.size() != truth.size()) {
    throw Error(ErrorCode::kMisalignedSequences,
                "sequence lengths differ: " + std::to_string(pred.size()) + " vs " +
                    std::to_string(truth.size()));
  }
  if (!valid.empty() && valid.size() != truth.size()) {
    throw Error(ErrorCode::kMisalignedSequences, "validity masks do not match sequence length");
  }
  IoUReport r;
  double sum = 0.0;
  for (std::size_t k = 0; k < truth.size(); ++k) {
    const ScanIoU s = score_scan(pred[k], truth[k], valid.empty() ? nullptr : &valid[k]);
    r.tp += s.tp;
    r.fp += s.fp;
    r.fn += s.fn;
    if (s.defined) {
      sum += s.iou;
      ++r.defined_scans;
    }
    r.scans.push_back(s);
  }
  r.sequence_iou = iou_from_counts(r.tp, r.fp, r.fn);
  r.mean_iou = r.defined_scans == 0 ? 1.0 : sum / static_cast<double>(r.defined_scans);
  return r;
}

std::string iou_report_json(const IoUReport& r) {
  nlohmann::ordered_json j;
  j["summary"] = {{"scans", r.scans.size()},
                  {"defined_scans", r.defined_scans},
                  {"tp", r.tp},
                  {"fp", r.fp},
                  {"fn", r.fn},
                  {"sequence_iou", r.sequence_iou},
                  {"mean_iou", r.mean_iou}};
  j["scans"] = nlohmann::ordered_json::array();
  for (const auto& s : r.scans) {
    j["scans"].push_back({{"scan_id", s.scan_id},
                          {"tp", s.tp},
                          {"fp", s.fp},
                          {"fn", s.fn},
                          {"iou", s.iou},
                          {"defined", s.defined}});
  }
  return j.dump(2) + "\n";
}

std::string iou_report_text(const IoUReport& r) {
  std::ostringstream os;
  char line[160];
  os << "scan_id tp fp fn iou defined\n";
  for (const auto& s : r.scans) {
    std::snprintf(line, sizeof(line), "%llu %llu %llu %llu %.6f %d\n",
                  static_cast<unsigned long long>(s.scan_id),
                  static_cast<unsigned long long>(s.tp), static_cast<unsigned long long>(s.fp),
                  static_cast<unsigned long long>(s.fn), s.iou, s.defined ? 1 : 0);
    os << line;
  }
  std::snprintf(line, sizeof(line),
                "# scans=%zu defined=%zu tp=%llu fp=%llu fn=%llu sequence_iou=%.6f mean_iou=%.6f\n",
                r.scans.size(), r.defined_scans, static_cast<unsigned long long>(r.tp),
                static_cast<unsigned long long>(r.fp), static_cast<unsigned long long>(r.fn),
                r.sequence_iou, r.mean_iou);
  os << line;
  return os.str();
}

IoUReport evaluate_directories(const fs::path& pred_dir, const fs::path& truth_dir,
                               const std::optional<fs::path>& scan_dir, std::uint32_t rows,
                               std::uint32_t cols) {
  const auto truth_files = list_files(truth_dir, ".label");
  const auto pred_files = list_files(pred_dir, ".label");
  if (truth_files.size() != pred_files.size()) {
    throw Error(ErrorCode::kMisalignedSequences,
                std::to_string(pred_files.size()) + " predicted vs " +
                    std::to_string(truth_files.size()) + " truth label files");
  }
  std::vector<fs::path> scan_files;
  if (scan_dir) {
    scan_files = list_files(*scan_dir, ".scan");
    if (scan_files.size() != truth_files.size()) {
      throw Error(ErrorCode::kMisalignedSequences, "scan count differs from label count");
    }
  } else if (rows == 0 || cols == 0) {
    throw Error(ErrorCode::kInvalidArgument, "rows and cols are required without scans");
  }

  std::vector<LabeledScan> pred;
  std::vector<LabeledScan> truth;
  std::vector<std::vector<std::uint8_t>> valid;
  for (std::size_t k = 0; k < truth_files.size(); ++k) {
    if (pred_files[k].stem() != truth_files[k].stem()) {
      throw Error(ErrorCode::kMisalignedSequences,
                  "no prediction for " + truth_files[k].filename().string());
    }
    std::uint32_t r = rows;
    std::uint32_t c = cols;
    std::vector<std::uint8_t> mask;
    if (scan_dir) {
      if (scan_files[k].stem() != truth_files[k].stem()) {
        throw Error(ErrorCode::kMisalignedSequences,
                    "no scan for " + truth_files[k].filename().string());
      }
      const OrganizedScan scan = read_scan(scan_files[k]);
      r = scan.rows();
      c = scan.cols();
      mask.reserve(scan.size());
      for (const auto& p : scan.points()) {
        mask.push_back(p.valid ? 1 : 0);
      }
    }
    pred.push_back(read_labels(pred_files[k], r, c, k));
    truth.push_back(read_labels(truth_files[k], r, c, k));
    valid.push_back(std::move(mask));
  }
  return compute_iou(pred, truth, valid);
}

std::vector<StageStats> measure_throughput(const std::vector<StageTimings>& per_scan) {
  std::vector<StageStats> out;
  if (per_scan.empty()) {
    return out;
  }
  const std::pair<const char*, double StageTimings::*> stages[] = {
      {"io", &StageTimings::io},           {"undistort", &StageTimings::undistort},
      {"integrate", &StageTimings::integrate}, {"ground", &StageTimings::ground},
      {"cluster", &StageTimings::cluster}, {"validate", &StageTimings::validate},
  };
  auto summarize = [&](const char* name, std::vector<double> v) {
    StageStats s;
    s.stage = name;
    s.count = v.size();
    for (const double x : v) {
      s.total += x;
    }
    s.mean = s.total / static_cast<double>(v.size());
    std::sort(v.begin(), v.end());
    const auto rank = static_cast<std::size_t>(std::ceil(0.95 * static_cast<double>(v.size())));
    s.p95 = v[std::max<std::size_t>(rank, 1) - 1];
    out.push_back(s);
  };
  for (const auto& [name, member] : stages) {
    std::vector<double> v;
    v.reserve(per_scan.size());
    for (const auto& t : per_scan) {
      v.push_back(t.*member);
    }
    summarize(name, std::move(v));
  }
  std::vector<double> totals;
  for (const auto& t : per_scan) {
    totals.push_back(t.total());
  }
  summarize("total", std::move(totals));
  return out;
}

std::string throughput_text(const std::vector<StageStats>& stats) {
  std::ostringstream os;
  char line[128];
  os << "stage       mean_s    p95_s     total_s\n";
  for (const auto& s : stats) {
    std::snprintf(line, sizeof(line), "%-10s %9.4f %9.4f %10.3f\n", s.stage.c_str(), s.mean, s.p95,
                  s.total);
    os << line;
  }
  return os.str();
}

}  // namespace dynlabel
