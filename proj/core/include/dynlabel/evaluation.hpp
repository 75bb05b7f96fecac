// Copyright 2026 The dynlabel Authors
// SPDX-License-Identifier: Apache-2.0
//
// Dynamic-class IoU scoring and per-stage throughput statistics.

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "dynlabel/labeling_pipeline.hpp"
#include "dynlabel/labels.hpp"

namespace dynlabel {

struct ScanIoU {
  std::uint64_t scan_id = 0;
  std::uint64_t tp = 0;
  std::uint64_t fp = 0;
  std::uint64_t fn = 0;
  /// 1.0 when tp + fp + fn == 0 (then `defined` is false).
  double iou = 1.0;
  bool defined = false;
};

struct IoUReport {
  std::vector<ScanIoU> scans;
  std::uint64_t tp = 0;
  std::uint64_t fp = 0;
  std::uint64_t fn = 0;
  /// From summed counts; 1.0 when nothing is dynamic anywhere.
  double sequence_iou = 1.0;
  /// Over scans with a defined IoU; 1.0 when there are none.
  double mean_iou = 1.0;
  std::size_t defined_scans = 0;
};

double iou_from_counts(std::uint64_t tp, std::uint64_t fp, std::uint64_t fn);

/// Counts one scan. `valid` (optional, per pixel) restricts counting to valid
/// points; label 2 counts as static. Throws kMisalignedSequences on a size or
/// id mismatch.
ScanIoU score_scan(const LabeledScan& pred, const LabeledScan& truth,
                   const std::vector<std::uint8_t>* valid = nullptr);

/// `valid[k]` may be empty to count every pixel of scan k.
IoUReport compute_iou(const std::vector<LabeledScan>& pred, const std::vector<LabeledScan>& truth,
                      const std::vector<std::vector<std::uint8_t>>& valid = {});

std::string iou_report_json(const IoUReport& r);
std::string iou_report_text(const IoUReport& r);

/// Scores label files in two directories, matched by basename. When
/// `scan_dir` is given, scan files supply dimensions and validity; otherwise
/// `rows`/`cols` must be set.
IoUReport evaluate_directories(const std::filesystem::path& pred_dir,
                               const std::filesystem::path& truth_dir,
                               const std::optional<std::filesystem::path>& scan_dir,
                               std::uint32_t rows = 0, std::uint32_t cols = 0);

struct StageStats {
  std::string stage;
  std::size_t count = 0;
  double mean = 0.0;
  double p95 = 0.0;
  double total = 0.0;
};

/// Mean and p95 (nearest rank) per stage plus "total"; empty for zero scans.
std::vector<StageStats> measure_throughput(const std::vector<StageTimings>& per_scan);
std::string throughput_text(const std::vector<StageStats>& stats);

}  // namespace dynlabel
