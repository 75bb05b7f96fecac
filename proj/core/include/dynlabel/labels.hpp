// Copyright 2026 The dynlabel Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <vector>

namespace dynlabel {

enum Label : std::uint32_t {
  kLabelStatic = 0,
  kLabelDynamic = 1,
  /// Debug-only ground marker; scored and mapped as static.
  kLabelGround = 2,
};

/// Per-point labels aligned row-major to an OrganizedScan.
struct LabeledScan {
  std::uint64_t scan_id = 0;
  std::uint32_t rows = 0;
  std::uint32_t cols = 0;
  std::vector<std::uint32_t> labels;

  std::size_t size() const { return labels.size(); }
  bool is_dynamic(std::size_t i) const { return labels[i] == kLabelDynamic; }

  friend bool operator==(const LabeledScan&, const LabeledScan&) = default;
};

}  // namespace dynlabel
