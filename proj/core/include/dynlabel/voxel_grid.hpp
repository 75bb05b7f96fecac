// Copyright 2026 The dynlabel Authors
// SPDX-License-Identifier: Apache-2.0
//
// Sparse global occupancy grid with four voxel states, occlusion-aware ray
// tracing and free->occupied candidate detection.

#pragma once

#include <array>
#include <cmath>
#include <compare>
#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <limits>
#include <memory>
#include <span>
#include <unordered_map>
#include <vector>

#include "dynlabel/scan_model.hpp"

namespace dynlabel {

struct VoxelIndex {
  std::int32_t x = 0;
  std::int32_t y = 0;
  std::int32_t z = 0;

  friend bool operator==(const VoxelIndex&, const VoxelIndex&) = default;
  friend auto operator<=>(const VoxelIndex&, const VoxelIndex&) = default;
};

struct VoxelIndexHash {
  std::size_t operator()(const VoxelIndex& v) const noexcept {
    auto h = static_cast<std::uint64_t>(static_cast<std::uint32_t>(v.x)) * 73856093ULL;
    h ^= static_cast<std::uint64_t>(static_cast<std::uint32_t>(v.y)) * 19349663ULL;
    h ^= static_cast<std::uint64_t>(static_cast<std::uint32_t>(v.z)) * 83492791ULL;
    return static_cast<std::size_t>(h ^ (h >> 29));
  }
};

/// floor(p / voxel_size) componentwise.
VoxelIndex voxel_index_of(const Vec3& p, double voxel_size);
Vec3 voxel_center(const VoxelIndex& v, double voxel_size);

/// Associative map of 16^3 blocks allocated on first write. Unallocated cells
/// read as T{}.
template <typename T>
class SparseBlockGrid {
 public:
  static constexpr int kBlockShift = 4;
  static constexpr int kBlockDim = 1 << kBlockShift;
  static constexpr int kBlockMask = kBlockDim - 1;
  static constexpr std::size_t kBlockVolume =
      static_cast<std::size_t>(kBlockDim) * kBlockDim * kBlockDim;

  using Block = std::array<T, kBlockVolume>;

  static VoxelIndex block_of(const VoxelIndex& v) {
    return {v.x >> kBlockShift, v.y >> kBlockShift, v.z >> kBlockShift};
  }
  static std::size_t offset_of(const VoxelIndex& v) {
    return (static_cast<std::size_t>(v.z & kBlockMask) << (2 * kBlockShift)) |
           (static_cast<std::size_t>(v.y & kBlockMask) << kBlockShift) |
           static_cast<std::size_t>(v.x & kBlockMask);
  }

  T get(const VoxelIndex& v) const {
    const auto it = blocks_.find(block_of(v));
    return it == blocks_.end() ? T{} : (*it->second)[offset_of(v)];
  }

  T& ref(const VoxelIndex& v) {
    auto& slot = blocks_[block_of(v)];
    if (!slot) {
      slot = std::make_unique<Block>();
      slot->fill(T{});
    }
    return (*slot)[offset_of(v)];
  }

  const Block* find_block(const VoxelIndex& block) const {
    const auto it = blocks_.find(block);
    return it == blocks_.end() ? nullptr : it->second.get();
  }
  Block& block_ref(const VoxelIndex& block) {
    auto& slot = blocks_[block];
    if (!slot) {
      slot = std::make_unique<Block>();
      slot->fill(T{});
    }
    return *slot;
  }

  std::size_t block_count() const { return blocks_.size(); }
  void clear() { blocks_.clear(); }

  /// Visits (voxel, value) for every cell of every allocated block.
  template <typename Fn>
  void for_each_cell(Fn&& fn) const {
    for (const auto& [bk, block] : blocks_) {
      for (std::size_t off = 0; off < kBlockVolume; ++off) {
        const VoxelIndex v{
            (bk.x << kBlockShift) | static_cast<std::int32_t>(off & kBlockMask),
            (bk.y << kBlockShift) |
                static_cast<std::int32_t>((off >> kBlockShift) & kBlockMask),
            (bk.z << kBlockShift) | static_cast<std::int32_t>(off >> (2 * kBlockShift))};
        fn(v, (*block)[off]);
      }
    }
  }

  /// Caches the last block touched; cheap for spatially coherent access such
  /// as ray traversal. Invalidated by clear().
  class Accessor {
   public:
    explicit Accessor(SparseBlockGrid& grid) : grid_(&grid) {}
    T& ref(const VoxelIndex& v) {
      const VoxelIndex b = block_of(v);
      if (block_ == nullptr || !(b == key_)) {
        block_ = &grid_->block_ref(b);
        key_ = b;
      }
      return (*block_)[offset_of(v)];
    }

   private:
    SparseBlockGrid* grid_;
    Block* block_ = nullptr;
    VoxelIndex key_{};
  };

  class ConstAccessor {
   public:
    explicit ConstAccessor(const SparseBlockGrid& grid) : grid_(&grid) {}
    T get(const VoxelIndex& v) {
      const VoxelIndex b = block_of(v);
      if (!valid_ || !(b == key_)) {
        block_ = grid_->find_block(b);
        key_ = b;
        valid_ = true;
      }
      return block_ == nullptr ? T{} : (*block_)[offset_of(v)];
    }

   private:
    const SparseBlockGrid* grid_;
    const Block* block_ = nullptr;
    VoxelIndex key_{};
    bool valid_ = false;
  };

 private:
  std::unordered_map<VoxelIndex, std::unique_ptr<Block>, VoxelIndexHash> blocks_;
};

enum class VoxelState : std::uint8_t {
  kUnobserved = 0,
  kFree = 1,
  kOccupied = 2,
  kBlocked = 3,
};

const char* to_string(VoxelState s);

struct VoxelInfo {
  VoxelState state = VoxelState::kUnobserved;
  bool ever_free = false;

  friend bool operator==(const VoxelInfo&, const VoxelInfo&) = default;
};

/// Global occupancy grid. Each cell packs the state (2 bits) and a monotone
/// ever_free flag; setting Free sets ever_free and nothing ever clears it.
class VoxelGrid {
 public:
  explicit VoxelGrid(double voxel_size = 0.3);

  double voxel_size() const { return voxel_size_; }
  VoxelIndex index_of(const Vec3& p) const { return voxel_index_of(p, voxel_size_); }

  VoxelInfo query(const VoxelIndex& v) const { return unpack(cells_.get(v)); }
  VoxelInfo query_state(const Vec3& p) const { return query(index_of(p)); }

  void set_state(const VoxelIndex& v, VoxelState s) { apply(cells_.ref(v), s); }

  std::size_t allocated_blocks() const { return cells_.block_count(); }
  /// Cells whose state is not Unobserved or that were ever free.
  std::size_t observed_voxels() const;
  std::size_t count_state(VoxelState s) const;

  /// One line `ix iy iz state ever_free` per observed voxel, lexicographically
  /// sorted so equal grids produce identical bytes.
  void dump(std::ostream& os) const;

  using Cells = SparseBlockGrid<std::uint8_t>;
  Cells& cells() { return cells_; }
  const Cells& cells() const { return cells_; }

  static constexpr std::uint8_t kStateMask = 0x3;
  static constexpr std::uint8_t kEverFreeBit = 0x4;
  static VoxelInfo unpack(std::uint8_t c) {
    return {static_cast<VoxelState>(c & kStateMask), (c & kEverFreeBit) != 0};
  }
  static void apply(std::uint8_t& c, VoxelState s) {
    c = static_cast<std::uint8_t>((c & kEverFreeBit) | static_cast<std::uint8_t>(s));
    if (s == VoxelState::kFree) {
      c |= kEverFreeBit;
    }
  }

 private:
  double voxel_size_;
  Cells cells_;
};

/// Grid-stepping traversal of the segment [start, end). Calls `visit` for each
/// voxel in order starting with the voxel containing `start`, stopping before
/// the voxel containing `end` or when `visit` returns false. Ties at voxel
/// edges/corners step x, then y, then z. Exactly |dx|+|dy|+|dz| voxels (in
/// index units) are visited, so the walk always lands on the end voxel.
template <typename Visit>
void for_each_voxel_on_segment(const Vec3& start, const Vec3& end, double voxel_size,
                               Visit&& visit) {
  VoxelIndex cur = voxel_index_of(start, voxel_size);
  const VoxelIndex last = voxel_index_of(end, voxel_size);
  const Vec3 d = end - start;
  std::array<std::int32_t, 3> step{};
  std::array<std::int64_t, 3> remaining{};
  std::array<double, 3> t_max{};
  std::array<double, 3> t_delta{};
  const std::array<std::int32_t, 3> c0{cur.x, cur.y, cur.z};
  const std::array<std::int32_t, 3> c1{last.x, last.y, last.z};
  std::int64_t total = 0;
  for (int a = 0; a < 3; ++a) {
    remaining[a] = std::abs(static_cast<std::int64_t>(c1[a]) - c0[a]);
    total += remaining[a];
    if (remaining[a] == 0 || d[a] == 0.0) {
      step[a] = 0;
      t_max[a] = std::numeric_limits<double>::infinity();
      t_delta[a] = std::numeric_limits<double>::infinity();
      remaining[a] = (d[a] == 0.0) ? 0 : remaining[a];
      continue;
    }
    step[a] = d[a] > 0.0 ? 1 : -1;
    const double boundary = (static_cast<double>(c0[a]) + (step[a] > 0 ? 1.0 : 0.0)) * voxel_size;
    t_max[a] = (boundary - start[a]) / d[a];
    t_delta[a] = voxel_size / std::abs(d[a]);
  }
  std::array<std::int32_t, 3> c = c0;
  for (std::int64_t k = 0; k < total; ++k) {
    if (!visit(VoxelIndex{c[0], c[1], c[2]})) {
      return;
    }
    int axis = -1;
    for (int a = 0; a < 3; ++a) {
      if (remaining[a] > 0 && (axis < 0 || t_max[a] < t_max[axis])) {
        axis = a;
      }
    }
    if (axis < 0) {
      return;
    }
    c[axis] += step[axis];
    --remaining[axis];
    t_max[axis] += t_delta[axis];
  }
}

/// Every voxel the segment [origin, endpoint) crosses, excluding the endpoint
/// voxel. Throws Error(kDegenerateRay) when |endpoint - origin| < 1e-9.
std::vector<VoxelIndex> traverse_ray(const Vec3& origin, const Vec3& endpoint,
                                     double voxel_size);

/// Per-point occlusion annotation from range-image discontinuities.
struct BlockedRays {
  static constexpr float kNone = std::numeric_limits<float>::infinity();
  /// Sensor-frame range beyond which the ray of point i must not free voxels,
  /// or kNone.
  std::vector<float> blocked_from;

  bool is_blocked(std::size_t i) const { return blocked_from[i] != kNone; }
  std::size_t count() const;
};

/// Absolute slack on range differences, well below float32 range noise.
inline constexpr double kRangeTolerance = 1e-5;

/// For each 4-adjacent pair of valid pixels (horizontal wrap at the azimuth
/// seam) with r2 - r1 > voxel_size, annotates the farther point with
/// blocked_from = r1 (the nearest such neighbor wins).
BlockedRays detect_blocked_rays(const OrganizedScan& scan, double voxel_size);

enum class IntegrationMode : std::uint8_t { kFreeSpaceOnly, kOccupancy };

struct ScanIntegrationResult {
  /// Sorted; voxels whose state went Free -> Occupied in this integration.
  std::vector<VoxelIndex> candidate_voxels;
  /// Sorted; voxels holding at least one point of this scan.
  std::vector<VoxelIndex> occupied_voxels;
  std::size_t rays_traced = 0;
};

/// Integrates one world-frame scan. Phase 1 marks the observed set O, the
/// discontinuity-blocked voxels and all 26-neighbors of O. Phase 2 traces one
/// ray per voxel of O (closest point) from `sensor_origin`, stopping at the
/// first voxel in O; unmarked traversed voxels become Free, marked ones keep
/// their state (Unobserved ones become Blocked). In Occupancy mode every voxel
/// of O becomes Occupied and Free ones are reported as candidates.
ScanIntegrationResult integrate_scan(VoxelGrid& grid, const OrganizedScan& world_scan,
                                     const BlockedRays& blocked, const Vec3& sensor_origin,
                                     IntegrationMode mode);

}  // namespace dynlabel
