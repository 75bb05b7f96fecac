// Copyright 2026 The dynlabel Authors
// SPDX-License-Identifier: Apache-2.0

#include "dynlabel/voxel_grid.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <tuple>

#include "dynlabel/errors.hpp"

namespace dynlabel {

VoxelIndex voxel_index_of(const Vec3& p, double voxel_size) {
  return {static_cast<std::int32_t>(std::floor(p.x() / voxel_size)),
          static_cast<std::int32_t>(std::floor(p.y() / voxel_size)),
          static_cast<std::int32_t>(std::floor(p.z() / voxel_size))};
}

Vec3 voxel_center(const VoxelIndex& v, double voxel_size) {
  return {(v.x + 0.5) * voxel_size, (v.y + 0.5) * voxel_size, (v.z + 0.5) * voxel_size};
}

const char* to_string(VoxelState s) {
  switch (s) {
    case VoxelState::kUnobserved: return "unobserved";
    case VoxelState::kFree: return "free";
    case VoxelState::kOccupied: return "occupied";
    case VoxelState::kBlocked: return "blocked";
  }
  return "?";
}

VoxelGrid::VoxelGrid(double voxel_size) : voxel_size_(voxel_size) {
  if (!(voxel_size > 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "voxel_size must be positive");
  }
}

std::size_t VoxelGrid::observed_voxels() const {
  std::size_t n = 0;
  cells_.for_each_cell([&](const VoxelIndex&, std::uint8_t c) { n += (c != 0) ? 1 : 0; });
  return n;
}

std::size_t VoxelGrid::count_state(VoxelState s) const {
  std::size_t n = 0;
  cells_.for_each_cell([&](const VoxelIndex&, std::uint8_t c) {
    if (c != 0 && unpack(c).state == s) {
      ++n;
    }
  });
  return n;
}

void VoxelGrid::dump(std::ostream& os) const {
  std::vector<std::pair<VoxelIndex, std::uint8_t>> cells;
  cells_.for_each_cell([&](const VoxelIndex& v, std::uint8_t c) {
    if (c != 0) {
      cells.emplace_back(v, c);
    }
  });
  std::sort(cells.begin(), cells.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });
  for (const auto& [v, c] : cells) {
    const VoxelInfo info = unpack(c);
    os << v.x << ' ' << v.y << ' ' << v.z << ' ' << static_cast<int>(info.state) << ' '
       << (info.ever_free ? 1 : 0) << '\n';
  }
}

std::vector<VoxelIndex> traverse_ray(const Vec3& origin, const Vec3& endpoint,
                                     double voxel_size) {
  if ((endpoint - origin).norm() < 1e-9) {
    throw Error(ErrorCode::kDegenerateRay, "origin and endpoint coincide");
  }
  std::vector<VoxelIndex> out;
  for_each_voxel_on_segment(origin, endpoint, voxel_size, [&](const VoxelIndex& v) {
    out.push_back(v);
    return true;
  });
  return out;
}

std::size_t BlockedRays::count() const {
  return static_cast<std::size_t>(std::count_if(blocked_from.begin(), blocked_from.end(),
                                                [](float r) { return r != kNone; }));
}

BlockedRays detect_blocked_rays(const OrganizedScan& scan, double voxel_size) {
  BlockedRays out;
  out.blocked_from.assign(scan.size(), BlockedRays::kNone);
  const std::uint32_t rows = scan.rows();
  const std::uint32_t cols = scan.cols();
  if (rows == 0 || cols == 0) {
    return out;
  }
  // Ranges are float32; the tolerance keeps decimal boundary cases such as
  // 5.3 - 5.0 vs 0.3 on the non-strict side.
  const double threshold = voxel_size + kRangeTolerance;
  // Each unordered pair is visited once via its right and down neighbor.
  auto consider = [&](std::size_t a, std::size_t b) {
    const PointRecord& pa = scan[a];
    const PointRecord& pb = scan[b];
    if (!pa.valid || !pb.valid) {
      return;
    }
    const float ra = pa.range;
    const float rb = pb.range;
    if (static_cast<double>(rb) - ra > threshold) {
      out.blocked_from[b] = std::min(out.blocked_from[b], ra);
    } else if (static_cast<double>(ra) - rb > threshold) {
      out.blocked_from[a] = std::min(out.blocked_from[a], rb);
    }
  };
  for (std::uint32_t r = 0; r < rows; ++r) {
    for (std::uint32_t c = 0; c < cols; ++c) {
      const std::size_t i = scan.index(r, c);
      if (cols > 1) {
        consider(i, scan.index(r, (c + 1) % cols));
      }
      if (r + 1 < rows) {
        consider(i, scan.index(r + 1, c));
      }
    }
  }
  return out;
}

namespace {

constexpr std::uint8_t kMarkObserved = 0x1;
constexpr std::uint8_t kMarkBlocked = 0x2;

struct VoxelPoint {
  VoxelIndex voxel;
  double dist2;
  std::uint32_t index;
};

}  // namespace

ScanIntegrationResult integrate_scan(VoxelGrid& grid, const OrganizedScan& world_scan,
                                     const BlockedRays& blocked, const Vec3& sensor_origin,
                                     IntegrationMode mode) {
  const double vs = grid.voxel_size();
  ScanIntegrationResult result;

  // Phase 1: marking. Closest point per observed voxel, ties by index, makes
  // the choice independent of point order.
  std::vector<VoxelPoint> vps;
  vps.reserve(world_scan.size());
  for (std::size_t i = 0; i < world_scan.size(); ++i) {
    const PointRecord& p = world_scan[i];
    if (!p.valid) {
      continue;
    }
    const Vec3 pos = p.position();
    vps.push_back({grid.index_of(pos), (pos - sensor_origin).squaredNorm(),
                   static_cast<std::uint32_t>(i)});
  }
  std::sort(vps.begin(), vps.end(), [](const VoxelPoint& a, const VoxelPoint& b) {
    return std::tie(a.voxel, a.dist2, a.index) < std::tie(b.voxel, b.dist2, b.index);
  });
  std::vector<VoxelPoint> closest;
  for (std::size_t k = 0; k < vps.size(); ++k) {
    if (k == 0 || !(vps[k].voxel == vps[k - 1].voxel)) {
      closest.push_back(vps[k]);
    }
  }
  result.occupied_voxels.reserve(closest.size());
  for (const auto& vp : closest) {
    result.occupied_voxels.push_back(vp.voxel);
  }

  SparseBlockGrid<std::uint8_t> marks;
  {
    SparseBlockGrid<std::uint8_t>::Accessor acc(marks);
    for (const auto& v : result.occupied_voxels) {
      for (int dz = -1; dz <= 1; ++dz) {
        for (int dy = -1; dy <= 1; ++dy) {
          for (int dx = -1; dx <= 1; ++dx) {
            acc.ref({v.x + dx, v.y + dy, v.z + dz}) |= kMarkBlocked;
          }
        }
      }
    }
    for (const auto& v : result.occupied_voxels) {
      acc.ref(v) |= kMarkObserved;
    }
    // Discontinuity rays: voxels beyond blocked_from along the ray of p2.
    for (std::size_t i = 0; i < world_scan.size(); ++i) {
      const PointRecord& p = world_scan[i];
      if (!p.valid || !blocked.is_blocked(i) || !(p.range > 0.0F)) {
        continue;
      }
      const Vec3 end = p.position();
      const double frac = static_cast<double>(blocked.blocked_from[i]) / p.range;
      const Vec3 start = sensor_origin + frac * (end - sensor_origin);
      for_each_voxel_on_segment(start, end, vs, [&](const VoxelIndex& v) {
        acc.ref(v) |= kMarkBlocked;
        return true;
      });
    }
  }

  // Marked-but-unobserved voxels that were never seen become Blocked. Only
  // Unobserved cells are touched, so prior Free/Occupied states survive.
  {
    VoxelGrid::Cells::Accessor gacc(grid.cells());
    marks.for_each_cell([&](const VoxelIndex& v, std::uint8_t m) {
      if (m == kMarkBlocked) {
        std::uint8_t& c = gacc.ref(v);
        if (VoxelGrid::unpack(c).state == VoxelState::kUnobserved) {
          VoxelGrid::apply(c, VoxelState::kBlocked);
        }
      }
    });
  }

  // Phase 2: tracing.
  {
    SparseBlockGrid<std::uint8_t>::ConstAccessor macc(marks);
    VoxelGrid::Cells::Accessor gacc(grid.cells());
    for (const auto& vp : closest) {
      const Vec3 end = world_scan[vp.index].position();
      if ((end - sensor_origin).squaredNorm() < 1e-18) {
        continue;
      }
      ++result.rays_traced;
      for_each_voxel_on_segment(sensor_origin, end, vs, [&](const VoxelIndex& v) {
        const std::uint8_t m = macc.get(v);
        if ((m & kMarkObserved) != 0) {
          return false;
        }
        if (m == 0) {
          VoxelGrid::apply(gacc.ref(v), VoxelState::kFree);
        }
        return true;
      });
    }
  }

  if (mode == IntegrationMode::kOccupancy) {
    VoxelGrid::Cells::Accessor gacc(grid.cells());
    for (const auto& v : result.occupied_voxels) {
      std::uint8_t& c = gacc.ref(v);
      if (VoxelGrid::unpack(c).state == VoxelState::kFree) {
        result.candidate_voxels.push_back(v);
      }
      VoxelGrid::apply(c, VoxelState::kOccupied);
    }
  }
  return result;
}

}  // namespace dynlabel
