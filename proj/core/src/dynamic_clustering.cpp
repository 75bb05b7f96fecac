// Copyright 2026 The dynlabel Authors
// SPDX-License-Identifier: Apache-2.0

#include "dynlabel/dynamic_clustering.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <numbers>
#include <numeric>
#include <unordered_map>

#include "dynlabel/errors.hpp"
#include "dynlabel/voxel_grid.hpp"

namespace dynlabel {

namespace {

constexpr double kDeg = std::numbers::pi / 180.0;

class UnionFind {
 public:
  explicit UnionFind(std::size_t n) : parent_(n) { std::iota(parent_.begin(), parent_.end(), 0); }
  std::size_t find(std::size_t a) {
    while (parent_[a] != a) {
      parent_[a] = parent_[parent_[a]];
      a = parent_[a];
    }
    return a;
  }
  // The smaller root wins so results do not depend on union order.
  void unite(std::size_t a, std::size_t b) {
    a = find(a);
    b = find(b);
    if (a != b) {
      parent_[std::max(a, b)] = std::min(a, b);
    }
  }

 private:
  std::vector<std::size_t> parent_;
};

bool diameter_exceeds(const OrganizedScan& scan, std::span<const std::size_t> idx,
                      double limit, std::size_t exact_limit) {
  if (idx.size() > exact_limit) {
    return cluster_diameter(scan, idx, exact_limit) > limit;
  }
  const double l2 = limit * limit;
  for (std::size_t a = 0; a < idx.size(); ++a) {
    const Vec3 pa = scan[idx[a]].position();
    for (std::size_t b = a + 1; b < idx.size(); ++b) {
      if ((scan[idx[b]].position() - pa).squaredNorm() > l2) {
        return true;
      }
    }
  }
  return false;
}

Vec3 unit_direction(const PointRecord& p) {
  const Vec3 v = p.position();
  const double n = v.norm();
  return n > 0.0 ? Vec3(v / n) : Vec3::Zero();
}

}  // namespace

const char* to_string(Verdict v) {
  switch (v) {
    case Verdict::kPending: return "pending";
    case Verdict::kAccepted: return "accepted";
    case Verdict::kRejectedRatio: return "rejected_ratio";
    case Verdict::kRejectedSize: return "rejected_size";
  }
  return "?";
}

double cluster_diameter(const OrganizedScan& scan, std::span<const std::size_t> indices,
                        std::size_t exact_limit) {
  if (indices.size() < 2) {
    return 0.0;
  }
  if (indices.size() > exact_limit) {
    Eigen::AlignedBox3d box;
    for (const auto i : indices) {
      box.extend(scan[i].position());
    }
    return box.diagonal().norm();
  }
  double best = 0.0;
  for (std::size_t a = 0; a < indices.size(); ++a) {
    const Vec3 pa = scan[indices[a]].position();
    for (std::size_t b = a + 1; b < indices.size(); ++b) {
      best = std::max(best, (scan[indices[b]].position() - pa).squaredNorm());
    }
  }
  return std::sqrt(best);
}

std::vector<std::vector<std::size_t>> cluster_candidates_stage1(const CandidatePointSet& points,
                                                                const OrganizedScan& scan,
                                                                const ClusteringParams& params) {
  std::vector<std::vector<std::size_t>> out;
  const auto& idx = points.indices;
  if (idx.empty()) {
    return out;
  }
  const double radius = params.seed_radius_factor * params.voxel_size;
  const double r2 = radius * radius;

  std::unordered_map<VoxelIndex, std::vector<std::size_t>, VoxelIndexHash> cells;
  std::vector<VoxelIndex> cell_of(idx.size());
  for (std::size_t k = 0; k < idx.size(); ++k) {
    cell_of[k] = voxel_index_of(scan[idx[k]].position(), radius);
    cells[cell_of[k]].push_back(k);
  }
  UnionFind uf(idx.size());
  for (std::size_t k = 0; k < idx.size(); ++k) {
    const Vec3 pk = scan[idx[k]].position();
    const VoxelIndex c = cell_of[k];
    for (int dz = -1; dz <= 1; ++dz) {
      for (int dy = -1; dy <= 1; ++dy) {
        for (int dx = -1; dx <= 1; ++dx) {
          const auto it = cells.find({c.x + dx, c.y + dy, c.z + dz});
          if (it == cells.end()) {
            continue;
          }
          for (const std::size_t m : it->second) {
            if (m > k && (scan[idx[m]].position() - pk).squaredNorm() <= r2) {
              uf.unite(k, m);
            }
          }
        }
      }
    }
  }

  std::unordered_map<std::size_t, std::size_t> slot;
  std::vector<std::vector<std::size_t>> comps;
  for (std::size_t k = 0; k < idx.size(); ++k) {
    const std::size_t root = uf.find(k);
    const auto [it, inserted] = slot.try_emplace(root, comps.size());
    if (inserted) {
      comps.emplace_back();
    }
    comps[it->second].push_back(idx[k]);
  }
  for (auto& comp : comps) {
    std::sort(comp.begin(), comp.end());
    if (diameter_exceeds(scan, comp, params.min_seed_diameter, params.exact_diameter_limit)) {
      out.push_back(std::move(comp));
    }
  }
  std::sort(out.begin(), out.end(),
            [](const auto& a, const auto& b) { return a.front() < b.front(); });
  return out;
}

double depth_cluster_angle(double range_a, double range_b, double step_rad) {
  const double d1 = std::max(range_a, range_b);
  const double d2 = std::min(range_a, range_b);
  return std::atan2(d2 * std::sin(step_rad), d1 - d2 * std::cos(step_rad));
}

std::vector<Cluster> grow_clusters_stage2(const std::vector<std::vector<std::size_t>>& seeds,
                                          const OrganizedScan& scan, const GroundMask& ground,
                                          const std::vector<std::uint8_t>& is_candidate,
                                          const ClusteringParams& params) {
  std::vector<Cluster> out;
  if (seeds.empty()) {
    return out;
  }
  if (is_candidate.size() != scan.size() || (!ground.empty() && ground.size() != scan.size())) {
    throw Error(ErrorCode::kInvalidArgument, "mask size does not match scan");
  }
  constexpr std::uint32_t kNone = 0xFFFFFFFFU;
  const double beta = params.beta_deg * kDeg;
  const std::uint32_t rows = scan.rows();
  const std::uint32_t cols = scan.cols();
  auto is_ground = [&](std::size_t i) { return !ground.empty() && ground[i] != 0; };

  std::vector<std::uint32_t> owner(scan.size(), kNone);
  UnionFind uf(seeds.size());
  std::deque<std::size_t> queue;
  for (std::size_t s = 0; s < seeds.size(); ++s) {
    for (const std::size_t i : seeds[s]) {
      if (!scan[i].valid) {
        continue;
      }
      if (owner[i] == kNone) {
        owner[i] = static_cast<std::uint32_t>(s);
        if (!is_ground(i)) {
          queue.push_back(i);
        }
      } else {
        uf.unite(owner[i], s);
      }
    }
  }

  while (!queue.empty()) {
    const std::size_t i = queue.front();
    queue.pop_front();
    const std::uint32_t r = scan.row_of(i);
    const std::uint32_t c = scan.col_of(i);
    const std::size_t nbs[4] = {
        r > 0 ? scan.index(r - 1, c) : i,
        r + 1 < rows ? scan.index(r + 1, c) : i,
        scan.index(r, (c + cols - 1) % cols),
        scan.index(r, (c + 1) % cols),
    };
    const PointRecord& pi = scan[i];
    const Vec3 di = unit_direction(pi);
    for (const std::size_t j : nbs) {
      if (j == i || !scan[j].valid) {
        continue;
      }
      if (owner[j] != kNone && (owner[j] == owner[i] || is_ground(j))) {
        continue;
      }
      const PointRecord& pj = scan[j];
      const Vec3 dj = unit_direction(pj);
      const double step = std::atan2(di.cross(dj).norm(), di.dot(dj));
      if (!(depth_cluster_angle(pi.range, pj.range, step) > beta)) {
        continue;
      }
      if (owner[j] != kNone) {
        uf.unite(owner[i], owner[j]);
        continue;
      }
      owner[j] = owner[i];
      if (!is_ground(j)) {
        queue.push_back(j);
      }
    }
  }

  std::unordered_map<std::size_t, std::size_t> slot;
  for (std::size_t i = 0; i < scan.size(); ++i) {
    if (owner[i] == kNone) {
      continue;
    }
    const std::size_t root = uf.find(owner[i]);
    const auto [it, inserted] = slot.try_emplace(root, out.size());
    if (inserted) {
      out.emplace_back();
    }
    Cluster& cl = out[it->second];
    cl.point_indices.push_back(i);
    cl.candidate_count += is_candidate[i] != 0 ? 1 : 0;
  }
  for (auto& cl : out) {
    cl.diameter = cluster_diameter(scan, cl.point_indices, params.exact_diameter_limit);
  }
  return out;
}

Verdict validate_cluster(std::size_t points, std::size_t candidates, double ratio_threshold,
                         std::size_t min_points) {
  if (points < min_points || points == 0) {
    return Verdict::kRejectedSize;
  }
  const double ratio = static_cast<double>(candidates) / static_cast<double>(points);
  return ratio >= ratio_threshold ? Verdict::kAccepted : Verdict::kRejectedRatio;
}

std::vector<Cluster> validate_clusters(std::vector<Cluster> clusters,
                                       const ClusteringParams& params) {
  for (auto& c : clusters) {
    c.verdict = validate_cluster(c.point_indices.size(), c.candidate_count,
                                 params.ratio_threshold, params.min_points);
  }
  return clusters;
}

}  // namespace dynlabel
