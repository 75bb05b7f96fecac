// Copyright 2026 The dynlabel Authors
// SPDX-License-Identifier: Apache-2.0

#include "dynlabel/ground_segmentation.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <numbers>
#include <random>

#include <Eigen/Eigenvalues>

#include "dynlabel/errors.hpp"

namespace dynlabel {

namespace {

constexpr double kDeg = std::numbers::pi / 180.0;

double pair_elevation_deg(const PointRecord& a, const PointRecord& b) {
  const double dx = static_cast<double>(a.x) - b.x;
  const double dy = static_cast<double>(a.y) - b.y;
  const double dz = static_cast<double>(a.z) - b.z;
  return std::atan2(std::abs(dz), std::hypot(dx, dy)) / kDeg;
}

struct PlaneFit {
  Vec3 normal = Vec3::UnitZ();
  double offset = 0.0;
  std::size_t count = 0;
};

std::size_t count_inliers(const std::vector<Vec3>& pts, const Vec3& n, double off, double thr) {
  std::size_t c = 0;
  for (const auto& p : pts) {
    c += std::abs(n.dot(p) - off) < thr ? 1 : 0;
  }
  return c;
}

// RANSAC over `pts` with the normal constrained near vertical, then a
// least-squares refit on the winning inliers.
PlaneFit ransac_plane(const std::vector<Vec3>& pts, const GroundParams& params,
                      std::mt19937_64& rng) {
  PlaneFit best;
  if (pts.size() < 3) {
    return best;
  }
  const double min_cos = std::cos(params.max_tilt_deg * kDeg);
  std::uniform_int_distribution<std::size_t> pick(0, pts.size() - 1);
  for (int it = 0; it < params.ransac_iterations; ++it) {
    const Vec3& a = pts[pick(rng)];
    const Vec3& b = pts[pick(rng)];
    const Vec3& c = pts[pick(rng)];
    Vec3 n = (b - a).cross(c - a);
    const double len = n.norm();
    if (len < 1e-9) {
      continue;
    }
    n /= len;
    if (n.z() < 0.0) {
      n = -n;
    }
    if (n.z() < min_cos) {
      continue;
    }
    const double off = n.dot(a);
    const std::size_t count = count_inliers(pts, n, off, params.inlier_threshold);
    if (count > best.count) {
      best = {n, off, count};
    }
  }
  if (best.count < 3) {
    return best;
  }
  Vec3 mean = Vec3::Zero();
  std::size_t m = 0;
  for (const auto& p : pts) {
    if (std::abs(best.normal.dot(p) - best.offset) < params.inlier_threshold) {
      mean += p;
      ++m;
    }
  }
  mean /= static_cast<double>(m);
  Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
  for (const auto& p : pts) {
    if (std::abs(best.normal.dot(p) - best.offset) < params.inlier_threshold) {
      const Vec3 d = p - mean;
      cov += d * d.transpose();
    }
  }
  const Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(cov);
  Vec3 n = es.eigenvectors().col(0).normalized();
  if (n.z() < 0.0) {
    n = -n;
  }
  if (n.z() >= min_cos) {
    const double off = n.dot(mean);
    const std::size_t count = count_inliers(pts, n, off, params.inlier_threshold);
    if (count >= best.count) {
      best = {n, off, count};
    }
  }
  return best;
}

}  // namespace

std::vector<float> compute_elevation_angles(const OrganizedScan& scan) {
  std::vector<float> out(scan.size(), 90.0F);
  const std::uint32_t rows = scan.rows();
  for (std::uint32_t r = 0; r < rows; ++r) {
    for (std::uint32_t c = 0; c < scan.cols(); ++c) {
      const std::size_t i = scan.index(r, c);
      const PointRecord& p = scan[i];
      if (!p.valid) {
        continue;
      }
      const PointRecord* nb = nullptr;
      if (r + 1 < rows && scan.at(r + 1, c).valid) {
        nb = &scan.at(r + 1, c);
      } else if (r > 0 && scan.at(r - 1, c).valid) {
        nb = &scan.at(r - 1, c);
      }
      if (nb != nullptr) {
        out[i] = static_cast<float>(pair_elevation_deg(p, *nb));
      }
    }
  }
  return out;
}

std::vector<SupportPlane> fit_support_planes(const OrganizedScan& scan,
                                             const std::vector<float>& angles,
                                             const Vec3& sensor_origin,
                                             const GroundParams& params, std::uint64_t seed) {
  if (angles.size() != scan.size()) {
    throw Error(ErrorCode::kInvalidArgument, "angle array does not match scan size");
  }
  std::vector<Vec3> below;
  std::vector<std::size_t> below_idx;
  std::vector<Vec3> above;
  std::vector<std::size_t> above_idx;
  for (std::size_t i = 0; i < scan.size(); ++i) {
    const PointRecord& p = scan[i];
    if (!p.valid || !(angles[i] < params.max_elevation_deg)) {
      continue;
    }
    if (p.z < sensor_origin.z()) {
      below.push_back(p.position());
      below_idx.push_back(i);
    } else {
      above.push_back(p.position());
      above_idx.push_back(i);
    }
  }

  std::mt19937_64 rng(seed);
  auto make_plane = [&](const PlaneFit& fit, const std::vector<Vec3>& pts,
                        const std::vector<std::size_t>& idx, bool ceiling) {
    SupportPlane sp;
    sp.normal = fit.normal;
    sp.offset = fit.offset;
    sp.inlier_threshold = params.inlier_threshold;
    sp.ceiling = ceiling;
    for (std::size_t k = 0; k < pts.size(); ++k) {
      if (sp.distance(pts[k]) < params.inlier_threshold) {
        sp.inliers.push_back(idx[k]);
      }
    }
    return sp;
  };

  std::vector<SupportPlane> planes;
  const PlaneFit ground = ransac_plane(below, params, rng);
  if (ground.count < params.min_ground_inliers) {
    throw Error(ErrorCode::kNoPlane, "ground fit has " + std::to_string(ground.count) +
                                         " inliers, need " +
                                         std::to_string(params.min_ground_inliers));
  }
  planes.push_back(make_plane(ground, below, below_idx, false));

  if (above.size() >= params.min_ceiling_eligible) {
    const PlaneFit ceiling = ransac_plane(above, params, rng);
    if (ceiling.count >= params.min_ceiling_inliers) {
      planes.push_back(make_plane(ceiling, above, above_idx, true));
    }
  }
  return planes;
}

GroundMask grow_ground_mask(const OrganizedScan& scan, const std::vector<SupportPlane>& planes,
                            const GroundParams& params) {
  GroundMask mask(scan.size(), 0);
  if (planes.empty() || scan.size() == 0) {
    return mask;
  }
  // Each flagged pixel remembers the plane it grew from.
  std::vector<std::uint8_t> owner(scan.size(), 0);
  std::deque<std::size_t> queue;
  for (std::size_t k = 0; k < planes.size(); ++k) {
    for (const std::size_t i : planes[k].inliers) {
      if (!mask[i] && scan[i].valid) {
        mask[i] = 1;
        owner[i] = static_cast<std::uint8_t>(k);
        queue.push_back(i);
      }
    }
  }
  const std::uint32_t rows = scan.rows();
  const std::uint32_t cols = scan.cols();
  const std::vector<float> column_angles = compute_elevation_angles(scan);
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
    const SupportPlane& plane = planes[owner[i]];
    for (const std::size_t j : nbs) {
      if (j == i || mask[j] || !scan[j].valid ||
          !(column_angles[j] < params.max_elevation_deg)) {
        continue;
      }
      if (!(pair_elevation_deg(scan[i], scan[j]) < params.growth_angle_deg)) {
        continue;
      }
      if (plane.distance(scan[j].position()) > params.max_growth_distance) {
        continue;
      }
      mask[j] = 1;
      owner[j] = owner[i];
      queue.push_back(j);
    }
  }
  return mask;
}

GroundMask segment_ground(const OrganizedScan& scan, const Vec3& sensor_origin,
                          const GroundParams& params, std::uint64_t seed,
                          std::vector<SupportPlane>* planes_out) {
  const auto angles = compute_elevation_angles(scan);
  std::vector<SupportPlane> planes;
  try {
    planes = fit_support_planes(scan, angles, sensor_origin, params, seed);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::kNoPlane) {
      throw;
    }
  }
  GroundMask mask = grow_ground_mask(scan, planes, params);
  if (planes_out != nullptr) {
    *planes_out = std::move(planes);
  }
  return mask;
}

}  // namespace dynlabel
