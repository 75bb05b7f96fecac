// Copyright 2026 The dynlabel Authors
// SPDX-License-Identifier: Apache-2.0

#include "dynlabel/scan_model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "dynlabel/errors.hpp"

namespace dynlabel {

OrganizedScan::OrganizedScan(std::uint32_t rows, std::uint32_t cols,
                             double frame_timestamp)
    : rows_(rows),
      cols_(cols),
      frame_timestamp_(frame_timestamp),
      points_(static_cast<std::size_t>(rows) * cols) {}

OrganizedScan::OrganizedScan(std::uint32_t rows, std::uint32_t cols,
                             double frame_timestamp,
                             std::vector<PointRecord> points)
    : rows_(rows),
      cols_(cols),
      frame_timestamp_(frame_timestamp),
      points_(std::move(points)) {
  if (points_.size() != static_cast<std::size_t>(rows) * cols) {
    throw Error(ErrorCode::kInvalidArgument,
                "scan has " + std::to_string(points_.size()) +
                    " points, expected rows*cols = " +
                    std::to_string(static_cast<std::size_t>(rows) * cols));
  }
}

std::size_t OrganizedScan::valid_count() const {
  return static_cast<std::size_t>(std::count_if(
      points_.begin(), points_.end(), [](const PointRecord& p) { return p.valid; }));
}

Eigen::Isometry3d Pose::isometry() const {
  Eigen::Isometry3d iso = Eigen::Isometry3d::Identity();
  iso.linear() = rotation.toRotationMatrix();
  iso.translation() = translation;
  return iso;
}

Trajectory::Trajectory(std::vector<Pose> poses) : poses_(std::move(poses)) {
  if (poses_.size() < 2) {
    throw Error(ErrorCode::kInvalidArgument, "trajectory needs at least 2 poses");
  }
  for (std::size_t i = 0; i < poses_.size(); ++i) {
    auto& q = poses_[i].rotation;
    const double n = q.norm();
    if (!(n > 0.0) || !std::isfinite(n)) {
      throw Error(ErrorCode::kInvalidArgument,
                  "degenerate quaternion at pose " + std::to_string(i));
    }
    q.coeffs() /= n;
    if (i > 0 && !(poses_[i].timestamp > poses_[i - 1].timestamp)) {
      throw Error(ErrorCode::kInvalidArgument,
                  "trajectory timestamps not strictly increasing at pose " +
                      std::to_string(i));
    }
  }
}

Pose interpolate_pose(const Trajectory& traj, double t) {
  if (!traj.covers(t)) {
    throw Error(ErrorCode::kOutOfRange,
                "t=" + std::to_string(t) + " outside trajectory span");
  }
  const auto poses = traj.poses();
  // First pose with timestamp >= t.
  const auto it = std::lower_bound(
      poses.begin(), poses.end(), t,
      [](const Pose& p, double value) { return p.timestamp < value; });
  if (it->timestamp == t) {
    return *it;
  }
  const Pose& b = *it;
  const Pose& a = *(it - 1);
  const double alpha = (t - a.timestamp) / (b.timestamp - a.timestamp);

  Pose out;
  out.timestamp = t;
  out.translation = (1.0 - alpha) * a.translation + alpha * b.translation;
  out.rotation = a.rotation.slerp(alpha, b.rotation).normalized();
  return out;
}

OrganizedScan undistort(const OrganizedScan& scan, const Trajectory& traj) {
  std::vector<PointRecord> out(scan.points().begin(), scan.points().end());
  // Points share timestamps per column, so cache the last pose.
  double cached_t = std::numeric_limits<double>::quiet_NaN();
  Pose pose;
  for (auto& p : out) {
    if (!p.valid) {
      continue;
    }
    if (p.timestamp != cached_t) {
      pose = interpolate_pose(traj, p.timestamp);
      cached_t = p.timestamp;
    }
    const Vec3 w = pose.transform(p.position());
    p.x = static_cast<float>(w.x());
    p.y = static_cast<float>(w.y());
    p.z = static_cast<float>(w.z());
  }
  return OrganizedScan(scan.rows(), scan.cols(), scan.frame_timestamp(),
                       std::move(out));
}

double scan_reference_time(const OrganizedScan& scan) {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (const auto& p : scan.points()) {
    if (p.valid) {
      lo = std::min(lo, p.timestamp);
      hi = std::max(hi, p.timestamp);
    }
  }
  if (lo > hi) {
    return scan.frame_timestamp();
  }
  return 0.5 * (lo + hi);
}

void assign_linear_timestamps(OrganizedScan& scan, double period) {
  const double step = period / static_cast<double>(scan.cols());
  auto pts = scan.mutable_points();
  for (std::size_t i = 0; i < pts.size(); ++i) {
    pts[i].timestamp = scan.frame_timestamp() + step * scan.col_of(i);
  }
}

}  // namespace dynlabel
