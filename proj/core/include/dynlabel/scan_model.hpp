// Copyright 2026 The dynlabel Authors
// SPDX-License-Identifier: Apache-2.0
//
// Organized LiDAR scans, poses and trajectories, plus egomotion undistortion.

#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace dynlabel {

using Vec3 = Eigen::Vector3d;

/// One pixel of a range image. Invalid (no-return) pixels carry range 0.
struct PointRecord {
  float x = 0.0F;
  float y = 0.0F;
  float z = 0.0F;
  float range = 0.0F;
  float intensity = 0.0F;
  double timestamp = 0.0;
  bool valid = false;

  Vec3 position() const { return {x, y, z}; }

  friend bool operator==(const PointRecord&, const PointRecord&) = default;
};

/// rows x cols range image stored row-major. Row 0 is the topmost beam and
/// columns follow the azimuth sweep, so timestamps increase along a row.
class OrganizedScan {
 public:
  OrganizedScan() = default;
  OrganizedScan(std::uint32_t rows, std::uint32_t cols, double frame_timestamp);
  OrganizedScan(std::uint32_t rows, std::uint32_t cols, double frame_timestamp,
                std::vector<PointRecord> points);

  std::uint32_t rows() const { return rows_; }
  std::uint32_t cols() const { return cols_; }
  std::size_t size() const { return points_.size(); }
  double frame_timestamp() const { return frame_timestamp_; }

  std::size_t index(std::uint32_t row, std::uint32_t col) const {
    return static_cast<std::size_t>(row) * cols_ + col;
  }
  std::uint32_t row_of(std::size_t i) const {
    return static_cast<std::uint32_t>(i / cols_);
  }
  std::uint32_t col_of(std::size_t i) const {
    return static_cast<std::uint32_t>(i % cols_);
  }

  const PointRecord& operator[](std::size_t i) const { return points_[i]; }
  const PointRecord& at(std::uint32_t row, std::uint32_t col) const {
    return points_[index(row, col)];
  }
  std::span<const PointRecord> points() const { return points_; }

  /// Builders (readers, the simulator) fill points in place.
  std::span<PointRecord> mutable_points() { return points_; }

  std::size_t valid_count() const;

  friend bool operator==(const OrganizedScan&, const OrganizedScan&) = default;

 private:
  std::uint32_t rows_ = 0;
  std::uint32_t cols_ = 0;
  double frame_timestamp_ = 0.0;
  std::vector<PointRecord> points_;
};

struct Pose {
  double timestamp = 0.0;
  Vec3 translation = Vec3::Zero();
  Eigen::Quaterniond rotation = Eigen::Quaterniond::Identity();

  Vec3 transform(const Vec3& p) const { return rotation * p + translation; }
  Eigen::Isometry3d isometry() const;
};

/// Time-sorted poses. Construction enforces strictly increasing timestamps,
/// at least two poses, and normalizes quaternions.
class Trajectory {
 public:
  Trajectory() = default;
  explicit Trajectory(std::vector<Pose> poses);

  std::span<const Pose> poses() const { return poses_; }
  std::size_t size() const { return poses_.size(); }
  bool empty() const { return poses_.empty(); }
  double start_time() const { return poses_.front().timestamp; }
  double end_time() const { return poses_.back().timestamp; }
  bool covers(double t) const {
    return !poses_.empty() && t >= start_time() && t <= end_time();
  }

 private:
  std::vector<Pose> poses_;
};

/// Pose at time t: linear in translation, slerp in rotation between the two
/// bracketing poses. Throws Error(kOutOfRange) outside the trajectory span.
Pose interpolate_pose(const Trajectory& traj, double t);

/// Reprojects every valid point with the pose at its own timestamp. Ranges
/// keep their sensor-frame values; invalid points are copied unchanged.
OrganizedScan undistort(const OrganizedScan& scan, const Trajectory& traj);

/// Midpoint of the valid-point time span, used as the per-scan ray origin
/// time. Falls back to the frame timestamp for an all-invalid scan.
double scan_reference_time(const OrganizedScan& scan);

/// For recordings without per-point times: spreads column timestamps
/// linearly over one revolution of `period` seconds.
void assign_linear_timestamps(OrganizedScan& scan, double period);

}  // namespace dynlabel
