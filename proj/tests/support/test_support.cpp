// Copyright 2026 The dynlabel Authors
// SPDX-License-Identifier: Apache-2.0

#include "test_support.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <numbers>

namespace dynlabel::testing {

namespace fs = std::filesystem;

TempDir::TempDir(const std::string& tag) {
  static std::atomic<unsigned> counter{0};
  const auto stamp = std::chrono::steady_clock::now().time_since_epoch().count();
  path_ = fs::temp_directory_path() /
          (tag + "-" + std::to_string(stamp) + "-" + std::to_string(counter++));
  fs::create_directories(path_);
}

TempDir::~TempDir() {
  std::error_code ec;
  fs::remove_all(path_, ec);
}

std::optional<std::vector<VoxelIndex>> dense_traversal_oracle(const Vec3& origin,
                                                              const Vec3& endpoint,
                                                              double voxel_size, double eps) {
  const Vec3 d = endpoint - origin;
  const double len = d.norm();
  // Face proximity of both endpoints.
  for (const Vec3& p : {origin, endpoint}) {
    for (int a = 0; a < 3; ++a) {
      const double u = p[a] / voxel_size;
      if (std::abs(u - std::round(u)) * voxel_size < eps) {
        return std::nullopt;
      }
    }
  }
  // Crossing parameters per axis; two different-axis crossings closer than
  // eps along the ray mean an edge or corner pass.
  std::vector<std::pair<double, int>> crossings;
  for (int a = 0; a < 3; ++a) {
    if (d[a] == 0.0) {
      continue;
    }
    const double lo = std::min(origin[a], endpoint[a]) / voxel_size;
    const double hi = std::max(origin[a], endpoint[a]) / voxel_size;
    for (double k = std::ceil(lo); k <= hi; k += 1.0) {
      crossings.emplace_back((k * voxel_size - origin[a]) / d[a], a);
    }
  }
  std::sort(crossings.begin(), crossings.end());
  for (std::size_t i = 1; i < crossings.size(); ++i) {
    if (crossings[i].second != crossings[i - 1].second &&
        (crossings[i].first - crossings[i - 1].first) * len < eps) {
      return std::nullopt;
    }
  }

  const VoxelIndex last = voxel_index_of(endpoint, voxel_size);
  std::vector<VoxelIndex> out;
  const auto n = static_cast<std::size_t>(std::ceil(len / (0.5 * eps))) + 1;
  for (std::size_t j = 0; j < n; ++j) {
    const double s = (static_cast<double>(j) + 0.5) / static_cast<double>(n);
    const VoxelIndex v = voxel_index_of(origin + s * d, voxel_size);
    if (v == last) {
      break;
    }
    if (out.empty() || !(out.back() == v)) {
      out.push_back(v);
    }
  }
  return out;
}

Vec3 beam_direction(std::uint32_t r, std::uint32_t rows, std::uint32_t c, std::uint32_t cols,
                    double vfov_deg) {
  const double el = rows > 1 ? (vfov_deg / 2.0 - vfov_deg * r / (rows - 1)) * std::numbers::pi / 180.0
                             : 0.0;
  const double az = 2.0 * std::numbers::pi * c / cols;
  return {std::cos(el) * std::cos(az), std::cos(el) * std::sin(az), std::sin(el)};
}

SceneSpec floor_boxes_scene(std::uint32_t rows, std::uint32_t cols, double noise) {
  SceneSpec s;
  s.name = "floor-boxes";
  s.duration = 0.5;
  s.noise_sigma = noise;
  s.seed = 5;
  s.planes.push_back({Vec3::UnitZ(), 0.0, 0.3F});
  s.boxes.push_back({{3.0, -1.0, 0.0}, {4.0, 1.0, 1.2}, 0.6F});
  s.boxes.push_back({{-6.0, 2.0, 0.0}, {-5.0, 5.0, 2.5}, 0.5F});
  s.boxes.push_back({{1.0, -7.0, 0.0}, {2.5, -6.0, 0.8}, 0.7F});
  s.boxes.push_back({{-3.0, -4.0, 0.0}, {-2.6, -3.6, 3.0}, 0.5F});
  s.boxes.push_back({{8.0, 6.0, 0.0}, {12.0, 6.5, 2.0}, 0.5F});
  s.sensor.rows = rows;
  s.sensor.cols = cols;
  s.sensor.vfov_up_deg = 16.6;
  s.sensor.vfov_down_deg = -16.6;
  s.sensor.rate_hz = 10.0;
  s.sensor.path = Path({{Vec3(0.0, 0.0, 1.5), 0.0, 0.0}}, false);
  return s;
}

SceneSpec with_static_sensor(SceneSpec scene, const Vec3& p) {
  scene.sensor.path = Path({{p, 0.0, 0.0}}, false);
  scene.sensor.yaw_rate = 0.0;
  return scene;
}

}  // namespace dynlabel::testing
