// Copyright 2026 The dynlabel Authors
// SPDX-License-Identifier: Apache-2.0

#include "dynlabel/map_builder.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <limits>
#include <sstream>
#include <unordered_map>

#include "dynlabel/errors.hpp"
#include "dynlabel/io.hpp"
#include "dynlabel/voxel_grid.hpp"

namespace dynlabel {

namespace fs = std::filesystem;

std::vector<double> compute_smoothness(const OrganizedScan& scan, std::uint32_t half_window) {
  std::vector<double> c(scan.size(), std::numeric_limits<double>::quiet_NaN());
  const std::uint32_t cols = scan.cols();
  if (cols < 2 * half_window + 1) {
    return c;
  }
  for (std::uint32_t r = 0; r < scan.rows(); ++r) {
    for (std::uint32_t col = half_window; col + half_window < cols; ++col) {
      const PointRecord& p = scan.at(r, col);
      if (!p.valid || !(p.range > 0.0F)) {
        continue;
      }
      double sum = 0.0;
      bool ok = true;
      for (std::uint32_t k = col - half_window; k <= col + half_window && ok; ++k) {
        if (k == col) {
          continue;
        }
        const PointRecord& q = scan.at(r, k);
        ok = q.valid;
        sum += static_cast<double>(q.range) - p.range;
      }
      if (ok) {
        c[scan.index(r, col)] = std::abs(sum) / (2.0 * half_window * p.range);
      }
    }
  }
  return c;
}

std::vector<Feature> extract_features(const OrganizedScan& scan, const FeatureParams& params) {
  std::vector<Feature> out;
  const std::uint32_t h = params.half_window;
  const std::uint32_t cols = scan.cols();
  if (cols < 2 * h + 1 || params.sectors_per_row == 0) {
    return out;
  }
  const std::vector<double> c = compute_smoothness(scan, h);
  const std::uint32_t first = h;
  const std::uint32_t span = cols - 2 * h;
  auto make = [&](FeatureKind kind, std::size_t i) {
    Feature f;
    f.kind = kind;
    f.index = i;
    f.smoothness = c[i];
    const std::uint32_t r = scan.row_of(i);
    const std::uint32_t col = scan.col_of(i);
    for (std::uint32_t k = col - h; k <= col + h; ++k) {
      f.contributing_indices.push_back(scan.index(r, k));
    }
    return f;
  };
  for (std::uint32_t r = 0; r < scan.rows(); ++r) {
    for (std::uint32_t s = 0; s < params.sectors_per_row; ++s) {
      const std::uint32_t b = first + span * s / params.sectors_per_row;
      const std::uint32_t e = first + span * (s + 1) / params.sectors_per_row;
      std::vector<std::size_t> pts;
      for (std::uint32_t col = b; col < e; ++col) {
        const std::size_t i = scan.index(r, col);
        if (!std::isnan(c[i])) {
          pts.push_back(i);
        }
      }
      // Ties break by pixel index for determinism.
      std::sort(pts.begin(), pts.end(), [&](std::size_t a, std::size_t bb) {
        return c[a] != c[bb] ? c[a] > c[bb] : a < bb;
      });
      const std::size_t n_edge = std::min<std::size_t>(params.edges_per_sector, pts.size());
      for (std::size_t k = 0; k < n_edge; ++k) {
        out.push_back(make(FeatureKind::kEdge, pts[k]));
      }
      const std::size_t n_plane =
          std::min<std::size_t>(params.planes_per_sector, pts.size() - n_edge);
      for (std::size_t k = 0; k < n_plane; ++k) {
        out.push_back(make(FeatureKind::kPlane, pts[pts.size() - 1 - k]));
      }
    }
  }
  return out;
}

std::vector<Feature> classify_features(std::vector<Feature> features, const LabeledScan& labels) {
  for (auto& f : features) {
    bool dynamic = false;
    for (const std::size_t i : f.contributing_indices) {
      if (i >= labels.size()) {
        throw Error(ErrorCode::kMisalignedSequences,
                    "feature point " + std::to_string(i) + " outside label array of size " +
                        std::to_string(labels.size()));
      }
      dynamic = dynamic || labels.labels[i] == kLabelDynamic;
    }
    f.classification = dynamic ? FeatureClass::kDynamic : FeatureClass::kStatic;
  }
  return features;
}

namespace {

struct VoxelAccum {
  Vec3 sum = Vec3::Zero();
  std::uint64_t count = 0;
  double best_d2 = std::numeric_limits<double>::infinity();
  MapPoint best;
};

using AccumMap = std::unordered_map<VoxelIndex, VoxelAccum, VoxelIndexHash>;

void accumulate(AccumMap& m, const MapPoint& p, double voxel) {
  auto& a = m[voxel_index_of(Vec3(p.x, p.y, p.z), voxel)];
  a.sum += Vec3(p.x, p.y, p.z);
  ++a.count;
}

void choose(AccumMap& m, const MapPoint& p, double voxel) {
  const Vec3 pos(p.x, p.y, p.z);
  auto& a = m.at(voxel_index_of(pos, voxel));
  const double d2 = (pos - a.sum / static_cast<double>(a.count)).squaredNorm();
  if (d2 < a.best_d2) {
    a.best_d2 = d2;
    a.best = p;
  }
}

std::vector<MapPoint> collect(const AccumMap& m) {
  std::vector<std::pair<VoxelIndex, MapPoint>> v;
  v.reserve(m.size());
  for (const auto& [k, a] : m) {
    v.emplace_back(k, a.best);
  }
  std::sort(v.begin(), v.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
  std::vector<MapPoint> out;
  out.reserve(v.size());
  for (const auto& [k, p] : v) {
    out.push_back(p);
  }
  return out;
}

}  // namespace

std::vector<MapPoint> downsample_points(const std::vector<MapPoint>& points, double voxel) {
  AccumMap m;
  for (const auto& p : points) {
    accumulate(m, p, voxel);
  }
  for (const auto& p : points) {
    choose(m, p, voxel);
  }
  return collect(m);
}

std::vector<MapPoint> labeled_points(const OrganizedScan& scan, const LabeledScan& labels) {
  if (labels.size() != scan.size()) {
    throw Error(ErrorCode::kMisalignedSequences, "label count differs from scan size");
  }
  std::vector<MapPoint> out;
  for (std::size_t i = 0; i < scan.size(); ++i) {
    const PointRecord& p = scan[i];
    if (p.valid) {
      out.push_back({p.x, p.y, p.z, p.intensity, labels.labels[i]});
    }
  }
  return out;
}

AggregateMap build_clean_map(const ScanSource& scans,
                             const std::function<LabeledScan(std::size_t)>& labels,
                             const Trajectory& traj, const MapParams& params) {
  if (!(params.downsample > 0.0) || !(params.max_range > 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "map range and downsample must be positive");
  }
  AccumMap stat;
  AccumMap dyn;
  // Pass 0 accumulates centroids, pass 1 picks representatives.
  for (int pass = 0; pass < 2; ++pass) {
    for (std::size_t k = 0; k < scans.size(); ++k) {
      const OrganizedScan scan = scans.load(k);
      const LabeledScan lab = labels(k);
      if (lab.size() != scan.size()) {
        throw Error(ErrorCode::kMisalignedSequences,
                    "scan " + scans.name(k) + ": label count differs from scan size");
      }
      const OrganizedScan world = undistort(scan, traj);
      for (std::size_t i = 0; i < world.size(); ++i) {
        const PointRecord& p = world[i];
        if (!p.valid || static_cast<double>(p.range) > params.max_range) {
          continue;
        }
        const bool dynamic = lab.labels[i] == kLabelDynamic;
        if (dynamic && !params.dynamic_layer) {
          continue;
        }
        const MapPoint mp{p.x, p.y, p.z, p.intensity, dynamic ? kLabelDynamic : kLabelStatic};
        AccumMap& target = dynamic ? dyn : stat;
        if (pass == 0) {
          accumulate(target, mp, params.downsample);
        } else {
          choose(target, mp, params.downsample);
        }
      }
    }
  }
  AggregateMap out;
  out.downsample = params.downsample;
  out.static_points = collect(stat);
  out.dynamic_points = collect(dyn);
  return out;
}

namespace {

void label_color(std::uint32_t label, std::uint8_t rgb[3]) {
  switch (label) {
    case kLabelDynamic:
      rgb[0] = 230; rgb[1] = 40; rgb[2] = 40;
      break;
    case kLabelGround:
      rgb[0] = 150; rgb[1] = 110; rgb[2] = 60;
      break;
    default:
      rgb[0] = 170; rgb[1] = 170; rgb[2] = 170;
      break;
  }
}

template <typename U>
void put(std::vector<std::uint8_t>& buf, U v) {
  for (std::size_t k = 0; k < sizeof(U); ++k) {
    buf.push_back(static_cast<std::uint8_t>(v >> (8 * k)));
  }
}

template <typename U>
U get(const std::uint8_t* p) {
  U v = 0;
  for (std::size_t k = 0; k < sizeof(U); ++k) {
    v |= static_cast<U>(static_cast<U>(p[k]) << (8 * k));
  }
  return v;
}

}  // namespace

void write_ply(const fs::path& path, const std::vector<MapPoint>& points, bool colorize) {
  std::ostringstream header;
  header << "ply\nformat binary_little_endian 1.0\nelement vertex " << points.size()
         << "\nproperty float x\nproperty float y\nproperty float z\n"
            "property float intensity\nproperty uint label\n";
  if (colorize) {
    header << "property uchar red\nproperty uchar green\nproperty uchar blue\n";
  }
  header << "end_header\n";
  const std::string h = header.str();
  std::vector<std::uint8_t> buf(h.begin(), h.end());
  buf.reserve(h.size() + points.size() * (colorize ? 23 : 20));
  for (const auto& p : points) {
    put(buf, std::bit_cast<std::uint32_t>(p.x));
    put(buf, std::bit_cast<std::uint32_t>(p.y));
    put(buf, std::bit_cast<std::uint32_t>(p.z));
    put(buf, std::bit_cast<std::uint32_t>(p.intensity));
    put(buf, p.label);
    if (colorize) {
      std::uint8_t rgb[3];
      label_color(p.label, rgb);
      buf.insert(buf.end(), rgb, rgb + 3);
    }
  }
  write_file(path, buf);
}

std::vector<MapPoint> read_ply(const fs::path& path) {
  const auto bytes = read_file(path);
  const std::string marker = "end_header\n";
  const auto* begin = reinterpret_cast<const char*>(bytes.data());
  const std::string_view all(begin, bytes.size());
  const auto end = all.find(marker);
  if (all.substr(0, 4) != "ply\n" || end == std::string_view::npos) {
    throw Error(ErrorCode::kBadMagic, path.string() + ": not a PLY file");
  }
  std::istringstream hs{std::string(all.substr(0, end))};
  std::string line;
  std::size_t count = 0;
  std::size_t props = 0;
  bool binary_le = false;
  while (std::getline(hs, line)) {
    if (line.rfind("format binary_little_endian", 0) == 0) {
      binary_le = true;
    } else if (line.rfind("element vertex ", 0) == 0) {
      count = std::stoull(line.substr(15));
    } else if (line.rfind("property ", 0) == 0) {
      ++props;
    }
  }
  if (!binary_le || (props != 5 && props != 8)) {
    throw Error(ErrorCode::kUnsupportedVersion, path.string() + ": unsupported PLY layout");
  }
  const std::size_t stride = props == 8 ? 23 : 20;
  const std::size_t offset = end + marker.size();
  if (bytes.size() != offset + count * stride) {
    throw Error(ErrorCode::kTruncatedFile, path.string() + ": expected " +
                                               std::to_string(offset + count * stride) +
                                               " bytes, found " + std::to_string(bytes.size()));
  }
  std::vector<MapPoint> out(count);
  for (std::size_t k = 0; k < count; ++k) {
    const std::uint8_t* p = bytes.data() + offset + k * stride;
    out[k].x = std::bit_cast<float>(get<std::uint32_t>(p));
    out[k].y = std::bit_cast<float>(get<std::uint32_t>(p + 4));
    out[k].z = std::bit_cast<float>(get<std::uint32_t>(p + 8));
    out[k].intensity = std::bit_cast<float>(get<std::uint32_t>(p + 12));
    out[k].label = get<std::uint32_t>(p + 16);
  }
  return out;
}

}  // namespace dynlabel
