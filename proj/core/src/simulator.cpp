// Copyright 2026 The dynlabel Authors
// SPDX-License-Identifier: Apache-2.0

#include "dynlabel/simulator.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numbers>
#include <random>

#include "dynlabel/errors.hpp"
#include "dynlabel/io.hpp"
#include "dynlabel/parallel.hpp"

namespace dynlabel {

namespace fs = std::filesystem;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kMinHit = 1e-6;

// Biped proportions relative to shoulder half-width hw and height H.
constexpr double kLegRadius = 0.35;
constexpr double kLegLateral = 0.45;
constexpr double kLegHeight = 0.5;
constexpr double kTorsoCenter = 0.75;
constexpr double kTorsoHalfHeight = 0.25;
constexpr double kTorsoDepth = 0.6;
constexpr double kStrideSwing = 0.18;
constexpr double kStrideLength = 1.2;

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

double ray_plane(const Vec3& o, const Vec3& d, const Vec3& n, double offset) {
  const double denom = n.dot(d);
  if (std::abs(denom) < 1e-12) {
    return kInf;
  }
  const double t = (offset - n.dot(o)) / denom;
  return t > kMinHit ? t : kInf;
}

double ray_box(const Vec3& o, const Vec3& d, const Vec3& lo, const Vec3& hi) {
  double t0 = -kInf;
  double t1 = kInf;
  for (int a = 0; a < 3; ++a) {
    if (d[a] == 0.0) {
      if (o[a] < lo[a] || o[a] > hi[a]) {
        return kInf;
      }
      continue;
    }
    const double inv = 1.0 / d[a];
    double ta = (lo[a] - o[a]) * inv;
    double tb = (hi[a] - o[a]) * inv;
    if (ta > tb) {
      std::swap(ta, tb);
    }
    t0 = std::max(t0, ta);
    t1 = std::min(t1, tb);
    if (t0 > t1) {
      return kInf;
    }
  }
  if (t0 > kMinHit) {
    return t0;
  }
  return t1 > kMinHit ? t1 : kInf;
}

// Unit-direction rays only (|d| == 1).
double ray_sphere(const Vec3& o, const Vec3& d, const Vec3& c, double r) {
  const Vec3 oc = o - c;
  const double b = oc.dot(d);
  const double cc = oc.squaredNorm() - r * r;
  const double disc = b * b - cc;
  if (disc < 0.0) {
    return kInf;
  }
  const double s = std::sqrt(disc);
  const double t0 = -b - s;
  if (t0 > kMinHit) {
    return t0;
  }
  const double t1 = -b + s;
  return t1 > kMinHit ? t1 : kInf;
}

// Vertical cylinder standing on `base` with caps at base.z and base.z + h.
double ray_cylinder(const Vec3& o, const Vec3& d, const Vec3& base, double r, double h) {
  double best = kInf;
  const double ox = o.x() - base.x();
  const double oy = o.y() - base.y();
  const double a = d.x() * d.x() + d.y() * d.y();
  if (a > 1e-14) {
    const double b = ox * d.x() + oy * d.y();
    const double c = ox * ox + oy * oy - r * r;
    const double disc = b * b - a * c;
    if (disc >= 0.0) {
      const double s = std::sqrt(disc);
      for (const double t : {(-b - s) / a, (-b + s) / a}) {
        if (t > kMinHit && t < best) {
          const double z = o.z() + t * d.z();
          if (z >= base.z() && z <= base.z() + h) {
            best = t;
            break;
          }
        }
      }
    }
  }
  if (std::abs(d.z()) > 1e-14) {
    for (const double zc : {base.z(), base.z() + h}) {
      const double t = (zc - o.z()) / d.z();
      if (t > kMinHit && t < best) {
        const double x = ox + t * d.x();
        const double y = oy + t * d.y();
        if (x * x + y * y <= r * r) {
          best = t;
        }
      }
    }
  }
  return best;
}

// Ellipsoid with semi-axes (ax along `forward`, ay along the horizontal normal
// of forward, az vertical).
double ray_ellipsoid(const Vec3& o, const Vec3& d, const Vec3& c, const Vec3& forward,
                     const Vec3& semi) {
  const Vec3 left(-forward.y(), forward.x(), 0.0);
  const Vec3 oc = o - c;
  const Vec3 lo(oc.dot(forward) / semi.x(), oc.dot(left) / semi.y(), oc.z() / semi.z());
  const Vec3 ld(d.dot(forward) / semi.x(), d.dot(left) / semi.y(), d.z() / semi.z());
  const double a = ld.squaredNorm();
  const double b = lo.dot(ld);
  const double cc = lo.squaredNorm() - 1.0;
  const double disc = b * b - a * cc;
  if (disc < 0.0) {
    return kInf;
  }
  const double s = std::sqrt(disc);
  const double t0 = (-b - s) / a;
  if (t0 > kMinHit) {
    return t0;
  }
  const double t1 = (-b + s) / a;
  return t1 > kMinHit ? t1 : kInf;
}

// A mover frozen at one instant.
struct PosedMover {
  MoverShape shape = MoverShape::kSphere;
  Vec3 position = Vec3::Zero();
  Vec3 heading = Vec3::UnitX();
  Vec3 size = Vec3::Zero();
  double swing = 0.0;
  float intensity = 0.0F;
  // Conservative bounding sphere for early rejection.
  Vec3 bound_center = Vec3::Zero();
  double bound_radius = 0.0;
};

PosedMover pose_mover(const Mover& m, double t) {
  PosedMover p;
  p.shape = m.shape;
  p.position = m.path.position_at(t);
  Vec3 h = m.path.heading_at(t);
  h.z() = 0.0;
  p.heading = h.norm() > 1e-9 ? Vec3(h.normalized()) : Vec3::UnitX();
  p.size = m.size;
  p.intensity = m.intensity;
  switch (m.shape) {
    case MoverShape::kSphere:
      p.bound_center = p.position;
      p.bound_radius = m.size.x();
      break;
    case MoverShape::kBox:
      p.bound_center = p.position;
      p.bound_radius = 0.5 * m.size.norm();
      break;
    case MoverShape::kCylinder:
      p.bound_center = p.position + Vec3(0.0, 0.0, 0.5 * m.size.y());
      p.bound_radius = std::hypot(m.size.x(), 0.5 * m.size.y());
      break;
    case MoverShape::kBiped: {
      const double speed = m.path.speed_at(t);
      if (speed > kMoverSpeedThreshold) {
        p.swing = kStrideSwing * std::sin(2.0 * std::numbers::pi * t * speed / kStrideLength);
      }
      p.bound_center = p.position + Vec3(0.0, 0.0, 0.5 * m.size.y());
      p.bound_radius = std::hypot(m.size.x() + kStrideSwing, 0.5 * m.size.y()) + 1e-6;
      break;
    }
  }
  return p;
}

double ray_mover(const Vec3& o, const Vec3& d, const PosedMover& m) {
  {
    const Vec3 oc = o - m.bound_center;
    const double b = oc.dot(d);
    const double disc = b * b - (oc.squaredNorm() - m.bound_radius * m.bound_radius);
    if (disc < 0.0) {
      return kInf;
    }
  }
  switch (m.shape) {
    case MoverShape::kSphere:
      return ray_sphere(o, d, m.position, m.size.x());
    case MoverShape::kBox:
      return ray_box(o, d, m.position - 0.5 * m.size, m.position + 0.5 * m.size);
    case MoverShape::kCylinder:
      return ray_cylinder(o, d, m.position, m.size.x(), m.size.y());
    case MoverShape::kBiped: {
      const double hw = m.size.x();
      const double height = m.size.y();
      const Vec3 left(-m.heading.y(), m.heading.x(), 0.0);
      double best = kInf;
      for (const double side : {1.0, -1.0}) {
        const Vec3 foot = m.position + side * kLegLateral * hw * left +
                          side * m.swing * m.heading;
        best = std::min(best, ray_cylinder(o, d, foot, kLegRadius * hw, kLegHeight * height));
      }
      const Vec3 torso = m.position + Vec3(0.0, 0.0, kTorsoCenter * height);
      best = std::min(best, ray_ellipsoid(o, d, torso, m.heading,
                                          Vec3(kTorsoDepth * hw, hw, kTorsoHalfHeight * height)));
      return best;
    }
  }
  return kInf;
}

std::optional<RayHit> cast_static(const SceneSpec& scene, const Vec3& o, const Vec3& d) {
  RayHit hit;
  hit.range = kInf;
  for (const auto& p : scene.planes) {
    const double t = ray_plane(o, d, p.normal, p.offset);
    if (t < hit.range) {
      hit.range = t;
      hit.intensity = p.intensity;
    }
  }
  for (const auto& b : scene.boxes) {
    const double t = ray_box(o, d, b.min, b.max);
    if (t < hit.range) {
      hit.range = t;
      hit.intensity = b.intensity;
    }
  }
  if (hit.range == kInf) {
    return std::nullopt;
  }
  return hit;
}

std::optional<RayHit> cast_posed(const SceneSpec& scene, std::span<const PosedMover> movers,
                                 const Vec3& o, const Vec3& d) {
  auto hit = cast_static(scene, o, d);
  for (std::size_t k = 0; k < movers.size(); ++k) {
    const double t = ray_mover(o, d, movers[k]);
    if (t < (hit ? hit->range : kInf)) {
      hit = RayHit{t, static_cast<std::uint32_t>(k + 1), movers[k].intensity};
    }
  }
  return hit;
}

}  // namespace

std::optional<RayHit> cast_ray(const SceneSpec& scene, double t, const Vec3& origin,
                               const Vec3& direction, bool include_movers) {
  const double n = direction.norm();
  if (!(n > 0.0)) {
    throw Error(ErrorCode::kDegenerateRay, "zero ray direction");
  }
  const Vec3 d = direction / n;
  if (!include_movers) {
    return cast_static(scene, origin, d);
  }
  std::vector<PosedMover> posed;
  posed.reserve(scene.movers.size());
  for (const auto& m : scene.movers) {
    posed.push_back(pose_mover(m, t));
  }
  return cast_posed(scene, posed, origin, d);
}

RenderedScan render_scan(const SceneSpec& scene, double t, unsigned threads) {
  const SensorSpec& sensor = scene.sensor;
  const std::uint32_t rows = sensor.rows;
  const std::uint32_t cols = sensor.cols;
  RenderedScan out{OrganizedScan(rows, cols, t), {}};
  out.truth.labels.assign(out.scan.size(), 0);
  out.truth.instance.assign(out.scan.size(), 0);

  std::vector<double> cos_el(rows);
  std::vector<double> sin_el(rows);
  for (std::uint32_t r = 0; r < rows; ++r) {
    const double el = sensor.row_elevation(r);
    cos_el[r] = std::cos(el);
    sin_el[r] = std::sin(el);
  }
  const double col_dt = 1.0 / (static_cast<double>(cols) * sensor.rate_hz);
  const std::uint64_t scan_key =
      splitmix64(scene.seed ^ splitmix64(std::bit_cast<std::uint64_t>(t)));
  auto points = out.scan.mutable_points();

  parallel_for(cols, threads, [&](std::size_t c0, std::size_t c1) {
    std::vector<PosedMover> posed(scene.movers.size());
    std::vector<bool> moving(scene.movers.size());
    for (std::size_t c = c0; c < c1; ++c) {
      const double tc = t + static_cast<double>(c) * col_dt;
      const Pose pose = sensor.pose_at(tc);
      for (std::size_t k = 0; k < scene.movers.size(); ++k) {
        posed[k] = pose_mover(scene.movers[k], tc);
        moving[k] = scene.movers[k].path.speed_at(tc) > kMoverSpeedThreshold;
      }
      std::mt19937_64 rng(splitmix64(scan_key + c));
      std::normal_distribution<double> noise(0.0, scene.noise_sigma);
      const double az = sensor.col_azimuth(static_cast<std::uint32_t>(c));
      const double ca = std::cos(az);
      const double sa = std::sin(az);
      for (std::uint32_t r = 0; r < rows; ++r) {
        const Vec3 local(cos_el[r] * ca, cos_el[r] * sa, sin_el[r]);
        const Vec3 dir = pose.rotation * local;
        const auto hit = cast_posed(scene, posed, pose.translation, dir);
        const std::size_t i = out.scan.index(r, static_cast<std::uint32_t>(c));
        PointRecord& p = points[i];
        p.timestamp = tc;
        if (!hit || hit->range > kMaxSensorRange) {
          continue;
        }
        double range = hit->range;
        if (scene.noise_sigma > 0.0) {
          range = std::max(1e-3, range + noise(rng));
        }
        const Vec3 xyz = local * range;
        p.x = static_cast<float>(xyz.x());
        p.y = static_cast<float>(xyz.y());
        p.z = static_cast<float>(xyz.z());
        p.range = static_cast<float>(range);
        p.intensity = hit->intensity;
        p.valid = true;
        if (hit->object != 0) {
          out.truth.instance[i] = hit->object;
          out.truth.labels[i] = moving[hit->object - 1] ? 1U : 0U;
        }
      }
    }
  });
  return out;
}

RenderedScan render_scan_index(const SceneSpec& scene, std::size_t k, unsigned threads) {
  return render_scan(scene, static_cast<double>(k) / scene.sensor.rate_hz, threads);
}

Trajectory sensor_trajectory(const SceneSpec& scene) {
  const double end = static_cast<double>(scene.scan_count()) / scene.sensor.rate_hz;
  std::vector<double> times;
  const auto samples = static_cast<std::size_t>(std::ceil(end * 100.0 - 1e-9));
  for (std::size_t k = 0; k <= samples; ++k) {
    times.push_back(std::min(end, static_cast<double>(k) / 100.0));
  }
  for (const double t : scene.sensor.path.knot_times(end)) {
    times.push_back(t);
  }
  std::sort(times.begin(), times.end());
  std::vector<Pose> poses;
  for (const double t : times) {
    if (!poses.empty() && t - poses.back().timestamp < 1e-9) {
      continue;
    }
    poses.push_back(scene.sensor.pose_at(t));
  }
  return Trajectory(std::move(poses));
}

SequenceFiles generate_sequence(const SceneSpec& scene, const fs::path& out_dir,
                                unsigned threads) {
  scene.validate();
  SequenceFiles files;
  files.scan_count = scene.scan_count();
  files.scan_dir = out_dir / "scans";
  files.truth_dir = out_dir / "truth";
  files.trajectory = out_dir / "trajectory.txt";
  files.manifest = out_dir / "manifest.json";
  std::error_code ec;
  fs::create_directories(files.scan_dir, ec);
  if (!ec) {
    fs::create_directories(files.truth_dir, ec);
  }
  if (ec) {
    throw Error(ErrorCode::kIo, "cannot create " + out_dir.string() + ": " + ec.message());
  }

  Manifest manifest;
  manifest.sequence_id = scene.name;
  manifest.scan_count = files.scan_count;

  const std::string scene_text = scene_to_json(scene);
  write_text(out_dir / "scene.json", scene_text);
  manifest.files.push_back(hash_file(out_dir, out_dir / "scene.json"));
  write_trajectory(sensor_trajectory(scene), files.trajectory);
  manifest.files.push_back(hash_file(out_dir, files.trajectory));

  std::uint64_t dynamic_points = 0;
  std::uint64_t valid_points = 0;
  for (std::size_t k = 0; k < files.scan_count; ++k) {
    const RenderedScan rs = render_scan_index(scene, k, threads);
    char name[32];
    std::snprintf(name, sizeof(name), "%06zu", k);
    const fs::path scan_path = files.scan_dir / (std::string(name) + ".scan");
    const fs::path label_path = files.truth_dir / (std::string(name) + ".label");
    write_scan(rs.scan, scan_path);
    write_file(label_path, encode_labels(rs.truth.labels));
    manifest.files.push_back(hash_file(out_dir, scan_path));
    manifest.files.push_back(hash_file(out_dir, label_path));
    valid_points += rs.scan.valid_count();
    dynamic_points += static_cast<std::uint64_t>(
        std::count(rs.truth.labels.begin(), rs.truth.labels.end(), 1U));
  }

  char crc[9];
  std::snprintf(crc, sizeof(crc), "%08x",
                crc32_bytes(std::span(reinterpret_cast<const std::uint8_t*>(scene_text.data()),
                                      scene_text.size())));
  manifest.parameters["seed"] = std::to_string(scene.seed);
  manifest.parameters["scene_hash"] = crc;
  manifest.parameters["rows"] = std::to_string(scene.sensor.rows);
  manifest.parameters["cols"] = std::to_string(scene.sensor.cols);
  manifest.parameters["rate_hz"] = std::to_string(scene.sensor.rate_hz);
  manifest.parameters["noise_sigma"] = std::to_string(scene.noise_sigma);
  manifest.info["valid_points"] = std::to_string(valid_points);
  manifest.info["dynamic_points"] = std::to_string(dynamic_points);
  manifest.info["mover_count"] = std::to_string(scene.movers.size());
  write_manifest(manifest, files.manifest);
  return files;
}

}  // namespace dynlabel
