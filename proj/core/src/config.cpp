// Copyright 2026 The dynlabel Authors
// SPDX-License-Identifier: Apache-2.0

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "dynlabel/errors.hpp"
#include "dynlabel/labeling_pipeline.hpp"

namespace dynlabel {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) {
    return {};
  }
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

[[noreturn]] void bad_value(const std::string& key, const std::string& value) {
  throw Error(ErrorCode::kInvalidConfig, "bad value '" + value + "' for '" + key + "'");
}

double parse_double(const std::string& key, const std::string& v) {
  double out = 0.0;
  const auto res = std::from_chars(v.data(), v.data() + v.size(), out);
  if (res.ec != std::errc() || res.ptr != v.data() + v.size() || !std::isfinite(out)) {
    bad_value(key, v);
  }
  return out;
}

std::uint64_t parse_uint(const std::string& key, const std::string& v) {
  std::uint64_t out = 0;
  const auto res = std::from_chars(v.data(), v.data() + v.size(), out);
  if (res.ec != std::errc() || res.ptr != v.data() + v.size()) {
    bad_value(key, v);
  }
  return out;
}

std::uint32_t parse_u32(const std::string& key, const std::string& v) {
  const std::uint64_t out = parse_uint(key, v);
  if (out > 0xFFFFFFFFULL) {
    bad_value(key, v);
  }
  return static_cast<std::uint32_t>(out);
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  bad_value(key, v);
}

std::string fmt(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

}  // namespace

void SequenceConfig::validate() const {
  auto positive = [](const char* name, double v) {
    if (!(v > 0.0) || !std::isfinite(v)) {
      throw Error(ErrorCode::kInvalidConfig, std::string(name) + " must be > 0");
    }
  };
  positive("voxel_size", voxel_size);
  positive("ratio_threshold", ratio_threshold);
  positive("min_cluster_points", min_cluster_points);
  positive("min_seed_diameter", min_seed_diameter);
  positive("seed_radius_factor", seed_radius_factor);
  positive("ground_max_elevation_deg", ground_max_elevation_deg);
  positive("ground_inlier_threshold", ground_inlier_threshold);
  positive("ground_growth_deg", ground_growth_deg);
  positive("cluster_beta_deg", cluster_beta_deg);
  if (ratio_threshold > 1.0) {
    throw Error(ErrorCode::kInvalidConfig, "ratio_threshold must be <= 1");
  }
}

void SequenceConfig::set(const std::string& key, const std::string& value) {
  const std::string v = trim(value);
  if (key == "voxel_size") voxel_size = parse_double(key, v);
  else if (key == "window") window = parse_u32(key, v);
  else if (key == "ratio_threshold") ratio_threshold = parse_double(key, v);
  else if (key == "min_cluster_points") min_cluster_points = parse_u32(key, v);
  else if (key == "min_seed_diameter") min_seed_diameter = parse_double(key, v);
  else if (key == "seed_radius_factor") seed_radius_factor = parse_double(key, v);
  else if (key == "ground_max_elevation_deg") ground_max_elevation_deg = parse_double(key, v);
  else if (key == "ground_inlier_threshold") ground_inlier_threshold = parse_double(key, v);
  else if (key == "ground_growth_deg") ground_growth_deg = parse_double(key, v);
  else if (key == "cluster_beta_deg") cluster_beta_deg = parse_double(key, v);
  else if (key == "use_feedback") use_feedback = parse_bool(key, v);
  else if (key == "emit_ground_debug") emit_ground_debug = parse_bool(key, v);
  else if (key == "seed") seed = parse_uint(key, v);
  else if (key == "threads") threads = parse_u32(key, v);
  else throw Error(ErrorCode::kInvalidConfig, "unknown config key '" + key + "'");
}

std::map<std::string, std::string> SequenceConfig::to_map() const {
  return {
      {"voxel_size", fmt(voxel_size)},
      {"window", std::to_string(window)},
      {"ratio_threshold", fmt(ratio_threshold)},
      {"min_cluster_points", std::to_string(min_cluster_points)},
      {"min_seed_diameter", fmt(min_seed_diameter)},
      {"seed_radius_factor", fmt(seed_radius_factor)},
      {"ground_max_elevation_deg", fmt(ground_max_elevation_deg)},
      {"ground_inlier_threshold", fmt(ground_inlier_threshold)},
      {"ground_growth_deg", fmt(ground_growth_deg)},
      {"cluster_beta_deg", fmt(cluster_beta_deg)},
      {"use_feedback", use_feedback ? "true" : "false"},
      {"emit_ground_debug", emit_ground_debug ? "true" : "false"},
      {"seed", std::to_string(seed)},
  };
}

GroundParams SequenceConfig::ground_params() const {
  GroundParams g;
  g.max_elevation_deg = ground_max_elevation_deg;
  g.inlier_threshold = ground_inlier_threshold;
  g.growth_angle_deg = ground_growth_deg;
  g.max_growth_distance = 2.0 * ground_inlier_threshold;
  return g;
}

ClusteringParams SequenceConfig::clustering_params() const {
  ClusteringParams c;
  c.voxel_size = voxel_size;
  c.seed_radius_factor = seed_radius_factor;
  c.min_seed_diameter = min_seed_diameter;
  c.beta_deg = cluster_beta_deg;
  c.ratio_threshold = ratio_threshold;
  c.min_points = min_cluster_points;
  return c;
}

SequenceConfig parse_config(const std::string& text, SequenceConfig base) {
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) {
      line.resize(hash);
    }
    line = trim(line);
    if (line.empty()) {
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw Error(ErrorCode::kInvalidConfig,
                  "line " + std::to_string(lineno) + ": expected key = value");
    }
    base.set(trim(line.substr(0, eq)), line.substr(eq + 1));
  }
  return base;
}

SequenceConfig load_config(const std::filesystem::path& path, SequenceConfig base) {
  std::ifstream in(path);
  if (!in) {
    throw Error(ErrorCode::kIo, "cannot open config " + path.string());
  }
  std::stringstream ss;
  ss << in.rdbuf();
  try {
    return parse_config(ss.str(), std::move(base));
  } catch (const Error& e) {
    throw Error(e.code(), path.string() + ": " + e.what());
  }
}

}  // namespace dynlabel
