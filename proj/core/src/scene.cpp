// Copyright 2026 The dynlabel Authors
// SPDX-License-Identifier: Apache-2.0

#include "dynlabel/scene.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

#include <json.hpp>

#include "dynlabel/errors.hpp"

namespace dynlabel {

using nlohmann::json;

// ---------------------------------------------------------------------------
// Path

Path::Path(std::vector<Waypoint> waypoints, bool closed)
    : waypoints_(std::move(waypoints)), closed_(closed) {
  if (waypoints_.empty()) {
    throw Error(ErrorCode::kInvalidConfig, "path needs at least one waypoint");
  }
  for (const auto& w : waypoints_) {
    if (!(w.speed >= 0.0) || !(w.pause >= 0.0)) {
      throw Error(ErrorCode::kInvalidConfig, "path speeds and pauses must be >= 0");
    }
  }
  const std::size_t n = waypoints_.size();
  const std::size_t legs = closed_ ? n : n - 1;
  double t = 0.0;
  Vec3 heading = Vec3::UnitX();
  rest_position_ = waypoints_.back().position;
  cyclic_ = closed_ && n > 1;
  for (std::size_t i = 0; i < legs; ++i) {
    const Waypoint& a = waypoints_[i];
    const Waypoint& b = waypoints_[(i + 1) % n];
    if (a.pause > 0.0) {
      phases_.push_back({t, t + a.pause, a.position, a.position, 0.0, heading});
      t += a.pause;
    }
    const Vec3 delta = b.position - a.position;
    const double len = delta.norm();
    if (a.speed == 0.0) {
      // Parked for good.
      rest_position_ = a.position;
      cyclic_ = false;
      break;
    }
    if (len > 0.0) {
      heading = delta / len;
      phases_.push_back({t, t + len / a.speed, a.position, b.position, a.speed, heading});
      t += len / a.speed;
    }
    if (i + 1 == legs) {
      rest_position_ = b.position;
    }
  }
  rest_heading_ = heading;
  period_ = t;
  if (period_ <= 0.0) {
    cyclic_ = false;
  }
  if (!phases_.empty() && !cyclic_) {
    const Phase& last = phases_.back();
    if (last.speed > 0.0) {
      rest_position_ = last.to;
    }
  }
  if (phases_.empty()) {
    rest_position_ = waypoints_.front().position;
  }
}

const Path::Phase* Path::phase_at(double t, double* local_t) const {
  if (phases_.empty()) {
    return nullptr;
  }
  double tt = t;
  if (cyclic_) {
    tt = std::fmod(t, period_);
    if (tt < 0.0) {
      tt += period_;
    }
  } else if (t >= period_) {
    return nullptr;
  }
  if (tt < 0.0) {
    tt = 0.0;
  }
  // Phases are [t0, t1): arrival instants already belong to the next phase.
  const auto it = std::upper_bound(phases_.begin(), phases_.end(), tt,
                                   [](double v, const Phase& p) { return v < p.t1; });
  if (it == phases_.end()) {
    return nullptr;
  }
  *local_t = tt;
  return &*it;
}

Vec3 Path::position_at(double t) const {
  double lt = 0.0;
  const Phase* ph = phase_at(t, &lt);
  if (ph == nullptr) {
    return rest_position_;
  }
  if (ph->speed == 0.0) {
    return ph->from;
  }
  const double a = (lt - ph->t0) / (ph->t1 - ph->t0);
  return ph->from + a * (ph->to - ph->from);
}

double Path::speed_at(double t) const {
  double lt = 0.0;
  const Phase* ph = phase_at(t, &lt);
  return ph == nullptr ? 0.0 : ph->speed;
}

Vec3 Path::heading_at(double t) const {
  double lt = 0.0;
  const Phase* ph = phase_at(t, &lt);
  return ph == nullptr ? rest_heading_ : ph->heading;
}

std::vector<double> Path::knot_times(double horizon) const {
  std::vector<double> out;
  if (phases_.empty()) {
    return out;
  }
  double base = 0.0;
  while (base <= horizon) {
    for (const auto& p : phases_) {
      if (base + p.t0 <= horizon) {
        out.push_back(base + p.t0);
      }
      if (base + p.t1 <= horizon) {
        out.push_back(base + p.t1);
      }
    }
    if (!cyclic_) {
      break;
    }
    base += period_;
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

// ---------------------------------------------------------------------------
// Sensor / scene

double SensorSpec::row_elevation(std::uint32_t row) const {
  const double up = vfov_up_deg * std::numbers::pi / 180.0;
  const double down = vfov_down_deg * std::numbers::pi / 180.0;
  if (rows < 2) {
    return up;
  }
  return up + (down - up) * static_cast<double>(row) / static_cast<double>(rows - 1);
}

double SensorSpec::col_azimuth(std::uint32_t col) const {
  return 2.0 * std::numbers::pi * static_cast<double>(col) / static_cast<double>(cols);
}

Pose SensorSpec::pose_at(double t) const {
  Pose p;
  p.timestamp = t;
  p.translation = path.position_at(t);
  p.rotation = Eigen::Quaterniond(Eigen::AngleAxisd(yaw0 + yaw_rate * t, Vec3::UnitZ()));
  return p;
}

std::size_t SceneSpec::scan_count() const {
  return static_cast<std::size_t>(std::floor(duration * sensor.rate_hz + 1e-9));
}

const char* to_string(MoverShape s) {
  switch (s) {
    case MoverShape::kSphere: return "sphere";
    case MoverShape::kBox: return "box";
    case MoverShape::kCylinder: return "cylinder";
    case MoverShape::kBiped: return "biped";
  }
  return "?";
}

std::optional<MoverShape> parse_mover_shape(const std::string& s) {
  for (auto m : {MoverShape::kSphere, MoverShape::kBox, MoverShape::kCylinder,
                 MoverShape::kBiped}) {
    if (s == to_string(m)) {
      return m;
    }
  }
  return std::nullopt;
}

void SceneSpec::validate() const {
  auto fail = [](const std::string& what) { throw Error(ErrorCode::kInvalidConfig, what); };
  if (sensor.rows < 2) fail("sensor.rows must be >= 2");
  if (sensor.cols < 8) fail("sensor.cols must be >= 8");
  if (sensor.rows > 65535 || sensor.cols > 65535) fail("sensor dimensions exceed u16");
  if (!(sensor.rate_hz > 0.0)) fail("sensor.rate_hz must be > 0");
  if (!(sensor.vfov_up_deg > sensor.vfov_down_deg)) fail("vfov_up_deg must exceed vfov_down_deg");
  if (!(duration > 0.0)) fail("duration must be > 0");
  if (!(noise_sigma >= 0.0)) fail("noise_sigma must be >= 0");
  for (const auto& b : boxes) {
    if (!(b.max.array() > b.min.array()).all()) fail("box max must exceed min");
  }
  for (const auto& p : planes) {
    if (!(p.normal.norm() > 0.0)) fail("plane normal must be nonzero");
  }
  for (const auto& m : movers) {
    if (!(m.size.array() >= 0.0).all()) fail("mover size must be >= 0");
    for (const auto& w : m.path.waypoints()) {
      if (!(w.speed >= 0.0)) fail("mover speeds must be >= 0");
    }
  }
}

// ---------------------------------------------------------------------------
// JSON

namespace {

json vec_to_json(const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }

Vec3 vec_from_json(const json& j) {
  if (!j.is_array() || j.size() != 3) {
    throw Error(ErrorCode::kInvalidConfig, "expected a 3-element array");
  }
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

json path_to_json(const Path& p) {
  json wps = json::array();
  for (const auto& w : p.waypoints()) {
    wps.push_back({{"position", vec_to_json(w.position)}, {"speed", w.speed}, {"pause", w.pause}});
  }
  return {{"closed", p.closed()}, {"waypoints", wps}};
}

Path path_from_json(const json& j) {
  std::vector<Waypoint> wps;
  for (const auto& w : j.at("waypoints")) {
    Waypoint wp;
    wp.position = vec_from_json(w.at("position"));
    wp.speed = w.value("speed", 0.0);
    wp.pause = w.value("pause", 0.0);
    wps.push_back(wp);
  }
  return Path(std::move(wps), j.value("closed", false));
}

}  // namespace

std::string scene_to_json(const SceneSpec& s) {
  json j;
  j["name"] = s.name;
  j["duration"] = s.duration;
  j["noise_sigma"] = s.noise_sigma;
  j["seed"] = s.seed;
  j["sensor"] = {{"rows", s.sensor.rows},
                 {"cols", s.sensor.cols},
                 {"vfov_up_deg", s.sensor.vfov_up_deg},
                 {"vfov_down_deg", s.sensor.vfov_down_deg},
                 {"rate_hz", s.sensor.rate_hz},
                 {"yaw0", s.sensor.yaw0},
                 {"yaw_rate", s.sensor.yaw_rate},
                 {"path", path_to_json(s.sensor.path)}};
  j["boxes"] = json::array();
  for (const auto& b : s.boxes) {
    j["boxes"].push_back(
        {{"min", vec_to_json(b.min)}, {"max", vec_to_json(b.max)}, {"intensity", b.intensity}});
  }
  j["planes"] = json::array();
  for (const auto& p : s.planes) {
    j["planes"].push_back(
        {{"normal", vec_to_json(p.normal)}, {"offset", p.offset}, {"intensity", p.intensity}});
  }
  j["movers"] = json::array();
  for (const auto& m : s.movers) {
    j["movers"].push_back({{"name", m.name},
                           {"shape", to_string(m.shape)},
                           {"size", vec_to_json(m.size)},
                           {"intensity", m.intensity},
                           {"path", path_to_json(m.path)}});
  }
  return j.dump(2) + "\n";
}

SceneSpec scene_from_json(const std::string& text) {
  SceneSpec s;
  try {
    const json j = json::parse(text);
    s.name = j.value("name", std::string{});
    s.duration = j.at("duration").get<double>();
    s.noise_sigma = j.value("noise_sigma", 0.0);
    s.seed = j.value("seed", std::uint64_t{0});
    const json& js = j.at("sensor");
    s.sensor.rows = js.value("rows", 64U);
    s.sensor.cols = js.value("cols", 2048U);
    s.sensor.vfov_up_deg = js.value("vfov_up_deg", 16.6);
    s.sensor.vfov_down_deg = js.value("vfov_down_deg", -16.6);
    s.sensor.rate_hz = js.value("rate_hz", 10.0);
    s.sensor.yaw0 = js.value("yaw0", 0.0);
    s.sensor.yaw_rate = js.value("yaw_rate", 0.0);
    s.sensor.path = path_from_json(js.at("path"));
    for (const auto& b : j.value("boxes", json::array())) {
      s.boxes.push_back({vec_from_json(b.at("min")), vec_from_json(b.at("max")),
                         b.value("intensity", 0.5F)});
    }
    for (const auto& p : j.value("planes", json::array())) {
      StaticPlane plane;
      plane.normal = vec_from_json(p.at("normal"));
      plane.offset = p.at("offset").get<double>();
      plane.intensity = p.value("intensity", 0.3F);
      s.planes.push_back(plane);
    }
    for (const auto& m : j.value("movers", json::array())) {
      Mover mv;
      mv.name = m.value("name", std::string{});
      const auto shape = parse_mover_shape(m.at("shape").get<std::string>());
      if (!shape) {
        throw Error(ErrorCode::kInvalidConfig, "unknown mover shape");
      }
      mv.shape = *shape;
      mv.size = vec_from_json(m.at("size"));
      mv.intensity = m.value("intensity", 0.8F);
      mv.path = path_from_json(m.at("path"));
      s.movers.push_back(std::move(mv));
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kInvalidConfig, std::string("scene JSON: ") + e.what());
  }
  for (auto& p : s.planes) {
    const double n = p.normal.norm();
    if (n > 0.0) {
      p.normal /= n;
      p.offset /= n;
    }
  }
  s.validate();
  return s;
}

SceneSpec load_scene(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw Error(ErrorCode::kIo, "cannot open scene file " + path);
  }
  std::stringstream ss;
  ss << in.rdbuf();
  return scene_from_json(ss.str());
}

// ---------------------------------------------------------------------------
// Presets

namespace {

Path loop(std::initializer_list<Vec3> pts, double speed, double pause = 0.0) {
  std::vector<Waypoint> wps;
  for (const auto& p : pts) {
    wps.push_back({p, speed, pause});
  }
  return Path(std::move(wps), true);
}

void add_walls(SceneSpec& s, double x0, double x1, double y0, double y1, double height) {
  constexpr double t = 0.3;
  s.boxes.push_back({{x0 - t, y0 - t, -0.5}, {x0, y1 + t, height}, 0.45F});
  s.boxes.push_back({{x1, y0 - t, -0.5}, {x1 + t, y1 + t, height}, 0.45F});
  s.boxes.push_back({{x0, y0 - t, -0.5}, {x1, y0, height}, 0.5F});
  s.boxes.push_back({{x0, y1, -0.5}, {x1, y1 + t, height}, 0.5F});
}

SensorSpec default_sensor() {
  SensorSpec s;
  s.rows = 64;
  s.cols = 2048;
  s.vfov_up_deg = 16.6;
  s.vfov_down_deg = -16.6;
  s.rate_hz = 10.0;
  return s;
}

Mover make_mover(std::string name, MoverShape shape, Vec3 size, Path path, float intensity) {
  Mover m;
  m.name = std::move(name);
  m.shape = shape;
  m.size = size;
  m.path = std::move(path);
  m.intensity = intensity;
  return m;
}

SceneSpec static_room() {
  SceneSpec s;
  s.name = "static-room";
  s.duration = 10.0;
  s.noise_sigma = 0.02;
  s.seed = 11;
  s.planes.push_back({Vec3::UnitZ(), 0.0, 0.3F});
  s.planes.push_back({Vec3::UnitZ(), 3.5, 0.35F});
  add_walls(s, -10.0, 10.0, -7.0, 7.0, 3.5);
  s.boxes.push_back({{-6.0, -5.5, 0.0}, {-4.5, -4.3, 0.9}, 0.6F});
  s.boxes.push_back({{3.0, 3.5, 0.0}, {4.0, 6.5, 2.0}, 0.55F});
  s.boxes.push_back({{-1.0, 2.2, 0.0}, {-0.6, 2.6, 3.5}, 0.5F});
  s.boxes.push_back({{5.5, -5.0, 0.0}, {7.0, -3.8, 1.2}, 0.6F});
  s.boxes.push_back({{-8.0, 3.5, 0.0}, {-6.8, 4.7, 0.5}, 0.65F});
  s.sensor = default_sensor();
  s.sensor.path = loop({{-5.0, -2.0, 1.4}, {4.0, -2.0, 1.4}, {4.0, 1.0, 1.4}, {-5.0, 1.0, 1.4}},
                       1.0);
  s.sensor.yaw_rate = 0.2;
  return s;
}

SceneSpec courtyard_base(std::string name, double duration) {
  SceneSpec s;
  s.name = std::move(name);
  s.duration = duration;
  s.noise_sigma = 0.02;
  s.planes.push_back({Vec3::UnitZ(), 0.0, 0.3F});
  add_walls(s, -20.0, 20.0, -15.0, 15.0, 5.0);
  s.boxes.push_back({{-19.5, -14.5, 0.0}, {-15.0, -11.0, 4.0}, 0.5F});
  s.boxes.push_back({{14.0, 11.0, 0.0}, {19.5, 14.5, 3.0}, 0.5F});
  s.boxes.push_back({{-3.0, -14.5, 0.0}, {3.0, -13.0, 2.5}, 0.55F});
  s.boxes.push_back({{16.0, -6.0, 0.0}, {19.5, 2.0, 3.5}, 0.5F});
  s.boxes.push_back({{-11.0, 1.0, 0.0}, {-10.4, 1.6, 1.1}, 0.7F});  // bollard
  // Kept 3 m off the sensor path: anything closer sits under the lowest beam
  // and its voxels get freed by rays skimming its top.
  s.boxes.push_back({{11.0, 1.2, 0.0}, {12.5, 1.8, 0.8}, 0.6F});  // bench
  s.sensor = default_sensor();
  s.sensor.path =
      loop({{-8.0, -4.0, 1.5}, {8.0, -4.0, 1.5}, {8.0, 4.0, 1.5}, {-8.0, 4.0, 1.5}}, 1.2);
  s.sensor.yaw_rate = 0.05;
  return s;
}

SceneSpec movers_mixed() {
  SceneSpec s = courtyard_base("movers-mixed", 20.0);
  s.seed = 23;
  s.movers.push_back(make_mover(
      "walker", MoverShape::kBiped, {0.25, 1.75, 0.0},
      loop({{-12.0, -9.0, 0.0}, {-2.0, -9.0, 0.0}, {-2.0, -7.0, 0.0}, {-12.0, -7.0, 0.0}}, 1.3),
      0.8F));
  s.movers.push_back(make_mover(
      "ball", MoverShape::kSphere, {0.45, 0.0, 0.0},
      loop({{2.0, 8.5, 1.3}, {12.0, 8.5, 1.3}, {12.0, 10.5, 1.3}, {2.0, 10.5, 1.3}}, 1.5), 0.9F));
  s.movers.push_back(make_mover("crate", MoverShape::kBox, {1.0, 1.0, 1.3},
                                loop({{-15.0, 6.0, 0.65}, {-5.0, 9.0, 0.65}}, 1.0), 0.7F));
  s.movers.push_back(make_mover(
      "pillar", MoverShape::kCylinder, {0.3, 1.8, 0.0},
      loop({{10.0, -10.0, 0.0}, {13.0, -3.0, 0.0}, {4.0, -8.5, 0.0}}, 0.8), 0.75F));
  s.movers.push_back(make_mover("lift", MoverShape::kBox, {1.2, 1.2, 0.6},
                                loop({{-1.0, 10.0, 0.6}, {-1.0, 10.0, 2.8}}, 0.5), 0.85F));
  return s;
}

SceneSpec stop_and_go() {
  SceneSpec s = courtyard_base("stop-and-go", 15.0);
  s.seed = 31;
  // Legs of 4 m and 3 m at 1 m/s put arrivals on scan boundaries; every
  // waypoint holds the walker for 0.3 s = 3 scans.
  s.movers.push_back(make_mover(
      "walker", MoverShape::kBiped, {0.25, 1.75, 0.0},
      loop({{-10.0, -9.0, 0.0}, {-6.0, -9.0, 0.0}, {-6.0, -6.0, 0.0}, {-10.0, -6.0, 0.0}}, 1.0,
           0.3),
      0.8F));
  s.movers.push_back(make_mover(
      "ball", MoverShape::kSphere, {0.45, 0.0, 0.0},
      loop({{2.0, 8.5, 1.3}, {12.0, 8.5, 1.3}, {12.0, 10.5, 1.3}, {2.0, 10.5, 1.3}}, 1.5), 0.9F));
  return s;
}

SceneSpec crowd() {
  SceneSpec s = courtyard_base("crowd", 10.0);
  s.seed = 47;
  const struct {
    Vec3 a, b;
    double speed;
  } walkers[] = {
      {{-14.0, -9.0, 0.0}, {-3.0, -10.0, 0.0}, 1.2}, {{-3.0, -7.5, 0.0}, {-14.0, -7.0, 0.0}, 1.0},
      {{3.0, -9.0, 0.0}, {12.0, -11.0, 0.0}, 1.4},   {{12.0, -8.0, 0.0}, {3.0, -7.5, 0.0}, 0.9},
      {{-13.0, 8.0, 0.0}, {-2.0, 9.5, 0.0}, 1.1},    {{-2.0, 11.0, 0.0}, {-13.0, 10.5, 0.0}, 1.3},
      {{2.0, 8.0, 0.0}, {12.0, 9.0, 0.0}, 1.0},      {{13.0, 11.0, 0.0}, {3.0, 10.5, 0.0}, 1.2},
  };
  int k = 0;
  for (const auto& w : walkers) {
    s.movers.push_back(make_mover("walker" + std::to_string(k++), MoverShape::kBiped,
                                  {0.25, 1.7, 0.0}, loop({w.a, w.b}, w.speed), 0.8F));
  }
  return s;
}

}  // namespace

std::vector<std::string> preset_names() {
  return {"static-room", "movers-mixed", "stop-and-go", "crowd"};
}

SceneSpec preset_scene(const std::string& name) {
  if (name == "static-room") return static_room();
  if (name == "movers-mixed") return movers_mixed();
  if (name == "stop-and-go") return stop_and_go();
  if (name == "crowd") return crowd();
  throw Error(ErrorCode::kInvalidArgument, "unknown preset '" + name + "'");
}

}  // namespace dynlabel
