// Copyright 2026 The dynlabel Authors
// SPDX-License-Identifier: Apache-2.0

#include "dynlabel/io.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cstring>
#include <fstream>
#include <sstream>

#include <json.hpp>
#include <zlib.h>

#include "dynlabel/errors.hpp"

namespace dynlabel {

namespace fs = std::filesystem;

namespace {

class ByteWriter {
 public:
  explicit ByteWriter(std::size_t reserve) { buf_.reserve(reserve); }

  template <typename U>
  void put_uint(U v) {
    for (std::size_t k = 0; k < sizeof(U); ++k) {
      buf_.push_back(static_cast<std::uint8_t>(v >> (8 * k)));
    }
  }
  void put_f32(float v) { put_uint(std::bit_cast<std::uint32_t>(v)); }
  void put_f64(double v) { put_uint(std::bit_cast<std::uint64_t>(v)); }
  void put_bytes(const char* p, std::size_t n) { buf_.insert(buf_.end(), p, p + n); }

  std::vector<std::uint8_t> take() { return std::move(buf_); }

 private:
  std::vector<std::uint8_t> buf_;
};

class ByteReader {
 public:
  explicit ByteReader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  std::size_t offset() const { return pos_; }
  std::size_t remaining() const { return bytes_.size() - pos_; }

  void need(std::size_t n, const char* what) const {
    if (remaining() < n) {
      throw Error(ErrorCode::kTruncatedFile, std::string("truncated ") + what + " at byte offset " +
                                                 std::to_string(pos_) + " (need " +
                                                 std::to_string(n) + ", have " +
                                                 std::to_string(remaining()) + ")");
    }
  }
  template <typename U>
  U get_uint() {
    U v = 0;
    for (std::size_t k = 0; k < sizeof(U); ++k) {
      v |= static_cast<U>(static_cast<U>(bytes_[pos_ + k]) << (8 * k));
    }
    pos_ += sizeof(U);
    return v;
  }
  float get_f32() { return std::bit_cast<float>(get_uint<std::uint32_t>()); }
  double get_f64() { return std::bit_cast<double>(get_uint<std::uint64_t>()); }
  std::uint8_t get_u8() { return bytes_[pos_++]; }

 private:
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

}  // namespace

std::vector<std::uint8_t> encode_scan(const OrganizedScan& scan) {
  if (scan.rows() > 0xFFFF || scan.cols() > 0xFFFF) {
    throw Error(ErrorCode::kInvalidArgument, "scan dimensions exceed u16");
  }
  ByteWriter w(kScanHeaderBytes + scan.size() * kScanRecordBytes);
  w.put_bytes(kScanMagic, 4);
  w.put_uint<std::uint16_t>(kScanFormatVersion);
  w.put_uint<std::uint16_t>(static_cast<std::uint16_t>(scan.rows()));
  w.put_uint<std::uint16_t>(static_cast<std::uint16_t>(scan.cols()));
  w.put_f64(scan.frame_timestamp());
  for (const auto& p : scan.points()) {
    w.put_f32(p.x);
    w.put_f32(p.y);
    w.put_f32(p.z);
    w.put_f32(p.range);
    w.put_f32(p.intensity);
    w.put_f64(p.timestamp);
    w.put_uint<std::uint8_t>(p.valid ? 1 : 0);
  }
  return w.take();
}

OrganizedScan decode_scan(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes);
  r.need(4, "magic");
  if (std::memcmp(bytes.data(), kScanMagic, 4) != 0) {
    throw Error(ErrorCode::kBadMagic, "expected 'DOLS' at byte offset 0");
  }
  for (int k = 0; k < 4; ++k) {
    r.get_u8();
  }
  r.need(2, "version");
  const auto version = r.get_uint<std::uint16_t>();
  if (version != kScanFormatVersion) {
    throw Error(ErrorCode::kUnsupportedVersion,
                "version " + std::to_string(version) + " at byte offset 4");
  }
  r.need(kScanHeaderBytes - 6, "header");
  const auto rows = r.get_uint<std::uint16_t>();
  const auto cols = r.get_uint<std::uint16_t>();
  const double frame_ts = r.get_f64();

  const std::size_t n = static_cast<std::size_t>(rows) * cols;
  std::vector<PointRecord> pts(n);
  for (std::size_t i = 0; i < n; ++i) {
    r.need(kScanRecordBytes, ("record " + std::to_string(i)).c_str());
    PointRecord& p = pts[i];
    p.x = r.get_f32();
    p.y = r.get_f32();
    p.z = r.get_f32();
    p.range = r.get_f32();
    p.intensity = r.get_f32();
    p.timestamp = r.get_f64();
    const std::size_t valid_offset = r.offset();
    const std::uint8_t valid = r.get_u8();
    if (valid > 1) {
      throw Error(ErrorCode::kInvalidArgument,
                  "valid flag " + std::to_string(valid) + " at byte offset " +
                      std::to_string(valid_offset));
    }
    p.valid = valid == 1;
  }
  if (r.remaining() != 0) {
    throw Error(ErrorCode::kInvalidArgument,
                std::to_string(r.remaining()) + " trailing bytes at byte offset " +
                    std::to_string(r.offset()));
  }
  return OrganizedScan(rows, cols, frame_ts, std::move(pts));
}

std::vector<std::uint8_t> read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw Error(ErrorCode::kIo, "cannot open " + path.string());
  }
  in.seekg(0, std::ios::end);
  const auto size = static_cast<std::size_t>(in.tellg());
  in.seekg(0, std::ios::beg);
  std::vector<std::uint8_t> bytes(size);
  if (size > 0 && !in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(size))) {
    throw Error(ErrorCode::kIo, "read failed for " + path.string());
  }
  return bytes;
}

void write_file(const fs::path& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw Error(ErrorCode::kIo, "cannot create " + path.string());
  }
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) {
    throw Error(ErrorCode::kIo, "write failed for " + path.string());
  }
}

void write_text(const fs::path& path, const std::string& text) {
  write_file(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

void write_scan(const OrganizedScan& scan, const fs::path& path) {
  write_file(path, encode_scan(scan));
}

OrganizedScan read_scan(const fs::path& path) {
  const auto bytes = read_file(path);
  try {
    return decode_scan(bytes);
  } catch (const Error& e) {
    throw Error(e.code(), path.string() + ": " + e.what());
  }
}

std::vector<std::uint8_t> encode_labels(std::span<const std::uint32_t> labels) {
  ByteWriter w(labels.size() * 4);
  for (auto v : labels) {
    w.put_uint<std::uint32_t>(v);
  }
  return w.take();
}

void write_labels(const LabeledScan& labels, const fs::path& path) {
  write_file(path, encode_labels(labels.labels));
}

LabeledScan read_labels(const fs::path& path, std::uint32_t rows, std::uint32_t cols,
                        std::uint64_t scan_id) {
  const auto bytes = read_file(path);
  const std::size_t n = static_cast<std::size_t>(rows) * cols;
  if (bytes.size() != n * 4) {
    throw Error(ErrorCode::kTruncatedFile,
                path.string() + ": label file has " + std::to_string(bytes.size()) +
                    " bytes, expected " + std::to_string(n * 4) + " (mismatch at byte offset " +
                    std::to_string(std::min(bytes.size(), n * 4)) + ")");
  }
  LabeledScan out;
  out.scan_id = scan_id;
  out.rows = rows;
  out.cols = cols;
  out.labels.resize(n);
  ByteReader r(bytes);
  for (std::size_t i = 0; i < n; ++i) {
    out.labels[i] = r.get_uint<std::uint32_t>();
  }
  return out;
}

void write_trajectory(const Trajectory& traj, const fs::path& path) {
  std::ostringstream os;
  for (const auto& p : traj.poses()) {
    os << format_double(p.timestamp) << ' ' << format_double(p.translation.x()) << ' '
       << format_double(p.translation.y()) << ' ' << format_double(p.translation.z()) << ' '
       << format_double(p.rotation.x()) << ' ' << format_double(p.rotation.y()) << ' '
       << format_double(p.rotation.z()) << ' ' << format_double(p.rotation.w()) << '\n';
  }
  write_text(path, os.str());
}

Trajectory read_trajectory(const fs::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw Error(ErrorCode::kIo, "cannot open trajectory " + path.string());
  }
  std::vector<Pose> poses;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') {
      continue;
    }
    std::istringstream ls(line);
    double v[8];
    for (double& x : v) {
      if (!(ls >> x)) {
        throw Error(ErrorCode::kInvalidArgument,
                    path.string() + ":" + std::to_string(lineno) + ": expected 8 numbers");
      }
    }
    std::string extra;
    if (ls >> extra) {
      throw Error(ErrorCode::kInvalidArgument,
                  path.string() + ":" + std::to_string(lineno) + ": trailing content");
    }
    Pose p;
    p.timestamp = v[0];
    p.translation = Vec3(v[1], v[2], v[3]);
    p.rotation = Eigen::Quaterniond(v[7], v[4], v[5], v[6]);
    poses.push_back(p);
  }
  try {
    return Trajectory(std::move(poses));
  } catch (const Error& e) {
    throw Error(e.code(), path.string() + ": " + e.what());
  }
}

std::uint32_t crc32_bytes(std::span<const std::uint8_t> bytes) {
  uLong crc = crc32(0L, Z_NULL, 0);
  std::size_t pos = 0;
  while (pos < bytes.size()) {
    const auto chunk = static_cast<uInt>(std::min<std::size_t>(bytes.size() - pos, 1U << 30));
    crc = crc32(crc, bytes.data() + pos, chunk);
    pos += chunk;
  }
  return static_cast<std::uint32_t>(crc);
}

std::uint32_t crc32_file(const fs::path& path) { return crc32_bytes(read_file(path)); }

std::string manifest_to_json(const Manifest& m) {
  nlohmann::ordered_json j;
  j["sequence_id"] = m.sequence_id;
  j["scan_count"] = m.scan_count;
  j["format_version"] = m.format_version;
  j["parameters"] = nlohmann::ordered_json::object();
  for (const auto& [k, v] : m.parameters) {
    j["parameters"][k] = v;
  }
  j["info"] = nlohmann::ordered_json::object();
  for (const auto& [k, v] : m.info) {
    j["info"][k] = v;
  }
  j["files"] = nlohmann::ordered_json::array();
  for (const auto& f : m.files) {
    char hex[9];
    std::snprintf(hex, sizeof(hex), "%08x", f.crc32);
    j["files"].push_back({{"name", f.name}, {"size", f.size}, {"crc32", hex}});
  }
  return j.dump(2) + "\n";
}

Manifest manifest_from_json(const std::string& text) {
  Manifest m;
  try {
    const auto j = nlohmann::json::parse(text);
    m.sequence_id = j.at("sequence_id").get<std::string>();
    m.scan_count = j.at("scan_count").get<std::uint64_t>();
    m.format_version = j.at("format_version").get<std::uint32_t>();
    for (const auto& [k, v] : j.at("parameters").items()) {
      m.parameters[k] = v.get<std::string>();
    }
    const auto info = j.value("info", nlohmann::json::object());
    for (const auto& [k, v] : info.items()) {
      m.info[k] = v.get<std::string>();
    }
    for (const auto& f : j.at("files")) {
      FileHash h;
      h.name = f.at("name").get<std::string>();
      h.size = f.at("size").get<std::uint64_t>();
      h.crc32 = static_cast<std::uint32_t>(std::stoul(f.at("crc32").get<std::string>(), nullptr, 16));
      m.files.push_back(h);
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kInvalidArgument, std::string("manifest JSON: ") + e.what());
  }
  return m;
}

void write_manifest(const Manifest& m, const fs::path& path) {
  write_text(path, manifest_to_json(m));
}

Manifest read_manifest(const fs::path& path) {
  const auto bytes = read_file(path);
  return manifest_from_json(std::string(bytes.begin(), bytes.end()));
}

FileHash hash_file(const fs::path& base, const fs::path& file) {
  const auto bytes = read_file(file);
  FileHash h;
  h.name = fs::relative(file, base).generic_string();
  h.size = bytes.size();
  h.crc32 = crc32_bytes(bytes);
  return h;
}

std::vector<std::string> verify_manifest(const Manifest& m, const fs::path& base) {
  std::vector<std::string> bad;
  for (const auto& f : m.files) {
    const fs::path p = base / f.name;
    std::error_code ec;
    if (!fs::exists(p, ec)) {
      bad.push_back(f.name);
      continue;
    }
    const auto bytes = read_file(p);
    if (bytes.size() != f.size || crc32_bytes(bytes) != f.crc32) {
      bad.push_back(f.name);
    }
  }
  return bad;
}

std::vector<fs::path> list_files(const fs::path& dir, const std::string& extension) {
  std::error_code ec;
  if (!fs::is_directory(dir, ec)) {
    throw Error(ErrorCode::kIo, "not a directory: " + dir.string());
  }
  std::vector<fs::path> out;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.is_regular_file() && e.path().extension() == extension) {
      out.push_back(e.path());
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace dynlabel
