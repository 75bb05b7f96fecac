// Copyright 2026 The dynlabel Authors
// SPDX-License-Identifier: Apache-2.0
//
// Readers and writers for the on-disk formats:
//   scan      "DOLS" u16 version, u16 rows, u16 cols, f64 frame_timestamp, then
//             rows*cols records {f32 x,y,z,range,intensity; f64 timestamp; u8 valid},
//             little-endian, row-major.
//   labels    u32 per point, little-endian, row-major.
//   trajectory  text lines `timestamp tx ty tz qx qy qz qw`.
//   manifest  JSON with parameters and CRC-32 content hashes.

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "dynlabel/labels.hpp"
#include "dynlabel/scan_model.hpp"

namespace dynlabel {

inline constexpr char kScanMagic[4] = {'D', 'O', 'L', 'S'};
inline constexpr std::uint16_t kScanFormatVersion = 1;
inline constexpr std::size_t kScanHeaderBytes = 18;
inline constexpr std::size_t kScanRecordBytes = 29;

std::vector<std::uint8_t> encode_scan(const OrganizedScan& scan);
/// Throws kBadMagic / kUnsupportedVersion / kTruncatedFile naming the byte offset.
OrganizedScan decode_scan(std::span<const std::uint8_t> bytes);

void write_scan(const OrganizedScan& scan, const std::filesystem::path& path);
OrganizedScan read_scan(const std::filesystem::path& path);

std::vector<std::uint8_t> encode_labels(std::span<const std::uint32_t> labels);
void write_labels(const LabeledScan& labels, const std::filesystem::path& path);
/// Throws kTruncatedFile when the file length is not rows*cols*4.
LabeledScan read_labels(const std::filesystem::path& path, std::uint32_t rows,
                        std::uint32_t cols, std::uint64_t scan_id = 0);

void write_trajectory(const Trajectory& traj, const std::filesystem::path& path);
Trajectory read_trajectory(const std::filesystem::path& path);

std::vector<std::uint8_t> read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);
void write_text(const std::filesystem::path& path, const std::string& text);

std::uint32_t crc32_bytes(std::span<const std::uint8_t> bytes);
std::uint32_t crc32_file(const std::filesystem::path& path);

struct FileHash {
  std::string name;  // relative to the manifest directory
  std::uint64_t size = 0;
  std::uint32_t crc32 = 0;
};

struct Manifest {
  std::string sequence_id;
  std::uint64_t scan_count = 0;
  std::uint32_t format_version = kScanFormatVersion;
  std::map<std::string, std::string> parameters;
  std::map<std::string, std::string> info;
  std::vector<FileHash> files;
};

std::string manifest_to_json(const Manifest& m);
Manifest manifest_from_json(const std::string& text);
void write_manifest(const Manifest& m, const std::filesystem::path& path);
Manifest read_manifest(const std::filesystem::path& path);
FileHash hash_file(const std::filesystem::path& base, const std::filesystem::path& file);
/// Names of referenced files whose size or CRC no longer matches (or are missing).
std::vector<std::string> verify_manifest(const Manifest& m, const std::filesystem::path& base);

/// Sorted files in dir with the given extension (".scan", ".label").
std::vector<std::filesystem::path> list_files(const std::filesystem::path& dir,
                                              const std::string& extension);

}  // namespace dynlabel
