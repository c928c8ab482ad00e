// Copyright 2026 The bevmae Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "bevmae/geometry.hpp"

namespace bevmae {

// Raw scans as consecutive little-endian float32 [x, y, z, intensity] records.
inline constexpr std::size_t kBinRecordBytes = 16;

struct BinCloud {
  PointCloud cloud;
  std::size_t rejected = 0;  // records with a non-finite value
};

BinCloud parse_bin_cloud(std::span<const std::uint8_t> bytes, std::string frame_id = {});
// Throws std::runtime_error when the file is unreadable or truncated.
BinCloud load_bin_cloud(const std::filesystem::path& path);

std::vector<std::uint8_t> encode_bin_cloud(const PointCloud& cloud);
void save_bin_cloud(const PointCloud& cloud, const std::filesystem::path& path);

// Files matching a shell wildcard pattern, sorted by path.
std::vector<std::filesystem::path> glob_paths(const std::string& pattern);

// Little-endian helpers shared by the binary formats.
void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v);
void put_u64(std::vector<std::uint8_t>& out, std::uint64_t v);
void put_f32(std::vector<std::uint8_t>& out, float v);
void put_f64(std::vector<std::uint8_t>& out, double v);
std::uint32_t get_u32(std::span<const std::uint8_t> in, std::size_t offset);
std::uint64_t get_u64(std::span<const std::uint8_t> in, std::size_t offset);
float get_f32(std::span<const std::uint8_t> in, std::size_t offset);
double get_f64(std::span<const std::uint8_t> in, std::size_t offset);

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path);
// Writes to a sibling temporary and renames it over `path`.
void write_file_atomic(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);

}  // namespace bevmae
