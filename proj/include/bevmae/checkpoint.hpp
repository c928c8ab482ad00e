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

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include "bevmae/model.hpp"
#include "bevmae/optim.hpp"
#include "bevmae/params.hpp"

namespace bevmae {

// Little-endian container:
//   "BVMA" | u32 version | u8 kind | u32 descriptor length | descriptor (UTF-8
//   key = value lines) | i64 step | u8 has_optim | i64 optim step |
//   u32 entry count | entries
// Each entry is u32 name length | name | u8 dtype (1 = f64) | u32 rank |
// u64 dims[rank] | raw values. Optimizer moments are stored as entries named
// "optim.m/<param>" and "optim.v/<param>" after the parameters.
inline constexpr std::uint32_t kCheckpointVersion = 1;

enum class CheckpointKind : std::uint8_t { kFull = 0, kEncoder = 1 };

struct Checkpoint {
  CheckpointKind kind = CheckpointKind::kFull;
  ModelConfig model;
  ParameterSet params;
  std::optional<OptimState> optim;
  std::int64_t step = 0;
};

std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& ckpt);
Checkpoint decode_checkpoint(std::span<const std::uint8_t> bytes);

// Write-then-rename, so an interrupted save never leaves a partial file.
void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

// Keeps the encoder convolutions only: no decoder, heads, token or optimizer state.
Checkpoint export_encoder(const Checkpoint& ckpt);

}  // namespace bevmae
