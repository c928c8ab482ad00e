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


#include "bevmae/checkpoint.hpp"

#include <stdexcept>
#include <string>

#include "bevmae/config.hpp"
#include "bevmae/io.hpp"

namespace bevmae {
namespace {

constexpr char kMagic[4] = {'B', 'V', 'M', 'A'};
constexpr std::uint8_t kDtypeF64 = 1;

void put_string(std::vector<std::uint8_t>& out, const std::string& s) {
  put_u32(out, static_cast<std::uint32_t>(s.size()));
  out.insert(out.end(), s.begin(), s.end());
}

void put_entry(std::vector<std::uint8_t>& out, const std::string& name, const Matrix& m) {
  put_string(out, name);
  out.push_back(kDtypeF64);
  put_u32(out, 2);
  put_u64(out, static_cast<std::uint64_t>(m.rows()));
  put_u64(out, static_cast<std::uint64_t>(m.cols()));
  for (Eigen::Index k = 0; k < m.size(); ++k) put_f64(out, m.data()[k]);
}

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  std::uint8_t u8() {
    need(1);
    return bytes_[pos_++];
  }
  std::uint32_t u32() {
    const auto v = get_u32(bytes_, pos_);
    pos_ += 4;
    return v;
  }
  std::uint64_t u64() {
    const auto v = get_u64(bytes_, pos_);
    pos_ += 8;
    return v;
  }
  double f64() {
    const auto v = get_f64(bytes_, pos_);
    pos_ += 8;
    return v;
  }
  std::string str() {
    const std::uint32_t n = u32();
    need(n);
    std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), n);
    pos_ += n;
    return s;
  }
  bool done() const { return pos_ == bytes_.size(); }

 private:
  void need(std::size_t n) const {
    if (pos_ + n > bytes_.size()) throw std::runtime_error("checkpoint: truncated");
  }
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& ckpt) {
  std::vector<std::uint8_t> out(kMagic, kMagic + 4);
  put_u32(out, kCheckpointVersion);
  out.push_back(static_cast<std::uint8_t>(ckpt.kind));
  put_string(out, model_descriptor(ckpt.model, ckpt.kind == CheckpointKind::kEncoder));
  put_u64(out, static_cast<std::uint64_t>(ckpt.step));
  out.push_back(ckpt.optim ? 1 : 0);
  put_u64(out, static_cast<std::uint64_t>(ckpt.optim ? ckpt.optim->step : 0));

  std::size_t entries = ckpt.params.size();
  if (ckpt.optim) entries += ckpt.optim->first_moment.size() + ckpt.optim->second_moment.size();
  put_u32(out, static_cast<std::uint32_t>(entries));
  for (const auto& p : ckpt.params.entries()) put_entry(out, p.name, p.value);
  if (ckpt.optim) {
    for (const auto& p : ckpt.optim->first_moment.entries()) put_entry(out, "optim.m/" + p.name, p.value);
    for (const auto& p : ckpt.optim->second_moment.entries()) put_entry(out, "optim.v/" + p.name, p.value);
  }
  return out;
}

Checkpoint decode_checkpoint(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 4 || !std::equal(kMagic, kMagic + 4, bytes.begin())) {
    throw std::runtime_error("checkpoint: bad magic");
  }
  Reader in(bytes.subspan(4));
  const std::uint32_t version = in.u32();
  if (version != kCheckpointVersion) throw std::runtime_error("checkpoint: unsupported version " + std::to_string(version));
  Checkpoint ckpt;
  const std::uint8_t kind = in.u8();
  if (kind > 1) throw std::runtime_error("checkpoint: unknown kind");
  ckpt.kind = static_cast<CheckpointKind>(kind);
  ckpt.model = parse_model_descriptor(in.str());
  ckpt.step = static_cast<std::int64_t>(in.u64());
  const bool has_optim = in.u8() != 0;
  const auto optim_step = static_cast<std::int64_t>(in.u64());
  if (has_optim) ckpt.optim = OptimState{{}, {}, optim_step};

  const std::uint32_t entries = in.u32();
  for (std::uint32_t e = 0; e < entries; ++e) {
    std::string name = in.str();
    if (in.u8() != kDtypeF64) throw std::runtime_error("checkpoint: unsupported dtype for '" + name + "'");
    if (in.u32() != 2) throw std::runtime_error("checkpoint: '" + name + "' is not rank 2");
    const auto rows = static_cast<Eigen::Index>(in.u64());
    const auto cols = static_cast<Eigen::Index>(in.u64());
    if (rows < 0 || cols < 0 || (rows > 0 && cols > (1LL << 40) / rows)) {
      throw std::runtime_error("checkpoint: implausible shape for '" + name + "'");
    }
    Matrix m(rows, cols);
    for (Eigen::Index k = 0; k < m.size(); ++k) m.data()[k] = in.f64();
    if (name.rfind("optim.m/", 0) == 0 || name.rfind("optim.v/", 0) == 0) {
      if (!has_optim) throw std::runtime_error("checkpoint: optimizer entry without optimizer state");
      auto& target = name[6] == 'm' ? ckpt.optim->first_moment : ckpt.optim->second_moment;
      target.add(name.substr(8), std::move(m));
    } else {
      ckpt.params.add(std::move(name), std::move(m));
    }
  }
  if (!in.done()) throw std::runtime_error("checkpoint: trailing bytes");
  if (ckpt.optim && (ckpt.optim->first_moment.size() != ckpt.params.size() ||
                     ckpt.optim->second_moment.size() != ckpt.params.size())) {
    throw std::runtime_error("checkpoint: optimizer moments do not cover every parameter");
  }
  return ckpt;
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  write_file_atomic(path, encode_checkpoint(ckpt));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  const auto bytes = read_file_bytes(path);
  try {
    return decode_checkpoint(bytes);
  } catch (const std::runtime_error& e) {
    throw std::runtime_error(path.string() + ": " + e.what());
  }
}

Checkpoint export_encoder(const Checkpoint& ckpt) {
  Checkpoint out;
  out.kind = CheckpointKind::kEncoder;
  out.model = ckpt.model;
  out.step = ckpt.step;
  for (const auto& p : ckpt.params.entries()) {
    if (p.name.rfind("encoder.", 0) == 0 && p.name != kTokenName) out.params.add(p.name, p.value);
  }
  return out;
}

}  // namespace bevmae
