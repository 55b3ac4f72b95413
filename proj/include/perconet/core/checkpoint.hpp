// Copyright 2026 The PerCoNet Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "perconet/core/errors.hpp"
#include "perconet/core/params.hpp"

// Binary checkpoint layout, all integers little-endian:
//   magic "PCNTCKPT" | u32 version | u32 entry count
//   per entry: u32 name length | name bytes | u32 rank | u32 extents[rank]
//              | f32 payload[product(extents)], row-major

namespace perconet {

inline constexpr std::array<char, 8> kCheckpointMagic = {'P', 'C', 'N', 'T', 'C', 'K', 'P', 'T'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

namespace detail {

inline void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xffu));
}

inline std::uint32_t get_u32(const std::string& in, std::size_t& pos, const std::string& path) {
  if (pos + 4 > in.size()) throw FormatError("checkpoint " + path + ": truncated");
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i)
    v |= static_cast<std::uint32_t>(static_cast<unsigned char>(in[pos + i])) << (8 * i);
  pos += 4;
  return v;
}

}  // namespace detail

template <class T>
std::string serialize_checkpoint(const ParamStore<T>& params) {
  std::string out(kCheckpointMagic.begin(), kCheckpointMagic.end());
  detail::put_u32(out, kCheckpointVersion);
  detail::put_u32(out, static_cast<std::uint32_t>(params.size()));
  for (const auto& e : params.entries()) {
    detail::put_u32(out, static_cast<std::uint32_t>(e.name.size()));
    out += e.name;
    detail::put_u32(out, static_cast<std::uint32_t>(e.tensor.shape.size()));
    for (std::size_t extent : e.tensor.shape) detail::put_u32(out, static_cast<std::uint32_t>(extent));
    for (T v : e.tensor.data) detail::put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
  }
  return out;
}

template <class T>
void save_checkpoint(const ParamStore<T>& params, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw FormatError("checkpoint: cannot open " + path + " for writing");
  const std::string bytes = serialize_checkpoint(params);
  os.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!os) throw FormatError("checkpoint: write failed for " + path);
}

// Replaces every parameter value in `params` with the checkpoint's. The
// checkpoint must name exactly the same parameters with identical shapes;
// nothing is modified unless the whole file validates.
template <class T>
void load_checkpoint(ParamStore<T>& params, const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw FormatError("checkpoint: cannot open " + path);
  const std::string in((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
  if (in.size() < kCheckpointMagic.size() ||
      std::memcmp(in.data(), kCheckpointMagic.data(), kCheckpointMagic.size()) != 0) {
    throw FormatError("checkpoint " + path + ": bad magic");
  }
  std::size_t pos = kCheckpointMagic.size();
  const std::uint32_t version = detail::get_u32(in, pos, path);
  if (version != kCheckpointVersion) {
    throw FormatError("checkpoint " + path + ": unsupported version " + std::to_string(version));
  }
  const std::uint32_t count = detail::get_u32(in, pos, path);
  std::unordered_map<std::string, std::vector<T>> loaded;
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::uint32_t len = detail::get_u32(in, pos, path);
    if (pos + len > in.size()) throw FormatError("checkpoint " + path + ": truncated name");
    std::string name = in.substr(pos, len);
    pos += len;
    const std::uint32_t rank = detail::get_u32(in, pos, path);
    Shape shape(rank);
    for (auto& extent : shape) extent = detail::get_u32(in, pos, path);
    auto id = params.find(name);
    if (!id) throw FormatError("checkpoint " + path + ": unexpected parameter " + name);
    if (params[*id].shape != shape) {
      throw FormatError("checkpoint " + path + ": parameter " + name + " has shape " +
                        shape_string(shape) + ", model expects " +
                        shape_string(params[*id].shape));
    }
    std::vector<T> values(shape_size(shape));
    for (T& v : values)
      v = static_cast<T>(std::bit_cast<float>(detail::get_u32(in, pos, path)));
    if (!loaded.emplace(std::move(name), std::move(values)).second) {
      throw FormatError("checkpoint " + path + ": duplicate parameter");
    }
  }
  if (pos != in.size()) throw FormatError("checkpoint " + path + ": trailing bytes");
  for (const auto& e : params.entries()) {
    if (!loaded.count(e.name)) {
      throw FormatError("checkpoint " + path + ": missing parameter " + e.name);
    }
  }
  for (auto& e : params.entries()) e.tensor.data = std::move(loaded.at(e.name));
}

}  // namespace perconet
