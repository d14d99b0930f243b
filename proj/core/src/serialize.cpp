// core/src/serialize.cpp

// Copyright 2026  The ufem authors

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

#include "ufem/serialize.hpp"

#include <cstring>
#include <fstream>

#include <json.hpp>

#include "ufem/rng.hpp"

namespace ufem {

namespace {

constexpr char kMagic[4] = {'N', 'T', 'C', '1'};

void put_u64_le(std::string& out, uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

uint64_t get_u64_le(const unsigned char* p) {
  uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(p[i]) << (8 * i);
  return v;
}

void append_f32_le(std::string& out, double x) {
  const float f = static_cast<float>(x);
  uint32_t u;
  std::memcpy(&u, &f, 4);
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((u >> (8 * i)) & 0xff));
}

void append_f64_le(std::string& out, double x) {
  uint64_t u;
  std::memcpy(&u, &x, 8);
  put_u64_le(out, u);
}

double read_f32(const unsigned char* p, bool big_endian) {
  uint32_t u = 0;
  if (big_endian) {
    for (int i = 0; i < 4; ++i) u = (u << 8) | p[i];
  } else {
    for (int i = 3; i >= 0; --i) u = (u << 8) | p[i];
  }
  float f;
  std::memcpy(&f, &u, 4);
  return static_cast<double>(f);
}

double read_f64(const unsigned char* p, bool big_endian) {
  uint64_t u = 0;
  if (big_endian) {
    for (int i = 0; i < 8; ++i) u = (u << 8) | p[i];
  } else {
    for (int i = 7; i >= 0; --i) u = (u << 8) | p[i];
  }
  double d;
  std::memcpy(&d, &u, 8);
  return d;
}

}  // namespace

std::string dtype_name(Dtype d) { return d == Dtype::kFloat32 ? "float32" : "float64"; }

Dtype dtype_from_name(const std::string& s) {
  if (s == "float32") return Dtype::kFloat32;
  if (s == "float64") return Dtype::kFloat64;
  throw IoError("unknown dtype '" + s + "' in container manifest");
}

void write_container(const std::string& path, const NamedTensors& nt, Dtype dtype) {
  using nlohmann::json;

  json meta;
  try {
    meta = json::parse(nt.meta_json);
  } catch (const json::exception& e) {
    throw InvalidArgument(std::string("container meta is not valid JSON: ") + e.what());
  }
  UFEM_CHECK(meta.is_object(), "container meta must be a JSON object");

  const size_t elem = dtype == Dtype::kFloat32 ? 4 : 8;
  json manifest;
  manifest["format"] = "ntc";
  manifest["version"] = 1;
  manifest["endianness"] = "little";
  if (!nt.architecture_id.empty()) manifest["architecture_id"] = nt.architecture_id;
  manifest["meta"] = meta;
  json tensors = json::array();
  uint64_t offset = 0;
  for (const auto& [name, t] : nt.tensors) {
    json rec;
    rec["name"] = name;
    rec["shape"] = {t.n(), t.c(), t.h(), t.w()};
    rec["dtype"] = dtype_name(dtype);
    rec["offset"] = offset;
    rec["nbytes"] = static_cast<uint64_t>(t.size()) * elem;
    tensors.push_back(rec);
    offset += static_cast<uint64_t>(t.size()) * elem;
  }
  manifest["tensors"] = tensors;

  const std::string mjson = manifest.dump();

  std::string out;
  out.reserve(12 + mjson.size() + offset + 8);
  out.append(kMagic, 4);
  put_u64_le(out, mjson.size());
  out.append(mjson);
  for (const auto& [name, t] : nt.tensors) {
    (void)name;
    if (dtype == Dtype::kFloat32) {
      for (int64_t i = 0; i < t.size(); ++i) append_f32_le(out, t.data()[i]);
    } else {
      for (int64_t i = 0; i < t.size(); ++i) append_f64_le(out, t.data()[i]);
    }
  }
  put_u64_le(out, fnv1a64(out.data(), out.size()));

  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot open '" + path + "' for writing");
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!f) throw IoError("short write to '" + path + "'");
}

NamedTensors read_container(const std::string& path) {
  using nlohmann::json;

  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open '" + path + "'");
  std::string buf((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());

  if (buf.size() < 12 + 8 || std::memcmp(buf.data(), kMagic, 4) != 0)
    throw IoError("'" + path + "' is not a named-tensor container (bad magic or truncated)");

  const auto* bytes = reinterpret_cast<const unsigned char*>(buf.data());
  const uint64_t stored_digest = get_u64_le(bytes + buf.size() - 8);
  const uint64_t digest = fnv1a64(buf.data(), buf.size() - 8);
  if (digest != stored_digest)
    throw IoError("digest mismatch reading '" + path + "' (corrupt or truncated file)");

  const uint64_t mlen = get_u64_le(bytes + 4);
  if (12 + mlen + 8 > buf.size()) throw IoError("manifest length exceeds file size in '" + path + "'");

  json manifest;
  try {
    manifest = json::parse(buf.substr(12, mlen));
  } catch (const json::exception& e) {
    throw IoError(std::string("bad container manifest in '") + path + "': " + e.what());
  }

  const std::string endianness = manifest.value("endianness", "little");
  if (endianness != "little" && endianness != "big")
    throw IoError("unknown endianness '" + endianness + "' in '" + path + "'");
  const bool big = endianness == "big";

  NamedTensors nt;
  nt.architecture_id = manifest.value("architecture_id", "");
  nt.meta_json = manifest.contains("meta") ? manifest["meta"].dump() : "{}";

  const size_t payload_start = 12 + mlen;
  const size_t payload_len = buf.size() - payload_start - 8;
  for (const auto& rec : manifest.at("tensors")) {
    const std::string name = rec.at("name").get<std::string>();
    const auto shape = rec.at("shape").get<std::vector<int64_t>>();
    if (shape.size() != 4) throw IoError("tensor '" + name + "' has non-4D shape in '" + path + "'");
    const Dtype dt = dtype_from_name(rec.at("dtype").get<std::string>());
    const uint64_t offset = rec.at("offset").get<uint64_t>();
    const uint64_t nbytes = rec.at("nbytes").get<uint64_t>();
    const size_t elem = dt == Dtype::kFloat32 ? 4 : 8;

    Tensor t(static_cast<int>(shape[0]), static_cast<int>(shape[1]),
             static_cast<int>(shape[2]), static_cast<int>(shape[3]));
    if (nbytes != static_cast<uint64_t>(t.size()) * elem)
      throw IoError("tensor '" + name + "': nbytes does not match shape in '" + path + "'");
    if (offset + nbytes > payload_len)
      throw IoError("tensor '" + name + "': payload out of range in '" + path + "'");

    const unsigned char* p = bytes + payload_start + offset;
    for (int64_t i = 0; i < t.size(); ++i) {
      t.data()[i] = dt == Dtype::kFloat32 ? read_f32(p + 4 * i, big) : read_f64(p + 8 * i, big);
    }
    nt.tensors.emplace_back(name, std::move(t));
  }
  return nt;
}

}  // namespace ufem
