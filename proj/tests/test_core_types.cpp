// tests/test_core_types.cpp

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

#include <doctest.h>

#include <fstream>

#include "testutil.hpp"
#include "ufem/image.hpp"
#include "ufem/rng.hpp"
#include "ufem/serialize.hpp"
#include "ufem/tensor.hpp"

using namespace ufem;

TEST_CASE("rng is deterministic and fork streams are independent") {
  Rng a(123), b(123);
  for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());

  Rng base(7);
  Rng f1 = base.fork(1);
  Rng f2 = base.fork(2);
  CHECK(f1.next_u64() != f2.next_u64());

  // Draws from one fork do not perturb the other's stream.
  Rng base2(7);
  Rng g2 = base2.fork(2);
  Rng g1 = base2.fork(1);
  (void)g1.next_u64();
  Rng h2 = Rng(7).fork(2);
  CHECK(g2.next_u64() == h2.next_u64());
}

TEST_CASE("uniform_int stays in range and covers values") {
  Rng rng(99);
  std::vector<int> seen(10, 0);
  for (int i = 0; i < 5000; ++i) {
    const int64_t v = rng.uniform_int(10);
    REQUIRE(v >= 0);
    REQUIRE(v < 10);
    ++seen[static_cast<size_t>(v)];
  }
  for (int count : seen) CHECK(count > 300);
}

TEST_CASE("tensor indexing and reductions") {
  Tensor t(2, 3, 4, 5);
  CHECK(t.size() == 120);
  t.at(1, 2, 3, 4) = 42.0;
  CHECK(t.data()[119] == 42.0);
  CHECK(t.max() == 42.0);
  Tensor z = Tensor::zeros(1, 1, 2, 2);
  Tensor o = Tensor::full(1, 1, 2, 2, 1.0);
  CHECK(Tensor::mean_abs_diff(z, o) == 1.0);
  CHECK_THROWS_AS(Tensor::mean_abs_diff(z, Tensor(1, 1, 2, 3)), InvalidArgument);
}

TEST_CASE("named-tensor container: float64 round-trip is bitwise") {
  test::TempDir dir("container");
  Rng rng(5);
  NamedTensors nt;
  nt.architecture_id = "tinyvgg";
  nt.meta_json = R"({"note":"fixture"})";
  nt.tensors.emplace_back("a.weight", test::random_tensor(2, 3, 4, 4, rng));
  nt.tensors.emplace_back("a.bias", test::random_tensor(3, 1, 1, 1, rng));

  const std::string path = dir.file("w.ntc");
  write_container(path, nt, Dtype::kFloat64);
  const NamedTensors back = read_container(path);
  REQUIRE(back.tensors.size() == 2);
  CHECK(back.architecture_id == "tinyvgg");
  CHECK(back.tensors[0].first == "a.weight");
  CHECK(back.tensors[0].second.bitwise_equal(nt.tensors[0].second));
  CHECK(back.tensors[1].second.bitwise_equal(nt.tensors[1].second));
}

TEST_CASE("named-tensor container: float32 payload quantizes exactly once") {
  test::TempDir dir("container32");
  Rng rng(6);
  NamedTensors nt;
  nt.tensors.emplace_back("w", test::random_tensor(1, 2, 3, 3, rng));
  const std::string path = dir.file("w32.ntc");
  write_container(path, nt, Dtype::kFloat32);
  const NamedTensors once = read_container(path);
  write_container(path, once, Dtype::kFloat32);
  const NamedTensors twice = read_container(path);
  CHECK(once.tensors[0].second.bitwise_equal(twice.tensors[0].second));
  for (int64_t i = 0; i < once.tensors[0].second.size(); ++i) {
    CHECK(once.tensors[0].second.data()[i] ==
          static_cast<double>(static_cast<float>(nt.tensors[0].second.data()[i])));
  }
}

TEST_CASE("truncated container fails with a digest error, no partial load") {
  test::TempDir dir("trunc");
  Rng rng(7);
  NamedTensors nt;
  nt.tensors.emplace_back("w", test::random_tensor(1, 1, 8, 8, rng));
  const std::string path = dir.file("t.ntc");
  write_container(path, nt, Dtype::kFloat64);

  std::string bytes;
  {
    std::ifstream f(path, std::ios::binary);
    bytes.assign((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  }
  {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    f.write(bytes.data(), static_cast<std::streamsize>(bytes.size() - 9));
  }
  CHECK_THROWS_AS(read_container(path), IoError);
}

TEST_CASE("big-endian container payload converts exactly") {
  test::TempDir dir("endian");
  Rng rng(8);
  NamedTensors nt;
  nt.tensors.emplace_back("w", test::random_tensor(1, 1, 2, 2, rng));
  const std::string little = dir.file("little.ntc");
  write_container(little, nt, Dtype::kFloat32);

  // Craft the big-endian variant: flip the manifest flag and byte-swap the
  // payload floats.
  std::string bytes;
  {
    std::ifstream f(little, std::ios::binary);
    bytes.assign((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  }
  const auto mlen = [&bytes]() {
    uint64_t v = 0;
    for (int i = 7; i >= 0; --i) v = (v << 8) | static_cast<unsigned char>(bytes[4 + i]);
    return v;
  }();
  std::string manifest = bytes.substr(12, mlen);
  const auto pos = manifest.find("\"little\"");
  REQUIRE(pos != std::string::npos);
  manifest.replace(pos, 8, "\"big\"");
  std::string payload = bytes.substr(12 + mlen, bytes.size() - 12 - mlen - 8);
  for (size_t i = 0; i + 4 <= payload.size(); i += 4) {
    std::swap(payload[i], payload[i + 3]);
    std::swap(payload[i + 1], payload[i + 2]);
  }
  std::string out;
  out.append(bytes, 0, 4);
  uint64_t new_mlen = manifest.size();
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((new_mlen >> (8 * i)) & 0xff));
  out += manifest;
  out += payload;
  const uint64_t digest = fnv1a64(out.data(), out.size());
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((digest >> (8 * i)) & 0xff));
  const std::string big = dir.file("big.ntc");
  {
    std::ofstream f(big, std::ios::binary);
    f.write(out.data(), static_cast<std::streamsize>(out.size()));
  }

  const NamedTensors a = read_container(little);
  const NamedTensors b = read_container(big);
  CHECK(a.tensors[0].second.bitwise_equal(b.tensors[0].second));
}

TEST_CASE("ppm round-trip through 8-bit quantization") {
  test::TempDir dir("ppm");
  Tensor img(1, 3, 5, 7);
  Rng rng(9);
  for (int64_t i = 0; i < img.size(); ++i) img.data()[i] = rng.uniform();
  const std::string path = dir.file("x.ppm");
  write_ppm(path, img);
  const Tensor back = read_ppm(path);
  REQUIRE(back.same_shape(img));
  for (int64_t i = 0; i < img.size(); ++i) {
    CHECK(std::fabs(back.data()[i] - img.data()[i]) <= 0.5 / 255.0 + 1e-12);
  }
  // Quantization is idempotent: a second write/read is exact.
  write_ppm(path, back);
  const Tensor again = read_ppm(path);
  CHECK(again.bitwise_equal(back));
}
