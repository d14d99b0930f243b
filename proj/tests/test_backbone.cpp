// tests/test_backbone.cpp

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

#include "testutil.hpp"
#include "ufem/backbone.hpp"

using namespace ufem;
using test::random_tensor;

namespace {

Tensor random_images(int n, int resolution, uint64_t seed) {
  Rng rng(seed);
  Tensor t(n, 3, resolution, resolution);
  for (int64_t i = 0; i < t.size(); ++i) t.data()[i] = rng.uniform();
  return t;
}

}  // namespace

TEST_CASE("bundled tinyvgg exposes the four block taps with declared shapes") {
  auto handle = load_backbone({"tinyvgg", "", 32});
  REQUIRE(handle->tap_points().size() == 4);
  CHECK(handle->class_count() == 10);
  const auto& taps = handle->tap_points();
  const int widths[4] = {16, 32, 64, 128};
  const int spatial[4] = {16, 8, 4, 2};
  for (int i = 0; i < 4; ++i) {
    CHECK(taps[static_cast<size_t>(i)].name == "block" + std::to_string(i + 1));
    CHECK(taps[static_cast<size_t>(i)].channels == widths[i]);
    CHECK(taps[static_cast<size_t>(i)].height == spatial[i]);
    for (int j = i + 1; j < 4; ++j)
      CHECK(taps[static_cast<size_t>(i)].index < taps[static_cast<size_t>(j)].index);
  }
  CHECK_THROWS_AS(load_backbone({"resnet50", "", 32}), InvalidArgument);
}

TEST_CASE("tap output shapes scale with the declared input resolution") {
  auto handle = load_backbone({"tinyvgg", "", 64});
  const auto& taps = handle->tap_points();
  CHECK(taps[0].height == 32);
  CHECK(taps[3].height == 4);
  const Tensor logits = handle->forward_images(random_images(2, 64, 1));
  CHECK(logits.c() == 10);
  CHECK(logits.all_finite());
}

TEST_CASE("extraction is deterministic and shape-correct") {
  auto handle = load_backbone({"tinyvgg", "", 32});
  const Tensor images = random_images(4, 32, 2);
  const FeatureMap f1 = handle->extract_features(images, handle->tap("block1"));
  const FeatureMap f2 = handle->extract_features(images, handle->tap("block1"));
  CHECK(f1.data.n() == 4);
  CHECK(f1.data.c() == 16);
  CHECK(f1.data.h() == 16);
  CHECK(f1.data.bitwise_equal(f2.data));
  // Tapped after a rectifying nonlinearity: all entries nonnegative.
  CHECK(f1.data.min() >= 0.0);

  CHECK_THROWS_AS(handle->extract_features(random_images(1, 16, 3), handle->tap("block1")),
                  InvalidArgument);
  TapPoint foreign;
  foreign.name = "elsewhere";
  foreign.index = 3;
  CHECK_THROWS_AS(handle->extract_features(images, foreign), InvalidArgument);
}

TEST_CASE("forward_from composes bitwise with full forward") {
  auto handle = load_backbone({"tinyvgg", "", 32});
  const Tensor images = random_images(3, 32, 4);
  const Tensor direct = handle->forward_images(images);

  for (const auto& tap : handle->tap_points()) {
    const FeatureMap f = handle->extract_features(images, tap);
    const Tensor via = handle->forward_to_logits(f, tap);
    CHECK(via.bitwise_equal(direct));
  }

  // Adjacent-tap composition equals direct extraction.
  const auto& taps = handle->tap_points();
  for (size_t i = 0; i + 1 < taps.size(); ++i) {
    const FeatureMap a = handle->extract_features(images, taps[i]);
    const FeatureMap b = handle->forward_from(a, taps[i], taps[i + 1]);
    const FeatureMap direct_b = handle->extract_features(images, taps[i + 1]);
    CHECK(b.data.bitwise_equal(direct_b.data));
  }
}

TEST_CASE("forward_from rejects reversed tap order and keeps zeros finite") {
  auto handle = load_backbone({"tinyvgg", "", 32});
  const auto& taps = handle->tap_points();
  FeatureMap f;
  f.data = Tensor::zeros(2, taps[2].channels, taps[2].height, taps[2].width);
  f.tap = taps[2];
  CHECK_THROWS_AS(handle->forward_from(f, taps[2], taps[0]), InvalidArgument);

  FeatureMap z;
  z.data = Tensor::zeros(2, taps[1].channels, taps[1].height, taps[1].width);
  z.tap = taps[1];
  const Tensor logits = handle->forward_to_logits(z, taps[1]);
  CHECK(logits.all_finite());
}

TEST_CASE("identity insertion is a bitwise no-op; shape changers are rejected") {
  auto handle = load_backbone({"tinyvgg", "", 32});
  const TapPoint tap = default_insertion_tap(*handle);
  CHECK(tap.name == "block1");  // earliest tap at <= half the input

  const Tensor images = random_images(10, 32, 5);
  const Tensor base = handle->forward_images(images);
  AugmentedBackbone augmented = insert_module(handle, std::make_shared<IdentityTransform>(), tap);
  CHECK(augmented.forward_images(images).bitwise_equal(base));

  class Halver : public FeatureTransform {
   public:
    Tensor apply(const Tensor& f) const override {
      Tensor out(f.n(), f.c(), f.h() / 2, f.w() / 2);
      return out;
    }
  };
  CHECK_THROWS_AS(insert_module(handle, std::make_shared<Halver>(), tap), InvalidArgument);
}

TEST_CASE("weight files with mismatched shapes name the first offender") {
  test::TempDir dir("bbweights");
  auto handle = load_backbone({"tinyvgg", "", 32});

  Rng rng(6);
  auto net = build_tinyvgg_net(32, rng);
  NamedTensors weights = snapshot_params(*net);
  weights.architecture_id = "tinyvgg";
  // Break one tensor's shape.
  for (auto& [name, t] : weights.tensors) {
    if (name == "block2.conv1.weight") t = Tensor(1, 2, 3, 3);
  }
  const std::string path = dir.file("bad.ntc");
  write_container(path, weights, Dtype::kFloat32);
  try {
    load_backbone({"tinyvgg", path, 32});
    FAIL("expected a load error");
  } catch (const IoError& e) {
    CHECK(std::string(e.what()).find("block2.conv1.weight") != std::string::npos);
  }
}

TEST_CASE("trained-style weight files load and change the forward pass") {
  test::TempDir dir("bbload");
  Rng rng(7);
  auto net = build_tinyvgg_net(32, rng);
  NamedTensors weights = snapshot_params(*net);
  weights.architecture_id = "tinyvgg";
  const std::string path = dir.file("w.ntc");
  write_container(path, weights, Dtype::kFloat32);

  auto bundled = load_backbone({"tinyvgg", "", 32});
  auto loaded = load_backbone({"tinyvgg", path, 32});
  const Tensor images = random_images(2, 32, 8);
  CHECK_FALSE(loaded->forward_images(images).bitwise_equal(bundled->forward_images(images)));
  // Deterministic reload.
  auto loaded2 = load_backbone({"tinyvgg", path, 32});
  CHECK(loaded->forward_images(images).bitwise_equal(loaded2->forward_images(images)));
  CHECK(loaded->parameter_checksum() == loaded2->parameter_checksum());
}
