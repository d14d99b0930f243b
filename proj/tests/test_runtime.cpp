// tests/test_runtime.cpp

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

#include <cmath>

#include "testutil.hpp"
#include "ufem/config.hpp"
#include "ufem/image.hpp"
#include "ufem/runtime.hpp"
#include "ufem/synth.hpp"

using namespace ufem;

namespace {

// A stage-1/stage-2 checkpoint pair whose generators are exact identities.
std::pair<Stage1Checkpoint, Stage2Checkpoint> identity_checkpoints(const BackboneHandle& backbone,
                                                                   const TapPoint& tap) {
  GeneratorSpec spec;
  spec.in_channels = tap.channels;
  spec.base_width = 8;
  spec.residual_blocks = 1;
  spec.init = GeneratorInit::kNearIdentity;
  spec.input_height = tap.height;
  spec.input_width = tap.width;
  Generator g(spec, 1);

  Stage1Checkpoint s1;
  s1.architecture_id = backbone.architecture_id();
  s1.tap_name = tap.name;
  s1.config_json = Stage1Config{}.to_json();
  s1.gen_spec = spec;
  s1.g_d2c_params = g.snapshot();
  s1.g_c2d_params = g.snapshot();
  DiscriminatorSpec dspec;
  dspec.in_channels = tap.channels;
  dspec.layers = 1;
  dspec.base_width = 4;
  Discriminator d(dspec, 2);
  for (int i = 0; i < 3; ++i) s1.d_clear.emplace_back(dspec, d.snapshot());
  s1.d_degraded = {dspec, d.snapshot()};

  Stage2Checkpoint s2;
  s2.architecture_id = backbone.architecture_id();
  s2.tap_name = tap.name;
  s2.config_json = Stage2Config{}.to_json();
  s2.gen_spec = spec;
  s2.g_e2c_params = g.snapshot();
  s2.d_clear = {dspec, d.snapshot()};
  return {s1, s2};
}

struct Fixture {
  Fixture() : dir("runtime") {
    SynthSpec spec;
    spec.per_class = 5;
    spec.seed = 123;
    generate_synth_dataset(spec, dir.path().string());
    manifest = build_manifest(dir.path().string(), "clear").manifest;
    backbone = load_backbone({"tinyvgg", "", 32});
  }
  test::TempDir dir;
  DatasetManifest manifest;
  std::shared_ptr<const BackboneHandle> backbone;
};

}  // namespace

TEST_CASE("compose_ufem validates backbone and tap compatibility") {
  auto backbone = load_backbone({"tinyvgg", "", 32});
  const TapPoint tap = backbone->tap("block1");
  auto [s1, s2] = identity_checkpoints(*backbone, tap);
  CHECK_NOTHROW(compose_ufem(s1, s2));
  s2.tap_name = "block2";
  CHECK_THROWS_AS(compose_ufem(s1, s2), InvalidArgument);
  s2.tap_name = "block1";
  s2.architecture_id = "other";
  CHECK_THROWS_AS(compose_ufem(s1, s2), InvalidArgument);
}

TEST_CASE("identity + identity composes to the identity enhancer") {
  auto backbone = load_backbone({"tinyvgg", "", 32});
  const TapPoint tap = backbone->tap("block1");
  auto [s1, s2] = identity_checkpoints(*backbone, tap);
  const UFEMCheckpoint ufem = compose_ufem(s1, s2);
  auto enhancer = make_ufem_enhancer(ufem);
  Rng rng(71);
  const Tensor f = test::random_tensor(2, tap.channels, tap.height, tap.width, rng);
  CHECK(enhancer->apply(f).bitwise_equal(f));
}

TEST_CASE("ufem checkpoint save/load reproduces forward outputs bitwise") {
  test::TempDir dir("ufemckpt");
  auto backbone = load_backbone({"tinyvgg", "", 32});
  const TapPoint tap = backbone->tap("block1");

  GeneratorSpec spec;
  spec.in_channels = tap.channels;
  spec.base_width = 8;
  spec.residual_blocks = 1;
  spec.init = GeneratorInit::kStandard;
  Generator g_dc(spec, 31), g_ec(spec, 32);

  UFEMCheckpoint c;
  c.architecture_id = backbone->architecture_id();
  c.tap_name = tap.name;
  c.g_d2c_spec = spec;
  c.g_e2c_spec = spec;
  c.g_d2c_params = g_dc.snapshot();
  c.g_e2c_params = g_ec.snapshot();

  const std::string path = dir.file("ufem.ntc");
  save_ufem_checkpoint(c, path);
  const UFEMCheckpoint back = load_ufem_checkpoint(path);
  auto before = make_ufem_enhancer(c);
  auto after = make_ufem_enhancer(back);

  Rng rng(72);
  for (int i = 0; i < 5; ++i) {
    const Tensor f = test::random_tensor(1, tap.channels, tap.height, tap.width, rng);
    CHECK(after->apply(f).bitwise_equal(before->apply(f)));
  }
}

TEST_CASE("evaluation reports match a hand-computed argmax oracle") {
  Fixture fx;
  const EvalReport report = evaluate_classification(*fx.backbone, nullptr, fx.manifest);
  CHECK(report.n_images == 50);

  // Independent oracle: load, forward, argmax, compare labels.
  long long hits = 0;
  for (size_t i = 0; i < fx.manifest.size(); ++i) {
    const Tensor img = read_ppm(fx.manifest.abspath(i));
    const Tensor logits = fx.backbone->forward_images(img);
    int best = 0;
    for (int k = 1; k < logits.c(); ++k) {
      if (logits.data()[k] > logits.data()[best]) best = k;
    }
    if (best == fx.manifest.entries[i].label) ++hits;
  }
  CHECK(report.top1 == doctest::Approx(static_cast<double>(hits) / 50.0).epsilon(1e-12));

  // Internal consistency: top1 equals the count-weighted per-class mean.
  double weighted = 0.0;
  for (int c = 0; c < 10; ++c) {
    weighted += report.per_class_accuracy(c) *
                static_cast<double>(report.per_class_total[static_cast<size_t>(c)]);
  }
  CHECK(std::fabs(weighted / 50.0 - report.top1) < 1e-12);
}

TEST_CASE("parallel evaluation equals single-threaded evaluation") {
  Fixture fx;
  const EvalReport a = evaluate_classification(*fx.backbone, nullptr, fx.manifest, std::nullopt,
                                               8, 1);
  const EvalReport b = evaluate_classification(*fx.backbone, nullptr, fx.manifest, std::nullopt,
                                               8, 3);
  CHECK(a.top1 == b.top1);
  CHECK(a.per_class_correct == b.per_class_correct);
}

TEST_CASE("identity enhancer evaluation equals baseline image by image") {
  Fixture fx;
  const TapPoint tap = fx.backbone->tap("block1");
  AugmentedBackbone augmented =
      insert_module(fx.backbone, std::make_shared<IdentityTransform>(), tap);
  const DegradationSpec fog{DegradationKind::kFog, 3, 5};
  const EvalReport base = evaluate_classification(*fx.backbone, nullptr, fx.manifest, fog);
  const EvalReport with = evaluate_classification(*fx.backbone, &augmented, fx.manifest, fog);
  CHECK(base.top1 == with.top1);
  CHECK(base.per_class_correct == with.per_class_correct);
}

TEST_CASE("ablation with identity checkpoints gives four equal rows") {
  Fixture fx;
  const TapPoint tap = fx.backbone->tap("block1");
  auto [s1, s2] = identity_checkpoints(*fx.backbone, tap);
  const AblationReport report = ablation_report(fx.backbone, fx.manifest, std::nullopt, s1, s2);
  CHECK(report.baseline.top1 == report.s1_only.top1);
  CHECK(report.baseline.top1 == report.s2_only.top1);
  CHECK(report.baseline.top1 == report.s1_s2.top1);
  const std::string text = report.to_text();
  CHECK(text.find("baseline\t") != std::string::npos);
  CHECK(text.find("s1_s2\t") != std::string::npos);
}

TEST_CASE("empty manifests and bad labels are rejected") {
  Fixture fx;
  DatasetManifest empty;
  CHECK_THROWS_AS(evaluate_classification(*fx.backbone, nullptr, empty), InvalidArgument);
  DatasetManifest bad = fx.manifest;
  bad.entries[0].label = 99;
  CHECK_THROWS_AS(evaluate_classification(*fx.backbone, nullptr, bad), InvalidArgument);
}

TEST_CASE("run config parses, echoes, and rejects unknown keys") {
  const std::string good = R"({
    "backbone": {"architecture": "tinyvgg", "input_resolution": 32, "tap": "block1"},
    "stage1": {"epochs": 3, "adv_weights": [0.5, 0.3, 0.2]},
    "stage2": {"lambda_corr": 500},
    "eval": {"batch": 16, "degradation": {"kind": "fog", "severity": 3, "seed": 1}}
  })";
  const RunConfig c = RunConfig::from_json_text(good);
  CHECK(c.stage1.epochs == 3);
  CHECK(c.stage2.lambda_corr == 500);
  REQUIRE(c.eval.degradation.has_value());
  CHECK(c.eval.degradation->severity == 3);

  // Echo round-trips through the strict parser.
  const RunConfig back = RunConfig::from_json_text(c.to_json());
  CHECK(back.stage1.epochs == 3);

  CHECK_THROWS_WITH_AS(RunConfig::from_json_text(R"({"stage1": {"epoch": 1}})"),
                       doctest::Contains("stage1.epoch"), InvalidArgument);
  CHECK_THROWS_AS(RunConfig::from_json_text(R"({"unknown_section": {}})"), InvalidArgument);
}
