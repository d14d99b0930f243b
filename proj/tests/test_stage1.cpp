// tests/test_stage1.cpp

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
#include "ufem/stage1.hpp"
#include "ufem/stage2.hpp"

using namespace ufem;
using test::random_tensor;

namespace {

Stage1Config micro_config(int epochs, GeneratorInit init) {
  Stage1Config c;
  c.epochs = epochs;
  c.batch = 2;
  c.seed = 77;
  c.generator.base_width = 8;
  c.generator.residual_blocks = 1;
  c.generator.init = init;
  c.disc_base_width = 8;
  return c;
}

}  // namespace

TEST_CASE("adversarial loss formulas and optima") {
  SUBCASE("least squares optimum: real=1, fake=0 gives loss_D = 0") {
    const auto [ld, lg] = adversarial_loss(Tensor::full(1, 1, 2, 2, 1.0),
                                           Tensor::full(1, 1, 2, 2, 0.0), GanMode::kLeastSquares);
    CHECK(ld == 0.0);
    CHECK(lg == 1.0);
  }
  SUBCASE("balanced vanilla discriminator sees 2 ln 2") {
    // sigmoid(0) = 1/2 on both sides.
    const auto [ld, lg] = adversarial_loss(Tensor::zeros(1, 1, 3, 3), Tensor::zeros(1, 1, 3, 3),
                                           GanMode::kVanillaLog);
    CHECK(std::fabs(ld - 2.0 * std::log(2.0)) < 1e-12);
    CHECK(std::fabs(lg - std::log(2.0)) < 1e-12);
  }
  SUBCASE("seeded random logits match a scalar oracle") {
    Rng rng(31);
    const Tensor real = random_tensor(2, 1, 3, 3, rng);
    const Tensor fake = random_tensor(2, 1, 3, 3, rng);
    for (auto mode : {GanMode::kLeastSquares, GanMode::kVanillaLog}) {
      double ed = 0.0, eg = 0.0;
      for (int64_t i = 0; i < real.size(); ++i) {
        const double r = real.data()[i], f = fake.data()[i];
        if (mode == GanMode::kLeastSquares) {
          ed += (r - 1) * (r - 1) / real.size() + f * f / fake.size();
          eg += (f - 1) * (f - 1) / fake.size();
        } else {
          const double sr = 1 / (1 + std::exp(-r)), sf = 1 / (1 + std::exp(-f));
          ed += -std::log(sr) / real.size() - std::log(1 - sf) / fake.size();
          eg += -std::log(sf) / fake.size();
        }
      }
      const auto [ld, lg] = adversarial_loss(real, fake, mode);
      CHECK(std::fabs(ld - ed) < 1e-9);
      CHECK(std::fabs(lg - eg) < 1e-9);
    }
  }
  SUBCASE("non-finite logits are rejected") {
    Tensor bad = Tensor::zeros(1, 1, 2, 2);
    bad.data()[0] = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS(adversarial_loss(bad, bad, GanMode::kLeastSquares), InvalidArgument);
  }
}

TEST_CASE("cycle and identity losses are mean L1") {
  Rng rng(32);
  const Tensor x = random_tensor(2, 3, 4, 4, rng);
  CHECK(cycle_loss(x, x) == 0.0);
  CHECK(identity_loss(x, x) == 0.0);
  CHECK(cycle_loss(Tensor::zeros(1, 2, 2, 2), Tensor::full(1, 2, 2, 2, 1.0)) == 1.0);
  CHECK(identity_loss(Tensor::zeros(1, 2, 2, 2), Tensor::full(1, 2, 2, 2, 1.0)) == 1.0);

  const Tensor y = random_tensor(2, 3, 4, 4, rng);
  double expected = 0.0;
  for (int64_t i = 0; i < x.size(); ++i) expected += std::fabs(x.data()[i] - y.data()[i]);
  expected /= static_cast<double>(x.size());
  CHECK(std::fabs(cycle_loss(x, y) - expected) < 1e-9);
  CHECK_THROWS_AS(cycle_loss(x, Tensor(1, 1, 2, 2)), InvalidArgument);
}

TEST_CASE("multi-adversarial and stage-1 objective arithmetic") {
  CHECK(multi_adversarial_loss({2.5, 2.5, 2.5}, {0.5, 0.3, 0.2}) == 2.5);
  CHECK(std::fabs(multi_adversarial_loss({1.0, 2.0, 3.0}, {0.5, 0.3, 0.2}) - 1.7) < 1e-12);
  CHECK(multi_adversarial_loss({0, 0, 0}, {0.5, 0.3, 0.2}) == 0.0);

  CHECK(stage1_objective(0, 0, 0, {5, 10, 5}) == 0.0);
  CHECK(stage1_objective(1, 1, 1, {5, 10, 5}) == 20.0);
  Rng rng(33);
  const double a = rng.uniform(), b = rng.uniform(), c = rng.uniform();
  CHECK(std::fabs(stage1_objective(a, b, c, {5, 10, 5}) - (5 * a + 10 * b + 5 * c)) < 1e-12);
}

TEST_CASE("discriminator taps are the enhancement layer and two successors") {
  auto backbone = load_backbone({"tinyvgg", "", 32});
  const auto taps = discriminator_taps(*backbone, backbone->tap("block1"));
  CHECK(taps[0].name == "block1");
  CHECK(taps[1].name == "block2");
  CHECK(taps[2].name == "block3");
  CHECK_THROWS_AS(discriminator_taps(*backbone, backbone->tap("block3")), InvalidArgument);
  CHECK_THROWS_AS(discriminator_taps(*backbone, backbone->tap("block4")), InvalidArgument);
}

TEST_CASE("config validation enforces the convex weights") {
  Stage1Config c;
  c.adv_weights = {0.5, 0.4, 0.2};
  CHECK_THROWS_AS(c.validate(), InvalidArgument);
  c = Stage1Config{};
  c.lambda_cyc = -1;
  CHECK_THROWS_AS(c.validate(), InvalidArgument);
  CHECK_NOTHROW(Stage1Config{}.validate());
}

TEST_CASE("lr schedules") {
  CHECK(lr_factor(LrSchedule::kConstantThenLinear, 0, 200) == 1.0);
  CHECK(lr_factor(LrSchedule::kConstantThenLinear, 99, 200) == 1.0);
  CHECK(std::fabs(lr_factor(LrSchedule::kConstantThenLinear, 150, 200) - 0.5) < 1e-12);
  CHECK(std::fabs(lr_factor(LrSchedule::kStepDecay, 25, 200) - 0.01) < 1e-15);
}

TEST_CASE("feature pool returns fresh until full, then swaps deterministically") {
  FeaturePool pool(2, 9);
  Rng rng(34);
  const Tensor a = random_tensor(1, 2, 2, 2, rng);
  const Tensor b = random_tensor(1, 2, 2, 2, rng);
  CHECK(pool.query(a).bitwise_equal(a));
  CHECK(pool.query(b).bitwise_equal(b));
  // Deterministic thereafter for a fixed seed.
  FeaturePool pool2(2, 9);
  (void)pool2.query(a);
  (void)pool2.query(b);
  const Tensor c1 = pool.query(a);
  const Tensor c2 = pool2.query(a);
  CHECK(c1.bitwise_equal(c2));
}

TEST_CASE("smoke run: tiny feature sets, every logged loss finite") {
  auto backbone = load_backbone({"tinyvgg", "", 32});
  const TapPoint tap = backbone->tap("block1");
  Rng rng(35);
  const Tensor clear = test::random_positive_tensor(8, tap.channels, tap.height, tap.width, rng);
  const Tensor degraded =
      test::random_positive_tensor(8, tap.channels, tap.height, tap.width, rng, 0.5);

  const auto result =
      train_stage1_features(micro_config(2, GeneratorInit::kNearIdentity), clear, degraded,
                            *backbone, tap);
  CHECK(result.log.size() == 8);  // 2 epochs x (8/2) steps
  for (const auto& lb : result.log) CHECK(lb.finite());
  CHECK(result.checkpoint.steps == 8);
  CHECK(result.checkpoint.tap_name == "block1");
}

TEST_CASE("identity initialization gives exactly zero cyc and idt at step 0") {
  auto backbone = load_backbone({"tinyvgg", "", 32});
  const TapPoint tap = backbone->tap("block1");
  Rng rng(36);
  const Tensor clear = test::random_positive_tensor(4, tap.channels, tap.height, tap.width, rng);
  const Tensor degraded =
      test::random_positive_tensor(4, tap.channels, tap.height, tap.width, rng, 0.5);
  const auto result = train_stage1_features(micro_config(1, GeneratorInit::kNearIdentity), clear,
                                            degraded, *backbone, tap);
  CHECK(result.log.front().cyc == 0.0);
  CHECK(result.log.front().idt == 0.0);
}

TEST_CASE("zero training steps leaves checkpoint parameters at initialization") {
  auto backbone = load_backbone({"tinyvgg", "", 32});
  const TapPoint tap = backbone->tap("block1");
  Rng rng(37);
  const Tensor clear = test::random_positive_tensor(4, tap.channels, tap.height, tap.width, rng);
  const Tensor degraded = test::random_positive_tensor(4, tap.channels, tap.height, tap.width, rng);

  const Stage1Config config = micro_config(0, GeneratorInit::kStandard);
  const auto result = train_stage1_features(config, clear, degraded, *backbone, tap);

  GeneratorSpec gspec = config.generator;
  gspec.in_channels = tap.channels;
  gspec.input_height = tap.height;
  gspec.input_width = tap.width;
  Rng seeds(Rng::seed_mix(config.seed, 0x73316e65ull));
  auto fresh = build_generator(gspec, seeds.fork(1).state());
  const NamedTensors init = fresh->snapshot();
  REQUIRE(init.tensors.size() == result.checkpoint.g_d2c_params.tensors.size());
  for (size_t i = 0; i < init.tensors.size(); ++i) {
    CHECK(init.tensors[i].second.bitwise_equal(result.checkpoint.g_d2c_params.tensors[i].second));
  }
}

TEST_CASE("micro-overfit halves the cycle loss with standard init") {
  auto backbone = load_backbone({"tinyvgg", "", 32});
  const TapPoint tap = backbone->tap("block1");
  Rng rng(38);
  const Tensor clear = test::random_positive_tensor(4, tap.channels, tap.height, tap.width, rng);
  const Tensor degraded =
      test::random_positive_tensor(4, tap.channels, tap.height, tap.width, rng, 0.6);

  // Pure reconstruction run: the adversarial weight is zeroed so the oracle
  // isolates whether the optimizer actually descends the cycle objective.
  Stage1Config config = micro_config(100, GeneratorInit::kStandard);  // 100 epochs x 2 steps
  config.lambda_mul_adv = 0.0;
  config.lr_g = 1e-3;
  const auto result = train_stage1_features(config, clear, degraded, *backbone, tap);
  REQUIRE(result.log.size() == 200);
  const double initial = result.log.front().cyc;
  const double final_cyc = result.log.back().cyc;
  CHECK(initial > 0.0);
  CHECK(final_cyc <= 0.5 * initial);
}

TEST_CASE("fixed seed gives an identical loss trajectory across runs") {
  auto backbone = load_backbone({"tinyvgg", "", 32});
  const TapPoint tap = backbone->tap("block1");
  Rng rng(39);
  const Tensor clear = test::random_positive_tensor(6, tap.channels, tap.height, tap.width, rng);
  const Tensor degraded = test::random_positive_tensor(6, tap.channels, tap.height, tap.width, rng);

  const Stage1Config config = micro_config(2, GeneratorInit::kNearIdentity);
  const auto r1 = train_stage1_features(config, clear, degraded, *backbone, tap);
  const auto r2 = train_stage1_features(config, clear, degraded, *backbone, tap);
  REQUIRE(r1.log.size() == r2.log.size());
  for (size_t i = 0; i < r1.log.size(); ++i) {
    CHECK(r1.log[i].to_json() == r2.log[i].to_json());
  }
  REQUIRE(r1.checkpoint.g_d2c_params.tensors.size() == r2.checkpoint.g_d2c_params.tensors.size());
  for (size_t i = 0; i < r1.checkpoint.g_d2c_params.tensors.size(); ++i) {
    CHECK(r1.checkpoint.g_d2c_params.tensors[i].second.bitwise_equal(
        r2.checkpoint.g_d2c_params.tensors[i].second));
  }
}

TEST_CASE("backbone parameters are untouched by stage-1 training") {
  auto backbone = load_backbone({"tinyvgg", "", 32});
  const TapPoint tap = backbone->tap("block1");
  const uint64_t before = backbone->parameter_checksum();
  Rng rng(40);
  const Tensor clear = test::random_positive_tensor(4, tap.channels, tap.height, tap.width, rng);
  const Tensor degraded = test::random_positive_tensor(4, tap.channels, tap.height, tap.width, rng);
  (void)train_stage1_features(micro_config(2, GeneratorInit::kNearIdentity), clear, degraded,
                              *backbone, tap);
  CHECK(backbone->parameter_checksum() == before);
}

TEST_CASE("stage-1 checkpoint serialization round-trips bitwise") {
  test::TempDir dir("s1ckpt");
  auto backbone = load_backbone({"tinyvgg", "", 32});
  const TapPoint tap = backbone->tap("block1");
  Rng rng(41);
  const Tensor clear = test::random_positive_tensor(4, tap.channels, tap.height, tap.width, rng);
  const Tensor degraded = test::random_positive_tensor(4, tap.channels, tap.height, tap.width, rng);
  const auto result = train_stage1_features(micro_config(1, GeneratorInit::kStandard), clear,
                                            degraded, *backbone, tap);

  const std::string path = dir.file("s1.ntc");
  save_stage1_checkpoint(result.checkpoint, path);
  const Stage1Checkpoint back = load_stage1_checkpoint(path);
  CHECK(back.tap_name == result.checkpoint.tap_name);
  CHECK(back.steps == result.checkpoint.steps);
  REQUIRE(back.g_d2c_params.tensors.size() == result.checkpoint.g_d2c_params.tensors.size());
  for (size_t i = 0; i < back.g_d2c_params.tensors.size(); ++i) {
    CHECK(back.g_d2c_params.tensors[i].second.bitwise_equal(
        result.checkpoint.g_d2c_params.tensors[i].second));
  }
  REQUIRE(back.d_clear.size() == 3);

  // Loading as the wrong kind fails.
  CHECK_THROWS_AS(load_stage2_checkpoint(path), IoError);
}

TEST_CASE("objective comparisons are invariant to rescaling a single lambda") {
  // If candidate A beats candidate B under lambdas L, it still does after
  // any one lambda is scaled by a positive factor applied to both.
  Rng rng(95);
  for (int trial = 0; trial < 20; ++trial) {
    const double a[3] = {rng.uniform(), rng.uniform(), rng.uniform()};
    double b[3] = {a[0], a[1], a[2]};
    const int changed = static_cast<int>(rng.uniform_int(3));
    b[changed] += rng.uniform(0.1, 1.0);  // B is worse in exactly one component
    std::array<double, 3> lambdas = {5, 10, 5};
    const bool a_wins = stage1_objective(a[0], a[1], a[2], lambdas) <
                        stage1_objective(b[0], b[1], b[2], lambdas);
    std::array<double, 3> scaled = lambdas;
    scaled[static_cast<size_t>(changed)] *= rng.uniform(0.5, 20.0);
    const bool a_wins_scaled = stage1_objective(a[0], a[1], a[2], scaled) <
                               stage1_objective(b[0], b[1], b[2], scaled);
    CHECK(a_wins == a_wins_scaled);
  }
}

TEST_CASE("checkpoint cadence fires the observer per configured epoch") {
  struct Counting : TrainObserver {
    int s1_checkpoints = 0;
    void on_stage1_checkpoint(int, const Stage1Checkpoint&) override { ++s1_checkpoints; }
  };
  auto backbone = load_backbone({"tinyvgg", "", 32});
  const TapPoint tap = backbone->tap("block1");
  Rng rng(96);
  const Tensor clear = test::random_positive_tensor(4, tap.channels, tap.height, tap.width, rng);
  const Tensor degraded = test::random_positive_tensor(4, tap.channels, tap.height, tap.width, rng);
  Stage1Config config = micro_config(3, GeneratorInit::kNearIdentity);
  config.checkpoint_every_epochs = 1;
  Counting obs;
  (void)train_stage1_features(config, clear, degraded, *backbone, tap, &obs);
  CHECK(obs.s1_checkpoints == 3);
}
