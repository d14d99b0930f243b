// tests/test_nn.cpp

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
#include "ufem/nn.hpp"

using namespace ufem;
using test::fd_check;
using test::random_tensor;

namespace {

// Sum-of-squares head so every layer test has a scalar objective.
double half_sq(const Tensor& y) {
  double s = 0.0;
  for (int64_t i = 0; i < y.size(); ++i) s += 0.5 * y.data()[i] * y.data()[i];
  return s;
}

Tensor half_sq_grad(const Tensor& y) { return y; }

void zero_params(std::vector<ParamRef> params) {
  for (auto& p : params) p.grad->fill(0.0);
}

template <typename LayerT>
void layer_fd_case(LayerT& layer, const Tensor& x, int probes, uint64_t seed,
                   double tol = 1e-4) {
  auto loss = [&]() {
    Tensor y = layer.forward(x);
    layer.clear_state();
    return half_sq(y);
  };
  auto grads = [&]() {
    zero_params(layer.params());
    Tensor y = layer.forward(x);
    layer.backward(half_sq_grad(y));
  };
  const auto report = fd_check(layer.params(), loss, grads, probes, seed);
  CHECK(report.checked >= probes);
  CHECK(report.max_rel_err < tol);
}

}  // namespace

TEST_CASE("conv2d matches a direct convolution oracle") {
  Rng rng(11);
  Conv2d conv(2, 3, 3, 1, 1, PadMode::kZero);
  init_normal(conv.weight(), 0.5, rng);
  init_normal(conv.bias(), 0.5, rng);
  const Tensor x = random_tensor(2, 2, 5, 6, rng);
  const Tensor y = conv.infer(x);
  REQUIRE(y.n() == 2);
  REQUIRE(y.c() == 3);
  REQUIRE(y.h() == 5);
  REQUIRE(y.w() == 6);

  for (int s = 0; s < 2; ++s) {
    for (int oc = 0; oc < 3; ++oc) {
      for (int oy = 0; oy < 5; ++oy) {
        for (int ox = 0; ox < 6; ++ox) {
          double acc = conv.bias().data()[oc];
          for (int ic = 0; ic < 2; ++ic) {
            for (int ky = 0; ky < 3; ++ky) {
              for (int kx = 0; kx < 3; ++kx) {
                const int yy = oy + ky - 1, xx = ox + kx - 1;
                if (yy < 0 || yy >= 5 || xx < 0 || xx >= 6) continue;
                acc += conv.weight().at(oc, ic, ky, kx) * x.at(s, ic, yy, xx);
              }
            }
          }
          CHECK(std::fabs(acc - y.at(s, oc, oy, ox)) < 1e-12);
        }
      }
    }
  }
}

TEST_CASE("conv2d gradients match finite differences") {
  Rng rng(12);
  SUBCASE("zero padding, stride 1") {
    Conv2d conv(2, 2, 3, 1, 1, PadMode::kZero);
    init_normal(conv.weight(), 0.4, rng);
    layer_fd_case(conv, random_tensor(2, 2, 4, 4, rng), 20, 1);
  }
  SUBCASE("replicate padding, stride 2") {
    Conv2d conv(3, 2, 4, 2, 1, PadMode::kReplicate);
    init_normal(conv.weight(), 0.4, rng);
    layer_fd_case(conv, random_tensor(1, 3, 6, 6, rng), 20, 2);
  }
}

TEST_CASE("conv2d input gradient matches finite differences") {
  Rng rng(13);
  Conv2d conv(2, 2, 3, 1, 1, PadMode::kReplicate);
  init_normal(conv.weight(), 0.4, rng);
  Tensor x = random_tensor(1, 2, 4, 4, rng);

  conv.clear_state();
  Tensor y = conv.forward(x);
  const Tensor gx = conv.backward(half_sq_grad(y));
  double max_rel = 0.0;
  Rng pick(14);
  for (int probe = 0; probe < 20; ++probe) {
    const int64_t i = pick.uniform_int(x.size());
    const double keep = x.data()[i];
    const double h = 1e-5;
    x.data()[i] = keep + h;
    const double up = half_sq(conv.infer(x));
    x.data()[i] = keep - h;
    const double down = half_sq(conv.infer(x));
    x.data()[i] = keep;
    const double fd = (up - down) / (2 * h);
    max_rel = std::max(max_rel, std::fabs(fd - gx.data()[i]) /
                                    std::max({std::fabs(fd), std::fabs(gx.data()[i]), 1e-8}));
  }
  CHECK(max_rel < 1e-4);
}

TEST_CASE("instance norm gradients and constant-channel behavior") {
  Rng rng(15);
  InstanceNorm norm(3);
  {
    auto params = norm.params();
    init_normal(*params[0].value, 0.2, rng);  // gamma around 0
    for (int64_t i = 0; i < params[0].value->size(); ++i) params[0].value->data()[i] += 1.0;
    init_normal(*params[1].value, 0.2, rng);
  }
  layer_fd_case(norm, random_tensor(2, 3, 4, 4, rng), 6, 3);

  // Constant channels normalize to beta.
  Tensor c = Tensor::full(1, 3, 4, 4, 5.0);
  const Tensor y = norm.infer(c);
  auto params = norm.params();
  for (int ch = 0; ch < 3; ++ch) {
    CHECK(std::fabs(y.at(0, ch, 1, 1) - params[1].value->data()[ch]) < 1e-6);
  }
}

TEST_CASE("maxpool forwards maxima and routes gradients to the argmax") {
  MaxPool2 pool;
  Tensor x(1, 1, 2, 2);
  x.at(0, 0, 0, 0) = 1.0;
  x.at(0, 0, 0, 1) = 3.0;
  x.at(0, 0, 1, 0) = 2.0;
  x.at(0, 0, 1, 1) = 0.0;
  Tensor y = pool.forward(x);
  CHECK(y.at(0, 0, 0, 0) == 3.0);
  Tensor gy = Tensor::full(1, 1, 1, 1, 7.0);
  const Tensor gx = pool.backward(gy);
  CHECK(gx.at(0, 0, 0, 1) == 7.0);
  CHECK(gx.at(0, 0, 0, 0) == 0.0);
  CHECK_THROWS_AS(pool.infer(Tensor(1, 1, 3, 3)), InvalidArgument);
}

TEST_CASE("linear and upsample gradients match finite differences") {
  Rng rng(16);
  SUBCASE("linear") {
    Linear lin(12, 5);
    init_normal(lin.weight(), 0.4, rng);
    layer_fd_case(lin, random_tensor(3, 12, 1, 1, rng), 20, 4);
  }
  SUBCASE("upsample has no params but propagates input grads") {
    UpsampleNearest2 up;
    Tensor x = random_tensor(1, 2, 3, 3, rng);
    Tensor y = up.forward(x);
    REQUIRE(y.h() == 6);
    Tensor gx = up.backward(half_sq_grad(y));
    // Each input cell collects its four copies.
    CHECK(std::fabs(gx.at(0, 0, 0, 0) - 4.0 * x.at(0, 0, 0, 0)) < 1e-12);
  }
}

TEST_CASE("sequential and residual compose forward and backward") {
  Rng rng(17);
  auto body = std::make_unique<Sequential>();
  {
    auto c1 = std::make_unique<Conv2d>(2, 4, 3, 1, 1, PadMode::kReplicate);
    init_normal(c1->weight(), 0.3, rng);
    body->add("conv1", std::move(c1));
    body->add("norm", std::make_unique<InstanceNorm>(4));
    body->add("relu", std::make_unique<Relu>());
    auto c2 = std::make_unique<Conv2d>(4, 2, 3, 1, 1, PadMode::kReplicate);
    init_normal(c2->weight(), 0.3, rng);
    body->add("conv2", std::move(c2));
  }
  Residual res(std::move(body));
  layer_fd_case(res, random_tensor(2, 2, 4, 4, rng), 20, 5);
}

TEST_CASE("cache stacks allow several forwards before backwards (LIFO)") {
  Rng rng(18);
  Conv2d conv(1, 1, 3, 1, 1, PadMode::kReplicate);
  init_normal(conv.weight(), 0.5, rng);
  const Tensor a = random_tensor(1, 1, 4, 4, rng);
  const Tensor b = random_tensor(1, 1, 4, 4, rng);

  Tensor ya = conv.forward(a);
  Tensor yb = conv.forward(b);
  // Reverse order: pop b's frame first.
  conv.set_trainable(true);
  auto params = conv.params();
  zero_params(params);
  const Tensor gb = conv.backward(half_sq_grad(yb));
  const Tensor ga = conv.backward(half_sq_grad(ya));

  // Equivalent single-pass runs must give identical input grads.
  Conv2d clone_conv(1, 1, 3, 1, 1, PadMode::kReplicate);
  clone_conv.weight() = conv.weight();
  clone_conv.bias() = conv.bias();
  Tensor ya2 = clone_conv.forward(a);
  const Tensor ga2 = clone_conv.backward(half_sq_grad(ya2));
  CHECK(ga.bitwise_equal(ga2));
  CHECK_FALSE(gb.bitwise_equal(ga));
}

TEST_CASE("softmax cross entropy matches an independent evaluation") {
  Tensor logits(2, 3, 1, 1);
  const double vals[6] = {0.2, -1.0, 0.5, 2.0, 0.0, -0.3};
  for (int i = 0; i < 6; ++i) logits.data()[i] = vals[i];
  const std::vector<int> labels = {2, 0};

  double expected = 0.0;
  for (int s = 0; s < 2; ++s) {
    double z = 0.0;
    for (int k = 0; k < 3; ++k) z += std::exp(vals[s * 3 + k]);
    expected += std::log(z) - vals[s * 3 + labels[static_cast<size_t>(s)]];
  }
  expected /= 2.0;

  Tensor g;
  const double loss = softmax_xent(logits, labels, &g);
  CHECK(std::fabs(loss - expected) < 1e-12);

  // Gradient vs finite differences on every logit.
  for (int64_t i = 0; i < logits.size(); ++i) {
    const double keep = logits.data()[i];
    const double h = 1e-6;
    logits.data()[i] = keep + h;
    const double up = softmax_xent(logits, labels, nullptr);
    logits.data()[i] = keep - h;
    const double down = softmax_xent(logits, labels, nullptr);
    logits.data()[i] = keep;
    CHECK(std::fabs((up - down) / (2 * h) - g.data()[i]) < 1e-6);
  }
}

TEST_CASE("adam descends a quadratic deterministically") {
  Tensor theta = Tensor::full(1, 4, 1, 1, 1.0);
  Tensor grad(1, 4, 1, 1);
  std::vector<ParamRef> params = {{"theta", &theta, &grad}};
  Adam opt(params, 0.05);
  for (int it = 0; it < 200; ++it) {
    for (int64_t i = 0; i < theta.size(); ++i) grad.data()[i] = 2.0 * theta.data()[i];
    opt.step();
  }
  for (int64_t i = 0; i < theta.size(); ++i) CHECK(std::fabs(theta.data()[i]) < 1e-2);
}

TEST_CASE("parameter checksum is order- and value-sensitive") {
  Rng rng(19);
  Conv2d conv(1, 2, 3, 1, 1);
  init_normal(conv.weight(), 0.3, rng);
  const uint64_t before = params_checksum(conv.params());
  conv.weight().data()[0] += 1e-12;
  CHECK(params_checksum(conv.params()) != before);
}
