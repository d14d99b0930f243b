// core/src/nn.cpp

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

#include "ufem/nn.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>

#include <Eigen/Core>

namespace ufem {

using MatMap = Eigen::Map<Eigen::MatrixXd>;
using ConstMatMap = Eigen::Map<const Eigen::MatrixXd>;

// ---------------------------------------------------------------------------
// Conv2d

Conv2d::Conv2d(int in_c, int out_c, int ksize, int stride, int pad, PadMode pad_mode)
    : in_c_(in_c),
      out_c_(out_c),
      k_(ksize),
      stride_(stride),
      pad_(pad),
      pad_mode_(pad_mode),
      w_(out_c, in_c, ksize, ksize),
      b_(out_c, 1, 1, 1),
      gw_(out_c, in_c, ksize, ksize),
      gb_(out_c, 1, 1, 1) {
  UFEM_CHECK(in_c > 0 && out_c > 0 && ksize > 0 && stride > 0 && pad >= 0,
             "conv2d: bad construction arguments");
}

namespace {

// Fills an im2col buffer (K x P, column-major, K = in_c*k*k) for one sample.
void im2col(const Tensor& x, int n, int k, int stride, int pad, PadMode mode, int oh, int ow,
            Eigen::MatrixXd& cols) {
  const int c = x.c(), h = x.h(), w = x.w();
  for (int ic = 0; ic < c; ++ic) {
    const double* src = x.channel(n, ic);
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx) {
        const int row = (ic * k + ky) * k + kx;
        for (int oy = 0; oy < oh; ++oy) {
          int yy = oy * stride - pad + ky;
          if (mode == PadMode::kReplicate) yy = std::clamp(yy, 0, h - 1);
          const bool y_ok = yy >= 0 && yy < h;
          for (int ox = 0; ox < ow; ++ox) {
            int xx = ox * stride - pad + kx;
            if (mode == PadMode::kReplicate) xx = std::clamp(xx, 0, w - 1);
            const int p = oy * ow + ox;
            cols(row, p) = (y_ok && xx >= 0 && xx < w) ? src[yy * w + xx] : 0.0;
          }
        }
      }
    }
  }
}

// Scatter-adds an im2col-layout gradient back onto the input gradient.
void col2im(const Eigen::MatrixXd& dcols, int n, int k, int stride, int pad, PadMode mode, int oh,
            int ow, Tensor& gx) {
  const int c = gx.c(), h = gx.h(), w = gx.w();
  for (int ic = 0; ic < c; ++ic) {
    double* dst = gx.channel(n, ic);
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx) {
        const int row = (ic * k + ky) * k + kx;
        for (int oy = 0; oy < oh; ++oy) {
          int yy = oy * stride - pad + ky;
          if (mode == PadMode::kReplicate) yy = std::clamp(yy, 0, h - 1);
          if (yy < 0 || yy >= h) continue;
          for (int ox = 0; ox < ow; ++ox) {
            int xx = ox * stride - pad + kx;
            if (mode == PadMode::kReplicate) xx = std::clamp(xx, 0, w - 1);
            if (xx < 0 || xx >= w) continue;
            dst[yy * w + xx] += dcols(row, oy * ow + ox);
          }
        }
      }
    }
  }
}

}  // namespace

Tensor Conv2d::apply(const Tensor& x) const {
  UFEM_CHECK(x.c() == in_c_, "conv2d: input has " + std::to_string(x.c()) + " channels, expected " +
                                 std::to_string(in_c_));
  const int oh = (x.h() + 2 * pad_ - k_) / stride_ + 1;
  const int ow = (x.w() + 2 * pad_ - k_) / stride_ + 1;
  UFEM_CHECK(oh >= 1 && ow >= 1, "conv2d: output would be empty for input " + x.shape_str());

  Tensor out(x.n(), out_c_, oh, ow);
  const int K = in_c_ * k_ * k_;
  const int P = oh * ow;
  Eigen::MatrixXd cols(K, P);
  ConstMatMap wmap(w_.data(), K, out_c_);
  for (int s = 0; s < x.n(); ++s) {
    im2col(x, s, k_, stride_, pad_, pad_mode_, oh, ow, cols);
    MatMap omap(out.sample(s), P, out_c_);
    omap.noalias() = cols.transpose() * wmap;
    for (int oc = 0; oc < out_c_; ++oc) omap.col(oc).array() += b_.data()[oc];
  }
  return out;
}

Tensor Conv2d::forward(const Tensor& x) {
  cached_.push_back(x);
  return apply(x);
}

Tensor Conv2d::infer(const Tensor& x) const { return apply(x); }

Tensor Conv2d::backward(const Tensor& gy) {
  UFEM_CHECK(!cached_.empty(), "conv2d: backward without matching forward");
  Tensor x = std::move(cached_.back());
  cached_.pop_back();

  const int oh = gy.h(), ow = gy.w();
  const int K = in_c_ * k_ * k_;
  const int P = oh * ow;
  Tensor gx(x.n(), x.c(), x.h(), x.w());
  Eigen::MatrixXd cols(K, P);
  Eigen::MatrixXd dcols(K, P);
  ConstMatMap wmap(w_.data(), K, out_c_);
  MatMap gwmap(gw_.data(), K, out_c_);
  for (int s = 0; s < x.n(); ++s) {
    ConstMatMap gymap(gy.sample(s), P, out_c_);
    if (trainable_) {
      im2col(x, s, k_, stride_, pad_, pad_mode_, oh, ow, cols);
      gwmap.noalias() += cols * gymap;
      for (int oc = 0; oc < out_c_; ++oc) gb_.data()[oc] += gymap.col(oc).sum();
    }
    dcols.noalias() = wmap * gymap.transpose();
    col2im(dcols, s, k_, stride_, pad_, pad_mode_, oh, ow, gx);
  }
  return gx;
}

void Conv2d::collect_params(const std::string& prefix, std::vector<ParamRef>& out) {
  out.push_back({prefix + "weight", &w_, &gw_});
  out.push_back({prefix + "bias", &b_, &gb_});
}

std::unique_ptr<Layer> Conv2d::clone() const {
  auto c = std::make_unique<Conv2d>(in_c_, out_c_, k_, stride_, pad_, pad_mode_);
  c->w_ = w_;
  c->b_ = b_;
  c->trainable_ = trainable_;
  return c;
}

// ---------------------------------------------------------------------------
// Relu / LeakyRelu

Tensor Relu::forward(const Tensor& x) {
  cached_.push_back(x);
  return infer(x);
}

Tensor Relu::infer(const Tensor& x) const {
  Tensor y = x;
  for (int64_t i = 0; i < y.size(); ++i) y.data()[i] = y.data()[i] > 0.0 ? y.data()[i] : 0.0;
  return y;
}

Tensor Relu::backward(const Tensor& gy) {
  UFEM_CHECK(!cached_.empty(), "relu: backward without matching forward");
  Tensor x = std::move(cached_.back());
  cached_.pop_back();
  Tensor gx = gy;
  for (int64_t i = 0; i < gx.size(); ++i) {
    if (x.data()[i] <= 0.0) gx.data()[i] = 0.0;
  }
  return gx;
}

Tensor LeakyRelu::forward(const Tensor& x) {
  cached_.push_back(x);
  return infer(x);
}

Tensor LeakyRelu::infer(const Tensor& x) const {
  Tensor y = x;
  for (int64_t i = 0; i < y.size(); ++i) {
    if (y.data()[i] < 0.0) y.data()[i] *= slope_;
  }
  return y;
}

Tensor LeakyRelu::backward(const Tensor& gy) {
  UFEM_CHECK(!cached_.empty(), "leaky_relu: backward without matching forward");
  Tensor x = std::move(cached_.back());
  cached_.pop_back();
  Tensor gx = gy;
  for (int64_t i = 0; i < gx.size(); ++i) {
    if (x.data()[i] < 0.0) gx.data()[i] *= slope_;
  }
  return gx;
}

// ---------------------------------------------------------------------------
// MaxPool2

Tensor MaxPool2::apply(const Tensor& x, Cache* cache) const {
  UFEM_CHECK(x.h() % 2 == 0 && x.w() % 2 == 0, "maxpool2: spatial dims must be even, got " + x.shape_str());
  const int oh = x.h() / 2, ow = x.w() / 2;
  Tensor out(x.n(), x.c(), oh, ow);
  if (cache) {
    cache->argmax.assign(static_cast<size_t>(out.size()), 0);
    cache->n = x.n(); cache->c = x.c(); cache->h = x.h(); cache->w = x.w();
  }
  int64_t oi = 0;
  for (int s = 0; s < x.n(); ++s) {
    for (int c = 0; c < x.c(); ++c) {
      const double* src = x.channel(s, c);
      double* dst = out.channel(s, c);
      const int64_t base = (static_cast<int64_t>(s) * x.c() + c) * x.plane();
      for (int oy = 0; oy < oh; ++oy) {
        for (int ox = 0; ox < ow; ++ox) {
          const int y0 = 2 * oy, x0 = 2 * ox;
          int64_t best_idx = static_cast<int64_t>(y0) * x.w() + x0;
          double best = src[best_idx];
          for (int dy = 0; dy < 2; ++dy) {
            for (int dx = 0; dx < 2; ++dx) {
              const int64_t idx = static_cast<int64_t>(y0 + dy) * x.w() + (x0 + dx);
              if (src[idx] > best) { best = src[idx]; best_idx = idx; }
            }
          }
          dst[oy * ow + ox] = best;
          if (cache) cache->argmax[oi] = base + best_idx;
          ++oi;
        }
      }
    }
  }
  return out;
}

Tensor MaxPool2::forward(const Tensor& x) {
  cached_.emplace_back();
  return apply(x, &cached_.back());
}

Tensor MaxPool2::infer(const Tensor& x) const { return apply(x, nullptr); }

Tensor MaxPool2::backward(const Tensor& gy) {
  UFEM_CHECK(!cached_.empty(), "maxpool2: backward without matching forward");
  Cache cache = std::move(cached_.back());
  cached_.pop_back();
  Tensor gx(cache.n, cache.c, cache.h, cache.w);
  for (int64_t i = 0; i < gy.size(); ++i) gx.data()[cache.argmax[i]] += gy.data()[i];
  return gx;
}

// ---------------------------------------------------------------------------
// InstanceNorm

InstanceNorm::InstanceNorm(int channels, double eps)
    : channels_(channels),
      eps_(eps),
      gamma_(channels, 1, 1, 1),
      beta_(channels, 1, 1, 1),
      ggamma_(channels, 1, 1, 1),
      gbeta_(channels, 1, 1, 1) {
  gamma_.fill(1.0);
}

Tensor InstanceNorm::apply(const Tensor& x, Cache* cache) const {
  UFEM_CHECK(x.c() == channels_, "instance_norm: channel mismatch");
  const int64_t plane = x.plane();
  Tensor y(x.n(), x.c(), x.h(), x.w());
  if (cache) {
    cache->xhat = Tensor(x.n(), x.c(), x.h(), x.w());
    cache->inv_std.assign(static_cast<size_t>(x.n()) * x.c(), 0.0);
  }
  for (int s = 0; s < x.n(); ++s) {
    for (int c = 0; c < x.c(); ++c) {
      const double* src = x.channel(s, c);
      double* dst = y.channel(s, c);
      double mu = 0.0;
      for (int64_t i = 0; i < plane; ++i) mu += src[i];
      mu /= static_cast<double>(plane);
      double var = 0.0;
      for (int64_t i = 0; i < plane; ++i) {
        const double d = src[i] - mu;
        var += d * d;
      }
      var /= static_cast<double>(plane);
      const double inv = 1.0 / std::sqrt(var + eps_);
      const double g = gamma_.data()[c], b = beta_.data()[c];
      double* xh = cache ? cache->xhat.channel(s, c) : nullptr;
      for (int64_t i = 0; i < plane; ++i) {
        const double xn = (src[i] - mu) * inv;
        if (xh) xh[i] = xn;
        dst[i] = g * xn + b;
      }
      if (cache) cache->inv_std[static_cast<size_t>(s) * x.c() + c] = inv;
    }
  }
  return y;
}

Tensor InstanceNorm::forward(const Tensor& x) {
  cached_.emplace_back();
  return apply(x, &cached_.back());
}

Tensor InstanceNorm::infer(const Tensor& x) const { return apply(x, nullptr); }

Tensor InstanceNorm::backward(const Tensor& gy) {
  UFEM_CHECK(!cached_.empty(), "instance_norm: backward without matching forward");
  Cache cache = std::move(cached_.back());
  cached_.pop_back();
  const Tensor& xhat = cache.xhat;
  const int64_t plane = gy.plane();
  Tensor gx(gy.n(), gy.c(), gy.h(), gy.w());
  for (int s = 0; s < gy.n(); ++s) {
    for (int c = 0; c < gy.c(); ++c) {
      const double* gyp = gy.channel(s, c);
      const double* xh = xhat.channel(s, c);
      double* gxp = gx.channel(s, c);
      const double gamma = gamma_.data()[c];
      const double inv = cache.inv_std[static_cast<size_t>(s) * gy.c() + c];
      double sum_g = 0.0, sum_gx = 0.0;
      for (int64_t i = 0; i < plane; ++i) {
        const double g = gyp[i] * gamma;
        sum_g += g;
        sum_gx += g * xh[i];
      }
      const double m1 = sum_g / static_cast<double>(plane);
      const double m2 = sum_gx / static_cast<double>(plane);
      for (int64_t i = 0; i < plane; ++i) {
        gxp[i] = inv * (gyp[i] * gamma - m1 - xh[i] * m2);
      }
      if (trainable_) {
        double dg = 0.0, db = 0.0;
        for (int64_t i = 0; i < plane; ++i) {
          dg += gyp[i] * xh[i];
          db += gyp[i];
        }
        ggamma_.data()[c] += dg;
        gbeta_.data()[c] += db;
      }
    }
  }
  return gx;
}

void InstanceNorm::collect_params(const std::string& prefix, std::vector<ParamRef>& out) {
  out.push_back({prefix + "gamma", &gamma_, &ggamma_});
  out.push_back({prefix + "beta", &beta_, &gbeta_});
}

std::unique_ptr<Layer> InstanceNorm::clone() const {
  auto c = std::make_unique<InstanceNorm>(channels_, eps_);
  c->gamma_ = gamma_;
  c->beta_ = beta_;
  c->trainable_ = trainable_;
  return c;
}

// ---------------------------------------------------------------------------
// Linear

Linear::Linear(int in_features, int out_features)
    : in_f_(in_features),
      out_f_(out_features),
      w_(out_features, in_features, 1, 1),
      b_(out_features, 1, 1, 1),
      gw_(out_features, in_features, 1, 1),
      gb_(out_features, 1, 1, 1) {}

Tensor Linear::apply(const Tensor& x) const {
  UFEM_CHECK(x.sample_size() == in_f_, "linear: input has " + std::to_string(x.sample_size()) +
                                           " features, expected " + std::to_string(in_f_));
  Tensor out(x.n(), out_f_, 1, 1);
  ConstMatMap xmap(x.data(), in_f_, x.n());
  ConstMatMap wmap(w_.data(), in_f_, out_f_);
  MatMap omap(out.data(), out_f_, x.n());
  omap.noalias() = wmap.transpose() * xmap;
  for (int s = 0; s < x.n(); ++s) {
    for (int o = 0; o < out_f_; ++o) omap(o, s) += b_.data()[o];
  }
  return out;
}

Tensor Linear::forward(const Tensor& x) {
  cached_.push_back(x);
  return apply(x);
}

Tensor Linear::infer(const Tensor& x) const { return apply(x); }

Tensor Linear::backward(const Tensor& gy) {
  UFEM_CHECK(!cached_.empty(), "linear: backward without matching forward");
  Tensor x = std::move(cached_.back());
  cached_.pop_back();
  ConstMatMap xmap(x.data(), in_f_, x.n());
  ConstMatMap gymap(gy.data(), out_f_, x.n());
  if (trainable_) {
    MatMap gwmap(gw_.data(), in_f_, out_f_);
    gwmap.noalias() += xmap * gymap.transpose();
    for (int o = 0; o < out_f_; ++o) gb_.data()[o] += gymap.row(o).sum();
  }
  Tensor gx(x.n(), x.c(), x.h(), x.w());
  MatMap gxmap(gx.data(), in_f_, x.n());
  ConstMatMap wmap(w_.data(), in_f_, out_f_);
  gxmap.noalias() = wmap * gymap;
  return gx;
}

void Linear::collect_params(const std::string& prefix, std::vector<ParamRef>& out) {
  out.push_back({prefix + "weight", &w_, &gw_});
  out.push_back({prefix + "bias", &b_, &gb_});
}

std::unique_ptr<Layer> Linear::clone() const {
  auto c = std::make_unique<Linear>(in_f_, out_f_);
  c->w_ = w_;
  c->b_ = b_;
  c->trainable_ = trainable_;
  return c;
}

// ---------------------------------------------------------------------------
// UpsampleNearest2

Tensor UpsampleNearest2::apply(const Tensor& x) const {
  Tensor out(x.n(), x.c(), x.h() * 2, x.w() * 2);
  for (int s = 0; s < x.n(); ++s) {
    for (int c = 0; c < x.c(); ++c) {
      const double* src = x.channel(s, c);
      double* dst = out.channel(s, c);
      for (int y = 0; y < out.h(); ++y) {
        const double* row = src + (y / 2) * x.w();
        for (int xx = 0; xx < out.w(); ++xx) dst[y * out.w() + xx] = row[xx / 2];
      }
    }
  }
  return out;
}

Tensor UpsampleNearest2::forward(const Tensor& x) {
  shapes_.push_back({x.n(), x.c(), x.h(), x.w()});
  return apply(x);
}

Tensor UpsampleNearest2::infer(const Tensor& x) const { return apply(x); }

Tensor UpsampleNearest2::backward(const Tensor& gy) {
  UFEM_CHECK(!shapes_.empty(), "upsample: backward without matching forward");
  auto shape = shapes_.back();
  shapes_.pop_back();
  Tensor gx(shape[0], shape[1], shape[2], shape[3]);
  for (int s = 0; s < gx.n(); ++s) {
    for (int c = 0; c < gx.c(); ++c) {
      const double* src = gy.channel(s, c);
      double* dst = gx.channel(s, c);
      for (int y = 0; y < gy.h(); ++y) {
        for (int xx = 0; xx < gy.w(); ++xx) {
          dst[(y / 2) * gx.w() + (xx / 2)] += src[y * gy.w() + xx];
        }
      }
    }
  }
  return gx;
}

// ---------------------------------------------------------------------------
// Sequential

Sequential& Sequential::add(const std::string& name, std::unique_ptr<Layer> layer) {
  names_.push_back(name);
  layers_.push_back(std::move(layer));
  return *this;
}

Tensor Sequential::forward(const Tensor& x) {
  Tensor h = x;
  for (auto& l : layers_) h = l->forward(h);
  return h;
}

Tensor Sequential::backward(const Tensor& gy) {
  Tensor g = gy;
  for (auto it = layers_.rbegin(); it != layers_.rend(); ++it) g = (*it)->backward(g);
  return g;
}

Tensor Sequential::infer(const Tensor& x) const {
  Tensor h = x;
  for (const auto& l : layers_) h = l->infer(h);
  return h;
}

Tensor Sequential::infer_range(const Tensor& x, size_t begin, size_t end) const {
  UFEM_CHECK(begin <= end && end <= layers_.size(), "sequential: bad layer range");
  Tensor h = x;
  for (size_t i = begin; i < end; ++i) h = layers_[i]->infer(h);
  return h;
}

void Sequential::collect_params(const std::string& prefix, std::vector<ParamRef>& out) {
  for (size_t i = 0; i < layers_.size(); ++i) {
    layers_[i]->collect_params(prefix + names_[i] + ".", out);
  }
}

void Sequential::set_trainable(bool t) {
  trainable_ = t;
  for (auto& l : layers_) l->set_trainable(t);
}

std::unique_ptr<Layer> Sequential::clone() const {
  auto c = clone_range(0, layers_.size());
  return c;
}

std::unique_ptr<Sequential> Sequential::clone_range(size_t begin, size_t end) const {
  UFEM_CHECK(begin <= end && end <= layers_.size(), "sequential: bad clone range");
  auto c = std::make_unique<Sequential>();
  for (size_t i = begin; i < end; ++i) c->add(names_[i], layers_[i]->clone());
  c->trainable_ = trainable_;
  return c;
}

void Sequential::clear_state() {
  for (auto& l : layers_) l->clear_state();
}

// ---------------------------------------------------------------------------
// Residual

Tensor Residual::forward(const Tensor& x) {
  Tensor y = body_->forward(x);
  y.add_(x);
  return y;
}

Tensor Residual::backward(const Tensor& gy) {
  Tensor gx = body_->backward(gy);
  gx.add_(gy);
  return gx;
}

Tensor Residual::infer(const Tensor& x) const {
  Tensor y = body_->infer(x);
  y.add_(x);
  return y;
}

void Residual::collect_params(const std::string& prefix, std::vector<ParamRef>& out) {
  body_->collect_params(prefix, out);
}

void Residual::set_trainable(bool t) {
  trainable_ = t;
  body_->set_trainable(t);
}

std::unique_ptr<Layer> Residual::clone() const {
  auto c = std::make_unique<Residual>(body_->clone());
  c->trainable_ = trainable_;
  return c;
}

// ---------------------------------------------------------------------------
// Init

void init_normal(Tensor& t, double stddev, Rng& rng) {
  for (int64_t i = 0; i < t.size(); ++i) t.data()[i] = rng.normal(0.0, stddev);
}

void init_kaiming(Tensor& t, int fan_in, Rng& rng) {
  init_normal(t, std::sqrt(2.0 / static_cast<double>(fan_in)), rng);
}

// ---------------------------------------------------------------------------
// Classifier loss

double softmax_xent(const Tensor& logits, const std::vector<int>& labels, Tensor* glogits) {
  const int n = logits.n(), k = logits.c();
  UFEM_CHECK(static_cast<int>(labels.size()) == n, "softmax_xent: label count mismatch");
  UFEM_CHECK(logits.h() == 1 && logits.w() == 1, "softmax_xent: logits must be (n, classes, 1, 1)");
  if (glogits) *glogits = Tensor(n, k, 1, 1);
  double loss = 0.0;
  for (int s = 0; s < n; ++s) {
    UFEM_CHECK(labels[s] >= 0 && labels[s] < k, "softmax_xent: label out of range");
    const double* row = logits.data() + static_cast<int64_t>(s) * k;
    double mx = row[0];
    for (int j = 1; j < k; ++j) mx = std::max(mx, row[j]);
    double z = 0.0;
    for (int j = 0; j < k; ++j) z += std::exp(row[j] - mx);
    const double logz = std::log(z) + mx;
    loss += logz - row[labels[s]];
    if (glogits) {
      double* g = glogits->data() + static_cast<int64_t>(s) * k;
      for (int j = 0; j < k; ++j) {
        const double p = std::exp(row[j] - logz);
        g[j] = (p - (j == labels[s] ? 1.0 : 0.0)) / static_cast<double>(n);
      }
    }
  }
  return loss / static_cast<double>(n);
}

std::vector<int> argmax_classes(const Tensor& logits) {
  std::vector<int> out(logits.n());
  const int k = logits.c() * logits.h() * logits.w();
  for (int s = 0; s < logits.n(); ++s) {
    const double* row = logits.data() + static_cast<int64_t>(s) * k;
    int best = 0;
    for (int j = 1; j < k; ++j) {
      if (row[j] > row[best]) best = j;
    }
    out[s] = best;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Adam

Adam::Adam(std::vector<ParamRef> params, double lr, double beta1, double beta2, double eps)
    : params_(std::move(params)), lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {
  m_.reserve(params_.size());
  v_.reserve(params_.size());
  for (const auto& p : params_) {
    m_.emplace_back(p.value->n(), p.value->c(), p.value->h(), p.value->w());
    v_.emplace_back(p.value->n(), p.value->c(), p.value->h(), p.value->w());
  }
}

void Adam::zero_grad() {
  for (auto& p : params_) p.grad->fill(0.0);
}

void Adam::step() {
  ++t_;
  const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (size_t i = 0; i < params_.size(); ++i) {
    double* p = params_[i].value->data();
    const double* g = params_[i].grad->data();
    double* m = m_[i].data();
    double* v = v_[i].data();
    const int64_t sz = params_[i].value->size();
    for (int64_t j = 0; j < sz; ++j) {
      m[j] = beta1_ * m[j] + (1.0 - beta1_) * g[j];
      v[j] = beta2_ * v[j] + (1.0 - beta2_) * g[j] * g[j];
      p[j] -= lr_ * (m[j] / bc1) / (std::sqrt(v[j] / bc2) + eps_);
    }
  }
}

// ---------------------------------------------------------------------------
// Parameter utilities

uint64_t params_checksum(const std::vector<ParamRef>& params) {
  uint64_t h = 0xcbf29ce484222325ull;
  for (const auto& p : params) {
    h = fnv1a64(p.name.data(), p.name.size(), h);
    h = fnv1a64(p.value->data(), static_cast<size_t>(p.value->size()) * sizeof(double), h);
  }
  return h;
}

NamedTensors snapshot_params(Layer& net, const std::string& prefix) {
  NamedTensors nt;
  std::vector<ParamRef> refs;
  net.collect_params(prefix, refs);
  nt.tensors.reserve(refs.size());
  for (const auto& r : refs) nt.tensors.emplace_back(r.name, *r.value);
  return nt;
}

void load_params(Layer& net, const NamedTensors& nt, const std::string& prefix) {
  std::vector<ParamRef> refs;
  net.collect_params(prefix, refs);
  for (const auto& r : refs) {
    const Tensor* src = nt.find(r.name);
    if (!src) throw IoError("missing tensor '" + r.name + "' while loading parameters");
    if (!src->same_shape(*r.value))
      throw IoError("tensor '" + r.name + "' has shape " + src->shape_str() + ", expected " +
                    r.value->shape_str());
    *r.value = *src;
  }
}

}  // namespace ufem
