// core/include/ufem/nn.hpp

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

#ifndef UFEM_NN_HPP_
#define UFEM_NN_HPP_

#include <array>
#include <memory>
#include <string>
#include <vector>

#include "ufem/rng.hpp"
#include "ufem/serialize.hpp"
#include "ufem/tensor.hpp"

namespace ufem {

struct ParamRef {
  std::string name;
  Tensor* value;
  Tensor* grad;
};

/// Base class for differentiable layers.
///
/// Training passes cache what backward needs; caches form a stack so the
/// same layer instance may run several forward passes inside one step (a
/// generator is applied to both translation and identity inputs, frozen
/// backbone segments are traversed by several paths). The backward calls of
/// a step must then pop in exact reverse order of the forwards. infer() is
/// const and touches no caches, so frozen modules are safe for concurrent
/// readers.
class Layer {
 public:
  virtual ~Layer() = default;

  virtual Tensor forward(const Tensor& x) = 0;
  virtual Tensor backward(const Tensor& gy) = 0;
  virtual Tensor infer(const Tensor& x) const = 0;

  virtual void collect_params(const std::string& prefix, std::vector<ParamRef>& out) {}
  virtual void set_trainable(bool t) { trainable_ = t; }
  bool trainable() const { return trainable_; }

  virtual std::unique_ptr<Layer> clone() const = 0;
  virtual void clear_state() {}

  std::vector<ParamRef> params() {
    std::vector<ParamRef> out;
    collect_params("", out);
    return out;
  }

 protected:
  bool trainable_ = true;
};

enum class PadMode { kZero, kReplicate };

class Conv2d : public Layer {
 public:
  Conv2d(int in_c, int out_c, int ksize, int stride, int pad, PadMode pad_mode = PadMode::kZero);

  Tensor forward(const Tensor& x) override;
  Tensor backward(const Tensor& gy) override;
  Tensor infer(const Tensor& x) const override;
  void collect_params(const std::string& prefix, std::vector<ParamRef>& out) override;
  std::unique_ptr<Layer> clone() const override;
  void clear_state() override { cached_.clear(); }

  Tensor& weight() { return w_; }
  Tensor& bias() { return b_; }
  int in_channels() const { return in_c_; }
  int out_channels() const { return out_c_; }

 private:
  Tensor apply(const Tensor& x) const;

  int in_c_, out_c_, k_, stride_, pad_;
  PadMode pad_mode_;
  Tensor w_, b_, gw_, gb_;
  std::vector<Tensor> cached_;
};

class Relu : public Layer {
 public:
  Tensor forward(const Tensor& x) override;
  Tensor backward(const Tensor& gy) override;
  Tensor infer(const Tensor& x) const override;
  std::unique_ptr<Layer> clone() const override { return std::make_unique<Relu>(); }
  void clear_state() override { cached_.clear(); }

 private:
  std::vector<Tensor> cached_;
};

class LeakyRelu : public Layer {
 public:
  explicit LeakyRelu(double slope = 0.2) : slope_(slope) {}
  Tensor forward(const Tensor& x) override;
  Tensor backward(const Tensor& gy) override;
  Tensor infer(const Tensor& x) const override;
  std::unique_ptr<Layer> clone() const override { return std::make_unique<LeakyRelu>(slope_); }
  void clear_state() override { cached_.clear(); }

 private:
  double slope_;
  std::vector<Tensor> cached_;
};

/// 2x2 max pooling with stride 2; spatial dims must be even.
class MaxPool2 : public Layer {
 public:
  Tensor forward(const Tensor& x) override;
  Tensor backward(const Tensor& gy) override;
  Tensor infer(const Tensor& x) const override;
  std::unique_ptr<Layer> clone() const override { return std::make_unique<MaxPool2>(); }
  void clear_state() override { cached_.clear(); }

 private:
  struct Cache {
    std::vector<int64_t> argmax;
    int n, c, h, w;
  };
  Tensor apply(const Tensor& x, Cache* cache) const;
  std::vector<Cache> cached_;
};

/// Per-sample, per-channel normalization with affine parameters. Uses the
/// instance statistics at inference time as well, so outputs are independent
/// of batch composition.
class InstanceNorm : public Layer {
 public:
  explicit InstanceNorm(int channels, double eps = 1e-5);

  Tensor forward(const Tensor& x) override;
  Tensor backward(const Tensor& gy) override;
  Tensor infer(const Tensor& x) const override;
  void collect_params(const std::string& prefix, std::vector<ParamRef>& out) override;
  std::unique_ptr<Layer> clone() const override;
  void clear_state() override { cached_.clear(); }

 private:
  struct Cache {
    Tensor xhat;
    std::vector<double> inv_std;  // per (n, c)
  };
  Tensor apply(const Tensor& x, Cache* cache) const;

  int channels_;
  double eps_;
  Tensor gamma_, beta_, ggamma_, gbeta_;
  std::vector<Cache> cached_;
};

class Linear : public Layer {
 public:
  Linear(int in_features, int out_features);

  Tensor forward(const Tensor& x) override;
  Tensor backward(const Tensor& gy) override;
  Tensor infer(const Tensor& x) const override;
  void collect_params(const std::string& prefix, std::vector<ParamRef>& out) override;
  std::unique_ptr<Layer> clone() const override;
  void clear_state() override { cached_.clear(); }

  Tensor& weight() { return w_; }
  Tensor& bias() { return b_; }

 private:
  Tensor apply(const Tensor& x) const;

  int in_f_, out_f_;
  Tensor w_, b_, gw_, gb_;
  std::vector<Tensor> cached_;
};

class UpsampleNearest2 : public Layer {
 public:
  Tensor forward(const Tensor& x) override;
  Tensor backward(const Tensor& gy) override;
  Tensor infer(const Tensor& x) const override;
  std::unique_ptr<Layer> clone() const override { return std::make_unique<UpsampleNearest2>(); }
  void clear_state() override { shapes_.clear(); }

 private:
  Tensor apply(const Tensor& x) const;
  std::vector<std::array<int, 4>> shapes_;
};

/// Ordered, named chain of layers.
class Sequential : public Layer {
 public:
  Sequential() = default;

  Sequential& add(const std::string& name, std::unique_ptr<Layer> layer);

  Tensor forward(const Tensor& x) override;
  Tensor backward(const Tensor& gy) override;
  Tensor infer(const Tensor& x) const override;
  void collect_params(const std::string& prefix, std::vector<ParamRef>& out) override;
  void set_trainable(bool t) override;
  std::unique_ptr<Layer> clone() const override;
  void clear_state() override;

  size_t size() const { return layers_.size(); }
  Layer* child(size_t i) { return layers_[i].get(); }
  const Layer* child(size_t i) const { return layers_[i].get(); }
  const std::string& child_name(size_t i) const { return names_[i]; }

  /// Deep-copies children [begin, end) into a fresh Sequential.
  std::unique_ptr<Sequential> clone_range(size_t begin, size_t end) const;

  /// Runs children [begin, end) in inference mode.
  Tensor infer_range(const Tensor& x, size_t begin, size_t end) const;

 private:
  std::vector<std::unique_ptr<Layer>> layers_;
  std::vector<std::string> names_;
};

/// y = x + body(x).
class Residual : public Layer {
 public:
  explicit Residual(std::unique_ptr<Layer> body) : body_(std::move(body)) {}

  Tensor forward(const Tensor& x) override;
  Tensor backward(const Tensor& gy) override;
  Tensor infer(const Tensor& x) const override;
  void collect_params(const std::string& prefix, std::vector<ParamRef>& out) override;
  void set_trainable(bool t) override;
  std::unique_ptr<Layer> clone() const override;
  void clear_state() override { body_->clear_state(); }

  Layer* body() { return body_.get(); }

 private:
  std::unique_ptr<Layer> body_;
};

// ---------------------------------------------------------------------------
// Initialization

void init_normal(Tensor& t, double stddev, Rng& rng);
void init_kaiming(Tensor& t, int fan_in, Rng& rng);

// ---------------------------------------------------------------------------
// Losses for classifier training

/// Mean cross-entropy of softmax(logits) against integer labels.
/// logits: (n, classes, 1, 1). When glogits is non-null, writes d loss / d logits.
double softmax_xent(const Tensor& logits, const std::vector<int>& labels, Tensor* glogits);

/// Per-sample argmax over the class dimension.
std::vector<int> argmax_classes(const Tensor& logits);

// ---------------------------------------------------------------------------
// Optimizer

class Adam {
 public:
  Adam(std::vector<ParamRef> params, double lr, double beta1 = 0.5, double beta2 = 0.999,
       double eps = 1e-8);

  void zero_grad();
  void step();
  void set_lr(double lr) { lr_ = lr; }
  double lr() const { return lr_; }

 private:
  std::vector<ParamRef> params_;
  std::vector<Tensor> m_, v_;
  double lr_, beta1_, beta2_, eps_;
  int64_t t_ = 0;
};

// ---------------------------------------------------------------------------
// Parameter utilities

/// FNV-1a digest over parameter bytes in collection order; used to assert
/// that frozen modules stay frozen.
uint64_t params_checksum(const std::vector<ParamRef>& params);

/// Copies every parameter into a named-tensor set (names get the prefix).
NamedTensors snapshot_params(Layer& net, const std::string& prefix = "");

/// Loads parameters by name; every parameter must be present with a matching
/// shape, and the error names the first offender.
void load_params(Layer& net, const NamedTensors& nt, const std::string& prefix = "");

}  // namespace ufem

#endif  // UFEM_NN_HPP_
