// SPDX-License-Identifier: Apache-2.0
/**
 * @file   nn.hpp
 * @brief  Small dense MLPs with batched forward, reverse-mode gradients and
 *         Adam. Parameters of a network live in one flat buffer so optimizers,
 *         target-network averaging and checkpoints work on plain spans.
 */
#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "pebble/rng.hpp"

namespace pebble::nn {

inline constexpr double kLeakySlope = 0.01;

enum class Activation { kRelu, kLeakyRelu, kTanh, kIdentity };

std::string activation_name(Activation a);
Activation activation_from_name(const std::string& name);

/// Row-major dense matrix; one row per sample.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c, double fill = 0.0)
      : rows(r), cols(c), data(r * c, fill) {}

  std::span<double> row(std::size_t i) { return {data.data() + i * cols, cols}; }
  std::span<const double> row(std::size_t i) const {
    return {data.data() + i * cols, cols};
  }
  double& at(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  double at(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
};

struct LayerShape {
  std::size_t in = 0;
  std::size_t out = 0;
  Activation activation = Activation::kIdentity;
  std::size_t weight_offset = 0;  // in x out block, row-major by input
  std::size_t bias_offset = 0;
};

class Mlp {
 public:
  Mlp() = default;

  // layer_sizes = {input, hidden..., output}; one activation per weight layer.
  // Weights and biases are drawn uniformly from +-1/sqrt(fan_in).
  Mlp(const std::vector<std::size_t>& layer_sizes,
      const std::vector<Activation>& activations, Rng& rng);

  static Mlp zeros(const std::vector<std::size_t>& layer_sizes,
                   const std::vector<Activation>& activations);

  std::size_t input_size() const { return layers_.empty() ? 0 : layers_.front().in; }
  std::size_t output_size() const { return layers_.empty() ? 0 : layers_.back().out; }
  std::size_t parameter_count() const { return params_.size(); }
  const std::vector<LayerShape>& layers() const { return layers_; }
  std::vector<std::size_t> layer_sizes() const;

  std::span<double> parameters() { return params_; }
  std::span<const double> parameters() const { return params_; }

  std::span<double> weights(std::size_t layer);
  std::span<const double> weights(std::size_t layer) const;
  std::span<double> bias(std::size_t layer);
  std::span<const double> bias(std::size_t layer) const;

 private:
  Mlp(const std::vector<std::size_t>& layer_sizes,
      const std::vector<Activation>& activations);

  std::vector<LayerShape> layers_;
  std::vector<double> params_;
};

/// Values kept from a forward pass for the backward pass.
struct ForwardTrace {
  std::vector<Matrix> inputs;  // inputs[l] feeds layer l
  std::vector<Matrix> preactivations;
  Matrix output;
};

std::vector<double> mlp_forward(const Mlp& net, std::span<const double> input);
Matrix mlp_forward(const Mlp& net, const Matrix& input);
ForwardTrace mlp_forward_trace(const Mlp& net, const Matrix& input);

/// Backpropagates dL/d(output). Parameter gradients are accumulated into
/// `param_grads` (skipped when empty). Returns dL/d(input) when
/// `want_input_grad`, else an empty matrix.
Matrix mlp_backward(const Mlp& net, const ForwardTrace& trace,
                    const Matrix& output_grad, std::span<double> param_grads,
                    bool want_input_grad);

struct LossAndGrad {
  double loss = 0.0;
  Matrix output_grad;  // dL/d(outputs), same shape as the outputs
};

using LossFn = std::function<LossAndGrad(const Matrix& outputs)>;

/// Gradient of loss_fn(net(batch)) w.r.t. every parameter of net.
/// Throws NumericError if the loss is not finite.
std::vector<double> mlp_gradients(const Mlp& net, const LossFn& loss_fn,
                                  const Matrix& batch, double* loss_out = nullptr);

struct AdamConfig {
  double lr = 3e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  AdamConfig config;
  std::vector<double> m;
  std::vector<double> v;
  std::int64_t t = 0;

  AdamState() = default;
  AdamState(std::size_t n, AdamConfig cfg) : config(cfg), m(n, 0.0), v(n, 0.0) {}
};

/// Bias-corrected Adam. An all-zero gradient leaves parameters and moments
/// untouched (only t advances). Throws NumericError on non-finite gradients
/// before anything is modified.
void adam_step(std::span<double> params, std::span<const double> grads,
               AdamState& state);

/// Records the sign pattern of every rectifier pre-activation evaluated on
/// this thread while alive. Finite-difference checks compare signatures to
/// detect perturbations that cross a kink.
class KinkProbe {
 public:
  KinkProbe();
  ~KinkProbe();
  KinkProbe(const KinkProbe&) = delete;
  KinkProbe& operator=(const KinkProbe&) = delete;

  std::uint64_t signature() const { return hash_; }
  void reset() { hash_ = 1469598103934665603ULL; }

  void mix(std::uint64_t bits) {
    hash_ ^= bits;
    hash_ *= 1099511628211ULL;
  }

 private:
  KinkProbe* previous_;
  std::uint64_t hash_ = 1469598103934665603ULL;
};

bool all_finite(std::span<const double> values);

}  // namespace pebble::nn
