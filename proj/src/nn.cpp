// SPDX-License-Identifier: Apache-2.0

#include "pebble/nn.hpp"

#include <algorithm>
#include <cmath>

#include "pebble/errors.hpp"
#include "pebble/kernels.hpp"

namespace pebble::nn {
namespace {

thread_local KinkProbe* g_probe = nullptr;

void apply_activation(Activation a, std::span<const double> z,
                      std::span<double> out) {
  switch (a) {
    case Activation::kRelu:
      for (std::size_t i = 0; i < z.size(); ++i) out[i] = z[i] > 0.0 ? z[i] : 0.0;
      break;
    case Activation::kLeakyRelu:
      for (std::size_t i = 0; i < z.size(); ++i)
        out[i] = z[i] > 0.0 ? z[i] : kLeakySlope * z[i];
      break;
    case Activation::kTanh:
      for (std::size_t i = 0; i < z.size(); ++i) out[i] = std::tanh(z[i]);
      break;
    case Activation::kIdentity:
      std::copy(z.begin(), z.end(), out.begin());
      break;
  }
}

// d(out)/dz given the pre-activation and the activation value.
inline double activation_slope(Activation a, double z, double out) {
  switch (a) {
    case Activation::kRelu:
      return z > 0.0 ? 1.0 : 0.0;
    case Activation::kLeakyRelu:
      return z > 0.0 ? 1.0 : kLeakySlope;
    case Activation::kTanh:
      return 1.0 - out * out;
    case Activation::kIdentity:
      return 1.0;
  }
  return 1.0;
}

void record_kinks(Activation a, const Matrix& z) {
  if (g_probe == nullptr) return;
  if (a != Activation::kRelu && a != Activation::kLeakyRelu) return;
  std::uint64_t word = 0;
  int bits = 0;
  for (double v : z.data) {
    word = (word << 1) | (v > 0.0 ? 1u : 0u);
    if (++bits == 64) {
      g_probe->mix(word);
      word = 0;
      bits = 0;
    }
  }
  g_probe->mix(word ^ (static_cast<std::uint64_t>(bits) << 56));
}

void check_input(const Mlp& net, std::size_t cols) {
  if (net.layers().empty()) throw ContractError("mlp_forward: empty network");
  if (cols != net.input_size()) {
    throw ContractError("mlp_forward: input size " + std::to_string(cols) +
                        " does not match first layer " +
                        std::to_string(net.input_size()));
  }
}

}  // namespace

std::string activation_name(Activation a) {
  switch (a) {
    case Activation::kRelu: return "relu";
    case Activation::kLeakyRelu: return "leaky_relu";
    case Activation::kTanh: return "tanh";
    case Activation::kIdentity: return "identity";
  }
  return "identity";
}

Activation activation_from_name(const std::string& name) {
  if (name == "relu") return Activation::kRelu;
  if (name == "leaky_relu") return Activation::kLeakyRelu;
  if (name == "tanh") return Activation::kTanh;
  if (name == "identity") return Activation::kIdentity;
  throw ContractError("unknown activation: " + name);
}

Mlp::Mlp(const std::vector<std::size_t>& layer_sizes,
         const std::vector<Activation>& activations) {
  if (layer_sizes.size() < 2) throw ContractError("Mlp: need at least two layer sizes");
  if (activations.size() != layer_sizes.size() - 1) {
    throw ContractError("Mlp: need one activation per weight layer");
  }
  std::size_t offset = 0;
  for (std::size_t l = 0; l + 1 < layer_sizes.size(); ++l) {
    if (layer_sizes[l] == 0 || layer_sizes[l + 1] == 0) {
      throw ContractError("Mlp: layer sizes must be positive");
    }
    LayerShape shape;
    shape.in = layer_sizes[l];
    shape.out = layer_sizes[l + 1];
    shape.activation = activations[l];
    shape.weight_offset = offset;
    offset += shape.in * shape.out;
    shape.bias_offset = offset;
    offset += shape.out;
    layers_.push_back(shape);
  }
  params_.assign(offset, 0.0);
}

Mlp::Mlp(const std::vector<std::size_t>& layer_sizes,
         const std::vector<Activation>& activations, Rng& rng)
    : Mlp(layer_sizes, activations) {
  for (const LayerShape& layer : layers_) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(layer.in));
    for (std::size_t i = 0; i < layer.in * layer.out; ++i) {
      params_[layer.weight_offset + i] = rng.uniform(-bound, bound);
    }
    for (std::size_t i = 0; i < layer.out; ++i) {
      params_[layer.bias_offset + i] = rng.uniform(-bound, bound);
    }
  }
}

Mlp Mlp::zeros(const std::vector<std::size_t>& layer_sizes,
               const std::vector<Activation>& activations) {
  return Mlp(layer_sizes, activations);
}

std::vector<std::size_t> Mlp::layer_sizes() const {
  std::vector<std::size_t> sizes;
  if (layers_.empty()) return sizes;
  sizes.push_back(layers_.front().in);
  for (const LayerShape& l : layers_) sizes.push_back(l.out);
  return sizes;
}

std::span<double> Mlp::weights(std::size_t layer) {
  const LayerShape& s = layers_.at(layer);
  return {params_.data() + s.weight_offset, s.in * s.out};
}
std::span<const double> Mlp::weights(std::size_t layer) const {
  const LayerShape& s = layers_.at(layer);
  return {params_.data() + s.weight_offset, s.in * s.out};
}
std::span<double> Mlp::bias(std::size_t layer) {
  const LayerShape& s = layers_.at(layer);
  return {params_.data() + s.bias_offset, s.out};
}
std::span<const double> Mlp::bias(std::size_t layer) const {
  const LayerShape& s = layers_.at(layer);
  return {params_.data() + s.bias_offset, s.out};
}

ForwardTrace mlp_forward_trace(const Mlp& net, const Matrix& input) {
  check_input(net, input.cols);
  ForwardTrace trace;
  trace.inputs.reserve(net.layers().size());
  trace.preactivations.reserve(net.layers().size());
  Matrix current = input;
  for (std::size_t l = 0; l < net.layers().size(); ++l) {
    const LayerShape& shape = net.layers()[l];
    const auto w = net.weights(l);
    const auto b = net.bias(l);
    Matrix z(current.rows, shape.out);
    for (std::size_t r = 0; r < current.rows; ++r) {
      std::copy(b.begin(), b.end(), z.row(r).begin());
    }
    kernels::matmul_accumulate(current.data, current.rows, w, z.data);
    record_kinks(shape.activation, z);
    Matrix a(current.rows, shape.out);
    apply_activation(shape.activation, z.data, a.data);
    trace.inputs.push_back(std::move(current));
    trace.preactivations.push_back(std::move(z));
    current = std::move(a);
  }
  trace.output = std::move(current);
  return trace;
}

Matrix mlp_forward(const Mlp& net, const Matrix& input) {
  check_input(net, input.cols);
  Matrix current = input;
  for (std::size_t l = 0; l < net.layers().size(); ++l) {
    const LayerShape& shape = net.layers()[l];
    const auto w = net.weights(l);
    const auto b = net.bias(l);
    Matrix z(current.rows, shape.out);
    for (std::size_t r = 0; r < current.rows; ++r) {
      std::copy(b.begin(), b.end(), z.row(r).begin());
    }
    kernels::matmul_accumulate(current.data, current.rows, w, z.data);
    record_kinks(shape.activation, z);
    apply_activation(shape.activation, z.data, z.data);
    current = std::move(z);
  }
  return current;
}

std::vector<double> mlp_forward(const Mlp& net, std::span<const double> input) {
  Matrix m(1, input.size());
  std::copy(input.begin(), input.end(), m.data.begin());
  return mlp_forward(net, m).data;
}

Matrix mlp_backward(const Mlp& net, const ForwardTrace& trace,
                    const Matrix& output_grad, std::span<double> param_grads,
                    bool want_input_grad) {
  const std::size_t n_layers = net.layers().size();
  if (trace.inputs.size() != n_layers) {
    throw ContractError("mlp_backward: trace does not belong to this network");
  }
  if (output_grad.rows != trace.output.rows || output_grad.cols != net.output_size()) {
    throw ContractError("mlp_backward: output gradient shape mismatch");
  }
  const bool want_params = !param_grads.empty();
  if (want_params && param_grads.size() != net.parameter_count()) {
    throw ContractError("mlp_backward: gradient buffer size mismatch");
  }

  Matrix upstream = output_grad;
  for (std::size_t l = n_layers; l-- > 0;) {
    const LayerShape& shape = net.layers()[l];
    const Matrix& x = trace.inputs[l];
    const Matrix& z = trace.preactivations[l];
    const Matrix& a = (l + 1 == n_layers) ? trace.output : trace.inputs[l + 1];
    const auto w = net.weights(l);

    Matrix dz(upstream.rows, shape.out);
    for (std::size_t i = 0; i < dz.data.size(); ++i) {
      dz.data[i] = upstream.data[i] * activation_slope(shape.activation, z.data[i], a.data[i]);
    }

    if (want_params) {
      auto dw = param_grads.subspan(shape.weight_offset, shape.in * shape.out);
      auto db = param_grads.subspan(shape.bias_offset, shape.out);
      kernels::matmul_tn_accumulate(x.data, dz.data, dz.rows, dw);
      for (std::size_t r = 0; r < dz.rows; ++r) kernels::axpy(1.0, dz.row(r), db);
    }

    if (l == 0 && !want_input_grad) return {};
    Matrix dx(dz.rows, shape.in);
    kernels::matmul_nt(dz.data, dz.rows, w, dx.data);
    upstream = std::move(dx);
  }
  return upstream;
}

std::vector<double> mlp_gradients(const Mlp& net, const LossFn& loss_fn,
                                  const Matrix& batch, double* loss_out) {
  ForwardTrace trace = mlp_forward_trace(net, batch);
  LossAndGrad lg = loss_fn(trace.output);
  if (!std::isfinite(lg.loss)) throw NumericError("mlp_gradients: loss", lg.loss);
  if (loss_out != nullptr) *loss_out = lg.loss;
  std::vector<double> grads(net.parameter_count(), 0.0);
  mlp_backward(net, trace, lg.output_grad, grads, false);
  return grads;
}

void adam_step(std::span<double> params, std::span<const double> grads,
               AdamState& state) {
  if (params.size() != grads.size() || state.m.size() != params.size() ||
      state.v.size() != params.size()) {
    throw ContractError("adam_step: shape mismatch");
  }
  if (state.t < 0) throw ContractError("adam_step: negative step counter");
  bool any_nonzero = false;
  for (std::size_t i = 0; i < grads.size(); ++i) {
    if (!std::isfinite(grads[i])) throw NumericError("adam_step: gradient", grads[i], i);
    any_nonzero = any_nonzero || grads[i] != 0.0;
  }
  state.t += 1;
  if (!any_nonzero) return;

  const AdamConfig& c = state.config;
  const double t = static_cast<double>(state.t);
  const double correction1 = 1.0 - std::pow(c.beta1, t);
  const double correction2 = 1.0 - std::pow(c.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double g = grads[i];
    state.m[i] = c.beta1 * state.m[i] + (1.0 - c.beta1) * g;
    state.v[i] = c.beta2 * state.v[i] + (1.0 - c.beta2) * g * g;
    const double m_hat = state.m[i] / correction1;
    const double v_hat = state.v[i] / correction2;
    params[i] -= c.lr * m_hat / (std::sqrt(v_hat) + c.eps);
  }
}

KinkProbe::KinkProbe() : previous_(g_probe) { g_probe = this; }
KinkProbe::~KinkProbe() { g_probe = previous_; }

bool all_finite(std::span<const double> values) {
  return std::all_of(values.begin(), values.end(),
                     [](double v) { return std::isfinite(v); });
}

}  // namespace pebble::nn
