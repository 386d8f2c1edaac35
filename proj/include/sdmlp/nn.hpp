#pragma once

// Fully connected network: dense layers computing f(W x + b), inverted dropout
// between them, backpropagation, normalized (Glorot) initialization and the
// Tikhonov weight penalty.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <type_traits>
#include <variant>
#include <vector>

#include "sdmlp/errors.hpp"
#include "sdmlp/numerics.hpp"

namespace sdmlp {

enum class Activation : std::uint8_t { linear = 0, relu = 1 };
enum class Mode { training, inference };
enum class BiasInit { glorot, zero };

// max(0, x), with the subgradient at 0 taken to be 0 during backward.
inline Matrix relu(Matrix m) {
  for (double& x : m.values()) x = x > 0.0 ? x : 0.0;
  return m;
}

inline double glorot_bound(std::size_t n_in, std::size_t n_out) {
  return std::sqrt(6.0) / std::sqrt(static_cast<double>(n_in + n_out));
}

// (n_out x n_in) matrix, entries uniform in [-bound, bound).
inline Matrix glorot_init(std::size_t n_in, std::size_t n_out, SeededRng& rng) {
  if (n_in == 0 || n_out == 0) {
    throw InvalidArgument("glorot_init: zero dimension (" + std::to_string(n_in) + ", " +
                          std::to_string(n_out) + ")");
  }
  const double bound = glorot_bound(n_in, n_out);
  Vector draws = uniform_sample(rng, -bound, bound, n_in * n_out);
  return Matrix(n_out, n_in, std::vector<double>(draws.values().begin(), draws.values().end()));
}

struct DenseLayer {
  DenseLayer(Matrix weights, Vector bias, Activation act)
      : w(std::move(weights)), b(std::move(bias)), activation(act),
        grad_w(w.rows(), w.cols()), grad_b(w.rows()) {
    if (b.size() != w.rows()) {
      throw InvalidArgument("DenseLayer: bias length " + std::to_string(b.size()) +
                            " for weights " + w.shape());
    }
  }

  std::size_t in_dim() const noexcept { return w.cols(); }
  std::size_t out_dim() const noexcept { return w.rows(); }

  Matrix w;
  Vector b;
  Activation activation;
  Matrix grad_w;
  Vector grad_b;
  std::optional<Matrix> cached_input;
  std::optional<Matrix> cached_preactivation;
};

struct DropoutLayer {
  DropoutLayer(double drop_rate, SeededRng generator) : rate(drop_rate), rng(generator) {
    if (!(rate >= 0.0 && rate < 1.0)) {
      throw InvalidArgument("DropoutLayer: rate must be in [0, 1), got " + std::to_string(rate));
    }
  }

  double rate;
  SeededRng rng;
  // Entries are exactly 0 or 1 / (1 - rate).
  std::optional<Matrix> cached_mask;
};

inline Matrix dense_infer(const DenseLayer& layer, const Matrix& x) {
  if (x.rows() != layer.in_dim()) {
    throw InvalidArgument("dense_forward: input " + x.shape() + " for layer " + layer.w.shape());
  }
  Matrix z = add_bias(matmul(layer.w, x), layer.b);
  return layer.activation == Activation::relu ? relu(std::move(z)) : z;
}

inline Matrix dense_forward(DenseLayer& layer, const Matrix& x) {
  if (x.rows() != layer.in_dim()) {
    throw InvalidArgument("dense_forward: input " + x.shape() + " for layer " + layer.w.shape());
  }
  Matrix z = add_bias(matmul(layer.w, x), layer.b);
  layer.cached_input = x;
  layer.cached_preactivation = z;
  return layer.activation == Activation::relu ? relu(std::move(z)) : z;
}

// Writes grad_w / grad_b (overwriting) and returns the gradient w.r.t. the layer input.
inline Matrix dense_backward(DenseLayer& layer, const Matrix& grad_out) {
  if (!layer.cached_input || !layer.cached_preactivation) {
    throw StateError("dense_backward: no cached training-mode forward pass");
  }
  const Matrix& pre = *layer.cached_preactivation;
  if (grad_out.rows() != pre.rows() || grad_out.cols() != pre.cols()) {
    throw InvalidArgument("dense_backward: gradient " + grad_out.shape() +
                          " does not match output " + pre.shape());
  }
  Matrix delta = grad_out;
  if (layer.activation == Activation::relu) {
    auto d = delta.values();
    auto z = pre.values();
    for (std::size_t i = 0; i < d.size(); ++i) {
      if (!(z[i] > 0.0)) d[i] = 0.0;
    }
  }
  layer.grad_w = matmul_bt(delta, *layer.cached_input);
  layer.grad_b = row_sums(delta);
  return matmul_at(layer.w, delta);
}

inline Matrix dropout_forward(DropoutLayer& layer, const Matrix& x, Mode mode) {
  if (mode == Mode::inference) return x;
  const double keep_scale = 1.0 / (1.0 - layer.rate);
  Matrix mask(x.rows(), x.cols());
  Matrix out = x;
  auto m = mask.values();
  auto o = out.values();
  for (std::size_t i = 0; i < m.size(); ++i) {
    const bool dropped = layer.rate > 0.0 && layer.rng.uniform01() < layer.rate;
    m[i] = dropped ? 0.0 : keep_scale;
    o[i] *= m[i];
  }
  layer.cached_mask = std::move(mask);
  return out;
}

inline Matrix dropout_backward(const DropoutLayer& layer, const Matrix& grad_out) {
  if (!layer.cached_mask) throw StateError("dropout_backward: no cached mask");
  const Matrix& mask = *layer.cached_mask;
  if (grad_out.rows() != mask.rows() || grad_out.cols() != mask.cols()) {
    throw InvalidArgument("dropout_backward: gradient " + grad_out.shape() +
                          " does not match mask " + mask.shape());
  }
  Matrix g = grad_out;
  auto gv = g.values();
  auto mv = mask.values();
  for (std::size_t i = 0; i < gv.size(); ++i) gv[i] *= mv[i];
  return g;
}

// One trainable tensor and its gradient, flattened.
struct ParamView {
  std::span<double> value;
  std::span<const double> grad;
};

using Layer = std::variant<DenseLayer, DropoutLayer>;

class Network {
public:
  Network() = default;
  explicit Network(std::vector<Layer> layers) : layers_(std::move(layers)) { validate(); }

  Mode mode() const noexcept { return mode_; }
  void set_mode(Mode m) noexcept { mode_ = m; }

  std::span<Layer> layers() noexcept { return layers_; }
  std::span<const Layer> layers() const noexcept { return layers_; }

  std::size_t input_dim() const { return first_dense().in_dim(); }
  std::size_t output_dim() const { return last_dense().out_dim(); }

  // Pure inference pass; safe to call concurrently on a shared network.
  Matrix infer(const Matrix& x) const {
    Matrix h = x;
    for (const auto& layer : layers_) {
      if (const auto* d = std::get_if<DenseLayer>(&layer)) h = dense_infer(*d, h);
    }
    return h;
  }

  // Forward in the current mode. Training mode caches what backward() needs;
  // inference mode drops any stale caches.
  Matrix forward(const Matrix& x) {
    if (mode_ == Mode::inference) {
      clear_caches();
      return infer(x);
    }
    Matrix h = x;
    for (auto& layer : layers_) {
      if (auto* d = std::get_if<DenseLayer>(&layer)) {
        h = dense_forward(*d, h);
      } else {
        h = dropout_forward(std::get<DropoutLayer>(layer), h, Mode::training);
      }
    }
    return h;
  }

  // Fills grad_w / grad_b of every dense layer for the loss whose gradient
  // w.r.t. the network output is grad_out. Gradients are overwritten, so
  // repeated calls after one forward give identical results.
  void backward(const Matrix& grad_out) {
    Matrix g = grad_out;
    for (std::size_t i = layers_.size(); i-- > 0;) {
      if (auto* d = std::get_if<DenseLayer>(&layers_[i])) {
        g = dense_backward(*d, g);
      } else {
        g = dropout_backward(std::get<DropoutLayer>(layers_[i]), g);
      }
    }
  }

  void clear_caches() noexcept {
    for (auto& layer : layers_) {
      if (auto* d = std::get_if<DenseLayer>(&layer)) {
        d->cached_input.reset();
        d->cached_preactivation.reset();
      } else {
        std::get<DropoutLayer>(layer).cached_mask.reset();
      }
    }
  }

  // W then b for every dense layer, in layer order.
  std::vector<ParamView> parameters() {
    std::vector<ParamView> out;
    for (auto& layer : layers_) {
      if (auto* d = std::get_if<DenseLayer>(&layer)) {
        out.push_back({d->w.values(), d->grad_w.values()});
        out.push_back({d->b.values(), d->grad_b.values()});
      }
    }
    return out;
  }

  std::size_t parameter_count() const noexcept {
    std::size_t n = 0;
    for (const auto& layer : layers_) {
      if (const auto* d = std::get_if<DenseLayer>(&layer)) n += d->w.size() + d->b.size();
    }
    return n;
  }

private:
  void validate() const {
    std::optional<std::size_t> width;
    bool any_dense = false;
    for (const auto& layer : layers_) {
      if (const auto* d = std::get_if<DenseLayer>(&layer)) {
        if (width && *width != d->in_dim()) {
          throw InvalidArgument("Network: layer expects " + std::to_string(d->in_dim()) +
                                " inputs but previous layer yields " + std::to_string(*width));
        }
        width = d->out_dim();
        any_dense = true;
      }
    }
    if (!any_dense) throw InvalidArgument("Network: no dense layers");
  }

  const DenseLayer& first_dense() const {
    for (const auto& layer : layers_) {
      if (const auto* d = std::get_if<DenseLayer>(&layer)) return *d;
    }
    throw StateError("Network: empty");
  }

  const DenseLayer& last_dense() const {
    for (auto it = layers_.rbegin(); it != layers_.rend(); ++it) {
      if (const auto* d = std::get_if<DenseLayer>(&*it)) return *d;
    }
    throw StateError("Network: empty");
  }

  std::vector<Layer> layers_;
  Mode mode_ = Mode::training;
};

// Stream ids handed to SeededRng::derive for dropout layers of built networks.
inline constexpr std::uint64_t kDropoutStreamBase = 0x100;

// Multilayer perceptron over `dims` (input, hidden..., output): ReLU on
// hidden layers, linear output. W is drawn first, then b, layer by layer,
// from `rng`. When `dropout_rate` is set, a dropout layer follows every
// hidden dense layer; dropout layer k draws from rng.derive(kDropoutStreamBase + k).
inline Network make_mlp(std::span<const std::size_t> dims, SeededRng& rng,
                        std::optional<double> dropout_rate = std::nullopt,
                        BiasInit bias_init = BiasInit::glorot) {
  if (dims.size() < 2) throw InvalidArgument("make_mlp: need at least input and output sizes");
  std::vector<Layer> layers;
  std::uint64_t dropout_index = 0;
  for (std::size_t k = 0; k + 1 < dims.size(); ++k) {
    const std::size_t n_in = dims[k];
    const std::size_t n_out = dims[k + 1];
    Matrix w = glorot_init(n_in, n_out, rng);
    Vector b(n_out);
    if (bias_init == BiasInit::glorot) {
      const double bound = glorot_bound(n_in, n_out);
      b = uniform_sample(rng, -bound, bound, n_out);
    }
    const bool hidden = k + 2 < dims.size();
    layers.emplace_back(std::in_place_type<DenseLayer>, std::move(w), std::move(b),
                        hidden ? Activation::relu : Activation::linear);
    if (hidden && dropout_rate) {
      layers.emplace_back(std::in_place_type<DropoutLayer>, *dropout_rate,
                          rng.derive(kDropoutStreamBase + dropout_index++));
    }
  }
  return Network(std::move(layers));
}

inline constexpr std::size_t kHiddenWidth = 500;

// Dense(6->500, relu), Dropout, Dense(500->500, relu), Dropout, Dense(500->3, linear).
inline Network build_stereo_network(SeededRng& rng, double dropout_rate = 0.5,
                                   BiasInit bias_init = BiasInit::glorot) {
  const std::size_t dims[] = {6, kHiddenWidth, kHiddenWidth, 3};
  return make_mlp(dims, rng, dropout_rate, bias_init);
}

// (lambda / 2) * sum ||W||_F^2 over dense layers (biases excluded). Adds
// lambda * W into each grad_w.
inline double l2_penalty(Network& net, double lambda) {
  if (!(lambda >= 0.0)) {
    throw InvalidArgument("l2_penalty: lambda must be >= 0, got " + std::to_string(lambda));
  }
  if (lambda == 0.0) return 0.0;
  double sum = 0.0;
  for (auto& layer : net.layers()) {
    auto* d = std::get_if<DenseLayer>(&layer);
    if (!d) continue;
    auto w = d->w.values();
    auto g = d->grad_w.values();
    for (std::size_t i = 0; i < w.size(); ++i) {
      sum += w[i] * w[i];
      g[i] += lambda * w[i];
    }
  }
  return 0.5 * lambda * sum;
}

} // namespace sdmlp
