#pragma once

#include <cmath>
#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "dmjc/error.hpp"
#include "dmjc/matrix.hpp"
#include "dmjc/optimizer.hpp"
#include "dmjc/rng.hpp"

namespace dmjc {

enum class Activation { relu, linear };

/// Encoder architecture: layer_dims runs input -> hidden... -> embedding,
/// with one activation per weight layer (layer_dims.size() - 1 entries).
struct MlpSpec {
  std::vector<std::size_t> layer_dims;
  std::vector<Activation> activations;

  /// ReLU on hidden layers, linear on the embedding layer.
  static MlpSpec standard(std::vector<std::size_t> dims) {
    MlpSpec s;
    s.layer_dims = std::move(dims);
    const std::size_t layers = s.layer_dims.size() < 2 ? 0 : s.layer_dims.size() - 1;
    s.activations.assign(layers, Activation::relu);
    if (layers > 0) s.activations.back() = Activation::linear;
    return s;
  }

  std::size_t input_dim() const { return layer_dims.front(); }
  std::size_t embedding_dim() const { return layer_dims.back(); }

  void validate() const {
    require(layer_dims.size() >= 2, Errc::invalid_argument, "MlpSpec: need at least 2 dims");
    require(activations.size() == layer_dims.size() - 1, Errc::invalid_argument,
            "MlpSpec: one activation per layer required");
    for (auto d : layer_dims) require(d >= 1, Errc::invalid_argument, "MlpSpec: zero-width layer");
  }

  bool operator==(const MlpSpec&) const = default;
};

struct DenseLayer {
  Matrix weight;  // [out x in]
  Matrix bias;    // [1 x out]
  Activation activation = Activation::linear;

  std::size_t in_dim() const { return weight.cols(); }
  std::size_t out_dim() const { return weight.rows(); }

  bool operator==(const DenseLayer&) const = default;
};

/// Encoder layers plus, during pretraining, the mirrored decoder.
struct MlpParams {
  std::vector<DenseLayer> encoder;
  std::vector<DenseLayer> decoder;

  bool has_decoder() const noexcept { return !decoder.empty(); }
  std::size_t input_dim() const { return encoder.front().in_dim(); }
  std::size_t embedding_dim() const { return encoder.back().out_dim(); }

  /// Encoder weights and biases, in layer order (weight, bias, weight, ...).
  std::vector<Matrix*> encoder_parameters() {
    std::vector<Matrix*> out;
    for (auto& l : encoder) {
      out.push_back(&l.weight);
      out.push_back(&l.bias);
    }
    return out;
  }

  std::vector<Matrix*> all_parameters() {
    auto out = encoder_parameters();
    for (auto& l : decoder) {
      out.push_back(&l.weight);
      out.push_back(&l.bias);
    }
    return out;
  }

  bool operator==(const MlpParams&) const = default;
};

namespace detail {

inline DenseLayer glorot_layer(std::size_t in, std::size_t out, Activation act, Rng& rng) {
  DenseLayer l{Matrix(out, in), Matrix(1, out), act};
  const double limit = std::sqrt(6.0 / static_cast<double>(in + out));
  for (double& w : l.weight.values()) w = rng.uniform(-limit, limit);
  return l;
}

/// Forward cache for one stack of layers: inputs[k] feeds layer k,
/// pre[k] is its affine output before the activation.
struct StackCache {
  std::vector<Matrix> inputs;
  std::vector<Matrix> pre;
  Matrix output;
};

inline Matrix affine(const DenseLayer& l, const Matrix& x) {
  Matrix y = matmul_nt(x, l.weight);
  for (std::size_t i = 0; i < y.rows(); ++i) {
    auto r = y.row(i);
    for (std::size_t j = 0; j < r.size(); ++j) r[j] += l.bias(0, j);
  }
  return y;
}

inline Matrix activate(const Matrix& pre, Activation a) {
  if (a == Activation::linear) return pre;
  Matrix out = pre;
  for (double& v : out.values()) v = v > 0.0 ? v : 0.0;
  return out;
}

inline StackCache forward_stack(const std::vector<DenseLayer>& layers, const Matrix& x) {
  StackCache c;
  Matrix h = x;
  for (const auto& l : layers) {
    require(h.cols() == l.in_dim(), Errc::shape_mismatch,
            "mlp forward: input has " + std::to_string(h.cols()) + " columns, layer expects " +
                std::to_string(l.in_dim()));
    c.inputs.push_back(h);
    c.pre.push_back(affine(l, h));
    h = activate(c.pre.back(), l.activation);
  }
  c.output = std::move(h);
  return c;
}

/// Backpropagates d(loss)/d(output) through the stack. Appends weight and
/// bias gradients in layer order to `grads` and returns d(loss)/d(input).
inline Matrix backward_stack(const std::vector<DenseLayer>& layers, const StackCache& c,
                             Matrix upstream, std::vector<Matrix>& grads) {
  std::vector<Matrix> local(2 * layers.size());
  for (std::size_t k = layers.size(); k-- > 0;) {
    const auto& l = layers[k];
    if (l.activation == Activation::relu) {
      auto u = upstream.values();
      auto p = c.pre[k].values();
      // subgradient 0 at exactly 0
      for (std::size_t i = 0; i < u.size(); ++i)
        if (!(p[i] > 0.0)) u[i] = 0.0;
    }
    local[2 * k] = matmul_tn(upstream, c.inputs[k]);
    Matrix db(1, l.out_dim());
    for (std::size_t i = 0; i < upstream.rows(); ++i) {
      auto r = upstream.row(i);
      for (std::size_t j = 0; j < r.size(); ++j) db(0, j) += r[j];
    }
    local[2 * k + 1] = std::move(db);
    upstream = matmul(upstream, l.weight);
  }
  for (auto& g : local) grads.push_back(std::move(g));
  return upstream;
}

}  // namespace detail

/// Glorot-uniform weights, zero biases. The decoder mirrors the encoder:
/// ReLU everywhere except its output layer, which is linear.
inline MlpParams init_mlp(const MlpSpec& spec, Rng& rng, bool with_decoder = true) {
  spec.validate();
  MlpParams p;
  const auto& d = spec.layer_dims;
  for (std::size_t k = 0; k + 1 < d.size(); ++k)
    p.encoder.push_back(detail::glorot_layer(d[k], d[k + 1], spec.activations[k], rng));
  if (with_decoder) {
    for (std::size_t k = d.size() - 1; k > 0; --k) {
      const Activation act = k == 1 ? Activation::linear : Activation::relu;
      p.decoder.push_back(detail::glorot_layer(d[k], d[k - 1], act, rng));
    }
  }
  return p;
}

/// Forward pass through the encoder: [B x D_in] -> [B x D_emb].
inline Matrix encode(const MlpParams& params, const Matrix& batch) {
  require(!params.encoder.empty(), Errc::invalid_argument, "encode: empty encoder");
  return detail::forward_stack(params.encoder, batch).output;
}

/// Encoder forward pass that keeps the activations needed by
/// encoder_backward().
class EncoderPass {
 public:
  EncoderPass(const MlpParams& params, const Matrix& batch)
      : params_(&params), cache_(detail::forward_stack(params.encoder, batch)) {}

  const Matrix& embedding() const noexcept { return cache_.output; }

  /// Gradients of the encoder parameters (encoder_parameters() order) given
  /// d(loss)/d(embedding).
  std::vector<Matrix> backward(const Matrix& d_embedding) const {
    require(d_embedding.same_shape(cache_.output), Errc::shape_mismatch,
            "encoder backward: upstream gradient shape mismatch");
    std::vector<Matrix> grads;
    detail::backward_stack(params_->encoder, cache_, d_embedding, grads);
    return grads;
  }

 private:
  const MlpParams* params_;
  detail::StackCache cache_;
};

struct ReconstructionResult {
  double loss = 0.0;
  std::vector<Matrix> grads;  // all_parameters() order
};

/// Mean squared reconstruction error over batch and features, with exact
/// gradients for encoder and decoder.
inline ReconstructionResult reconstruction_grad(const MlpParams& params, const Matrix& batch) {
  require(params.has_decoder(), Errc::invalid_argument, "reconstruction_grad: no decoder");
  require(batch.rows() > 0, Errc::invalid_argument, "reconstruction_grad: empty batch");
  const auto enc = detail::forward_stack(params.encoder, batch);
  const auto dec = detail::forward_stack(params.decoder, enc.output);
  require(dec.output.same_shape(batch), Errc::shape_mismatch,
          "reconstruction_grad: decoder output does not match input shape");

  const double scale = 1.0 / static_cast<double>(batch.size());
  ReconstructionResult r;
  Matrix upstream(batch.rows(), batch.cols());
  for (std::size_t k = 0; k < batch.size(); ++k) {
    const double diff = dec.output.values()[k] - batch.values()[k];
    r.loss += diff * diff;
    upstream.values()[k] = 2.0 * diff * scale;
  }
  r.loss *= scale;

  std::vector<Matrix> dec_grads;
  Matrix d_emb = detail::backward_stack(params.decoder, dec, std::move(upstream), dec_grads);
  detail::backward_stack(params.encoder, enc, std::move(d_emb), r.grads);
  for (auto& g : dec_grads) r.grads.push_back(std::move(g));
  return r;
}

struct PretrainOptions {
  std::size_t epochs = 100;
  std::size_t batch_size = 256;
  OptimizerConfig optimizer = OptimizerConfig::defaults(OptimizerKind::adam);
  bool keep_decoder = false;
};

struct PretrainResult {
  MlpParams params;
  std::vector<double> loss_history;  // mean minibatch loss per epoch
};

/// End-to-end reconstruction pretraining. Consumes `rng` for the weight init
/// and one shuffle per epoch.
inline PretrainResult pretrain(const MlpSpec& spec, const Matrix& data,
                               const PretrainOptions& opts, Rng& rng) {
  require(opts.epochs >= 1, Errc::invalid_argument, "pretrain: epochs must be >= 1");
  require(opts.batch_size >= 1, Errc::invalid_argument, "pretrain: batch_size must be >= 1");
  require(data.rows() > 0, Errc::invalid_argument, "pretrain: empty dataset");
  spec.validate();
  require(data.cols() == spec.input_dim(), Errc::shape_mismatch,
          "pretrain: data has " + std::to_string(data.cols()) + " features, the network expects " +
              std::to_string(spec.input_dim()));

  PretrainResult out{init_mlp(spec, rng, true), {}};
  Optimizer opt(opts.optimizer);
  const auto params = out.params.all_parameters();
  const std::size_t n = data.rows();

  for (std::size_t epoch = 0; epoch < opts.epochs; ++epoch) {
    const auto order = rng.permutation(n);
    double total = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < n; start += opts.batch_size) {
      const std::size_t stop = std::min(n, start + opts.batch_size);
      const Matrix batch =
          select_rows(data, std::span<const std::size_t>(order.data() + start, stop - start));
      auto r = reconstruction_grad(out.params, batch);
      require(std::isfinite(r.loss), Errc::divergence,
              "pretrain: non-finite reconstruction loss at epoch " + std::to_string(epoch + 1));
      opt.step(params, r.grads);
      total += r.loss;
      ++batches;
    }
    out.loss_history.push_back(total / static_cast<double>(batches));
  }
  if (!opts.keep_decoder) out.params.decoder.clear();
  return out;
}

}  // namespace dmjc
