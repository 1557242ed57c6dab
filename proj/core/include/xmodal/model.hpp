#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>

#include "xmodal/numerics.hpp"

namespace xmodal {

/// y = weight * x + bias, weight stored out x in.
struct Affine {
  Matrix weight;
  Vector bias;

  bool operator==(const Affine&) const = default;
};

/// Trainable portion of the network: one adapter per modality sitting on top
/// of the frozen backbone embeddings, and a single-logit linear head over the
/// fused features.
struct ModelParams {
  std::size_t dim = 0;
  Affine image_adapter;
  Affine text_adapter;
  Vector head_weight;
  double head_bias = 0.0;

  bool operator==(const ModelParams&) const = default;
};

/// Gradients share the parameter layout.
using ModelGrads = ModelParams;

enum class Mode { Train, Eval };

/// Identity adapters, zero biases, head weight ~ U[-1/sqrt(D), 1/sqrt(D)].
ModelParams init_params(std::size_t dim, std::uint64_t seed);

/// Zero-valued parameters with the shapes of a dim-D model.
ModelParams zeros_like(std::size_t dim);

Matrix apply_affine(const Affine& a, const Matrix& x);
Vector apply_affine(const Affine& a, std::span<const double> x);

struct ForwardActivations {
  Matrix image_in;
  Matrix text_in;
  Matrix image_emb;   // adapted image embeddings (V)
  Matrix text_emb;    // adapted text embeddings (T_emb)
  Matrix mask;        // 0/1 dropout mask over the fused features
  double keep_scale = 1.0;
  Matrix hidden;      // mask * (V + T_emb) / 2 * keep_scale
  Vector logits;
  Matrix image_unit;
  Matrix text_unit;
  Vector image_norms;
  Vector text_norms;
  Vector fused_norms;  // norms of (image_unit + text_unit) / 2
  Matrix features;     // row-normalized (image_unit + text_unit) / 2
};

/// Upstream gradients arriving at the forward outputs.
struct ActivationGrads {
  Vector logits;
  Matrix features;
  Matrix image_emb;
  Matrix text_emb;
};

ForwardActivations forward(const ModelParams& p, const Matrix& image, const Matrix& text,
                           double dropout_p, Mode mode, std::uint64_t seed);

ModelGrads backward(const ModelParams& p, const ForwardActivations& act,
                    const ActivationGrads& grads);

/// Visits every parameter tensor in checkpoint order.
template <typename Params, typename Fn>
void for_each_tensor(Params& p, Fn&& fn) {
  fn(p.image_adapter.weight.data(), false);
  fn(std::span(p.image_adapter.bias), false);
  fn(p.text_adapter.weight.data(), false);
  fn(std::span(p.text_adapter.bias), false);
  fn(std::span(p.head_weight), true);
  fn(std::span(&p.head_bias, 1), true);
}

void save_params(const ModelParams& p, const std::filesystem::path& path);
ModelParams load_params(const std::filesystem::path& path);

std::string encode_params(const ModelParams& p);
ModelParams decode_params(std::string_view bytes);

}  // namespace xmodal
