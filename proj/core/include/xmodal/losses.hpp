#pragma once

#include <span>

#include "xmodal/numerics.hpp"

namespace xmodal {

/// Weights of the composite objective plus the softmax temperature shared by
/// the two contrastive terms.
struct LossWeights {
  double binary = 0.69;
  double supcon = 1.97;
  double clip = 0.46;
  double tau = 0.07;

  /// Throws ParameterError unless tau > 0, every weight >= 0 and one is > 0.
  void validate() const;
};

struct LossComponents {
  double binary = 0.0;
  double supcon = 0.0;
  double clip = 0.0;
};

struct LossBreakdown {
  double binary = 0.0;
  double supcon = 0.0;
  double clip = 0.0;
  double total = 0.0;

  bool operator==(const LossBreakdown&) const = default;
};

struct ClipLossResult {
  double loss = 0.0;
  Matrix grad_image;
  Matrix grad_text;
};

struct SupConLossResult {
  double loss = 0.0;
  Matrix grad_features;
};

struct BceLossResult {
  double loss = 0.0;
  Vector grad_logits;
};

/// Symmetric image<->text InfoNCE over matched diagonal pairs. Rows are
/// L2-normalized internally and gradients are w.r.t. the raw rows.
ClipLossResult clip_loss(const Matrix& image, const Matrix& text, double tau);

/// Supervised contrastive loss treating every other same-label row as a
/// positive. Rows must be unit-norm (within 1e-6). Samples with no positive
/// contribute 0 but still count toward the 1/N average.
SupConLossResult supcon_loss(const Matrix& features, std::span<const int> labels, double tau);

/// Mean binary cross-entropy on logits, labels in {0, 1}.
BceLossResult bce_with_logits(std::span<const double> logits, std::span<const int> labels);

LossBreakdown composite_loss(const LossComponents& components, const LossWeights& w);

}  // namespace xmodal
