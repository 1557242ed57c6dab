#include "xmodal/losses.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "xmodal/error.hpp"

namespace xmodal {

namespace {

void check_tau(double tau) {
  if (!(tau > 0.0) || !std::isfinite(tau)) {
    throw ParameterError("temperature must be positive, got " + std::to_string(tau));
  }
}

// Column-wise log-softmax of m, i.e. the row log-softmax of m^T stored untransposed.
Matrix log_softmax_cols(const Matrix& m) {
  Matrix out(m.rows(), m.cols());
  Vector col(m.rows());
  for (std::size_t j = 0; j < m.cols(); ++j) {
    for (std::size_t i = 0; i < m.rows(); ++i) col[i] = m(i, j);
    const Vector ls = log_softmax(col);
    for (std::size_t i = 0; i < m.rows(); ++i) out(i, j) = ls[i];
  }
  return out;
}

}  // namespace

void LossWeights::validate() const {
  check_tau(tau);
  for (double w : {binary, supcon, clip}) {
    if (!(w >= 0.0) || !std::isfinite(w)) {
      throw ParameterError("loss weights must be finite and nonnegative");
    }
  }
  if (binary == 0.0 && supcon == 0.0 && clip == 0.0) {
    throw ParameterError("at least one loss weight must be positive");
  }
}

ClipLossResult clip_loss(const Matrix& image, const Matrix& text, double tau) {
  check_tau(tau);
  if (image.rows() != text.rows() || image.cols() != text.cols()) {
    throw ShapeError("clip_loss: image is " + std::to_string(image.rows()) + "x" +
                     std::to_string(image.cols()) + ", text is " +
                     std::to_string(text.rows()) + "x" + std::to_string(text.cols()));
  }
  const std::size_t n = image.rows();
  if (n == 0) throw PreconditionError("clip_loss: empty batch");

  Vector image_norms, text_norms;
  const Matrix v = l2_normalize_rows(image, &image_norms);
  const Matrix t = l2_normalize_rows(text, &text_norms);

  Matrix logits = cosine_matrix(v, t);
  for (double& x : logits.data()) x /= tau;

  Matrix row_ls(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    const Vector ls = log_softmax(logits.row(i));
    std::copy(ls.begin(), ls.end(), row_ls.row(i).begin());
  }
  const Matrix col_ls = log_softmax_cols(logits);

  const double inv_2n = 1.0 / (2.0 * static_cast<double>(n));
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) sum += -row_ls(i, i) - col_ls(i, i);

  ClipLossResult out;
  out.loss = sum * inv_2n;

  // d loss / d cos(v_i, t_j)
  Matrix g(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      const double delta = (i == j) ? 1.0 : 0.0;
      g(i, j) = (std::exp(row_ls(i, j)) - delta + std::exp(col_ls(i, j)) - delta) * inv_2n / tau;
    }
  }

  const std::size_t d = image.cols();
  Matrix grad_v_unit(n, d), grad_t_unit(n, d);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      const double gij = g(i, j);
      auto gv = grad_v_unit.row(i);
      auto gt = grad_t_unit.row(j);
      auto tj = t.row(j);
      auto vi = v.row(i);
      for (std::size_t k = 0; k < d; ++k) {
        gv[k] += gij * tj[k];
        gt[k] += gij * vi[k];
      }
    }
  }

  out.grad_image = Matrix(n, d);
  out.grad_text = Matrix(n, d);
  for (std::size_t i = 0; i < n; ++i) {
    normalize_backward(v.row(i), image_norms[i], grad_v_unit.row(i), out.grad_image.row(i));
    normalize_backward(t.row(i), text_norms[i], grad_t_unit.row(i), out.grad_text.row(i));
  }
  return out;
}

SupConLossResult supcon_loss(const Matrix& features, std::span<const int> labels, double tau) {
  check_tau(tau);
  const std::size_t n = features.rows();
  if (labels.size() != n) {
    throw ShapeError("supcon_loss: " + std::to_string(labels.size()) + " labels for " +
                     std::to_string(n) + " rows");
  }
  if (n < 2) throw PreconditionError("supcon_loss needs at least 2 rows");
  for (std::size_t i = 0; i < n; ++i) {
    const double nrm = norm(features.row(i));
    if (!(std::abs(nrm - 1.0) <= 1e-6)) {
      throw PreconditionError("supcon_loss: row " + std::to_string(i) + " has norm " +
                              std::to_string(nrm) + ", expected unit norm");
    }
  }

  const std::size_t d = features.cols();
  const double inv_n = 1.0 / static_cast<double>(n);
  SupConLossResult out;
  out.grad_features = Matrix(n, d);

  Vector logits(n - 1);
  std::vector<std::size_t> others(n - 1);
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t positives = 0;
    for (std::size_t a = 0; a < n; ++a)
      if (a != i && labels[a] == labels[i]) ++positives;
    if (positives == 0) continue;

    std::size_t m = 0;
    for (std::size_t a = 0; a < n; ++a) {
      if (a == i) continue;
      others[m] = a;
      logits[m] = dot(features.row(i), features.row(a)) / tau;
      ++m;
    }
    const Vector ls = log_softmax(logits);
    const double inv_p = 1.0 / static_cast<double>(positives);

    double term = 0.0;
    for (std::size_t m2 = 0; m2 < n - 1; ++m2)
      if (labels[others[m2]] == labels[i]) term += -ls[m2];
    sum += term * inv_p;

    auto gi = out.grad_features.row(i);
    auto fi = features.row(i);
    for (std::size_t m2 = 0; m2 < n - 1; ++m2) {
      const std::size_t a = others[m2];
      const double pos = (labels[a] == labels[i]) ? inv_p : 0.0;
      const double w = (std::exp(ls[m2]) - pos) * inv_n / tau;
      auto ga = out.grad_features.row(a);
      auto fa = features.row(a);
      for (std::size_t k = 0; k < d; ++k) {
        gi[k] += w * fa[k];
        ga[k] += w * fi[k];
      }
    }
  }
  out.loss = sum * inv_n;
  return out;
}

BceLossResult bce_with_logits(std::span<const double> logits, std::span<const int> labels) {
  if (logits.size() != labels.size()) {
    throw ShapeError("bce_with_logits: " + std::to_string(labels.size()) + " labels for " +
                     std::to_string(logits.size()) + " logits");
  }
  const std::size_t n = logits.size();
  BceLossResult out;
  out.grad_logits.assign(n, 0.0);
  if (n == 0) return out;
  for (std::size_t i = 0; i < n; ++i) {
    if (labels[i] != 0 && labels[i] != 1) {
      throw LabelError("bce_with_logits: label " + std::to_string(labels[i]) + " at index " +
                       std::to_string(i) + " is not 0 or 1");
    }
  }
  const double inv_n = 1.0 / static_cast<double>(n);
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double x = logits[i];
    const double y = static_cast<double>(labels[i]);
    // -log s(x) = softplus(-x), -log(1 - s(x)) = softplus(x)
    sum += labels[i] == 1 ? softplus(-x) : softplus(x);
    out.grad_logits[i] = (sigmoid(x) - y) * inv_n;
  }
  out.loss = sum * inv_n;
  return out;
}

LossBreakdown composite_loss(const LossComponents& c, const LossWeights& w) {
  LossBreakdown out;
  out.binary = c.binary;
  out.supcon = c.supcon;
  out.clip = c.clip;
  out.total = w.binary * c.binary + w.supcon * c.supcon + w.clip * c.clip;
  return out;
}

}  // namespace xmodal
