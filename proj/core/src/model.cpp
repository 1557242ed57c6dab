#include "xmodal/model.hpp"

#include <cmath>
#include <random>
#include <string>

#include "binary_io.hpp"
#include "xmodal/error.hpp"

namespace xmodal {

namespace {

constexpr std::string_view kMagic = "CMXM";
constexpr std::uint16_t kVersion = 1;

Affine identity_affine(std::size_t dim) {
  return {Matrix::identity(dim), Vector(dim, 0.0)};
}

void check_shape(const Matrix& m, std::size_t rows, std::size_t cols, const char* what) {
  if (m.rows() != rows || m.cols() != cols) {
    throw ShapeError(std::string(what) + " is " + std::to_string(m.rows()) + "x" +
                     std::to_string(m.cols()) + ", expected " + std::to_string(rows) + "x" +
                     std::to_string(cols));
  }
}

}  // namespace

ModelParams init_params(std::size_t dim, std::uint64_t seed) {
  if (dim == 0) throw ParameterError("model dimension must be positive");
  ModelParams p;
  p.dim = dim;
  p.image_adapter = identity_affine(dim);
  p.text_adapter = identity_affine(dim);
  const double bound = 1.0 / std::sqrt(static_cast<double>(dim));
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> dist(-bound, bound);
  p.head_weight.resize(dim);
  for (double& w : p.head_weight) w = dist(rng);
  p.head_bias = 0.0;
  return p;
}

ModelParams zeros_like(std::size_t dim) {
  ModelParams p;
  p.dim = dim;
  p.image_adapter = {Matrix(dim, dim), Vector(dim, 0.0)};
  p.text_adapter = {Matrix(dim, dim), Vector(dim, 0.0)};
  p.head_weight.assign(dim, 0.0);
  return p;
}

Vector apply_affine(const Affine& a, std::span<const double> x) {
  if (x.size() != a.weight.cols()) {
    throw ShapeError("adapter expects dimension " + std::to_string(a.weight.cols()) +
                     ", got " + std::to_string(x.size()));
  }
  Vector y(a.weight.rows());
  for (std::size_t j = 0; j < y.size(); ++j) y[j] = dot(a.weight.row(j), x) + a.bias[j];
  return y;
}

Matrix apply_affine(const Affine& a, const Matrix& x) {
  if (x.cols() != a.weight.cols()) {
    throw ShapeError("adapter expects dimension " + std::to_string(a.weight.cols()) +
                     ", got " + std::to_string(x.cols()));
  }
  Matrix y(x.rows(), a.weight.rows());
  for (std::size_t n = 0; n < x.rows(); ++n) {
    auto xn = x.row(n);
    auto yn = y.row(n);
    for (std::size_t j = 0; j < yn.size(); ++j) yn[j] = dot(a.weight.row(j), xn) + a.bias[j];
  }
  return y;
}

ForwardActivations forward(const ModelParams& p, const Matrix& image, const Matrix& text,
                           double dropout_p, Mode mode, std::uint64_t seed) {
  if (!(dropout_p >= 0.0 && dropout_p < 1.0)) {
    throw ParameterError("dropout probability must lie in [0, 1), got " +
                         std::to_string(dropout_p));
  }
  check_shape(image, image.rows(), p.dim, "image batch");
  check_shape(text, image.rows(), p.dim, "text batch");

  const std::size_t n = image.rows();
  const std::size_t d = p.dim;
  ForwardActivations act;
  act.image_in = image;
  act.text_in = text;
  act.image_emb = apply_affine(p.image_adapter, image);
  act.text_emb = apply_affine(p.text_adapter, text);

  act.mask = Matrix(n, d, 1.0);
  act.keep_scale = 1.0;
  if (mode == Mode::Train && dropout_p > 0.0) {
    act.keep_scale = 1.0 / (1.0 - dropout_p);
    std::mt19937_64 rng(seed);
    std::bernoulli_distribution keep(1.0 - dropout_p);
    for (double& m : act.mask.data()) m = keep(rng) ? 1.0 : 0.0;
  }

  act.hidden = Matrix(n, d);
  act.logits.assign(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    auto h = act.hidden.row(i);
    auto v = act.image_emb.row(i);
    auto t = act.text_emb.row(i);
    auto m = act.mask.row(i);
    for (std::size_t k = 0; k < d; ++k) h[k] = m[k] * ((v[k] + t[k]) / 2.0) * act.keep_scale;
    act.logits[i] = dot(p.head_weight, h) + p.head_bias;
  }

  act.image_unit = l2_normalize_rows(act.image_emb, &act.image_norms);
  act.text_unit = l2_normalize_rows(act.text_emb, &act.text_norms);
  Matrix fused(n, d);
  for (std::size_t i = 0; i < n; ++i) {
    auto f = fused.row(i);
    auto v = act.image_unit.row(i);
    auto t = act.text_unit.row(i);
    for (std::size_t k = 0; k < d; ++k) f[k] = (v[k] + t[k]) / 2.0;
  }
  act.features = l2_normalize_rows(fused, &act.fused_norms);
  return act;
}

ModelGrads backward(const ModelParams& p, const ForwardActivations& act,
                    const ActivationGrads& g) {
  const std::size_t n = act.image_emb.rows();
  const std::size_t d = p.dim;
  if (g.logits.size() != n) throw ShapeError("logit gradient length mismatch");
  check_shape(g.features, n, d, "feature gradient");
  check_shape(g.image_emb, n, d, "image embedding gradient");
  check_shape(g.text_emb, n, d, "text embedding gradient");
  check_shape(act.image_in, n, d, "cached image input");

  ModelGrads out = zeros_like(d);
  Matrix grad_v = g.image_emb;
  Matrix grad_t = g.text_emb;

  // head and dropout-masked fusion
  for (std::size_t i = 0; i < n; ++i) {
    const double gl = g.logits[i];
    out.head_bias += gl;
    auto h = act.hidden.row(i);
    auto m = act.mask.row(i);
    auto gv = grad_v.row(i);
    auto gt = grad_t.row(i);
    for (std::size_t k = 0; k < d; ++k) {
      out.head_weight[k] += gl * h[k];
      const double gh = gl * p.head_weight[k] * m[k] * act.keep_scale / 2.0;
      gv[k] += gh;
      gt[k] += gh;
    }
  }

  // normalized fused features -> per-modality unit vectors -> raw embeddings
  Vector grad_fused(d), grad_unit(d);
  for (std::size_t i = 0; i < n; ++i) {
    std::fill(grad_fused.begin(), grad_fused.end(), 0.0);
    normalize_backward(act.features.row(i), act.fused_norms[i], g.features.row(i), grad_fused);
    for (std::size_t k = 0; k < d; ++k) grad_unit[k] = grad_fused[k] / 2.0;
    normalize_backward(act.image_unit.row(i), act.image_norms[i], grad_unit, grad_v.row(i));
    normalize_backward(act.text_unit.row(i), act.text_norms[i], grad_unit, grad_t.row(i));
  }

  // adapters
  for (std::size_t i = 0; i < n; ++i) {
    auto gv = grad_v.row(i);
    auto gt = grad_t.row(i);
    auto xi = act.image_in.row(i);
    auto xt = act.text_in.row(i);
    for (std::size_t j = 0; j < d; ++j) {
      out.image_adapter.bias[j] += gv[j];
      out.text_adapter.bias[j] += gt[j];
      auto wi = out.image_adapter.weight.row(j);
      auto wt = out.text_adapter.weight.row(j);
      for (std::size_t k = 0; k < d; ++k) {
        wi[k] += gv[j] * xi[k];
        wt[k] += gt[j] * xt[k];
      }
    }
  }
  return out;
}

std::string encode_params(const ModelParams& p) {
  detail::ByteWriter w;
  w.magic(kMagic);
  w.u16(kVersion);
  w.u32(static_cast<std::uint32_t>(p.dim));
  for_each_tensor(p, [&](std::span<const double> t, bool) {
    for (double x : t) w.f64(x);
  });
  return w.buffer();
}

ModelParams decode_params(std::string_view bytes) {
  detail::ByteReader r(bytes, "CMXM");
  r.expect_magic(kMagic);
  const std::uint16_t version = r.u16();
  if (version != kVersion) r.fail("unsupported version " + std::to_string(version));
  const std::uint32_t dim = r.u32();
  if (dim == 0) r.fail("dimension must be positive");
  const std::uint64_t expected = 8ULL * (2ULL * (std::uint64_t{dim} * dim + dim) + dim + 1);
  if (r.remaining() != expected) {
    r.fail("payload is " + std::to_string(r.remaining()) + " bytes, expected " +
           std::to_string(expected) + " for dimension " + std::to_string(dim));
  }
  ModelParams p = zeros_like(dim);
  for_each_tensor(p, [&](std::span<double> t, bool) {
    for (double& x : t) {
      x = r.f64();
      if (!std::isfinite(x)) r.fail("non-finite parameter value");
    }
  });
  r.expect_end();
  return p;
}

void save_params(const ModelParams& p, const std::filesystem::path& path) {
  detail::write_file(path, encode_params(p));
}

ModelParams load_params(const std::filesystem::path& path) {
  return decode_params(detail::read_file(path));
}

}  // namespace xmodal
