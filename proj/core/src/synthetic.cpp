#include "xmodal/synthetic.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <random>

#include "xmodal/error.hpp"

namespace xmodal {

namespace {

Vector gaussian_vector(std::size_t dim, double stddev, std::mt19937_64& rng) {
  std::normal_distribution<double> dist(0.0, 1.0);
  Vector v(dim);
  for (double& x : v) x = stddev * dist(rng);
  return v;
}

// Random orthogonal matrix via QR of a Gaussian matrix.
Matrix random_rotation(std::size_t dim, std::mt19937_64& rng) {
  std::normal_distribution<double> dist(0.0, 1.0);
  const auto d = static_cast<Eigen::Index>(dim);
  Eigen::MatrixXd g(d, d);
  for (Eigen::Index r = 0; r < d; ++r)
    for (Eigen::Index c = 0; c < d; ++c) g(r, c) = dist(rng);
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
  const Eigen::MatrixXd q = qr.householderQ();
  Matrix out(dim, dim);
  for (Eigen::Index r = 0; r < d; ++r)
    for (Eigen::Index c = 0; c < d; ++c)
      out(static_cast<std::size_t>(r), static_cast<std::size_t>(c)) = q(r, c);
  return out;
}

}  // namespace

EmbeddingSet make_synthetic(const SynthSpec& spec) {
  if (spec.n == 0 || spec.dim == 0) throw ParameterError("synthetic corpus needs n, dim >= 1");
  if (!(spec.abnormal_fraction >= 0.0 && spec.abnormal_fraction <= 1.0)) {
    throw ParameterError("abnormal_fraction must lie in [0, 1]");
  }
  if (!(spec.sigma > 0.0) || !(spec.pair_noise >= 0.0) || !(spec.margin >= 0.0)) {
    throw ParameterError("sigma must be positive; margin and pair_noise nonnegative");
  }
  if (!(spec.modality_gap >= 0.0 && spec.modality_gap <= 1.0)) {
    throw ParameterError("modality_gap must lie in [0, 1]");
  }

  std::mt19937_64 rng(spec.seed);
  const Vector axis = l2_normalize(gaussian_vector(spec.dim, 1.0, rng));
  const Matrix rotation = random_rotation(spec.dim, rng);

  const auto n_abnormal = static_cast<std::size_t>(
      std::llround(spec.abnormal_fraction * static_cast<double>(spec.n)));
  std::vector<Label> labels(spec.n, Label::Normal);
  std::fill(labels.begin(), labels.begin() + static_cast<std::ptrdiff_t>(n_abnormal),
            Label::Abnormal);
  std::shuffle(labels.begin(), labels.end(), rng);

  EmbeddingSet set;
  set.dim = spec.dim;
  set.records.reserve(spec.n);
  const double half = 0.5 * spec.margin * spec.sigma;
  const int width = static_cast<int>(std::to_string(spec.n).size());
  for (std::size_t i = 0; i < spec.n; ++i) {
    const double sign = labels[i] == Label::Abnormal ? 1.0 : -1.0;
    Vector z = gaussian_vector(spec.dim, spec.sigma, rng);
    for (std::size_t k = 0; k < spec.dim; ++k) z[k] += sign * half * axis[k];

    EmbeddingRecord rec;
    char id[64];
    std::snprintf(id, sizeof id, "%s%0*zu", spec.id_prefix.c_str(), width, i);
    rec.study_id = id;
    rec.label = labels[i];
    rec.image = z;
    const Vector image_noise = gaussian_vector(spec.dim, spec.pair_noise, rng);
    for (std::size_t k = 0; k < spec.dim; ++k) rec.image[k] += image_noise[k];

    if (spec.identical_modalities) {
      rec.text = rec.image;
    } else {
      rec.text.assign(spec.dim, 0.0);
      for (std::size_t r = 0; r < spec.dim; ++r) {
        const double rotated = dot(rotation.row(r), z);
        rec.text[r] = (1.0 - spec.modality_gap) * z[r] + spec.modality_gap * rotated;
      }
      const Vector text_noise = gaussian_vector(spec.dim, spec.pair_noise, rng);
      for (std::size_t k = 0; k < spec.dim; ++k) rec.text[k] += text_noise[k];
    }
    set.records.push_back(std::move(rec));
  }
  return set;
}

}  // namespace xmodal
