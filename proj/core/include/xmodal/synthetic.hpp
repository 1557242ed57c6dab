#pragma once

#include <cstddef>
#include <cstdint>
#include <string>

#include "xmodal/dataset.hpp"

namespace xmodal {

/// Seeded two-class Gaussian corpus of paired embeddings.
///
/// Each study draws a latent z ~ N(mean_label, sigma^2 I); the class means
/// sit at +/- margin*sigma/2 along a random unit direction. The image vector
/// is z plus N(0, pair_noise^2 I); the text vector is z passed through a
/// random orthogonal "modality gap" rotation blended by modality_gap in
/// [0, 1], plus independent noise. With identical_modalities the text vector
/// is an exact copy of the image vector.
struct SynthSpec {
  std::size_t n = 200;
  std::size_t dim = 16;
  std::uint64_t seed = 0;
  double abnormal_fraction = 0.5;
  double margin = 4.0;
  double sigma = 1.0;
  double pair_noise = 0.5;
  double modality_gap = 0.0;
  bool identical_modalities = false;
  std::string id_prefix = "SYN";
};

EmbeddingSet make_synthetic(const SynthSpec& spec);

}  // namespace xmodal
