#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "xmodal/dataset.hpp"
#include "xmodal/losses.hpp"
#include "xmodal/model.hpp"
#include "xmodal/optim.hpp"

namespace xmodal {

struct TrainConfig {
  std::size_t epochs = 20;
  std::size_t batch_size = 128;
  LossWeights weights;
  double dropout_p = 0.1;
  std::uint64_t seed = 0;
  OptimConfig optim;
  double warmup_fraction = 0.1;
  /// When non-empty, one JSON object per epoch is written here.
  std::filesystem::path log_path;

  void validate() const;
};

struct ValidationStats {
  LossBreakdown loss;
  double accuracy = 0.0;   // sign-of-logit classification, 0 maps to normal
  double top1_i2t = 0.0;
  double top1_t2i = 0.0;

  bool operator==(const ValidationStats&) const = default;
};

struct EpochLog {
  std::size_t epoch = 0;  // 1-based
  std::size_t batches = 0;
  LossBreakdown train;    // mean over this epoch's batches
  ValidationStats val;

  bool operator==(const EpochLog&) const = default;
};

struct TrainResult {
  ModelParams params;
  std::vector<EpochLog> logs;
};

struct BatchResult {
  LossBreakdown loss;
  ModelGrads grads;
};

/// Forward, composite loss and (optionally) backward for one batch.
BatchResult evaluate_batch(const ModelParams& params, const Matrix& image, const Matrix& text,
                           std::span<const int> labels, const LossWeights& weights,
                           double dropout_p, Mode mode, std::uint64_t seed, bool with_grads);

/// Number of batches per epoch once a final batch smaller than 2 is dropped.
std::size_t batches_per_epoch(std::size_t n, std::size_t batch_size);

/// Eval-mode loss (batched like training), classification accuracy, and
/// top-1 self-retrieval in both directions over an index of the split itself.
ValidationStats evaluate_split(const ModelParams& params, const EmbeddingSet& data,
                               const LossWeights& weights, std::size_t batch_size);

/// Runs the multi-task optimization loop from identity-initialized adapters.
TrainResult train(const EmbeddingSet& data, const EmbeddingSet& val, const TrainConfig& cfg);

std::string epoch_log_json(const EpochLog& log);

}  // namespace xmodal
