#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "xmodal/dataset.hpp"
#include "xmodal/losses.hpp"
#include "xmodal/trainer.hpp"

namespace xmodal {

/// Box over (binary, supcon, clip) loss weights.
struct SearchSpace {
  std::array<double, 3> lower{0.1, 0.2, 0.2};
  std::array<double, 3> upper{1.0, 2.0, 2.0};
  std::size_t trials = 20;

  void validate() const;
  bool contains(const std::array<double, 3>& point) const;
};

enum class Strategy { QuasiRandom, Surrogate };

std::string_view to_string(Strategy s);
std::optional<Strategy> strategy_from_string(std::string_view s);

struct TrialResult {
  std::size_t trial = 0;
  std::array<double, 3> weights{};  // (binary, supcon, clip)
  double objective = 0.0;
  bool failed = false;
  std::string error;
  std::vector<EpochLog> logs;
};

struct TuneResult {
  std::optional<TrialResult> best;  // empty when every trial failed
  std::vector<TrialResult> trials;
};

struct TrialOutcome {
  double objective = 0.0;
  std::vector<EpochLog> logs;
};

/// Objective to maximize; may throw, in which case the trial is marked failed.
using TrialObjective = std::function<TrialOutcome(const std::array<double, 3>& weights)>;

/// Surrogate constants: RBF bandwidth as a fraction of the box diagonal,
/// observation noise, candidate count, and the number of quasirandom
/// points evaluated before the surrogate takes over.
struct SurrogateSettings {
  double bandwidth_fraction = 0.25;
  double noise = 1e-6;
  std::size_t candidates = 1024;
  std::size_t initial_points = 5;
};

/// Scrambled (Cranley-Patterson shifted) Halton point `i` in the box.
std::array<double, 3> halton_point(std::size_t i, const SearchSpace& space,
                                   std::uint64_t seed);

TuneResult tune(const SearchSpace& space, Strategy strategy, std::uint64_t seed,
                const TrialObjective& objective, const SurrogateSettings& settings = {});

/// Trains with each proposed weight triple for `epochs_per_trial` epochs and
/// scores the final epoch's mean bidirectional validation top-1 accuracy.
TuneResult tune_training(const EmbeddingSet& data, const EmbeddingSet& val,
                         const TrainConfig& base, const SearchSpace& space, Strategy strategy,
                         std::uint64_t seed, std::size_t epochs_per_trial = 5);

std::string trial_json(const TrialResult& t);
void write_trial_ledger(const TuneResult& result, const std::filesystem::path& path);

}  // namespace xmodal
