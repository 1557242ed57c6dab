#include "xmodal/tuner.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>
#include <numeric>
#include <random>

#include "json.hpp"
#include "xmodal/error.hpp"
#include "xmodal/log.hpp"

namespace xmodal {

namespace {

using Point = std::array<double, 3>;

double radical_inverse(std::size_t i, unsigned base) {
  double inv = 1.0 / base, f = inv, r = 0.0;
  while (i > 0) {
    r += f * static_cast<double>(i % base);
    i /= base;
    f *= inv;
  }
  return r;
}

double box_diagonal(const SearchSpace& s) {
  double d2 = 0.0;
  for (int k = 0; k < 3; ++k) d2 += (s.upper[k] - s.lower[k]) * (s.upper[k] - s.lower[k]);
  return std::sqrt(d2);
}

bool near(const Point& a, const Point& b) {
  for (int k = 0; k < 3; ++k)
    if (std::abs(a[k] - b[k]) > 1e-9) return false;
  return true;
}

double normal_pdf(double z) { return std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi); }
double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

class Surrogate {
 public:
  Surrogate(const SearchSpace& space, std::uint64_t seed, const SurrogateSettings& settings)
      : space_(space), settings_(settings) {
    bandwidth_ = settings.bandwidth_fraction * box_diagonal(space);
    std::mt19937_64 rng(seed ^ 0xC2B2AE3D27D4EB4FULL);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    candidates_.resize(settings.candidates);
    for (auto& c : candidates_)
      for (int k = 0; k < 3; ++k) c[k] = space.lower[k] + u(rng) * (space.upper[k] - space.lower[k]);
  }

  /// Next point by expected improvement; nullopt if every candidate was already evaluated.
  std::optional<Point> propose(const std::vector<Point>& xs, const std::vector<double>& ys,
                               const std::vector<Point>& evaluated) const {
    const auto n = static_cast<Eigen::Index>(xs.size());
    const double mean = std::accumulate(ys.begin(), ys.end(), 0.0) / static_cast<double>(n);
    double var = 0.0;
    for (double y : ys) var += (y - mean) * (y - mean);
    double sd = std::sqrt(var / static_cast<double>(n));
    if (!(sd > 0.0)) sd = 1.0;

    Eigen::VectorXd y(n);
    for (Eigen::Index i = 0; i < n; ++i) y(i) = (ys[static_cast<std::size_t>(i)] - mean) / sd;
    Eigen::MatrixXd k(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = 0; j < n; ++j)
        k(i, j) = kernel(xs[static_cast<std::size_t>(i)], xs[static_cast<std::size_t>(j)]) +
                  (i == j ? settings_.noise : 0.0);
    const Eigen::LLT<Eigen::MatrixXd> llt(k);
    const Eigen::VectorXd alpha = llt.solve(y);
    const double best = y.maxCoeff();

    std::optional<std::size_t> pick;
    double pick_ei = -1.0, pick_sigma = -1.0;
    Eigen::VectorXd ks(n);
    for (std::size_t c = 0; c < candidates_.size(); ++c) {
      const Point& p = candidates_[c];
      if (std::any_of(evaluated.begin(), evaluated.end(), [&](const Point& e) { return near(e, p); }))
        continue;
      for (Eigen::Index i = 0; i < n; ++i) ks(i) = kernel(p, xs[static_cast<std::size_t>(i)]);
      const double mu = ks.dot(alpha);
      const Eigen::VectorXd v = llt.matrixL().solve(ks);
      const double sigma = std::sqrt(std::max(1.0 - v.squaredNorm(), 0.0));
      double ei;
      if (sigma < 1e-12) {
        ei = std::max(mu - best, 0.0);
      } else {
        const double z = (mu - best) / sigma;
        ei = (mu - best) * normal_cdf(z) + sigma * normal_pdf(z);
      }
      // Strictly greater keeps the lowest candidate index on ties.
      if (ei > pick_ei || (ei == pick_ei && ei <= 0.0 && sigma > pick_sigma)) {
        pick = c;
        pick_ei = ei;
        pick_sigma = sigma;
      }
    }
    if (!pick) return std::nullopt;
    return candidates_[*pick];
  }

 private:
  double kernel(const Point& a, const Point& b) const {
    double d2 = 0.0;
    for (int k = 0; k < 3; ++k) d2 += (a[k] - b[k]) * (a[k] - b[k]);
    return std::exp(-d2 / (2.0 * bandwidth_ * bandwidth_));
  }

  SearchSpace space_;
  SurrogateSettings settings_;
  double bandwidth_ = 1.0;
  std::vector<Point> candidates_;
};

}  // namespace

void SearchSpace::validate() const {
  for (int k = 0; k < 3; ++k) {
    if (!(lower[k] < upper[k])) throw ParameterError("search bounds must satisfy lower < upper");
    if (!(lower[k] >= 0.0)) throw ParameterError("loss-weight bounds must be nonnegative");
  }
  if (trials < 1) throw ParameterError("trials must be at least 1");
}

bool SearchSpace::contains(const std::array<double, 3>& p) const {
  for (int k = 0; k < 3; ++k)
    if (!(p[k] >= lower[k] && p[k] <= upper[k])) return false;
  return true;
}

std::string_view to_string(Strategy s) {
  return s == Strategy::QuasiRandom ? "quasirandom" : "surrogate";
}

std::optional<Strategy> strategy_from_string(std::string_view s) {
  if (s == "quasirandom") return Strategy::QuasiRandom;
  if (s == "surrogate") return Strategy::Surrogate;
  return std::nullopt;
}

std::array<double, 3> halton_point(std::size_t i, const SearchSpace& space, std::uint64_t seed) {
  static constexpr unsigned kBases[3] = {2, 3, 5};
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Point p;
  for (int k = 0; k < 3; ++k) {
    double h = radical_inverse(i + 1, kBases[k]) + u(rng);
    h -= std::floor(h);
    p[k] = space.lower[k] + h * (space.upper[k] - space.lower[k]);
  }
  return p;
}

TuneResult tune(const SearchSpace& space, Strategy strategy, std::uint64_t seed,
                const TrialObjective& objective, const SurrogateSettings& settings) {
  space.validate();
  TuneResult result;
  std::vector<Point> evaluated, xs;
  std::vector<double> ys;
  std::optional<Surrogate> surrogate;
  if (strategy == Strategy::Surrogate) surrogate.emplace(space, seed, settings);

  std::size_t halton_index = 0;
  auto next_halton = [&] {
    for (;;) {
      const Point p = halton_point(halton_index++, space, seed);
      if (std::none_of(evaluated.begin(), evaluated.end(), [&](const Point& e) { return near(e, p); }))
        return p;
    }
  };

  for (std::size_t t = 0; t < space.trials; ++t) {
    Point p;
    if (strategy == Strategy::Surrogate && xs.size() >= std::max<std::size_t>(2, settings.initial_points)) {
      const auto proposal = surrogate->propose(xs, ys, evaluated);
      p = proposal ? *proposal : next_halton();
    } else {
      p = next_halton();
    }

    TrialResult tr;
    tr.trial = t;
    tr.weights = p;
    try {
      TrialOutcome out = objective(p);
      if (!std::isfinite(out.objective)) throw ParameterError("objective is not finite");
      tr.objective = out.objective;
      tr.logs = std::move(out.logs);
      xs.push_back(p);
      ys.push_back(tr.objective);
    } catch (const std::exception& e) {
      tr.failed = true;
      tr.error = e.what();
      log::warn("trial " + std::to_string(t) + " failed: " + tr.error);
    }
    evaluated.push_back(p);
    result.trials.push_back(std::move(tr));
  }

  for (const auto& tr : result.trials) {
    if (tr.failed) continue;
    if (!result.best || tr.objective > result.best->objective) result.best = tr;
  }
  return result;
}

TuneResult tune_training(const EmbeddingSet& data, const EmbeddingSet& val,
                         const TrainConfig& base, const SearchSpace& space, Strategy strategy,
                         std::uint64_t seed, std::size_t epochs_per_trial) {
  if (epochs_per_trial < 1) throw ParameterError("epochs per trial must be at least 1");
  const TrialObjective objective = [&](const Point& w) {
    TrainConfig cfg = base;
    cfg.epochs = epochs_per_trial;
    cfg.log_path.clear();
    cfg.weights.binary = w[0];
    cfg.weights.supcon = w[1];
    cfg.weights.clip = w[2];
    TrainResult r = train(data, val, cfg);
    const EpochLog& last = r.logs.back();
    return TrialOutcome{0.5 * (last.val.top1_i2t + last.val.top1_t2i), std::move(r.logs)};
  };
  return tune(space, strategy, seed, objective);
}

std::string trial_json(const TrialResult& t) {
  nlohmann::ordered_json j;
  j["trial"] = t.trial;
  j["lambda1"] = t.weights[0];
  j["lambda2"] = t.weights[1];
  j["lambda3"] = t.weights[2];
  j["failed"] = t.failed;
  if (t.failed) {
    j["error"] = t.error;
  } else {
    j["objective"] = t.objective;
  }
  j["epochs"] = t.logs.size();
  return j.dump();
}

void write_trial_ledger(const TuneResult& result, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  for (const auto& t : result.trials) out << trial_json(t) << '\n';
}

}  // namespace xmodal
