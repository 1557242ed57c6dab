#include "xmodal/optim.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "xmodal/error.hpp"

namespace xmodal {

void OptimConfig::validate() const {
  if (!(lr_backbone > 0.0) || !(lr_head > 0.0)) {
    throw ParameterError("learning rates must be positive");
  }
  if (!(beta1 > 0.0 && beta1 < 1.0) || !(beta2 > 0.0 && beta2 < 1.0)) {
    throw ParameterError("betas must lie in (0, 1)");
  }
  if (!(epsilon > 0.0)) throw ParameterError("epsilon must be positive");
  if (!(weight_decay >= 0.0)) throw ParameterError("weight decay must be nonnegative");
}

std::int64_t ScheduleConfig::warmup_steps() const {
  return std::llround(warmup_fraction * static_cast<double>(total_steps));
}

void ScheduleConfig::validate() const {
  if (total_steps < 1) throw ParameterError("total_steps must be positive");
  if (!(warmup_fraction >= 0.0 && warmup_fraction < 1.0)) {
    throw ParameterError("warmup fraction must lie in [0, 1)");
  }
  if (warmup_steps() >= total_steps) {
    throw ParameterError("warmup steps must be fewer than total steps");
  }
}

void adamw_update(std::span<double> param, std::span<const double> grad, std::span<double> m,
                  std::span<double> v, std::int64_t step, double lr, const OptimConfig& cfg) {
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(step));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(step));
  for (std::size_t i = 0; i < param.size(); ++i) {
    param[i] -= lr * cfg.weight_decay * param[i];
    m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * grad[i];
    v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * grad[i] * grad[i];
    const double m_hat = m[i] / bc1;
    const double v_hat = v[i] / bc2;
    param[i] -= lr * m_hat / (std::sqrt(v_hat) + cfg.epsilon);
  }
}

void adamw_step(ModelParams& params, const ModelGrads& grads, OptimState& state,
                const OptimConfig& cfg, double lr_scale) {
  if (grads.dim != params.dim) {
    throw ShapeError("gradient dimension " + std::to_string(grads.dim) +
                     " does not match parameter dimension " + std::to_string(params.dim));
  }
  if (!(lr_scale >= 0.0 && lr_scale <= 1.0)) {
    throw ParameterError("lr_scale must lie in [0, 1], got " + std::to_string(lr_scale));
  }

  std::vector<std::span<const double>> g;
  for_each_tensor(grads, [&](std::span<const double> t, bool) {
    if (!all_finite(t)) throw GradientError("non-finite gradient");
    g.push_back(t);
  });

  if (state.first_moment.empty()) {
    for_each_tensor(params, [&](std::span<double> t, bool) {
      state.first_moment.emplace_back(t.size(), 0.0);
      state.second_moment.emplace_back(t.size(), 0.0);
    });
  }
  if (state.first_moment.size() != g.size()) throw ShapeError("optimizer state shape mismatch");
  std::size_t idx = 0;
  for_each_tensor(params, [&](std::span<double> t, bool) {
    if (g[idx].size() != t.size() || state.first_moment[idx].size() != t.size() ||
        state.second_moment[idx].size() != t.size()) {
      throw ShapeError("gradient tensor " + std::to_string(idx) + " shape mismatch");
    }
    ++idx;
  });

  ++state.step;
  idx = 0;
  for_each_tensor(params, [&](std::span<double> t, bool is_head) {
    const double lr = (is_head ? cfg.lr_head : cfg.lr_backbone) * lr_scale;
    adamw_update(t, g[idx], state.first_moment[idx], state.second_moment[idx], state.step, lr,
                 cfg);
    ++idx;
  });
}

double lr_scale_at(std::int64_t step, const ScheduleConfig& s) {
  step = std::clamp<std::int64_t>(step, 0, s.total_steps);
  const std::int64_t warmup = s.warmup_steps();
  if (step < warmup) return static_cast<double>(step) / static_cast<double>(warmup);
  const double progress =
      static_cast<double>(step - warmup) / static_cast<double>(s.total_steps - warmup);
  return 0.5 * (1.0 + std::cos(std::numbers::pi * progress));
}

}  // namespace xmodal
