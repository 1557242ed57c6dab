#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "xmodal/model.hpp"

namespace xmodal {

struct OptimConfig {
  double lr_backbone = 1e-5;  // adapter group
  double lr_head = 1e-4;      // classification head group
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double weight_decay = 0.01;

  void validate() const;
};

struct OptimState {
  std::int64_t step = 0;
  std::vector<Vector> first_moment;
  std::vector<Vector> second_moment;
};

struct ScheduleConfig {
  std::int64_t total_steps = 1;
  double warmup_fraction = 0.1;

  std::int64_t warmup_steps() const;
  void validate() const;
};

/// One AdamW update of a single tensor. `step` is the 1-based step count used
/// for bias correction. Decay is decoupled and applied before the moment term.
void adamw_update(std::span<double> param, std::span<const double> grad, std::span<double> m,
                  std::span<double> v, std::int64_t step, double lr, const OptimConfig& cfg);

/// AdamW step over every tensor of the model: adapters use lr_backbone, the
/// head uses lr_head, both multiplied by lr_scale. Throws GradientError (and
/// leaves params/state untouched) if any gradient is non-finite.
void adamw_step(ModelParams& params, const ModelGrads& grads, OptimState& state,
                const OptimConfig& cfg, double lr_scale);

/// Linear warmup to 1 over warmup_steps, then half-cosine down to 0 at total_steps.
double lr_scale_at(std::int64_t step, const ScheduleConfig& s);

}  // namespace xmodal
