#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <random>

#include "xmodal/error.hpp"
#include "xmodal/optim.hpp"

using namespace xmodal;

namespace {

// Textbook Adam (Kingma & Ba, Algorithm 1) on a single scalar trajectory.
struct AdamOracle {
  double m = 0.0, v = 0.0;
  int t = 0;
  double step(double p, double g, double lr, double b1, double b2, double eps) {
    ++t;
    m = b1 * m + (1 - b1) * g;
    v = b2 * v + (1 - b2) * g * g;
    const double mh = m / (1 - std::pow(b1, t));
    const double vh = v / (1 - std::pow(b2, t));
    return p - lr * mh / (std::sqrt(vh) + eps);
  }
};

OptimConfig no_decay() {
  OptimConfig c;
  c.weight_decay = 0.0;
  return c;
}

}  // namespace

TEST(AdamW, ZeroGradNoDecayLeavesParams) {
  Vector p{1.0, -2.0}, g{0.0, 0.0}, m(2, 0.0), v(2, 0.0);
  adamw_update(p, g, m, v, 1, 0.1, no_decay());
  EXPECT_EQ(p, (Vector{1.0, -2.0}));
}

TEST(AdamW, DecoupledDecayOnly) {
  OptimConfig c;
  c.weight_decay = 0.01;
  Vector p{1.0}, g{0.0}, m(1, 0.0), v(1, 0.0);
  adamw_update(p, g, m, v, 1, 0.1, c);
  EXPECT_NEAR(p[0], 0.999, 1e-15);
}

TEST(AdamW, FirstStepAnchor) {
  Vector p{0.0}, g{1.0}, m(1, 0.0), v(1, 0.0);
  adamw_update(p, g, m, v, 1, 1e-3, no_decay());
  EXPECT_NEAR(p[0], -0.0009999999900000003, 1e-18);
  EXPECT_NEAR(p[0], -1e-3 / (1.0 + 1e-8), 1e-18);
}

TEST(AdamW, NoDecayMatchesAdamOracle) {
  std::mt19937_64 rng(31);
  std::normal_distribution<double> n(0.0, 1.0);
  const OptimConfig c = no_decay();
  for (int traj = 0; traj < 20; ++traj) {
    Vector p{n(rng)}, m(1, 0.0), v(1, 0.0);
    AdamOracle o;
    double q = p[0];
    for (int s = 1; s <= 10; ++s) {
      const double g = n(rng);
      adamw_update(p, Vector{g}, m, v, s, 1e-2, c);
      q = o.step(q, g, 1e-2, c.beta1, c.beta2, c.epsilon);
      EXPECT_NEAR(p[0], q, 1e-12);
    }
  }
}

TEST(AdamW, ParamGroupsUseTheirOwnRates) {
  ModelParams p = zeros_like(2);
  ModelGrads g = zeros_like(2);
  for_each_tensor(g, [](std::span<double> t, bool) {
    for (double& x : t) x = 1.0;
  });
  OptimState st;
  OptimConfig c = no_decay();
  c.lr_backbone = 1e-4;
  c.lr_head = 1e-3;
  adamw_step(p, g, st, c, 1.0);
  EXPECT_EQ(st.step, 1);
  EXPECT_NEAR(p.head_weight[0] / p.image_adapter.weight(0, 0), 10.0, 1e-9);
  EXPECT_NEAR(p.head_bias / p.text_adapter.bias[1], 10.0, 1e-9);
}

TEST(AdamW, NonFiniteGradientLeavesStateUntouched) {
  ModelParams p = zeros_like(2);
  ModelGrads g = zeros_like(2);
  OptimState st;
  adamw_step(p, g, st, OptimConfig{}, 1.0);
  const ModelParams before = p;
  const OptimState st_before = st;
  g.text_adapter.weight(1, 0) = std::numeric_limits<double>::quiet_NaN();
  EXPECT_THROW(adamw_step(p, g, st, OptimConfig{}, 1.0), GradientError);
  EXPECT_EQ(p, before);
  EXPECT_EQ(st.step, st_before.step);
  EXPECT_EQ(st.first_moment, st_before.first_moment);
}

TEST(AdamW, ShapeAndScaleChecks) {
  ModelParams p = zeros_like(2);
  OptimState st;
  EXPECT_THROW(adamw_step(p, zeros_like(3), st, OptimConfig{}, 1.0), ShapeError);
  EXPECT_THROW(adamw_step(p, zeros_like(2), st, OptimConfig{}, 1.5), ParameterError);
  EXPECT_EQ(st.step, 0);
  OptimConfig bad;
  bad.lr_head = 0.0;
  EXPECT_THROW(bad.validate(), ParameterError);
}

TEST(Schedule, Anchors) {
  const ScheduleConfig s{100, 0.1};
  EXPECT_EQ(s.warmup_steps(), 10);
  EXPECT_NEAR(lr_scale_at(0, s), 0.0, 1e-12);
  EXPECT_NEAR(lr_scale_at(5, s), 0.5, 1e-12);
  EXPECT_NEAR(lr_scale_at(10, s), 1.0, 1e-12);
  EXPECT_NEAR(lr_scale_at(55, s), 0.5, 1e-12);
  EXPECT_NEAR(lr_scale_at(100, s), 0.0, 1e-12);
}

TEST(Schedule, MonotoneSegments) {
  const ScheduleConfig s{237, 0.13};
  const auto w = s.warmup_steps();
  for (std::int64_t t = 1; t <= w; ++t) EXPECT_GE(lr_scale_at(t, s), lr_scale_at(t - 1, s));
  for (std::int64_t t = w + 1; t <= s.total_steps; ++t) {
    EXPECT_LE(lr_scale_at(t, s), lr_scale_at(t - 1, s));
    EXPECT_GE(lr_scale_at(t, s), 0.0);
  }
}

TEST(Schedule, NoWarmupStartsAtOne) {
  const ScheduleConfig s{10, 0.0};
  EXPECT_EQ(lr_scale_at(0, s), 1.0);
}

TEST(Schedule, Validate) {
  EXPECT_NO_THROW((ScheduleConfig{100, 0.1}.validate()));
  EXPECT_THROW((ScheduleConfig{0, 0.1}.validate()), ParameterError);
  EXPECT_THROW((ScheduleConfig{10, 1.0}.validate()), ParameterError);
  EXPECT_THROW((ScheduleConfig{1, 0.6}.validate()), ParameterError);
}
