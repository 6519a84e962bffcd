#include <gtest/gtest.h>

#include <cmath>

#include "egt/counterexample.hpp"
#include "egt/error.hpp"
#include "egt/trainers.hpp"
#include "support.hpp"

using namespace egt;

namespace {

const GridSpec kGrid{-2.0, 2.0, 80};

TrainConfig config(Method m, double lr = 8.0, std::size_t steps = 2000) {
  TrainConfig cfg;
  cfg.method = m;
  cfg.learning_rate = lr;
  cfg.steps = steps;
  cfg.lambda = 1.0;
  return cfg;
}

GroupedDistribution imbalanced_warmup() {
  const auto w = warmup_target(kGrid);
  return GroupedDistribution(w.partition(), {0.75, 0.25}, {w.conditional(0), w.conditional(1)});
}

// Central differences of the exact objective in the logits.
std::vector<double> numeric_gradient(const HistogramModel& model, const GroupedDistribution& p,
                                     const TrainConfig& cfg, double h = 1e-6) {
  std::vector<double> g(model.logits().size());
  for (std::size_t j = 0; j < g.size(); ++j) {
    HistogramModel up = model, down = model;
    up.logits()[j] += h;
    down.logits()[j] -= h;
    g[j] = (exact_objective(up, p, cfg).value - exact_objective(down, p, cfg).value) / (2 * h);
  }
  return g;
}

double rel_error(const std::vector<double>& a, const std::vector<double>& b) {
  double diff = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t j = 0; j < a.size(); ++j) {
    diff += (a[j] - b[j]) * (a[j] - b[j]);
    na += a[j] * a[j];
    nb += b[j] * b[j];
  }
  return std::sqrt(diff) / std::max({std::sqrt(na), std::sqrt(nb), 1e-300});
}

double max_abs(const std::vector<double>& v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

}  // namespace

TEST(Method, NamesRoundTrip) {
  for (Method m : all_methods()) EXPECT_EQ(parse_method(method_name(m)), m);
  EXPECT_EQ(parse_method("min-max"), Method::minmax);
  EXPECT_THROW(parse_method("adam"), ValidationError);
}

TEST(Ema, ConstantLossClosedForm) {
  EmaTracker ema(2, 0.9);
  for (int t = 1; t <= 100; ++t) {
    ema.update(0, 1.7);
    EXPECT_EQ(ema.value(0), 1.7 * (1.0 - std::pow(0.9, t))) << "t=" << t;
  }
  EXPECT_EQ(ema.value(1), 0.0);
  EXPECT_EQ(ema.updates(0), 100u);
}

TEST(Ema, MatchesRecursiveDefinition) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(0.0, 3.0);
  EmaTracker ema(1, 0.9);
  double v = 0.0;
  for (int t = 0; t < 200; ++t) {
    const double l = u(rng);
    ema.update(0, l);
    v = 0.9 * v + 0.1 * l;
    EXPECT_NEAR(ema.value(0), v, 1e-13 * std::max(1.0, v));
  }
}

TEST(Ema, ArgmaxTiesGoLow) {
  EmaTracker ema(3, 0.5);
  EXPECT_EQ(ema.argmax(), 0u);
  ema.update(1, 2.0);
  ema.update(2, 2.0);
  EXPECT_EQ(ema.argmax(), 1u);
  EXPECT_THROW(EmaTracker(2, 1.0), ValidationError);
}

TEST(Objective, ZeroAtTarget) {
  const auto p = warmup_target(kGrid);
  for (Method m : all_methods()) {
    const auto model = model_from(p, m == Method::conditional);
    const auto obj = exact_objective(model, p, config(m));
    EXPECT_NEAR(obj.value, 0.0, 1e-12) << method_name(m);
    EXPECT_LE(max_abs(gradient(model, p, config(m))), 1e-8) << method_name(m);
  }
}

TEST(Objective, CombinesGroupDivergences) {
  const auto p = warmup_target(kGrid);
  const FGenerator js(GeneratorKind::js);
  // Targets 0.3 + 0.1 = 0.4 and 0.3 - 0.1 = 0.2.
  const auto ce = build_counterexample(js, p, {0.3, 0.2, 0});
  const auto model = model_from(ce.q, false);
  const auto base = exact_objective(model, p, config(Method::baseline));
  ASSERT_NEAR(base.per_group[0], 0.4, 1e-7);
  ASSERT_NEAR(base.per_group[1], 0.2, 1e-7);
  EXPECT_NEAR(base.value, 0.3, 1e-7);
  EXPECT_NEAR(exact_objective(model, p, config(Method::minmax)).value, 0.4, 1e-7);
  EXPECT_NEAR(exact_objective(model, p, config(Method::regularized)).value, 0.7, 2e-7);
  EXPECT_NEAR(exact_objective(model, p, config(Method::reweighted)).value, base.value, 1e-12);
}

TEST(Gradient, KlFiniteDifference) {
  std::mt19937_64 rng(2);
  GridSpec g{-1.0, 1.0, 32};
  const auto part = AttributePartition::half_line(g);
  const auto p = fixtures::random_grouped(part, {0.4, 0.6}, rng);
  std::normal_distribution<double> z(0.0, 0.5);
  for (Method m : all_methods()) {
    std::vector<double> logits(32);
    for (double& x : logits) x = z(rng);
    const HistogramModel model = m == Method::conditional
                                     ? HistogramModel(part, logits, {0.4, 0.6})
                                     : HistogramModel(part, logits);
    TrainConfig cfg = config(m);
    cfg.f = FGenerator(GeneratorKind::kl);
    cfg.lambda = 0.7;
    EXPECT_LE(rel_error(gradient(model, p, cfg), numeric_gradient(model, p, cfg)), 1e-5)
        << method_name(m);
  }
}

TEST(Gradient, MinmaxTieUsesGroupZero) {
  // Interleaved groups with identical cell sequences give a bitwise tie.
  GridSpec g{-1.0, 1.0, 40};
  std::vector<std::size_t> labels(g.n_cells);
  std::vector<double> w(g.n_cells), logits(g.n_cells);
  for (std::size_t i = 0; i < g.n_cells; ++i) {
    labels[i] = i % 2;
    const double x = g.center(i - i % 2);
    w[i] = std::exp(-x * x);
    logits[i] = -0.5 * x;
  }
  const AttributePartition part(g, labels);
  const auto p = decompose(GriddedDensity::from_weights(g, w), part);
  const HistogramModel model(part, logits);
  const auto obj = exact_objective(model, p, config(Method::minmax));
  ASSERT_EQ(obj.per_group[0], obj.per_group[1]);
  ASSERT_GT(obj.per_group[0], 0.0);
  const auto grad = gradient(model, p, config(Method::minmax));
  const FGenerator js(GeneratorKind::js);
  const double h = 1e-6;
  for (std::size_t i = 0; i < g.n_cells; ++i) {
    HistogramModel up = model, down = model;
    up.logits()[i] += h;
    down.logits()[i] -= h;
    const double fd = (f_divergence(js, p.conditional(0), up.grouped().conditional(0)).value() -
                       f_divergence(js, p.conditional(0), down.grouped().conditional(0)).value()) /
                      (2 * h);
    EXPECT_NEAR(grad[i], fd, 1e-7) << "cell " << i;
    if (labels[i] == 1) EXPECT_EQ(grad[i], 0.0);
  }
}

TEST(Train, ZeroStepsLeavesModel) {
  const auto p = warmup_target(kGrid);
  const auto init = gaussian_init(p.partition(), 0.4, 0.4, 0.05, 3);
  const auto r = train(init, p, config(Method::baseline, 8.0, 0));
  EXPECT_EQ(r.model.logits(), init.logits());
  ASSERT_EQ(r.history.size(), 1u);
  EXPECT_EQ(r.history[0].step, 0u);
}

TEST(Train, HistoryShape) {
  const auto p = warmup_target(kGrid);
  const auto init = gaussian_init(p.partition(), 0.4, 0.4, 0.05, 3);
  const auto r = train(init, p, config(Method::minmax, 8.0, 25));
  ASSERT_EQ(r.history.size(), 26u);
  for (std::size_t s = 0; s < 25; ++s) {
    EXPECT_EQ(r.history[s].step, s);
    EXPECT_TRUE(r.history[s].selected.has_value());
  }
  EXPECT_FALSE(r.history.back().selected.has_value());
}

TEST(Train, MinmaxEqualizesSymmetricTarget) {
  const auto p = warmup_target(kGrid);
  const auto init = gaussian_init(p.partition(), 0.4, 0.4, 0.05, 3);
  const double mm = train(init, p, config(Method::minmax)).history.back().delta_egt;
  const double base = train(init, p, config(Method::baseline)).history.back().delta_egt;
  EXPECT_LE(mm, 1e-3);
  EXPECT_LE(mm, base);
}

TEST(Train, ReweightedHelpsMinorityGroup) {
  const auto p = imbalanced_warmup();
  const auto init = gaussian_init(p.partition(), 0.4, 0.4, 0.05, 4);
  const auto base = train(init, p, config(Method::baseline, 8.0, 300)).history.back();
  const auto rew = train(init, p, config(Method::reweighted, 8.0, 300)).history.back();
  EXPECT_LT(rew.per_group[1], base.per_group[1]);
}

TEST(Train, StochasticModeIsSeeded) {
  const auto p = warmup_target(kGrid);
  const auto init = gaussian_init(p.partition(), 0.4, 0.4, 0.05, 5);
  TrainConfig cfg = config(Method::minmax, 2.0, 50);
  cfg.batch_size = 256;
  cfg.seed = 9;
  const auto a = train(init, p, cfg);
  const auto b = train(init, p, cfg);
  EXPECT_EQ(a.model.logits(), b.model.logits());
  cfg.seed = 10;
  EXPECT_NE(train(init, p, cfg).model.logits(), a.model.logits());
}

TEST(Train, LineSearchNeverIncreasesValue) {
  const auto p = warmup_target(kGrid);
  const auto init = gaussian_init(p.partition(), 0.4, 0.4, 0.05, 6);
  TrainConfig cfg = config(Method::baseline, 500.0, 40);
  cfg.line_search = true;
  const auto r = train(init, p, cfg);
  for (std::size_t s = 1; s < r.history.size(); ++s) {
    EXPECT_LE(r.history[s].value, r.history[s - 1].value + 1e-15);
  }
}

TEST(Conditional, StartsAtTarget) {
  const auto p = warmup_target(kGrid);
  const auto model = model_from(p, true);
  const auto r = conditional_train(model.logits(), p, config(Method::conditional, 8.0, 10));
  EXPECT_EQ(r.model.logits(), model.logits());
}

TEST(Conditional, KeepsProportionsAndDecomposes) {
  const auto p = imbalanced_warmup();
  const auto init = gaussian_init(p.partition(), 0.4, 0.4, 0.05, 7);
  const auto r = conditional_train(init.logits(), p, config(Method::conditional, 8.0, 500));
  const auto q = r.model.grouped();
  EXPECT_TRUE(check_mgo(p, q, 0.0).passed);
  const auto& last = r.history.back();
  EXPECT_NEAR(last.global, 0.75 * last.per_group[0] + 0.25 * last.per_group[1], 1e-10);
}

TEST(Conditional, RequiresConditionalModel) {
  const auto p = warmup_target(kGrid);
  EXPECT_THROW(train(gaussian_init(p.partition(), 0.0, 1.0, 0.0, 0), p,
                     config(Method::conditional)),
               ValidationError);
}

TEST(Diffusion, ExpectedLossClosedForm) {
  const GaussianGroup g{0.5, 0.3, 0.5};
  const AffineDenoiser d{0.6, 0.1};
  const double s = 0.4;
  // ((a-1)m + b)^2 + (a-1)^2 std^2 + a^2 sigma^2
  const double expect = std::pow(-0.4 * 0.5 + 0.1, 2) + 0.16 * 0.09 + 0.36 * 0.16;
  EXPECT_NEAR(expected_denoising_loss(d, g, s), expect, 1e-15);
}

TEST(Diffusion, ToyLevelsAreLogSpaced) {
  const auto toy = make_diffusion_toy({{-0.5, 0.3, 0.5}, {0.5, 0.3, 0.5}}, 8, 0.02, 2.0);
  ASSERT_EQ(toy.noise_levels.size(), 8u);
  EXPECT_NEAR(toy.noise_levels.front(), 0.02, 1e-15);
  EXPECT_NEAR(toy.noise_levels.back(), 2.0, 1e-14);
  const double r = toy.noise_levels[1] / toy.noise_levels[0];
  for (std::size_t s = 1; s < 8; ++s) {
    EXPECT_NEAR(toy.noise_levels[s] / toy.noise_levels[s - 1], r, 1e-12);
  }
}

TEST(Diffusion, IdenticalGroupsMakeMinmaxBaseline) {
  const auto toy = make_diffusion_toy({{0.2, 0.3, 0.5}, {0.2, 0.3, 0.5}}, 8, 0.02, 2.0);
  TrainConfig cfg = config(Method::baseline, 0.05, 500);
  cfg.batch_size = 32;
  cfg.seed = 3;
  const auto base = diffusion_train(toy, cfg);
  const auto mm = diffusion_minmax_train(toy, cfg);
  for (std::size_t s = 0; s < 8; ++s) {
    EXPECT_NEAR(mm.toy.coef[0][s].a, base.toy.coef[0][s].a, 1e-6);
    EXPECT_NEAR(mm.toy.coef[0][s].b, base.toy.coef[0][s].b, 1e-6);
  }
}

TEST(Diffusion, ConditionalReachesBayesOptimum) {
  const auto toy =
      make_diffusion_toy({{-0.5, 0.3, 0.5}, {0.5, 0.3, 0.5}}, 8, 0.02, 2.0, true);
  TrainConfig cfg = config(Method::conditional, 0.05, 3000);
  cfg.batch_size = 64;
  const auto r = diffusion_train(toy, cfg);
  const auto losses = diffusion_losses(r.toy);
  for (std::size_t a = 0; a < 2; ++a) {
    for (std::size_t s = 0; s < 8; ++s) {
      const double sd = toy.groups[a].std_dev, sig = toy.noise_levels[s];
      const double bayes = sd * sd * sig * sig / (sd * sd + sig * sig);
      EXPECT_LE(losses[a][s], 1.05 * bayes) << "group " << a << " level " << s;
      EXPECT_GE(losses[a][s], bayes - 1e-12);
    }
  }
}

TEST(Diffusion, RegularizedIsRejected) {
  const auto toy = make_diffusion_toy({{-0.5, 0.3, 0.5}, {0.5, 0.3, 0.5}}, 4, 0.1, 1.0);
  EXPECT_THROW(diffusion_train(toy, config(Method::regularized, 0.05, 10)), ValidationError);
}
