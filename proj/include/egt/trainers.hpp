#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "egt/divergence.hpp"
#include "egt/error.hpp"
#include "egt/grid.hpp"

namespace egt {

enum class Method { baseline, conditional, reweighted, minmax, regularized };

std::string_view method_name(Method m);
Method parse_method(std::string_view name);
/// baseline, conditional, reweighted, minmax, regularized.
const std::vector<Method>& all_methods();

/// Histogram generator parameterized by logits.
///
/// Unconditional: mass = softmax(logits) over all cells. Conditional: one
/// logit per cell, normalized within each group and scaled by fixed group
/// proportions, so block a only moves Q_a.
class HistogramModel {
 public:
  HistogramModel(AttributePartition partition, std::vector<double> logits);
  HistogramModel(AttributePartition partition, std::vector<double> logits,
                 std::vector<double> proportions);

  const AttributePartition& partition() const { return partition_; }
  bool is_conditional() const { return !proportions_.empty(); }
  const std::vector<double>& logits() const { return logits_; }
  std::vector<double>& logits() { return logits_; }
  /// Fixed group proportions of a conditional model (empty otherwise).
  const std::vector<double>& proportions() const { return proportions_; }

  GriddedDensity density() const;
  GroupedDistribution grouped() const;

 private:
  AttributePartition partition_;
  std::vector<double> logits_;
  std::vector<double> proportions_;
};

/// Logits of N(mu, sigma^2) at the cell centers plus N(0, jitter^2) noise
/// drawn from `seed`. Conditional when proportions are given.
HistogramModel gaussian_init(const AttributePartition& partition, double mu, double sigma,
                             double jitter, std::uint64_t seed,
                             std::vector<double> proportions = {});

/// Logits equal to log P (cells with zero mass get a large negative logit).
HistogramModel model_from(const GroupedDistribution& p, bool conditional);

/// Exponential moving average of per-key losses, initialized to 0.
class EmaTracker {
 public:
  EmaTracker(std::size_t n, double decay);

  /// value = decay * value + (1 - decay) * loss, starting from 0. Stored as
  /// the bias-corrected mean m and update count t with value = m (1 - decay^t),
  /// so a constant loss l gives exactly l * (1 - std::pow(decay, t)).
  void update(std::size_t k, double loss);
  double value(std::size_t k) const;
  std::vector<double> values() const;
  std::size_t updates(std::size_t k) const { return counts_.at(k); }
  double decay() const { return decay_; }
  /// Largest tracked value; ties go to the lowest index.
  std::size_t argmax() const;

 private:
  std::vector<double> means_;
  std::vector<std::size_t> counts_;
  double decay_;
};

struct TrainConfig {
  Method method = Method::baseline;
  FGenerator f{GeneratorKind::js};
  double learning_rate = 0.1;
  std::size_t steps = 100;
  std::size_t batch_size = 0;  ///< 0 selects exact objectives
  double lambda = 0.0;         ///< regularized only
  std::uint64_t seed = 0;
  double ema_decay = 0.9;
  bool line_search = false;  ///< exact mode: halve the step until the tracked value drops

  void validate() const;
};

struct Objective {
  double value = 0.0;
  double global = 0.0;             ///< D_f(P || Q)
  std::vector<double> per_group;   ///< D_f(P_a || Q_a)
  double delta_egt = 0.0;
};

/// Exact objective value of cfg.method. Throws NumericalError when a
/// divergence is infinite.
Objective exact_objective(const HistogramModel& model, const GroupedDistribution& p,
                          const TrainConfig& cfg);

/// Analytic gradient of exact_objective with respect to the logits. For
/// minmax, the gradient of the largest group divergence (lowest index on
/// ties); for regularized, sign(0) = 0 on equal gaps.
std::vector<double> gradient(const HistogramModel& model, const GroupedDistribution& p,
                             const TrainConfig& cfg);

struct HistoryRow {
  std::size_t step = 0;
  double value = 0.0;
  double global = 0.0;
  std::vector<double> per_group;
  double delta_egt = 0.0;
  std::optional<std::size_t> selected;  ///< minmax group a*
  bool accepted = true;
};

struct TrainResult {
  HistogramModel model;
  std::vector<HistoryRow> history;  ///< exact diagnostics before each step, plus the final state
};

/// Raised when training reaches a non-finite objective; carries the history
/// recorded up to that point.
class TrainingAborted : public NumericalError {
 public:
  TrainingAborted(const std::string& what, std::vector<HistoryRow> history)
      : NumericalError(what), history_(std::move(history)) {}
  const std::vector<HistoryRow>& history() const { return history_; }

 private:
  std::vector<HistoryRow> history_;
};

/// Gradient descent on cfg.method. In stochastic mode (batch_size > 0) the
/// objective is estimated from minibatches of P (one for the global term and
/// one per group), weighting each sampled cell by count / (batch * mass).
/// Minmax selects a* = argmax of an EMA of group losses each step.
/// Conditional training requires a conditional model.
TrainResult train(HistogramModel model, const GroupedDistribution& p, const TrainConfig& cfg);

/// Trains a conditional model whose proportions are pi^P.
TrainResult conditional_train(const std::vector<double>& init_logits,
                              const GroupedDistribution& p, TrainConfig cfg);

// ---------------------------------------------------------------------------
// Toy diffusion: affine denoisers per noise level.

struct GaussianGroup {
  double mean = 0.0;
  double std_dev = 1.0;
  double proportion = 0.5;
};

struct AffineDenoiser {
  double a = 0.0;
  double b = 0.0;
};

struct DiffusionToy {
  std::vector<GaussianGroup> groups;
  std::vector<double> noise_levels;
  std::vector<double> weights;  ///< w(sigma), one per level
  bool conditional = false;     ///< one denoiser per (group, level) instead of per level
  /// coef[g][s]; g ranges over groups when conditional, otherwise g = 0.
  std::vector<std::vector<AffineDenoiser>> coef;

  void validate() const;
  const AffineDenoiser& denoiser(std::size_t group, std::size_t level) const {
    return coef[conditional ? group : 0][level];
  }
};

/// n log-spaced levels from lo to hi, w = 1, all coefficients 0.
DiffusionToy make_diffusion_toy(std::vector<GaussianGroup> groups, std::size_t n_levels,
                                double sigma_lo, double sigma_hi, bool conditional = false);

/// E (a (x0 + sigma n) + b - x0)^2 for x0 ~ N(m, s^2), n ~ N(0, 1).
double expected_denoising_loss(const AffineDenoiser& d, const GaussianGroup& g, double sigma);

/// Exact loss table [group][level] of the toy's current denoisers.
std::vector<std::vector<double>> diffusion_losses(const DiffusionToy& toy);

/// max over levels of the largest pairwise group gap in diffusion_losses.
double diffusion_gap(const DiffusionToy& toy);

struct DiffusionHistoryRow {
  std::size_t step = 0;
  std::vector<std::vector<double>> losses;   ///< minibatch (or exact) l_{a,sigma}
  std::vector<std::size_t> selected;         ///< a*(sigma), minmax only
};

struct DiffusionResult {
  DiffusionToy toy;
  std::vector<DiffusionHistoryRow> history;
};

/// Trains the toy. baseline: sum_a pi_a sum_s w_s l_{a,s}; reweighted: the
/// same with uniform group weights; conditional: baseline loss on per-group
/// denoisers; minmax: EMA per (a, sigma), a*(sigma) = argmax, loss
/// sum_s w_s l_{a*(s), s}. Minibatches are stratified per (group, level) and
/// share their standard normal draws across groups.
DiffusionResult diffusion_train(DiffusionToy toy, const TrainConfig& cfg);

/// diffusion_train with the minmax method.
DiffusionResult diffusion_minmax_train(DiffusionToy toy, TrainConfig cfg);

}  // namespace egt
