#include "egt/trainers.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "egt/sampling.hpp"

namespace egt {

namespace {

constexpr double kZeroLogit = -700.0;

// Softmax of logits[cells] written into out[cells].
void block_softmax(const std::vector<double>& logits, std::span<const std::size_t> cells,
                   std::vector<double>& out) {
  double peak = -std::numeric_limits<double>::infinity();
  for (std::size_t i : cells) peak = std::max(peak, logits[i]);
  double z = 0.0;
  for (std::size_t i : cells) {
    out[i] = std::exp(logits[i] - peak);
    z += out[i];
  }
  for (std::size_t i : cells) out[i] /= z;
}

// One cell of D_f: q f(p/q) with the boundary conventions.
double cell_term(const FGenerator& f, double p, double q) {
  if (q == 0.0) {
    if (p == 0.0) return 0.0;
    return (p * f.slope_at_infinity()).as_double();
  }
  if (p == 0.0) return (q * f.at_zero()).as_double();
  return f.perspective(p, q);
}

double cell_dq(const FGenerator& f, double p, double q) {
  return q == 0.0 ? 0.0 : f.perspective_dq(p, q);
}

double sign(double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); }

// Divergence pieces of a model. Weights of nullptr mean exact evaluation.
struct Parts {
  double global = 0.0;
  std::vector<double> group;
  std::vector<double> g_global;
  std::vector<std::vector<double>> g_group;
};

Parts compute_parts(const HistogramModel& model, const GroupedDistribution& p,
                    const FGenerator& f, const std::vector<double>* w_global,
                    const std::vector<std::vector<double>>* w_group, bool need_grad) {
  const AttributePartition& part = model.partition();
  const std::size_t n = part.grid().n_cells;
  const std::size_t k = part.num_groups();
  const std::vector<double>& th = model.logits();

  // s: within-group softmax; q: model mass.
  std::vector<double> s(n, 0.0), q(n, 0.0);
  for (std::size_t a = 0; a < k; ++a) block_softmax(th, part.cells_of(a), s);
  std::vector<double> pi_q(k, 0.0);
  if (model.is_conditional()) {
    pi_q = model.proportions();
    for (std::size_t i = 0; i < n; ++i) q[i] = pi_q[part.label(i)] * s[i];
  } else {
    std::vector<std::size_t> all(n);
    for (std::size_t i = 0; i < n; ++i) all[i] = i;
    block_softmax(th, all, q);
  }

  std::vector<double> p_mass(n, 0.0), p_cond(n, 0.0);
  for (std::size_t a = 0; a < k; ++a) {
    if (!p.has_conditional(a)) continue;
    const GriddedDensity& pa = p.conditional(a);
    for (std::size_t i : part.cells_of(a)) {
      p_cond[i] = pa[i];
      p_mass[i] = p.proportion(a) * pa[i];
    }
  }

  Parts out;
  out.group.assign(k, 0.0);
  std::vector<double> h(n, 0.0), ha(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const double w = w_global ? (*w_global)[i] : 1.0;
    out.global += w * cell_term(f, p_mass[i], q[i]);
    const double wa = w_group ? (*w_group)[part.label(i)][i] : 1.0;
    out.group[part.label(i)] += wa * cell_term(f, p_cond[i], s[i]);
  }
  if (!need_grad) return out;
  for (std::size_t i = 0; i < n; ++i) {
    h[i] = (w_global ? (*w_global)[i] : 1.0) * cell_dq(f, p_mass[i], q[i]);
    ha[i] = (w_group ? (*w_group)[part.label(i)][i] : 1.0) * cell_dq(f, p_cond[i], s[i]);
  }

  out.g_global.assign(n, 0.0);
  if (model.is_conditional()) {
    for (std::size_t a = 0; a < k; ++a) {
      double mean = 0.0;
      for (std::size_t j : part.cells_of(a)) mean += s[j] * h[j];
      for (std::size_t j : part.cells_of(a)) out.g_global[j] = pi_q[a] * s[j] * (h[j] - mean);
    }
  } else {
    double mean = 0.0;
    for (std::size_t j = 0; j < n; ++j) mean += q[j] * h[j];
    for (std::size_t j = 0; j < n; ++j) out.g_global[j] = q[j] * (h[j] - mean);
  }
  out.g_group.assign(k, std::vector<double>(n, 0.0));
  for (std::size_t a = 0; a < k; ++a) {
    double mean = 0.0;
    for (std::size_t j : part.cells_of(a)) mean += s[j] * ha[j];
    for (std::size_t j : part.cells_of(a)) out.g_group[a][j] = s[j] * (ha[j] - mean);
  }
  return out;
}

std::size_t worst_group(const std::vector<double>& d) {
  std::size_t best = 0;
  for (std::size_t a = 1; a < d.size(); ++a) {
    if (d[a] > d[best]) best = a;
  }
  return best;
}

double combine_value(const Parts& parts, const GroupedDistribution& p, const TrainConfig& cfg) {
  const std::size_t k = parts.group.size();
  switch (cfg.method) {
    case Method::baseline:
    case Method::conditional:
      return parts.global;
    case Method::reweighted: {
      double v = 0.0;
      for (std::size_t a = 0; a < k; ++a) v += p.proportion(a) * parts.group[a];
      return v;
    }
    case Method::minmax:
      return parts.group[worst_group(parts.group)];
    case Method::regularized: {
      double pen = 0.0;
      for (std::size_t a = 0; a < k; ++a) {
        for (std::size_t b = a + 1; b < k; ++b) pen += std::abs(parts.group[a] - parts.group[b]);
      }
      return parts.global + cfg.lambda * 2.0 * pen;
    }
  }
  return 0.0;
}

std::vector<double> combine_gradient(const Parts& parts, const GroupedDistribution& p,
                                     const TrainConfig& cfg, std::size_t selected) {
  const std::size_t k = parts.group.size();
  std::vector<double> g;
  switch (cfg.method) {
    case Method::baseline:
    case Method::conditional:
      return parts.g_global;
    case Method::reweighted:
      g.assign(parts.g_global.size(), 0.0);
      for (std::size_t a = 0; a < k; ++a) {
        for (std::size_t j = 0; j < g.size(); ++j) g[j] += p.proportion(a) * parts.g_group[a][j];
      }
      return g;
    case Method::minmax:
      return parts.g_group[selected];
    case Method::regularized:
      g = parts.g_global;
      for (std::size_t a = 0; a < k; ++a) {
        for (std::size_t b = a + 1; b < k; ++b) {
          const double c = 2.0 * cfg.lambda * sign(parts.group[a] - parts.group[b]);
          if (c == 0.0) continue;
          for (std::size_t j = 0; j < g.size(); ++j) {
            g[j] += c * (parts.g_group[a][j] - parts.g_group[b][j]);
          }
        }
      }
      return g;
  }
  return g;
}

void require_compatible(const HistogramModel& model, const GroupedDistribution& p) {
  if (!(model.partition() == p.partition())) {
    throw ValidationError("trainer: model and target partitions differ");
  }
  for (std::size_t a = 0; a < p.num_groups(); ++a) {
    if (!p.has_conditional(a)) throw ValidationError("trainer: target has an empty group");
  }
}

bool all_finite(const Parts& parts) {
  if (!std::isfinite(parts.global)) return false;
  return std::all_of(parts.group.begin(), parts.group.end(),
                     [](double d) { return std::isfinite(d); });
}

Objective to_objective(const Parts& parts, const GroupedDistribution& p, const TrainConfig& cfg) {
  Objective o;
  o.value = combine_value(parts, p, cfg);
  o.global = parts.global;
  o.per_group = parts.group;
  const auto [lo, hi] = std::minmax_element(parts.group.begin(), parts.group.end());
  o.delta_egt = *hi - *lo;
  return o;
}

HistoryRow to_row(std::size_t step, const Objective& o) {
  HistoryRow r;
  r.step = step;
  r.value = o.value;
  r.global = o.global;
  r.per_group = o.per_group;
  r.delta_egt = o.delta_egt;
  return r;
}

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t step, std::uint64_t stream) {
  std::uint64_t x = seed ^ (step * 0x9E3779B97F4A7C15ull) ^ (stream * 0xC2B2AE3D27D4EB4Full);
  x ^= x >> 33;
  x *= 0xFF51AFD7ED558CCDull;
  x ^= x >> 33;
  return x;
}

// count_i / (batch * mass_i) on cells with mass; cells without mass are exact.
std::vector<double> importance_weights(const GriddedDensity& d, std::size_t batch,
                                       std::uint64_t seed) {
  const SampleBatch b = sample(d, batch, seed);
  std::vector<double> w(d.size(), 0.0);
  for (double x : b.values) w[d.grid().cell_of(x)] += 1.0;
  for (std::size_t i = 0; i < d.size(); ++i) {
    w[i] = d[i] > 0.0 ? w[i] / (static_cast<double>(batch) * d[i]) : 1.0;
  }
  return w;
}

}  // namespace

std::string_view method_name(Method m) {
  switch (m) {
    case Method::baseline:
      return "baseline";
    case Method::conditional:
      return "conditional";
    case Method::reweighted:
      return "reweighted";
    case Method::minmax:
      return "minmax";
    case Method::regularized:
      return "regularized";
  }
  return "";
}

Method parse_method(std::string_view name) {
  for (Method m : all_methods()) {
    if (method_name(m) == name) return m;
  }
  if (name == "min-max") return Method::minmax;
  throw ValidationError("unknown method '" + std::string(name) + "'");
}

const std::vector<Method>& all_methods() {
  static const std::vector<Method> methods{Method::baseline, Method::conditional,
                                           Method::reweighted, Method::minmax,
                                           Method::regularized};
  return methods;
}

HistogramModel::HistogramModel(AttributePartition partition, std::vector<double> logits)
    : partition_(std::move(partition)), logits_(std::move(logits)) {
  if (logits_.size() != partition_.grid().n_cells) {
    throw ValidationError("histogram model: one logit per cell required");
  }
  for (double t : logits_) {
    if (!std::isfinite(t)) throw ValidationError("histogram model: logits must be finite");
  }
}

HistogramModel::HistogramModel(AttributePartition partition, std::vector<double> logits,
                               std::vector<double> proportions)
    : HistogramModel(std::move(partition), std::move(logits)) {
  if (proportions.size() != partition_.num_groups()) {
    throw ValidationError("histogram model: one proportion per group required");
  }
  double sum = 0.0;
  for (std::size_t a = 0; a < proportions.size(); ++a) {
    if (!(proportions[a] > 0.0)) {
      throw ValidationError("histogram model: conditional proportions must be > 0");
    }
    if (partition_.cells_of(a).empty()) throw ValidationError("histogram model: empty group");
    sum += proportions[a];
  }
  if (std::abs(sum - 1.0) > 1e-12) {
    throw ValidationError("histogram model: proportions must sum to 1");
  }
  proportions_ = std::move(proportions);
}

GriddedDensity HistogramModel::density() const { return recombine(grouped()); }

GroupedDistribution HistogramModel::grouped() const {
  const std::size_t n = partition_.grid().n_cells;
  const std::size_t k = partition_.num_groups();
  if (!is_conditional()) {
    std::vector<double> q(n);
    std::vector<std::size_t> all(n);
    for (std::size_t i = 0; i < n; ++i) all[i] = i;
    block_softmax(logits_, all, q);
    return decompose(GriddedDensity::from_weights(partition_.grid(), std::move(q)), partition_);
  }
  std::vector<std::optional<GriddedDensity>> conds;
  for (std::size_t a = 0; a < k; ++a) {
    std::vector<double> s(n, 0.0);
    block_softmax(logits_, partition_.cells_of(a), s);
    conds.emplace_back(GriddedDensity::from_weights(partition_.grid(), std::move(s)));
  }
  return GroupedDistribution(partition_, proportions_, std::move(conds));
}

HistogramModel gaussian_init(const AttributePartition& partition, double mu, double sigma,
                             double jitter, std::uint64_t seed, std::vector<double> proportions) {
  if (!(sigma > 0.0)) throw ValidationError("gaussian_init: sigma must be > 0");
  if (!(jitter >= 0.0)) throw ValidationError("gaussian_init: jitter must be >= 0");
  const GridSpec& g = partition.grid();
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, 1.0);
  std::vector<double> logits(g.n_cells);
  for (std::size_t i = 0; i < g.n_cells; ++i) {
    const double d = (g.center(i) - mu) / sigma;
    logits[i] = -0.5 * d * d + jitter * noise(rng);
  }
  if (proportions.empty()) return HistogramModel(partition, std::move(logits));
  return HistogramModel(partition, std::move(logits), std::move(proportions));
}

HistogramModel model_from(const GroupedDistribution& p, bool conditional) {
  const AttributePartition& part = p.partition();
  const GriddedDensity mix = recombine(p);
  std::vector<double> logits(mix.size());
  for (std::size_t i = 0; i < mix.size(); ++i) {
    logits[i] = mix[i] > 0.0 ? std::log(mix[i]) : kZeroLogit;
  }
  if (!conditional) return HistogramModel(part, std::move(logits));
  return HistogramModel(part, std::move(logits),
                        std::vector<double>(p.proportions().begin(), p.proportions().end()));
}

EmaTracker::EmaTracker(std::size_t n, double decay)
    : means_(n, 0.0), counts_(n, 0), decay_(decay) {
  if (n == 0) throw ValidationError("ema: need at least one key");
  if (!(decay > 0.0 && decay < 1.0)) throw ValidationError("ema: decay must lie in (0, 1)");
}

void EmaTracker::update(std::size_t k, double loss) {
  double& m = means_.at(k);
  const std::size_t t = ++counts_.at(k);
  const double weight = 1.0 - std::pow(decay_, static_cast<double>(t));
  m += (loss - m) * ((1.0 - decay_) / weight);
}

double EmaTracker::value(std::size_t k) const {
  return means_.at(k) * (1.0 - std::pow(decay_, static_cast<double>(counts_.at(k))));
}

std::vector<double> EmaTracker::values() const {
  std::vector<double> out(means_.size());
  for (std::size_t k = 0; k < out.size(); ++k) out[k] = value(k);
  return out;
}

std::size_t EmaTracker::argmax() const { return worst_group(values()); }

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) {
    throw ValidationError("train config: learning_rate must be > 0");
  }
  if (!(lambda >= 0.0)) throw ValidationError("train config: lambda must be >= 0");
  if (!(ema_decay > 0.0 && ema_decay < 1.0)) {
    throw ValidationError("train config: ema_decay must lie in (0, 1)");
  }
}

Objective exact_objective(const HistogramModel& model, const GroupedDistribution& p,
                          const TrainConfig& cfg) {
  require_compatible(model, p);
  const Parts parts = compute_parts(model, p, cfg.f, nullptr, nullptr, false);
  if (!all_finite(parts)) throw NumericalError("objective: infinite divergence");
  return to_objective(parts, p, cfg);
}

std::vector<double> gradient(const HistogramModel& model, const GroupedDistribution& p,
                             const TrainConfig& cfg) {
  require_compatible(model, p);
  const Parts parts = compute_parts(model, p, cfg.f, nullptr, nullptr, true);
  if (!all_finite(parts)) throw NumericalError("gradient: infinite divergence");
  return combine_gradient(parts, p, cfg, worst_group(parts.group));
}

TrainResult train(HistogramModel model, const GroupedDistribution& p, const TrainConfig& cfg) {
  cfg.validate();
  require_compatible(model, p);
  if (cfg.method == Method::conditional && !model.is_conditional()) {
    throw ValidationError("train: conditional training needs a conditional model");
  }
  const std::size_t k = p.num_groups();
  const GriddedDensity p_mix = recombine(p);
  EmaTracker ema(k, cfg.ema_decay);
  std::vector<HistoryRow> history;
  auto exact = [&](const HistogramModel& m) {
    return compute_parts(m, p, cfg.f, nullptr, nullptr, false);
  };
  // Value the line search must not increase.
  auto tracked = [&](const Parts& parts) {
    return cfg.method == Method::minmax ? parts.group[worst_group(parts.group)]
                                        : combine_value(parts, p, cfg);
  };

  for (std::size_t step = 0; step < cfg.steps; ++step) {
    const Parts now = exact(model);
    if (!all_finite(now)) {
      throw TrainingAborted("train: non-finite objective at step " + std::to_string(step),
                            std::move(history));
    }
    HistoryRow row = to_row(step, to_objective(now, p, cfg));

    Parts est;
    if (cfg.batch_size == 0) {
      est = compute_parts(model, p, cfg.f, nullptr, nullptr, true);
    } else {
      const std::vector<double> wg = importance_weights(p_mix, cfg.batch_size,
                                                        mix_seed(cfg.seed, step, 0));
      std::vector<std::vector<double>> wa;
      for (std::size_t a = 0; a < k; ++a) {
        wa.push_back(importance_weights(p.conditional(a), cfg.batch_size,
                                        mix_seed(cfg.seed, step, a + 1)));
      }
      est = compute_parts(model, p, cfg.f, &wg, &wa, true);
    }

    std::size_t selected = 0;
    if (cfg.method == Method::minmax) {
      for (std::size_t a = 0; a < k; ++a) ema.update(a, est.group[a]);
      selected = ema.argmax();
      row.selected = selected;
    }
    const std::vector<double> g = combine_gradient(est, p, cfg, selected);
    for (double x : g) {
      if (!std::isfinite(x)) {
        history.push_back(row);
        throw TrainingAborted("train: non-finite gradient at step " + std::to_string(step),
                              std::move(history));
      }
    }

    double lr = cfg.learning_rate;
    const bool search = cfg.line_search && cfg.batch_size == 0;
    const double before = tracked(now);
    row.accepted = false;
    for (int attempt = 0; attempt < (search ? 40 : 1); ++attempt, lr *= 0.5) {
      HistogramModel trial = model;
      for (std::size_t j = 0; j < g.size(); ++j) trial.logits()[j] -= lr * g[j];
      if (search) {
        const Parts after = exact(trial);
        if (!all_finite(after) || tracked(after) > before) continue;
      }
      model = std::move(trial);
      row.accepted = true;
      break;
    }
    history.push_back(std::move(row));
  }
  const Parts last = exact(model);
  if (!all_finite(last)) {
    throw TrainingAborted("train: non-finite objective after training", std::move(history));
  }
  history.push_back(to_row(cfg.steps, to_objective(last, p, cfg)));
  return {std::move(model), std::move(history)};
}

TrainResult conditional_train(const std::vector<double>& init_logits,
                              const GroupedDistribution& p, TrainConfig cfg) {
  cfg.method = Method::conditional;
  HistogramModel model(p.partition(), init_logits,
                       std::vector<double>(p.proportions().begin(), p.proportions().end()));
  return train(std::move(model), p, cfg);
}

// ---------------------------------------------------------------------------

void DiffusionToy::validate() const {
  if (groups.size() < 2) throw ValidationError("diffusion toy: need at least two groups");
  if (noise_levels.size() < 2) throw ValidationError("diffusion toy: need at least two levels");
  if (weights.size() != noise_levels.size()) {
    throw ValidationError("diffusion toy: one weight per noise level required");
  }
  double sum = 0.0;
  for (const GaussianGroup& g : groups) {
    if (!(g.std_dev > 0.0) || !(g.proportion >= 0.0)) {
      throw ValidationError("diffusion toy: group std must be > 0 and proportion >= 0");
    }
    sum += g.proportion;
  }
  if (std::abs(sum - 1.0) > 1e-12) throw ValidationError("diffusion toy: proportions sum to 1");
  for (std::size_t s = 0; s < noise_levels.size(); ++s) {
    if (!(noise_levels[s] > 0.0)) throw ValidationError("diffusion toy: sigma must be > 0");
    if (!(weights[s] >= 0.0) || !std::isfinite(weights[s])) {
      throw ValidationError("diffusion toy: weights must be finite and >= 0");
    }
  }
  const std::size_t sets = conditional ? groups.size() : 1;
  if (coef.size() != sets) throw ValidationError("diffusion toy: wrong coefficient set count");
  for (const auto& c : coef) {
    if (c.size() != noise_levels.size()) {
      throw ValidationError("diffusion toy: one denoiser per noise level required");
    }
  }
}

DiffusionToy make_diffusion_toy(std::vector<GaussianGroup> groups, std::size_t n_levels,
                                double sigma_lo, double sigma_hi, bool conditional) {
  if (n_levels < 2 || !(sigma_lo > 0.0) || !(sigma_lo < sigma_hi)) {
    throw ValidationError("diffusion toy: need n >= 2 and 0 < sigma_lo < sigma_hi");
  }
  DiffusionToy toy;
  toy.groups = std::move(groups);
  toy.conditional = conditional;
  const double step = std::log(sigma_hi / sigma_lo) / static_cast<double>(n_levels - 1);
  for (std::size_t s = 0; s < n_levels; ++s) {
    toy.noise_levels.push_back(sigma_lo * std::exp(step * static_cast<double>(s)));
  }
  toy.weights.assign(n_levels, 1.0);
  toy.coef.assign(conditional ? toy.groups.size() : 1,
                  std::vector<AffineDenoiser>(n_levels, AffineDenoiser{}));
  toy.validate();
  return toy;
}

double expected_denoising_loss(const AffineDenoiser& d, const GaussianGroup& g, double sigma) {
  const double bias = (d.a - 1.0) * g.mean + d.b;
  return bias * bias + (d.a - 1.0) * (d.a - 1.0) * g.std_dev * g.std_dev +
         d.a * d.a * sigma * sigma;
}

std::vector<std::vector<double>> diffusion_losses(const DiffusionToy& toy) {
  std::vector<std::vector<double>> out(toy.groups.size());
  for (std::size_t a = 0; a < toy.groups.size(); ++a) {
    for (std::size_t s = 0; s < toy.noise_levels.size(); ++s) {
      out[a].push_back(
          expected_denoising_loss(toy.denoiser(a, s), toy.groups[a], toy.noise_levels[s]));
    }
  }
  return out;
}

double diffusion_gap(const DiffusionToy& toy) {
  const auto losses = diffusion_losses(toy);
  double gap = 0.0;
  for (std::size_t s = 0; s < toy.noise_levels.size(); ++s) {
    double lo = losses[0][s];
    double hi = lo;
    for (const auto& row : losses) {
      lo = std::min(lo, row[s]);
      hi = std::max(hi, row[s]);
    }
    gap = std::max(gap, hi - lo);
  }
  return gap;
}

DiffusionResult diffusion_train(DiffusionToy toy, const TrainConfig& cfg) {
  toy.validate();
  cfg.validate();
  if (cfg.method == Method::regularized) {
    throw ValidationError("diffusion: the regularized method is not defined for the toy");
  }
  if (cfg.method == Method::conditional && !toy.conditional) {
    throw ValidationError("diffusion: conditional training needs per-group denoisers");
  }
  const std::size_t k = toy.groups.size();
  const std::size_t levels = toy.noise_levels.size();
  std::vector<EmaTracker> ema(levels, EmaTracker(k, cfg.ema_decay));
  std::mt19937_64 rng(cfg.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> z(cfg.batch_size), nz(cfg.batch_size);
  std::vector<DiffusionHistoryRow> history;

  for (std::size_t step = 0; step < cfg.steps; ++step) {
    DiffusionHistoryRow row;
    row.step = step;
    row.losses.assign(k, std::vector<double>(levels, 0.0));
    std::vector<std::vector<AffineDenoiser>> grad(toy.coef.size(),
                                                  std::vector<AffineDenoiser>(levels));
    for (std::size_t s = 0; s < levels; ++s) {
      const double sigma = toy.noise_levels[s];
      for (std::size_t j = 0; j < cfg.batch_size; ++j) {
        z[j] = normal(rng);
        nz[j] = normal(rng);
      }
      std::vector<AffineDenoiser> dl(k);
      for (std::size_t a = 0; a < k; ++a) {
        const AffineDenoiser& d = toy.denoiser(a, s);
        const GaussianGroup& g = toy.groups[a];
        if (cfg.batch_size == 0) {
          const double bias = (d.a - 1.0) * g.mean + d.b;
          row.losses[a][s] = expected_denoising_loss(d, g, sigma);
          dl[a].a = 2.0 * bias * g.mean + 2.0 * (d.a - 1.0) * g.std_dev * g.std_dev +
                    2.0 * d.a * sigma * sigma;
          dl[a].b = 2.0 * bias;
          continue;
        }
        double loss = 0.0, ga = 0.0, gb = 0.0;
        for (std::size_t j = 0; j < cfg.batch_size; ++j) {
          const double x0 = g.mean + g.std_dev * z[j];
          const double xt = x0 + sigma * nz[j];
          const double r = d.a * xt + d.b - x0;
          loss += r * r;
          ga += 2.0 * r * xt;
          gb += 2.0 * r;
        }
        const double inv = 1.0 / static_cast<double>(cfg.batch_size);
        row.losses[a][s] = loss * inv;
        dl[a] = {ga * inv, gb * inv};
      }
      std::vector<double> coeff(k, 0.0);
      switch (cfg.method) {
        case Method::baseline:
        case Method::conditional:
          for (std::size_t a = 0; a < k; ++a) coeff[a] = toy.groups[a].proportion;
          break;
        case Method::reweighted:
          std::fill(coeff.begin(), coeff.end(), 1.0 / static_cast<double>(k));
          break;
        case Method::minmax: {
          for (std::size_t a = 0; a < k; ++a) ema[s].update(a, row.losses[a][s]);
          const std::size_t star = ema[s].argmax();
          row.selected.push_back(star);
          coeff[star] = 1.0;
          break;
        }
        case Method::regularized:
          break;
      }
      for (std::size_t a = 0; a < k; ++a) {
        AffineDenoiser& gs = grad[toy.conditional ? a : 0][s];
        gs.a += toy.weights[s] * coeff[a] * dl[a].a;
        gs.b += toy.weights[s] * coeff[a] * dl[a].b;
      }
    }
    for (std::size_t c = 0; c < toy.coef.size(); ++c) {
      for (std::size_t s = 0; s < levels; ++s) {
        if (!std::isfinite(grad[c][s].a) || !std::isfinite(grad[c][s].b)) {
          throw NumericalError("diffusion: non-finite loss at step " + std::to_string(step));
        }
        toy.coef[c][s].a -= cfg.learning_rate * grad[c][s].a;
        toy.coef[c][s].b -= cfg.learning_rate * grad[c][s].b;
      }
    }
    history.push_back(std::move(row));
  }
  return {std::move(toy), std::move(history)};
}

DiffusionResult diffusion_minmax_train(DiffusionToy toy, TrainConfig cfg) {
  cfg.method = Method::minmax;
  return diffusion_train(std::move(toy), cfg);
}

}  // namespace egt
