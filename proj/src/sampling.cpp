#include "egt/sampling.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include "egt/error.hpp"

namespace egt {

namespace {

std::mt19937_64 chunk_engine(std::uint64_t seed, std::uint64_t stream, std::size_t chunk) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(chunk),
                    static_cast<std::uint32_t>(static_cast<std::uint64_t>(chunk) >> 32)};
  return std::mt19937_64(seq);
}

// Uniform in [0, 1) from the top 53 bits; identical on every standard library.
double unit(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

void validate_proportions(const std::vector<double>& v, const char* what) {
  if (v.empty()) throw ValidationError(std::string(what) + ": empty proportion vector");
  double sum = 0.0;
  for (double x : v) {
    if (!(x >= 0.0) || !std::isfinite(x)) {
      throw ValidationError(std::string(what) + ": proportions must be finite and >= 0");
    }
    sum += x;
  }
  if (std::abs(sum - 1.0) > 1e-12) {
    throw ValidationError(std::string(what) + ": proportions must sum to 1");
  }
}

}  // namespace

SampleBatch sample(const GriddedDensity& q, std::size_t n, std::uint64_t seed,
                   const AttributePartition* partition) {
  if (partition && !(partition->grid() == q.grid())) {
    throw ValidationError("sample: partition grid mismatch");
  }
  std::vector<double> cdf(q.size());
  std::partial_sum(q.mass().begin(), q.mass().end(), cdf.begin());
  const double total = cdf.back();
  SampleBatch out;
  out.values.reserve(n);
  out.labels.reserve(n);
  out.accepted.assign(n, true);
  for (std::size_t chunk = 0; chunk * kSampleChunk < n; ++chunk) {
    std::mt19937_64 rng = chunk_engine(seed, 0, chunk);
    const std::size_t end = std::min(n, (chunk + 1) * kSampleChunk);
    for (std::size_t k = chunk * kSampleChunk; k < end; ++k) {
      const double u = unit(rng) * total;
      auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
      std::size_t cell = static_cast<std::size_t>(it - cdf.begin());
      cell = std::min(cell, q.size() - 1);
      while (q[cell] == 0.0 && cell > 0) --cell;  // u landed on the final cdf value
      out.values.push_back(q.grid().center(cell));
      out.labels.push_back(partition ? partition->label(cell) : 0);
    }
  }
  return out;
}

RejectionPlan make_rejection_plan(const std::vector<double>& source, RejectionMode mode,
                                  const std::vector<double>& target) {
  validate_proportions(source, "rejection plan source");
  RejectionPlan plan;
  if (mode == RejectionMode::ego) {
    plan.target_proportions.assign(source.size(), 1.0 / static_cast<double>(source.size()));
  } else {
    if (target.size() != source.size()) {
      throw ValidationError("rejection plan: target needs one proportion per group");
    }
    validate_proportions(target, "rejection plan target");
    plan.target_proportions = target;
  }
  std::vector<double> ratio(source.size(), 0.0);
  for (std::size_t a = 0; a < source.size(); ++a) {
    const double t = plan.target_proportions[a];
    if (source[a] == 0.0) {
      if (t > 0.0) {
        throw ValidationError("rejection plan: group " + std::to_string(a) +
                              " is never generated but has a positive target");
      }
      continue;
    }
    ratio[a] = t / source[a];
  }
  plan.cost_factor = *std::max_element(ratio.begin(), ratio.end());
  plan.acceptance.resize(source.size());
  for (std::size_t a = 0; a < source.size(); ++a) {
    plan.acceptance[a] = ratio[a] / plan.cost_factor;
  }
  return plan;
}

SampleBatch rejection_filter(const SampleBatch& stream, const RejectionPlan& plan,
                             std::uint64_t seed, bool exact_counts) {
  SampleBatch out = stream;
  const std::size_t n = stream.size();
  const std::size_t k = plan.acceptance.size();
  for (std::size_t chunk = 0; chunk * kSampleChunk < n; ++chunk) {
    std::mt19937_64 rng = chunk_engine(seed, 1, chunk);
    const std::size_t end = std::min(n, (chunk + 1) * kSampleChunk);
    for (std::size_t i = chunk * kSampleChunk; i < end; ++i) {
      const double u = unit(rng);
      if (stream.labels[i] >= k) throw ValidationError("rejection_filter: label out of range");
      out.accepted[i] = stream.accepted[i] && u < plan.acceptance[stream.labels[i]];
    }
  }
  if (!exact_counts) return out;

  std::vector<std::size_t> counts(k, 0);
  for (std::size_t i = 0; i < n; ++i) {
    if (out.accepted[i]) ++counts[out.labels[i]];
  }
  double total = std::numeric_limits<double>::infinity();
  for (std::size_t a = 0; a < k; ++a) {
    if (plan.target_proportions[a] > 0.0) {
      total = std::min(total, static_cast<double>(counts[a]) / plan.target_proportions[a]);
    }
  }
  total = std::floor(total);
  std::vector<std::size_t> excess(k, 0);
  for (std::size_t a = 0; a < k; ++a) {
    const auto keep = static_cast<std::size_t>(std::llround(total * plan.target_proportions[a]));
    excess[a] = counts[a] - std::min(counts[a], keep);
  }
  for (std::size_t i = n; i-- > 0;) {
    const std::size_t a = out.labels[i];
    if (out.accepted[i] && excess[a] > 0) {
      out.accepted[i] = false;
      --excess[a];
    }
  }
  return out;
}

SampleBatch accepted_only(const SampleBatch& batch) {
  SampleBatch out;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    if (!batch.accepted[i]) continue;
    out.values.push_back(batch.values[i]);
    out.labels.push_back(batch.labels[i]);
    out.accepted.push_back(true);
  }
  return out;
}

GriddedDensity empirical_density(const SampleBatch& batch, const GridSpec& grid) {
  grid.validate();
  std::vector<double> counts(grid.n_cells, 0.0);
  std::size_t used = 0;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    if (!batch.accepted.empty() && !batch.accepted[i]) continue;
    counts[grid.cell_of(batch.values[i])] += 1.0;
    ++used;
  }
  if (used == 0) throw ValidationError("empirical_density: empty batch");
  return GriddedDensity::from_weights(grid, std::move(counts));
}

std::vector<double> empirical_proportions(const SampleBatch& batch, std::size_t num_groups) {
  std::vector<double> counts(num_groups, 0.0);
  double total = 0.0;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    if (!batch.accepted[i]) continue;
    if (batch.labels[i] >= num_groups) {
      throw ValidationError("empirical_proportions: label out of range");
    }
    counts[batch.labels[i]] += 1.0;
    total += 1.0;
  }
  if (total == 0.0) throw ValidationError("empirical_proportions: no accepted samples");
  for (double& c : counts) c /= total;
  return counts;
}

}  // namespace egt
