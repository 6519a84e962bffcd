#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "egt/grid.hpp"

namespace egt {

struct SampleBatch {
  std::vector<double> values;       ///< cell centers
  std::vector<std::size_t> labels;  ///< attribute of each value's cell
  std::vector<bool> accepted;       ///< rejection outcome; all true when unfiltered

  std::size_t size() const { return values.size(); }
};

/// Samples are drawn in fixed chunks, each seeded from (seed, chunk index),
/// so the stream does not depend on how chunks are scheduled.
inline constexpr std::size_t kSampleChunk = 65536;

/// n i.i.d. inverse-CDF draws of cell centers. Labels come from `partition`
/// when given, otherwise all labels are 0.
SampleBatch sample(const GriddedDensity& q, std::size_t n, std::uint64_t seed,
                   const AttributePartition* partition = nullptr);

enum class RejectionMode { mgo, ego };

struct RejectionPlan {
  std::vector<double> target_proportions;
  std::vector<double> acceptance;
  double cost_factor = 1.0;  ///< expected draws per accepted sample

  double acceptance_rate() const { return 1.0 / cost_factor; }
};

/// acceptance_a = (t_a/s_a) / max_b (t_b/s_b). For EGO the target is uniform;
/// for MGO it is `target`. Throws ValidationError on invalid proportions or a
/// zero source proportion with a nonzero target.
RejectionPlan make_rejection_plan(const std::vector<double>& source, RejectionMode mode,
                                  const std::vector<double>& target = {});

/// Keeps each sample with its group's acceptance probability. With
/// exact_counts, accepted samples are additionally trimmed (latest first)
/// until group counts are as close as possible to the target proportions.
/// Rejected samples stay in the batch with accepted = false.
SampleBatch rejection_filter(const SampleBatch& stream, const RejectionPlan& plan,
                             std::uint64_t seed, bool exact_counts = false);

/// Accepted samples only.
SampleBatch accepted_only(const SampleBatch& batch);

/// Normalized cell counts. Throws ValidationError on an empty batch or
/// out-of-range values.
GriddedDensity empirical_density(const SampleBatch& batch, const GridSpec& grid);

/// Group proportions among accepted samples.
std::vector<double> empirical_proportions(const SampleBatch& batch, std::size_t num_groups);

}  // namespace egt
