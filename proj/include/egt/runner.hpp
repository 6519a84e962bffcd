#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "egt/fairness.hpp"
#include "egt/trainers.hpp"

namespace egt {

inline constexpr int kConfigSchemaVersion = 1;

const char* software_version();

enum class Scenario { brittleness, figure1, method_comparison, bound_check };

std::string_view scenario_name(Scenario s);
Scenario parse_scenario(std::string_view name);

/// Dotted paths of the fields a scenario config must set. Without a valid
/// scenario, the top-level fields common to every config.
std::vector<std::string> required_fields(const nlohmann::json& config);

/// Throws ValidationError naming every missing or mistyped field.
void validate_config(const nlohmann::json& config);

nlohmann::json to_json(const ExtendedReal& x);
nlohmann::json to_json(const FairnessReport& r);
FairnessReport fairness_report_from_json(const nlohmann::json& j);

struct RunRecord {
  std::string id;
  std::string scenario;
  std::string family;
  std::string method;
  std::uint64_t seed = 0;
  nlohmann::json config;
  FairnessReport report;
  std::string history_path;
  std::string software_version;
};

/// 16 hex digits of FNV-1a over the canonical (key-sorted) config dump and the seed.
std::string run_id(const nlohmann::json& config, std::uint64_t seed);

nlohmann::json to_json(const RunRecord& r);
RunRecord run_record_from_json(const nlohmann::json& j);

struct TableRow {
  std::string family;
  std::string method;
  std::string record_id;
  std::vector<std::string> groups;
  std::vector<double> precision;
  std::vector<double> recall;
  ExtendedReal global;
  ExtendedReal delta_egt;
  double delta_mgo = 0.0;
  double delta_ego = 0.0;
  double delta_p = 0.0;
  double delta_r = 0.0;
  double delta_pr = 0.0;
  bool best_p = false;
  bool best_r = false;
  bool best_pr = false;
  bool best_egt = false;
};

/// Rows sorted by family, then method (baseline, conditional, reweighted,
/// minmax, regularized, then any other method by name). Best flags mark the
/// minimum of each delta column within a family; ties are all flagged.
struct ComparisonTable {
  std::string generator;
  std::vector<TableRow> rows;

  /// Precision/recall values and deltas in percentage points with one
  /// decimal; divergences raw.
  std::string to_csv() const;
  std::string to_text() const;
  /// Unformatted values.
  nlohmann::json to_json() const;
};

/// Throws ValidationError when records use different generators or groups.
ComparisonTable render_table(const std::vector<RunRecord>& records);

struct ScenarioOutcome {
  std::filesystem::path dir;
  std::vector<RunRecord> records;
  ComparisonTable table;
  nlohmann::json summary;
  int exit_code = 0;  ///< 3 when a checked property failed
};

/// Runs a validated config and writes its outputs into `dir`. Data files are
/// byte-identical across runs of the same config; wall-clock times go to
/// timestamps.json only.
ScenarioOutcome run_scenario(const nlohmann::json& config, const std::filesystem::path& dir);

/// Default run directory: $EGT_OUT_DIR (or "runs") / <scenario>-<id>.
std::filesystem::path default_run_dir(const nlohmann::json& config);

/// Warm-up target described by a config ("grid", "target" sections, or
/// "target_file").
GroupedDistribution target_from_config(const nlohmann::json& config);
FGenerator generator_from_config(const nlohmann::json& config);
TrainConfig train_config_from_json(const nlohmann::json& train, Method method,
                                   const FGenerator& f, std::uint64_t seed);

/// CSV of a training history: step, value, global, d_<group>..., delta_egt,
/// selected, accepted.
std::string history_csv(const std::vector<HistoryRow>& history,
                        const std::vector<std::string>& groups);

}  // namespace egt
