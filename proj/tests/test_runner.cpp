#include <gtest/gtest.h>

#include <filesystem>
#include <map>

#include "egt/error.hpp"
#include "egt/io.hpp"
#include "egt/runner.hpp"

using namespace egt;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("egt_runner_test_" + name);
  fs::remove_all(dir);
  return dir;
}

RunRecord record(const std::string& method, double delta_p, double delta_egt = 0.1) {
  RunRecord r;
  r.family = "fam";
  r.method = method;
  r.id = method;
  r.report.generator = "JS";
  r.report.per_group = {GroupMetrics{"a<0", 0.5, 0.5, 0.9, 0.9, ExtendedReal(0.2)},
                        GroupMetrics{"a>=0", 0.5, 0.5, 0.8, 0.95, ExtendedReal(0.3)}};
  r.report.global_divergence = ExtendedReal(0.25);
  r.report.delta_egt = ExtendedReal(delta_egt);
  r.report.delta_p = delta_p;
  r.report.delta_r = 0.05;
  r.report.delta_pr = delta_p + 0.05;
  return r;
}

const TableRow& row_of(const ComparisonTable& t, const std::string& method) {
  for (const TableRow& r : t.rows) {
    if (r.method == method) return r;
  }
  throw std::runtime_error("no row " + method);
}

json brittleness_config() {
  return {{"schema_version", 1}, {"scenario", "brittleness"}, {"seed", 1},
          {"epsilon", 1.0},      {"gamma", 0.5}};
}

json comparison_config(std::size_t steps) {
  return {{"schema_version", 1},
          {"scenario", "method-comparison"},
          {"seed", 1},
          {"methods", {"baseline", "conditional", "reweighted", "minmax"}},
          {"train", {{"learning_rate", 8.0}, {"steps", steps}}}};
}

std::map<std::string, std::string> data_files(const fs::path& dir) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (!e.is_regular_file() || e.path().filename() == "timestamps.json") continue;
    out[fs::relative(e.path(), dir).string()] = read_text(e.path());
  }
  return out;
}

}  // namespace

TEST(Config, ListsEveryMissingField) {
  try {
    validate_config(json::object());
    FAIL() << "empty config accepted";
  } catch (const ValidationError& e) {
    const std::string msg = e.what();
    for (const char* f : {"schema_version", "scenario", "seed"}) {
      EXPECT_NE(msg.find(f), std::string::npos) << f;
    }
  }
  try {
    validate_config({{"schema_version", 1}, {"scenario", "bound-check"}, {"seed", "x"}});
    FAIL() << "bad config accepted";
  } catch (const ValidationError& e) {
    const std::string msg = e.what();
    for (const char* f : {"seed", "deltas", "family.size"}) {
      EXPECT_NE(msg.find(f), std::string::npos) << f;
    }
  }
}

TEST(Config, RequiredFieldsPerScenario) {
  const auto req = required_fields(comparison_config(1));
  for (const char* f : {"schema_version", "scenario", "seed", "methods", "train.learning_rate",
                        "train.steps"}) {
    EXPECT_NE(std::find(req.begin(), req.end(), f), req.end()) << f;
  }
  EXPECT_NO_THROW(validate_config(brittleness_config()));
  EXPECT_THROW(parse_scenario("figure2"), ValidationError);
}

TEST(RunId, StableUnderReserialization) {
  const json c = comparison_config(10);
  const json again = json::parse(c.dump(2));
  EXPECT_EQ(run_id(c, 1), run_id(again, 1));
  EXPECT_EQ(run_id(c, 1).size(), 16u);
  EXPECT_NE(run_id(c, 1), run_id(c, 2));
}

TEST(RunRecord, JsonRoundTrip) {
  RunRecord r = record("minmax", 0.2);
  r.report.delta_egt = ExtendedReal::infinity();
  r.seed = 42;
  r.config = brittleness_config();
  const RunRecord back = run_record_from_json(json::parse(to_json(r).dump()));
  EXPECT_EQ(to_json(back), to_json(r));
  EXPECT_TRUE(back.report.delta_egt.is_infinite());
}

TEST(Table, SingleRecordIsBestEverywhere) {
  const auto t = render_table({record("baseline", 0.3)});
  ASSERT_EQ(t.rows.size(), 1u);
  const auto& r = t.rows[0];
  EXPECT_TRUE(r.best_p && r.best_r && r.best_pr && r.best_egt);
}

TEST(Table, FlagsFamilyMinimum) {
  const auto t = render_table({record("baseline", 2.0), record("conditional", 1.6),
                               record("reweighted", 1.8), record("minmax", 0.1)});
  EXPECT_TRUE(row_of(t, "minmax").best_p);
  for (const char* m : {"baseline", "conditional", "reweighted"}) {
    EXPECT_FALSE(row_of(t, m).best_p) << m;
  }
  EXPECT_EQ(t.rows.front().method, "baseline");
  EXPECT_EQ(t.rows.back().method, "minmax");
}

TEST(Table, TiesAreAllFlagged) {
  const auto t = render_table({record("baseline", 0.4, 0.2), record("minmax", 0.4, 0.2)});
  EXPECT_TRUE(row_of(t, "baseline").best_p);
  EXPECT_TRUE(row_of(t, "minmax").best_p);
  EXPECT_TRUE(row_of(t, "baseline").best_egt);
}

TEST(Table, RejectsMixedMetrics) {
  RunRecord other = record("minmax", 0.1);
  other.report.generator = "KL";
  EXPECT_THROW(render_table({record("baseline", 0.2), other}), ValidationError);
}

TEST(Table, CsvUsesPercentagePoints) {
  const auto csv = render_table({record("baseline", 0.3)}).to_csv();
  EXPECT_NE(csv.find("30.0"), std::string::npos);
  EXPECT_NE(csv.find("35.0"), std::string::npos);
}

TEST(Scenario, BrittlenessRow) {
  const auto dir = scratch("brittle");
  const auto out = run_scenario(brittleness_config(), dir);
  EXPECT_EQ(out.exit_code, 0);
  ASSERT_EQ(out.table.rows.size(), 1u);
  const auto& row = out.table.rows[0];
  EXPECT_NEAR(row.global.value(), 1.0, 1e-6);
  EXPECT_NEAR(row.delta_egt.value(), 0.5, 1e-6);
  EXPECT_LE(row.delta_mgo, 1e-12);
  EXPECT_LE(row.delta_ego, 1e-12);
  for (const char* f : {"config.json", "summary.json", "timestamps.json", "p.json", "q.json",
                        "records.json", "table.csv", "table.json"}) {
    EXPECT_TRUE(fs::exists(dir / f)) << f;
  }
  fs::remove_all(dir);
}

TEST(Scenario, ReRunIsByteIdentical) {
  const auto a = scratch("rerun_a"), b = scratch("rerun_b");
  run_scenario(comparison_config(50), a);
  run_scenario(comparison_config(50), b);
  const auto fa = data_files(a), fb = data_files(b);
  EXPECT_GT(fa.size(), 5u);
  EXPECT_EQ(fa, fb);
  fs::remove_all(a);
  fs::remove_all(b);
}

TEST(Scenario, MinmaxHasSmallestPrecisionRecallGap) {
  const auto dir = scratch("compare");
  const auto out = run_scenario(comparison_config(2000), dir);
  double mm = 0.0, others = 1e300;
  for (const auto& r : out.table.rows) {
    if (r.method == "minmax") {
      mm = r.delta_pr;
      EXPECT_TRUE(r.best_pr);
    } else {
      others = std::min(others, r.delta_pr);
    }
  }
  EXPECT_LT(mm, others);
  fs::remove_all(dir);
}

TEST(Scenario, InvalidConfigWritesNothing) {
  const auto dir = scratch("invalid");
  EXPECT_THROW(run_scenario(json::object(), dir), ValidationError);
  EXPECT_FALSE(fs::exists(dir));
}

TEST(History, CsvHeader) {
  HistoryRow r;
  r.step = 0;
  r.per_group = {0.1, 0.2};
  const auto csv = history_csv({r}, {"a<0", "a>=0"});
  EXPECT_EQ(csv.substr(0, csv.find('\n')),
            "step,value,global,d_a<0,d_a>=0,delta_egt,selected,accepted");
}
