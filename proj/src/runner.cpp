#include "egt/runner.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <map>
#include <random>
#include <sstream>

#include "egt/counterexample.hpp"
#include "egt/error.hpp"
#include "egt/io.hpp"
#include "egt/level_set.hpp"

namespace egt {

using nlohmann::json;

namespace {

enum class Kind { number, integer, string, array, object, boolean };

const char* kind_name(Kind k) {
  switch (k) {
    case Kind::number:
      return "number";
    case Kind::integer:
      return "integer";
    case Kind::string:
      return "string";
    case Kind::array:
      return "array";
    case Kind::object:
      return "object";
    case Kind::boolean:
      return "boolean";
  }
  return "";
}

bool has_kind(const json& v, Kind k) {
  switch (k) {
    case Kind::number:
      return v.is_number();
    case Kind::integer:
      return v.is_number_integer();
    case Kind::string:
      return v.is_string();
    case Kind::array:
      return v.is_array();
    case Kind::object:
      return v.is_object();
    case Kind::boolean:
      return v.is_boolean();
  }
  return false;
}

struct Field {
  const char* path;
  Kind kind;
};

const json* lookup(const json& root, std::string_view dotted) {
  const json* cur = &root;
  while (!dotted.empty()) {
    const auto dot = dotted.find('.');
    const std::string key(dotted.substr(0, dot));
    if (!cur->is_object() || !cur->contains(key)) return nullptr;
    cur = &(*cur)[key];
    dotted = dot == std::string_view::npos ? std::string_view{} : dotted.substr(dot + 1);
  }
  return cur;
}

const std::vector<Field>& common_required() {
  static const std::vector<Field> f{{"schema_version", Kind::integer},
                                    {"scenario", Kind::string},
                                    {"seed", Kind::integer}};
  return f;
}

const std::vector<Field>& scenario_required(Scenario s) {
  static const std::vector<Field> brittle{{"epsilon", Kind::number}, {"gamma", Kind::number}};
  static const std::vector<Field> fig{{"epsilon", Kind::number}};
  static const std::vector<Field> methods{{"methods", Kind::array},
                                          {"train.learning_rate", Kind::number},
                                          {"train.steps", Kind::integer}};
  static const std::vector<Field> bound{{"deltas", Kind::array}, {"family.size", Kind::integer}};
  switch (s) {
    case Scenario::brittleness:
      return brittle;
    case Scenario::figure1:
      return fig;
    case Scenario::method_comparison:
      return methods;
    case Scenario::bound_check:
      return bound;
  }
  return brittle;
}

const std::vector<Field>& optional_fields() {
  static const std::vector<Field> f{
      {"f", Kind::string},           {"log_base", Kind::number},
      {"grid", Kind::object},        {"grid.lo", Kind::number},
      {"grid.hi", Kind::number},     {"grid.n_cells", Kind::integer},
      {"target", Kind::object},      {"target.offset", Kind::number},
      {"target.std", Kind::number},  {"target_file", Kind::string},
      {"bar_a", Kind::integer},      {"level_tol", Kind::number},
      {"sweep.mu.lo", Kind::number}, {"sweep.mu.hi", Kind::number},
      {"sweep.mu.n", Kind::integer}, {"sweep.sigma.lo", Kind::number},
      {"sweep.sigma.hi", Kind::number}, {"sweep.sigma.n", Kind::integer},
      {"dump_field", Kind::boolean}, {"train.batch_size", Kind::integer},
      {"train.lambda", Kind::number}, {"train.ema_decay", Kind::number},
      {"train.line_search", Kind::boolean}, {"init.mu", Kind::number},
      {"init.sigma", Kind::number},  {"init.jitter", Kind::number},
      {"support_tol", Kind::number}, {"family.jitter", Kind::number},
      {"family.seed", Kind::integer}};
  return f;
}

std::optional<Scenario> scenario_of(const json& config) {
  const json* s = lookup(config, "scenario");
  if (!s || !s->is_string()) return std::nullopt;
  try {
    return parse_scenario(s->get<std::string>());
  } catch (const ValidationError&) {
    return std::nullopt;
  }
}

std::string join(const std::vector<std::string>& xs, const char* sep) {
  std::string out;
  for (std::size_t i = 0; i < xs.size(); ++i) out += (i ? sep : "") + xs[i];
  return out;
}

std::string iso_now() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string pct(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.1f", 100.0 * x);
  return buf;
}

std::string ext_string(ExtendedReal x) { return x.is_infinite() ? "inf" : format_double(x.value()); }

int method_rank(const std::string& m) {
  const auto& all = all_methods();
  for (std::size_t i = 0; i < all.size(); ++i) {
    if (method_name(all[i]) == m) return static_cast<int>(i);
  }
  return static_cast<int>(all.size());
}

std::uint64_t config_seed(const json& config) { return config.at("seed").get<std::uint64_t>(); }

std::string bound_csv(const LowerBoundReport& rep) {
  std::ostringstream out;
  out << "candidate,egt_gap,egt_member,divergence,bound,delta,margin,violated\n";
  for (const BoundRow& r : rep.rows) {
    out << r.candidate << ',' << ext_string(r.egt_gap) << ',' << (r.egt_member ? 1 : 0) << ','
        << ext_string(r.divergence) << ',' << ext_string(rep.bound) << ','
        << format_double(rep.delta) << ',' << format_double(r.margin) << ','
        << (r.violated ? 1 : 0) << '\n';
  }
  return out.str();
}

// Random MGO family around P: each conditional is P_a reweighted by
// exp(jitter * z) on its own cells.
std::vector<GroupedDistribution> random_family(const GroupedDistribution& p, std::size_t size,
                                               double jitter, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<GroupedDistribution> out;
  const AttributePartition& part = p.partition();
  for (std::size_t c = 0; c < size; ++c) {
    std::vector<std::optional<GriddedDensity>> conds;
    for (std::size_t a = 0; a < p.num_groups(); ++a) {
      const GriddedDensity& pa = p.conditional(a);
      std::vector<double> w(pa.size(), 0.0);
      for (std::size_t i : part.cells_of(a)) w[i] = pa[i] * std::exp(jitter * normal(rng));
      conds.emplace_back(GriddedDensity::from_weights(pa.grid(), std::move(w)));
    }
    out.emplace_back(part, std::vector<double>(p.proportions().begin(), p.proportions().end()),
                     std::move(conds));
  }
  return out;
}

json level_point_json(const LevelSetPoint& pt) {
  return {{"mu", pt.mu},
          {"sigma", pt.sigma},
          {"global", pt.global},
          {"cond", pt.cond},
          {"delta_egt", pt.delta_egt}};
}

std::string levelset_csv(const std::vector<LevelSetPoint>& pts, std::size_t k) {
  std::ostringstream out;
  out << "mu,sigma,global_js";
  for (std::size_t a = 0; a < k; ++a) out << ",cond_js_" << a;
  out << ",delta_egt\n";
  for (const LevelSetPoint& p : pts) {
    out << format_double(p.mu) << ',' << format_double(p.sigma) << ',' << format_double(p.global);
    for (double c : p.cond) out << ',' << format_double(c);
    out << ',' << format_double(p.delta_egt) << '\n';
  }
  return out.str();
}

std::string field_csv(const SweepField& field, std::size_t k) {
  std::ostringstream out;
  out << "mu,sigma,global_js";
  for (std::size_t a = 0; a < k; ++a) out << ",cond_js_" << a;
  out << ",valid\n";
  for (const SweepEntry& e : field.entries()) {
    out << format_double(e.mu) << ',' << format_double(e.sigma) << ',' << format_double(e.global);
    for (std::size_t a = 0; a < k; ++a) {
      out << ',' << (a < e.cond.size() ? format_double(e.cond[a]) : "nan");
    }
    out << ',' << (e.valid ? 1 : 0) << '\n';
  }
  return out.str();
}

SweepGrid sweep_from_config(const json& config) {
  SweepGrid g;
  const json s = config.value("sweep", json::object());
  auto axis = [&](const char* name, AxisRange& r) {
    if (!s.contains(name)) return;
    const json& a = s.at(name);
    r.lo = a.value("lo", r.lo);
    r.hi = a.value("hi", r.hi);
    r.n = a.value("n", r.n);
  };
  axis("mu", g.mu);
  axis("sigma", g.sigma);
  g.epsilon = config.at("epsilon").get<double>();
  return g;
}

void write_records(const std::filesystem::path& dir, const std::vector<RunRecord>& records,
                   const ComparisonTable& table) {
  json arr = json::array();
  for (const RunRecord& r : records) arr.push_back(to_json(r));
  write_text_atomic(dir / "records.json", arr.dump(2) + "\n");
  write_text_atomic(dir / "table.csv", table.to_csv());
  write_text_atomic(dir / "table.json", table.to_json().dump(2) + "\n");
}

RunRecord make_record(const json& config, const std::string& family, const std::string& method,
                      FairnessReport report, const std::string& history) {
  RunRecord r;
  json keyed = config;
  keyed["method"] = method;
  r.seed = config_seed(config);
  r.id = run_id(keyed, r.seed);
  r.scenario = config.at("scenario").get<std::string>();
  r.family = family;
  r.method = method;
  r.config = config;
  r.report = std::move(report);
  r.history_path = history;
  r.software_version = software_version();
  return r;
}

ScenarioOutcome run_brittleness(const json& config, const std::filesystem::path& dir) {
  const FGenerator f = generator_from_config(config);
  const GroupedDistribution p = target_from_config(config);
  CounterexampleSpec spec{config.at("epsilon").get<double>(), config.at("gamma").get<double>(),
                          config.value("bar_a", std::size_t{0})};
  const Counterexample ce = build_counterexample(f, p, spec);
  write_distribution(dir / "p.json", p);
  write_distribution(dir / "q.json", ce.q);
  ScenarioOutcome out;
  out.dir = dir;
  out.records.push_back(make_record(config, "warmup", "counterexample",
                                    fairness_report(f, p, ce.q, config.value("support_tol", 0.0)),
                                    ""));
  out.table = render_table(out.records);
  out.summary = {{"global_divergence", to_json(ce.global_divergence)},
                 {"targets", ce.targets},
                 {"per_group", json::array()},
                 {"delta_egt", to_json(ce.egt.gap)},
                 {"mgo_pass", ce.mgo.passed},
                 {"ego_pass", ce.ego.passed}};
  for (const ExtendedReal& d : ce.egt.per_group) out.summary["per_group"].push_back(to_json(d));
  write_records(dir, out.records, out.table);
  return out;
}

ScenarioOutcome run_figure1(const json& config, const std::filesystem::path& dir) {
  const FGenerator f = generator_from_config(config);
  const GroupedDistribution p = target_from_config(config);
  const SweepGrid grid = sweep_from_config(config);
  const SweepField field = sweep(p, grid, f);
  const auto pts = extract_level_set(field, grid.epsilon, config.value("level_tol", 1e-4));
  const ImbalanceExtremes ex = imbalance_extremes(pts);
  write_text_atomic(dir / "levelset.csv", levelset_csv(pts, p.num_groups()));
  if (config.value("dump_field", false)) {
    write_text_atomic(dir / "field.csv", field_csv(field, p.num_groups()));
  }
  ScenarioOutcome out;
  out.dir = dir;
  out.summary = {{"points", pts.size()},
                 {"epsilon", grid.epsilon},
                 {"balanced", level_point_json(ex.balanced)},
                 {"worst", level_point_json(ex.worst)}};
  return out;
}

ScenarioOutcome run_method_comparison(const json& config, const std::filesystem::path& dir) {
  const FGenerator f = generator_from_config(config);
  const GroupedDistribution p = target_from_config(config);
  const std::uint64_t seed = config_seed(config);
  const json init = config.value("init", json::object());
  const double mu = init.value("mu", 0.4);
  const double sigma = init.value("sigma", 0.4);
  const double jitter = init.value("jitter", 0.05);
  const double support_tol = config.value("support_tol", 1e-4);
  ScenarioOutcome out;
  out.dir = dir;
  for (const json& m : config.at("methods")) {
    const Method method = parse_method(m.get<std::string>());
    const TrainConfig cfg = train_config_from_json(config.at("train"), method, f, seed);
    std::vector<double> props;
    if (method == Method::conditional) props.assign(p.proportions().begin(), p.proportions().end());
    const HistogramModel model = gaussian_init(p.partition(), mu, sigma, jitter, seed, props);
    const TrainResult res = train(model, p, cfg);
    const std::string name(method_name(method));
    const std::string history = "history_" + name + ".csv";
    write_text_atomic(dir / history, history_csv(res.history, p.partition().names()));
    const GroupedDistribution q = res.model.grouped();
    write_distribution(dir / ("model_" + name + ".json"), q);
    out.records.push_back(
        make_record(config, "histogram", name, fairness_report(f, p, q, support_tol), history));
  }
  out.table = render_table(out.records);
  out.summary = {{"methods", json::array()}};
  for (const RunRecord& r : out.records) {
    out.summary["methods"].push_back({{"method", r.method},
                                      {"record_id", r.id},
                                      {"delta_egt", to_json(r.report.delta_egt)},
                                      {"delta_pr", r.report.delta_pr},
                                      {"global_divergence", to_json(r.report.global_divergence)}});
  }
  write_records(dir, out.records, out.table);
  return out;
}

ScenarioOutcome run_bound_check(const json& config, const std::filesystem::path& dir) {
  const FGenerator f = generator_from_config(config);
  const GroupedDistribution p = target_from_config(config);
  const json fam = config.at("family");
  const auto size = fam.at("size").get<std::size_t>();
  const auto members = random_family(p, size, fam.value("jitter", 0.3),
                                     fam.value("seed", config_seed(config)));
  write_distribution(dir / "p.json", p);
  for (std::size_t c = 0; c < members.size(); ++c) {
    char name[48];
    std::snprintf(name, sizeof name, "candidate_%03zu.json", c);
    write_distribution(dir / "family" / name, members[c]);
  }
  const ClosureFamily family(members);
  ScenarioOutcome out;
  out.dir = dir;
  out.summary = {{"candidates", members.size()}, {"deltas", json::array()}};
  for (const json& d : config.at("deltas")) {
    const double delta = d.get<double>();
    const LowerBoundReport rep = verify_lower_bound(f, p, family, delta);
    char name[64];
    std::snprintf(name, sizeof name, "bound_%g.csv", delta);
    write_text_atomic(dir / name, bound_csv(rep));
    out.summary["deltas"].push_back({{"delta", delta},
                                     {"bound", to_json(rep.bound)},
                                     {"checked", rep.checked},
                                     {"violations", rep.violations}});
    if (rep.violations > 0) out.exit_code = 3;
  }
  return out;
}

}  // namespace

const char* software_version() { return "0.1.0"; }

std::string_view scenario_name(Scenario s) {
  switch (s) {
    case Scenario::brittleness:
      return "brittleness";
    case Scenario::figure1:
      return "figure1";
    case Scenario::method_comparison:
      return "method-comparison";
    case Scenario::bound_check:
      return "bound-check";
  }
  return "";
}

Scenario parse_scenario(std::string_view name) {
  for (Scenario s : {Scenario::brittleness, Scenario::figure1, Scenario::method_comparison,
                     Scenario::bound_check}) {
    if (scenario_name(s) == name) return s;
  }
  throw ValidationError("unknown scenario '" + std::string(name) +
                        "' (brittleness, figure1, method-comparison, bound-check)");
}

std::vector<std::string> required_fields(const json& config) {
  std::vector<std::string> out;
  for (const Field& f : common_required()) out.emplace_back(f.path);
  if (const auto s = scenario_of(config)) {
    for (const Field& f : scenario_required(*s)) out.emplace_back(f.path);
  }
  return out;
}

void validate_config(const json& config) {
  if (!config.is_object()) throw ValidationError("config: expected a JSON object");
  std::vector<std::string> missing, invalid;
  auto check = [&](const Field& f, bool required) {
    const json* v = lookup(config, f.path);
    if (!v) {
      if (required) missing.push_back(std::string(f.path) + " (" + kind_name(f.kind) + ")");
      return;
    }
    if (!has_kind(*v, f.kind)) {
      invalid.push_back(std::string(f.path) + " (expected " + kind_name(f.kind) + ")");
    }
  };
  for (const Field& f : common_required()) check(f, true);
  const auto s = scenario_of(config);
  if (s) {
    for (const Field& f : scenario_required(*s)) check(f, true);
  } else if (lookup(config, "scenario")) {
    invalid.push_back("scenario (one of brittleness, figure1, method-comparison, bound-check)");
  }
  for (const Field& f : optional_fields()) check(f, false);
  if (const json* v = lookup(config, "schema_version");
      v && v->is_number_integer() && v->get<int>() != kConfigSchemaVersion) {
    invalid.push_back("schema_version (expected " + std::to_string(kConfigSchemaVersion) + ")");
  }
  if (const json* v = lookup(config, "seed"); v && v->is_number_integer() && v->get<long long>() < 0) {
    invalid.push_back("seed (expected a nonnegative integer)");
  }
  if (missing.empty() && invalid.empty()) return;
  std::string msg = "config: schema violation";
  if (!missing.empty()) msg += "; missing required field(s): " + join(missing, ", ");
  if (!invalid.empty()) msg += "; invalid field(s): " + join(invalid, ", ");
  throw ValidationError(msg);
}

json to_json(const ExtendedReal& x) {
  if (x.is_infinite()) return "inf";
  return x.value();
}

namespace {

ExtendedReal ext_from_json(const json& j) {
  if (j.is_string()) {
    if (j.get<std::string>() == "inf") return ExtendedReal::infinity();
    throw ValidationError("expected a number or \"inf\"");
  }
  return j.get<double>();
}

}  // namespace

json to_json(const FairnessReport& r) {
  json groups = json::array();
  for (const GroupMetrics& g : r.per_group) {
    groups.push_back({{"name", g.name},
                      {"proportion_p", g.proportion_p},
                      {"proportion_q", g.proportion_q},
                      {"precision", g.precision},
                      {"recall", g.recall},
                      {"divergence", to_json(g.divergence)}});
  }
  return {{"generator", r.generator},
          {"global_divergence", to_json(r.global_divergence)},
          {"per_group", groups},
          {"delta_mgo", r.delta_mgo},
          {"delta_ego", r.delta_ego},
          {"delta_egt", to_json(r.delta_egt)},
          {"delta_p", r.delta_p},
          {"delta_r", r.delta_r},
          {"delta_pr", r.delta_pr}};
}

FairnessReport fairness_report_from_json(const json& j) {
  try {
    FairnessReport r;
    r.generator = j.at("generator").get<std::string>();
    r.global_divergence = ext_from_json(j.at("global_divergence"));
    for (const json& g : j.at("per_group")) {
      GroupMetrics m;
      m.name = g.at("name").get<std::string>();
      m.proportion_p = g.at("proportion_p").get<double>();
      m.proportion_q = g.at("proportion_q").get<double>();
      m.precision = g.at("precision").get<double>();
      m.recall = g.at("recall").get<double>();
      m.divergence = ext_from_json(g.at("divergence"));
      r.per_group.push_back(std::move(m));
    }
    r.delta_mgo = j.at("delta_mgo").get<double>();
    r.delta_ego = j.at("delta_ego").get<double>();
    r.delta_egt = ext_from_json(j.at("delta_egt"));
    r.delta_p = j.at("delta_p").get<double>();
    r.delta_r = j.at("delta_r").get<double>();
    r.delta_pr = j.at("delta_pr").get<double>();
    return r;
  } catch (const json::exception& e) {
    throw ValidationError(std::string("fairness report: ") + e.what());
  }
}

std::string run_id(const json& config, std::uint64_t seed) {
  const std::string canonical = config.dump() + "#" + std::to_string(seed);
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : canonical) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

json to_json(const RunRecord& r) {
  return {{"id", r.id},
          {"scenario", r.scenario},
          {"family", r.family},
          {"method", r.method},
          {"seed", r.seed},
          {"config", r.config},
          {"report", to_json(r.report)},
          {"history_path", r.history_path},
          {"software_version", r.software_version}};
}

RunRecord run_record_from_json(const json& j) {
  try {
    RunRecord r;
    r.id = j.at("id").get<std::string>();
    r.scenario = j.at("scenario").get<std::string>();
    r.family = j.at("family").get<std::string>();
    r.method = j.at("method").get<std::string>();
    r.seed = j.at("seed").get<std::uint64_t>();
    r.config = j.at("config");
    r.report = fairness_report_from_json(j.at("report"));
    r.history_path = j.value("history_path", "");
    r.software_version = j.value("software_version", "");
    return r;
  } catch (const json::exception& e) {
    throw ValidationError(std::string("run record: ") + e.what());
  }
}

ComparisonTable render_table(const std::vector<RunRecord>& records) {
  ComparisonTable t;
  if (records.empty()) return t;
  t.generator = records.front().report.generator;
  std::vector<std::string> groups;
  for (const GroupMetrics& g : records.front().report.per_group) groups.push_back(g.name);
  for (const RunRecord& r : records) {
    std::vector<std::string> names;
    for (const GroupMetrics& g : r.report.per_group) names.push_back(g.name);
    if (r.report.generator != t.generator || names != groups) {
      throw ValidationError("render_table: records use different metrics (generator or groups)");
    }
    TableRow row;
    row.family = r.family;
    row.method = r.method;
    row.record_id = r.id;
    row.groups = names;
    for (const GroupMetrics& g : r.report.per_group) {
      row.precision.push_back(g.precision);
      row.recall.push_back(g.recall);
    }
    row.global = r.report.global_divergence;
    row.delta_egt = r.report.delta_egt;
    row.delta_mgo = r.report.delta_mgo;
    row.delta_ego = r.report.delta_ego;
    row.delta_p = r.report.delta_p;
    row.delta_r = r.report.delta_r;
    row.delta_pr = r.report.delta_pr;
    t.rows.push_back(std::move(row));
  }
  std::stable_sort(t.rows.begin(), t.rows.end(), [](const TableRow& a, const TableRow& b) {
    if (a.family != b.family) return a.family < b.family;
    const int ra = method_rank(a.method);
    const int rb = method_rank(b.method);
    if (ra != rb) return ra < rb;
    return a.method < b.method;
  });
  std::map<std::string, std::vector<TableRow*>> families;
  for (TableRow& r : t.rows) families[r.family].push_back(&r);
  for (auto& [name, rows] : families) {
    double bp = rows.front()->delta_p, br = rows.front()->delta_r, bpr = rows.front()->delta_pr;
    ExtendedReal begt = rows.front()->delta_egt;
    for (const TableRow* r : rows) {
      bp = std::min(bp, r->delta_p);
      br = std::min(br, r->delta_r);
      bpr = std::min(bpr, r->delta_pr);
      begt = std::min(begt, r->delta_egt);
    }
    for (TableRow* r : rows) {
      r->best_p = r->delta_p == bp;
      r->best_r = r->delta_r == br;
      r->best_pr = r->delta_pr == bpr;
      r->best_egt = r->delta_egt == begt;
    }
  }
  return t;
}

std::string ComparisonTable::to_csv() const {
  std::ostringstream out;
  out << "family,method,record_id,global_divergence,delta_egt,delta_mgo,delta_ego,delta_p,"
         "delta_r,delta_pr";
  if (!rows.empty()) {
    for (const std::string& g : rows.front().groups) out << ",precision_" << g << ",recall_" << g;
  }
  out << ",best_p,best_r,best_pr,best_egt\n";
  for (const TableRow& r : rows) {
    out << r.family << ',' << r.method << ',' << r.record_id << ',' << ext_string(r.global) << ','
        << ext_string(r.delta_egt) << ',' << format_double(r.delta_mgo) << ','
        << format_double(r.delta_ego) << ',' << pct(r.delta_p) << ',' << pct(r.delta_r) << ','
        << pct(r.delta_pr);
    for (std::size_t a = 0; a < r.groups.size(); ++a) {
      out << ',' << pct(r.precision[a]) << ',' << pct(r.recall[a]);
    }
    out << ',' << r.best_p << ',' << r.best_r << ',' << r.best_pr << ',' << r.best_egt << '\n';
  }
  return out.str();
}

std::string ComparisonTable::to_text() const {
  std::ostringstream out;
  char buf[256];
  std::snprintf(buf, sizeof buf, "%-12s %-16s %8s %8s %8s %12s %12s\n", "family", "method",
                "d-P", "d-R", "d-PR", "d-EGT", "D_f(P||Q)");
  out << buf;
  for (const TableRow& r : rows) {
    auto cell = [](const std::string& v, bool best) { return (best ? "*" : " ") + v; };
    std::snprintf(buf, sizeof buf, "%-12s %-16s %8s %8s %8s %12s %12s\n", r.family.c_str(),
                  r.method.c_str(), cell(pct(r.delta_p), r.best_p).c_str(),
                  cell(pct(r.delta_r), r.best_r).c_str(),
                  cell(pct(r.delta_pr), r.best_pr).c_str(),
                  cell(r.delta_egt.is_infinite() ? "inf" : [&] {
                    char v[32];
                    std::snprintf(v, sizeof v, "%.4g", r.delta_egt.value());
                    return std::string(v);
                  }(), r.best_egt).c_str(),
                  r.global.is_infinite() ? "inf" : [&] {
                    char v[32];
                    std::snprintf(v, sizeof v, "%.4g", r.global.value());
                    return std::string(v);
                  }().c_str());
    out << buf;
  }
  out << "(* best in family; P/R columns in percentage points)\n";
  return out.str();
}

json ComparisonTable::to_json() const {
  json rows_json = json::array();
  for (const TableRow& r : rows) {
    rows_json.push_back({{"family", r.family},
                         {"method", r.method},
                         {"record_id", r.record_id},
                         {"groups", r.groups},
                         {"precision", r.precision},
                         {"recall", r.recall},
                         {"global_divergence", egt::to_json(r.global)},
                         {"delta_egt", egt::to_json(r.delta_egt)},
                         {"delta_mgo", r.delta_mgo},
                         {"delta_ego", r.delta_ego},
                         {"delta_p", r.delta_p},
                         {"delta_r", r.delta_r},
                         {"delta_pr", r.delta_pr},
                         {"best_p", r.best_p},
                         {"best_r", r.best_r},
                         {"best_pr", r.best_pr},
                         {"best_egt", r.best_egt}});
  }
  return {{"generator", generator}, {"rows", rows_json}};
}

GroupedDistribution target_from_config(const json& config) {
  if (config.contains("target_file")) {
    return read_distribution(config.at("target_file").get<std::string>()).grouped();
  }
  const auto s = scenario_of(config);
  const bool fine = s && *s == Scenario::figure1;
  const json grid = config.value("grid", json::object());
  GridSpec g{grid.value("lo", fine ? -3.0 : -2.0), grid.value("hi", fine ? 3.0 : 2.0),
             grid.value("n_cells", std::size_t{fine ? 1200u : 80u})};
  g.validate();
  const json target = config.value("target", json::object());
  return warmup_target(g, target.value("offset", 0.5), target.value("std", 0.3));
}

FGenerator generator_from_config(const json& config) {
  return builtin_generator(config.value("f", std::string("JS")), config.value("log_base", 0.0));
}

TrainConfig train_config_from_json(const json& train, Method method, const FGenerator& f,
                                   std::uint64_t seed) {
  TrainConfig cfg;
  cfg.method = method;
  cfg.f = f;
  cfg.seed = seed;
  try {
    cfg.learning_rate = train.at("learning_rate").get<double>();
    cfg.steps = train.at("steps").get<std::size_t>();
    cfg.batch_size = train.value("batch_size", std::size_t{0});
    cfg.lambda = train.value("lambda", 0.0);
    cfg.ema_decay = train.value("ema_decay", 0.9);
    cfg.line_search = train.value("line_search", false);
  } catch (const json::exception& e) {
    throw ValidationError(std::string("train config: ") + e.what());
  }
  cfg.validate();
  return cfg;
}

std::string history_csv(const std::vector<HistoryRow>& history,
                        const std::vector<std::string>& groups) {
  std::ostringstream out;
  out << "step,value,global";
  for (const std::string& g : groups) out << ",d_" << g;
  out << ",delta_egt,selected,accepted\n";
  for (const HistoryRow& r : history) {
    out << r.step << ',' << format_double(r.value) << ',' << format_double(r.global);
    for (double d : r.per_group) out << ',' << format_double(d);
    out << ',' << format_double(r.delta_egt) << ',';
    if (r.selected) out << *r.selected;
    out << ',' << (r.accepted ? 1 : 0) << '\n';
  }
  return out.str();
}

std::filesystem::path default_run_dir(const json& config) {
  const char* env = std::getenv("EGT_OUT_DIR");
  const std::filesystem::path base = env && *env ? env : "runs";
  return base / (config.at("scenario").get<std::string>() + "-" +
                 run_id(config, config_seed(config)));
}

ScenarioOutcome run_scenario(const json& config, const std::filesystem::path& dir) {
  validate_config(config);
  const std::string started = iso_now();
  const auto t0 = std::chrono::steady_clock::now();
  std::filesystem::create_directories(dir);
  write_text_atomic(dir / "config.json", config.dump(2) + "\n");
  ScenarioOutcome out;
  switch (parse_scenario(config.at("scenario").get<std::string>())) {
    case Scenario::brittleness:
      out = run_brittleness(config, dir);
      break;
    case Scenario::figure1:
      out = run_figure1(config, dir);
      break;
    case Scenario::method_comparison:
      out = run_method_comparison(config, dir);
      break;
    case Scenario::bound_check:
      out = run_bound_check(config, dir);
      break;
  }
  out.summary["scenario"] = config.at("scenario");
  out.summary["run_id"] = run_id(config, config_seed(config));
  out.summary["software_version"] = software_version();
  out.summary["exit_code"] = out.exit_code;
  write_text_atomic(dir / "summary.json", out.summary.dump(2) + "\n");
  const double elapsed =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  write_text_atomic(dir / "timestamps.json",
                    json{{"started", started}, {"finished", iso_now()}, {"elapsed_s", elapsed}}
                            .dump(2) +
                        "\n");
  return out;
}

}  // namespace egt
