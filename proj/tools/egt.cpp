// egt: command-line front end for the fairness toolkit.

#include <cstdio>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "egt/counterexample.hpp"
#include "egt/divergence.hpp"
#include "egt/error.hpp"
#include "egt/fairness.hpp"
#include "egt/io.hpp"
#include "egt/level_set.hpp"
#include "egt/runner.hpp"
#include "egt/sampling.hpp"
#include "egt/trainers.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace egt;

namespace {

struct Globals {
  std::uint64_t seed = 0;
  bool seed_set = false;
  std::string out;
  std::string format;
};

Globals g;

void emit(const std::string& text, const std::string& path = "") {
  const std::string& target = path.empty() ? g.out : path;
  if (target.empty() || target == "-") {
    std::cout << text;
  } else {
    write_text_atomic(target, text);
  }
}

GroupedDistribution load_grouped(const std::string& path) { return read_distribution(path).grouped(); }

std::string ext_csv(ExtendedReal x) { return x.is_infinite() ? "inf" : format_double(x.value()); }

json read_json(const std::string& path) {
  try {
    return json::parse(read_text(path));
  } catch (const json::parse_error& e) {
    throw ValidationError(path + ": " + e.what());
  }
}

// divergence ---------------------------------------------------------------

struct DivergenceArgs {
  std::string f = "JS", p, q;
  double log_base = 0.0;
};

int cmd_divergence(const DivergenceArgs& a) {
  const FGenerator f = builtin_generator(a.f, a.log_base);
  const GriddedDensity p = read_distribution(a.p).density;
  const GriddedDensity q = read_distribution(a.q).density;
  const ExtendedReal d = f_divergence(f, p, q);
  const PrecisionRecall pr = support_precision_recall(q, p);
  if (g.format == "csv") {
    emit("f,value,finite,precision,recall\n" + f.name() + "," + ext_csv(d) + "," +
         (d.is_infinite() ? "0" : "1") + "," + format_double(pr.precision) + "," +
         format_double(pr.recall) + "\n");
  } else {
    json j{{"f", f.name()},
           {"value", to_json(d)},
           {"finite", !d.is_infinite()},
           {"precision", pr.precision},
           {"recall", pr.recall}};
    emit(j.dump(2) + "\n");
  }
  return 0;
}

// check --------------------------------------------------------------------

struct CheckArgs {
  std::string f = "JS", p, q;
  double delta = 0.0;
  double support_tol = 0.0;
};

int cmd_check(const CheckArgs& a) {
  const FGenerator f = builtin_generator(a.f);
  const GroupedDistribution p = load_grouped(a.p);
  const GroupedDistribution q = load_grouped(a.q);
  const FairnessReport rep = fairness_report(f, p, q, a.support_tol);
  json j = to_json(rep);
  j["delta"] = a.delta;
  j["mgo_pass"] = check_mgo(p, q, a.delta).passed;
  j["ego_pass"] = check_ego(q, a.delta).passed;
  j["egt_pass"] = check_egt(f, p, q, a.delta).passed;
  emit(j.dump(2) + "\n");
  return 0;
}

// bound --------------------------------------------------------------------

struct BoundArgs {
  std::string f = "JS", p, family;
  double delta = 0.1;
};

int cmd_bound(const BoundArgs& a) {
  const FGenerator f = builtin_generator(a.f);
  const GroupedDistribution p = load_grouped(a.p);
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(a.family)) {
    if (e.path().extension() == ".json") files.push_back(e.path());
  }
  if (files.empty()) throw ValidationError("no .json candidates in " + a.family);
  std::sort(files.begin(), files.end());
  std::vector<GroupedDistribution> members;
  for (const fs::path& file : files) members.push_back(load_grouped(file.string()));
  const LowerBoundReport rep = verify_lower_bound(f, p, ClosureFamily(members), a.delta);
  if (g.format == "json") {
    json rows = json::array();
    for (const BoundRow& r : rep.rows) {
      rows.push_back({{"candidate", files[r.candidate].filename().string()},
                      {"egt_gap", to_json(r.egt_gap)},
                      {"egt_member", r.egt_member},
                      {"divergence", to_json(r.divergence)},
                      {"margin", r.margin},
                      {"violated", r.violated}});
    }
    emit(json{{"delta", rep.delta},
              {"bound", to_json(rep.bound)},
              {"checked", rep.checked},
              {"violations", rep.violations},
              {"rows", rows}}
             .dump(2) +
         "\n");
  } else {
    std::ostringstream out;
    out << "candidate,egt_gap,egt_member,divergence,bound,delta,margin,violated\n";
    for (const BoundRow& r : rep.rows) {
      out << files[r.candidate].filename().string() << ',' << ext_csv(r.egt_gap) << ','
          << (r.egt_member ? 1 : 0) << ',' << ext_csv(r.divergence) << ',' << ext_csv(rep.bound)
          << ',' << format_double(rep.delta) << ',' << format_double(r.margin) << ','
          << (r.violated ? 1 : 0) << '\n';
    }
    emit(out.str());
  }
  if (rep.violations > 0) {
    std::cerr << "egt bound: " << rep.violations << " violation(s) among " << rep.checked
              << " EGT members\n";
    return 3;
  }
  return 0;
}

// counterexample -----------------------------------------------------------

struct CounterexampleArgs {
  std::string f = "JS", p;
  double epsilon = 1.0, gamma = 0.5;
  std::size_t bar_a = 0;
};

int cmd_counterexample(const CounterexampleArgs& a) {
  if (g.out.empty()) throw ValidationError("counterexample: --out <file> is required");
  const FGenerator f = builtin_generator(a.f);
  const GroupedDistribution p = load_grouped(a.p);
  const Counterexample ce = build_counterexample(f, p, {a.epsilon, a.gamma, a.bar_a});
  write_distribution(g.out, ce.q);
  json per_group = json::array();
  for (const ExtendedReal& d : ce.egt.per_group) per_group.push_back(to_json(d));
  json points = json::array();
  for (const PhiPoint& pt : ce.points) {
    points.push_back({{"alpha", pt.alpha}, {"beta", pt.beta}, {"phi", pt.value}});
  }
  std::cout << json{{"q", g.out},
                    {"global_divergence", to_json(ce.global_divergence)},
                    {"targets", ce.targets},
                    {"per_group", per_group},
                    {"points", points},
                    {"delta_egt", to_json(ce.egt.gap)},
                    {"mgo_pass", ce.mgo.passed},
                    {"ego_pass", ce.ego.passed}}
                   .dump(2)
            << "\n";
  return 0;
}

// levelset -----------------------------------------------------------------

struct LevelsetArgs {
  std::string f = "JS", p, field;
  double epsilon = 1.0, level_tol = 1e-4;
  SweepGrid grid;
};

int cmd_levelset(LevelsetArgs a) {
  const FGenerator f = builtin_generator(a.f);
  const GroupedDistribution p =
      a.p.empty() ? warmup_target(GridSpec{-3.0, 3.0, 1200}) : load_grouped(a.p);
  a.grid.epsilon = a.epsilon;
  a.grid.validate();
  const SweepField field = sweep(p, a.grid, f);
  const auto pts = extract_level_set(field, a.epsilon, a.level_tol);
  const std::size_t k = p.num_groups();
  std::ostringstream out;
  out << "mu,sigma,global_js";
  for (std::size_t i = 0; i < k; ++i) out << ",cond_js_" << i;
  out << ",delta_egt\n";
  for (const LevelSetPoint& pt : pts) {
    out << format_double(pt.mu) << ',' << format_double(pt.sigma) << ','
        << format_double(pt.global);
    for (double c : pt.cond) out << ',' << format_double(c);
    out << ',' << format_double(pt.delta_egt) << '\n';
  }
  emit(out.str());
  if (!a.field.empty()) {
    std::ostringstream fo;
    fo << "mu,sigma,global_js";
    for (std::size_t i = 0; i < k; ++i) fo << ",cond_js_" << i;
    fo << ",valid\n";
    for (const SweepEntry& e : field.entries()) {
      fo << format_double(e.mu) << ',' << format_double(e.sigma) << ','
         << format_double(e.global);
      for (std::size_t i = 0; i < k; ++i) {
        fo << ',' << (i < e.cond.size() ? format_double(e.cond[i]) : "nan");
      }
      fo << ',' << (e.valid ? 1 : 0) << '\n';
    }
    write_text_atomic(a.field, fo.str());
  }
  const ImbalanceExtremes ex = imbalance_extremes(pts);
  std::cerr << "level set: " << pts.size() << " points; balanced delta_egt "
            << ex.balanced.delta_egt << "; worst delta_egt " << ex.worst.delta_egt << "\n";
  return 0;
}

// train --------------------------------------------------------------------

struct TrainArgs {
  std::string method = "baseline", f = "JS", p, config;
};

int cmd_train(const TrainArgs& a) {
  if (g.out.empty()) throw ValidationError("train: --out <run-dir> is required");
  const FGenerator f = builtin_generator(a.f);
  const GroupedDistribution p = load_grouped(a.p);
  const json config = read_json(a.config);
  const Method method = parse_method(a.method);
  const json train_json = config.contains("train") ? config.at("train") : config;
  const std::uint64_t seed = g.seed_set ? g.seed : config.value("seed", std::uint64_t{0});
  const TrainConfig cfg = train_config_from_json(train_json, method, f, seed);
  const json init = config.value("init", json::object());
  std::vector<double> props;
  if (method == Method::conditional) props.assign(p.proportions().begin(), p.proportions().end());
  const HistogramModel model =
      gaussian_init(p.partition(), init.value("mu", 0.4), init.value("sigma", 0.4),
                    init.value("jitter", 0.05), seed, props);
  const fs::path dir = g.out;
  json snapshot = config;
  snapshot["method"] = a.method;
  snapshot["f"] = f.name();
  snapshot["p"] = a.p;
  snapshot["seed"] = seed;
  write_text_atomic(dir / "config.json", snapshot.dump(2) + "\n");
  TrainResult res{model, {}};
  try {
    res = train(model, p, cfg);
  } catch (const TrainingAborted& e) {
    write_text_atomic(dir / "history.csv", history_csv(e.history(), p.partition().names()));
    throw;
  }
  write_text_atomic(dir / "history.csv", history_csv(res.history, p.partition().names()));
  const GroupedDistribution q = res.model.grouped();
  write_distribution(dir / "model.json", q);
  const FairnessReport rep = fairness_report(f, p, q, config.value("support_tol", 1e-4));
  write_text_atomic(dir / "report.json", to_json(rep).dump(2) + "\n");
  std::cout << to_json(rep).dump(2) << "\n";
  return 0;
}

// train-diffusion ----------------------------------------------------------

struct DiffusionArgs {
  std::string method = "baseline", config;
};

int cmd_train_diffusion(const DiffusionArgs& a) {
  if (g.out.empty()) throw ValidationError("train-diffusion: --out <run-dir> is required");
  const json config = read_json(a.config);
  const Method method = parse_method(a.method);
  std::vector<GaussianGroup> groups;
  try {
    if (config.contains("groups")) {
      for (const json& gj : config.at("groups")) {
        groups.push_back({gj.at("mean").get<double>(), gj.at("std").get<double>(),
                          gj.at("proportion").get<double>()});
      }
    } else {
      groups = {{-0.5, 0.3, 0.75}, {0.5, 0.3, 0.25}};
    }
  } catch (const json::exception& e) {
    throw ValidationError(std::string("diffusion config: ") + e.what());
  }
  const std::uint64_t seed = g.seed_set ? g.seed : config.value("seed", std::uint64_t{0});
  DiffusionToy toy = make_diffusion_toy(groups, config.value("n_levels", std::size_t{8}),
                                        config.value("sigma_lo", 0.02),
                                        config.value("sigma_hi", 2.0),
                                        method == Method::conditional);
  const json train_json = config.contains("train") ? config.at("train") : config;
  const TrainConfig cfg = train_config_from_json(train_json, method, FGenerator(GeneratorKind::js), seed);
  const DiffusionResult res = diffusion_train(toy, cfg);
  const fs::path dir = g.out;
  json snapshot = config;
  snapshot["method"] = a.method;
  snapshot["seed"] = seed;
  write_text_atomic(dir / "config.json", snapshot.dump(2) + "\n");
  std::ostringstream hist;
  hist << "step,group,level,sigma,loss,selected\n";
  for (const DiffusionHistoryRow& r : res.history) {
    for (std::size_t gi = 0; gi < r.losses.size(); ++gi) {
      for (std::size_t s = 0; s < r.losses[gi].size(); ++s) {
        hist << r.step << ',' << gi << ',' << s << ',' << format_double(toy.noise_levels[s]) << ','
             << format_double(r.losses[gi][s]) << ',';
        if (s < r.selected.size()) hist << (r.selected[s] == gi ? 1 : 0);
        hist << '\n';
      }
    }
  }
  write_text_atomic(dir / "history.csv", hist.str());
  json coef = json::array();
  for (const auto& row : res.toy.coef) {
    json r = json::array();
    for (const AffineDenoiser& d : row) r.push_back({{"a", d.a}, {"b", d.b}});
    coef.push_back(r);
  }
  const json summary{{"method", a.method},
                     {"noise_levels", res.toy.noise_levels},
                     {"losses", diffusion_losses(res.toy)},
                     {"gap", diffusion_gap(res.toy)},
                     {"coef", coef}};
  write_text_atomic(dir / "model.json", summary.dump(2) + "\n");
  std::cout << summary.dump(2) << "\n";
  return 0;
}

// sample -------------------------------------------------------------------

struct SampleArgs {
  std::string q, reject, target;
  std::size_t n = 0;
  bool exact = false;
};

int cmd_sample(const SampleArgs& a) {
  const DistributionFile qf = read_distribution(a.q);
  const AttributePartition* part = qf.partition ? &*qf.partition : nullptr;
  SampleBatch batch = sample(qf.density, a.n, g.seed, part);
  if (!a.reject.empty()) {
    if (!part) throw ValidationError("sample: --reject needs a labeled --q file");
    const GroupedDistribution qg = qf.grouped();
    const std::vector<double> source(qg.proportions().begin(), qg.proportions().end());
    RejectionMode mode;
    std::vector<double> target;
    if (a.reject == "mgo") {
      if (a.target.empty()) throw ValidationError("sample: --reject mgo needs --target <file>");
      const GroupedDistribution t = load_grouped(a.target);
      target.assign(t.proportions().begin(), t.proportions().end());
      mode = RejectionMode::mgo;
    } else if (a.reject == "ego") {
      mode = RejectionMode::ego;
    } else {
      throw ValidationError("sample: --reject must be mgo or ego");
    }
    const RejectionPlan plan = make_rejection_plan(source, mode, target);
    batch = rejection_filter(batch, plan, g.seed, a.exact);
    std::cerr << "acceptance rate " << plan.acceptance_rate() << "\n";
  }
  std::ostringstream out;
  out << "value,label,accepted\n";
  for (std::size_t i = 0; i < batch.size(); ++i) {
    out << format_double(batch.values[i]) << ',';
    if (i < batch.labels.size()) out << batch.labels[i];
    out << ',' << (batch.accepted[i] ? 1 : 0) << '\n';
  }
  emit(out.str());
  return 0;
}

// scenario / table ---------------------------------------------------------

struct ScenarioArgs {
  std::string name, config;
};

int cmd_scenario(const ScenarioArgs& a) {
  json config = read_json(a.config);
  if (!a.name.empty()) {
    parse_scenario(a.name);
    if (!config.contains("scenario")) config["scenario"] = a.name;
    if (config["scenario"] != a.name) {
      throw ValidationError("scenario '" + a.name + "' does not match config scenario " +
                            config["scenario"].dump());
    }
  }
  if (g.seed_set) config["seed"] = g.seed;
  validate_config(config);
  const fs::path dir = g.out.empty() ? default_run_dir(config) : fs::path(g.out);
  const ScenarioOutcome res = run_scenario(config, dir);
  if (!res.table.rows.empty()) {
    std::cout << (g.format == "csv" ? res.table.to_csv() : res.table.to_text());
  }
  std::cout << res.summary.dump(2) << "\n" << "run directory: " << dir.string() << "\n";
  return res.exit_code;
}

struct TableArgs {
  std::vector<std::string> records;
};

int cmd_table(const TableArgs& a) {
  std::vector<RunRecord> records;
  for (const std::string& path : a.records) {
    const json j = read_json(path);
    if (j.is_array()) {
      for (const json& r : j) records.push_back(run_record_from_json(r));
    } else {
      records.push_back(run_record_from_json(j));
    }
  }
  const ComparisonTable t = render_table(records);
  if (g.format == "json") {
    emit(t.to_json().dump(2) + "\n");
  } else if (g.format == "csv") {
    emit(t.to_csv());
  } else {
    emit(t.to_text());
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Fairness metrics, counterexamples and training for gridded generative models"};
  app.require_subcommand(1);
  app.fallthrough();
  auto* seed_opt = app.add_option("--seed", g.seed, "Random seed");
  app.add_option("--out", g.out, "Output file or run directory");
  app.add_option("--format", g.format, "Output format")
      ->check(CLI::IsMember({"csv", "json", "text"}));

  DivergenceArgs div;
  auto* c_div = app.add_subcommand("divergence", "D_f(P||Q) with support precision/recall");
  c_div->add_option("--f", div.f, "Generator name");
  c_div->add_option("--log-base", div.log_base, "Logarithm base (0 = generator default)");
  c_div->add_option("--p", div.p, "Reference distribution file")->required();
  c_div->add_option("--q", div.q, "Model distribution file")->required();

  CheckArgs chk;
  auto* c_chk = app.add_subcommand("check", "Fairness report for a labeled pair");
  c_chk->add_option("--f", chk.f, "Generator name");
  c_chk->add_option("--p", chk.p, "Reference distribution file")->required();
  c_chk->add_option("--q", chk.q, "Model distribution file")->required();
  c_chk->add_option("--delta", chk.delta, "Tolerance for the pass flags");
  c_chk->add_option("--support-tol", chk.support_tol, "Mass below which a cell is off-support");

  BoundArgs bnd;
  auto* c_bnd = app.add_subcommand("bound", "Check the closure lower bound on a family");
  c_bnd->add_option("--f", bnd.f, "Generator name");
  c_bnd->add_option("--p", bnd.p, "Reference distribution file")->required();
  c_bnd->add_option("--family", bnd.family, "Directory of candidate distribution files")
      ->required();
  c_bnd->add_option("--delta", bnd.delta, "EGT tolerance");

  CounterexampleArgs ce;
  auto* c_ce = app.add_subcommand("counterexample", "Build an MGO/EGO-fair, EGT-unfair model");
  c_ce->add_option("--f", ce.f, "Generator name");
  c_ce->add_option("--p", ce.p, "Reference distribution file (equal proportions)")->required();
  c_ce->add_option("--epsilon", ce.epsilon, "Global divergence");
  c_ce->add_option("--gamma", ce.gamma, "EGT gap");
  c_ce->add_option("--bar-a", ce.bar_a, "Disadvantaged group");

  LevelsetArgs ls;
  auto* c_ls = app.add_subcommand("levelset", "Level set of the rescaled-Gaussian sweep");
  c_ls->add_option("--f", ls.f, "Generator name");
  c_ls->add_option("--p", ls.p, "Reference distribution file (default: warm-up target)");
  c_ls->add_option("--epsilon", ls.epsilon, "Level");
  c_ls->add_option("--level-tol", ls.level_tol, "Bisection tolerance on the level");
  c_ls->add_option("--field", ls.field, "Also write the full sweep to this CSV");
  c_ls->add_option("--mu-lo", ls.grid.mu.lo);
  c_ls->add_option("--mu-hi", ls.grid.mu.hi);
  c_ls->add_option("--mu-n", ls.grid.mu.n);
  c_ls->add_option("--sigma-lo", ls.grid.sigma.lo);
  c_ls->add_option("--sigma-hi", ls.grid.sigma.hi);
  c_ls->add_option("--sigma-n", ls.grid.sigma.n);

  TrainArgs tr;
  auto* c_tr = app.add_subcommand("train", "Train a histogram model");
  c_tr->add_option("--method", tr.method, "baseline|conditional|reweighted|minmax|regularized");
  c_tr->add_option("--f", tr.f, "Generator name");
  c_tr->add_option("--p", tr.p, "Reference distribution file")->required();
  c_tr->add_option("--config", tr.config, "JSON training config")->required();

  DiffusionArgs dif;
  auto* c_dif = app.add_subcommand("train-diffusion", "Train the affine toy diffusion model");
  c_dif->add_option("--method", dif.method, "baseline|conditional|reweighted|minmax");
  c_dif->add_option("--config", dif.config, "JSON config")->required();

  SampleArgs smp;
  auto* c_smp = app.add_subcommand("sample", "Draw samples, optionally rejection-filtered");
  c_smp->add_option("--q", smp.q, "Distribution file to sample")->required();
  c_smp->add_option("--n", smp.n, "Number of draws")->required();
  c_smp->add_option("--reject", smp.reject, "mgo or ego");
  c_smp->add_option("--target", smp.target, "Distribution file giving MGO target proportions");
  c_smp->add_flag("--exact-counts", smp.exact, "Trim accepted counts to the exact target");

  ScenarioArgs sc;
  auto* c_sc = app.add_subcommand("scenario", "Run a configured end-to-end scenario");
  c_sc->add_option("name", sc.name, "brittleness|figure1|method-comparison|bound-check");
  c_sc->add_option("--config", sc.config, "JSON scenario config")->required();

  TableArgs tb;
  auto* c_tb = app.add_subcommand("table", "Comparison table from run records");
  c_tb->add_option("records", tb.records, "records.json files")->required();

  for (CLI::App* sub : app.get_subcommands({})) sub->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }
  g.seed_set = seed_opt->count() > 0;

  try {
    if (c_div->parsed()) return cmd_divergence(div);
    if (c_chk->parsed()) return cmd_check(chk);
    if (c_bnd->parsed()) return cmd_bound(bnd);
    if (c_ce->parsed()) return cmd_counterexample(ce);
    if (c_ls->parsed()) return cmd_levelset(ls);
    if (c_tr->parsed()) return cmd_train(tr);
    if (c_dif->parsed()) return cmd_train_diffusion(dif);
    if (c_smp->parsed()) return cmd_sample(smp);
    if (c_sc->parsed()) return cmd_scenario(sc);
    if (c_tb->parsed()) return cmd_table(tb);
  } catch (const PropertyViolation& e) {
    std::cerr << "property violation: " << e.what() << "\n";
    return 3;
  } catch (const NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return 2;
  } catch (const ValidationError& e) {
    std::cerr << "validation error: " << e.what() << "\n";
    return 1;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "validation error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
