#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

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

namespace py = pybind11;
using namespace egt;

namespace {

py::object ext(const ExtendedReal& x) {
  return py::float_(x.is_infinite() ? std::numeric_limits<double>::infinity() : x.value());
}

std::vector<double> vec(std::span<const double> s) { return {s.begin(), s.end()}; }

py::dict report_dict(const FairnessReport& r) {
  return py::module_::import("json").attr("loads")(to_json(r).dump());
}

void register_errors(py::module_& m) {
  static py::exception<Error> base(m, "Error", PyExc_RuntimeError);
  static py::exception<ValidationError> validation(m, "ValidationError", base.ptr());
  static py::exception<NumericalError> numerical(m, "NumericalError", base.ptr());
  static py::exception<PropertyViolation> property(m, "PropertyViolation", base.ptr());
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const ValidationError& e) {
      PyErr_SetString(validation.ptr(), e.what());
    } catch (const NumericalError& e) {
      PyErr_SetString(numerical.ptr(), e.what());
    } catch (const PropertyViolation& e) {
      PyErr_SetString(property.ptr(), e.what());
    } catch (const Error& e) {
      PyErr_SetString(base.ptr(), e.what());
    }
  });
}

void register_grid(py::module_& m) {
  py::class_<GridSpec>(m, "GridSpec")
      .def(py::init([](double lo, double hi, std::size_t n) {
             GridSpec g{lo, hi, n};
             g.validate();
             return g;
           }),
           py::arg("lo"), py::arg("hi"), py::arg("n_cells"))
      .def_readonly("lo", &GridSpec::lo)
      .def_readonly("hi", &GridSpec::hi)
      .def_readonly("n_cells", &GridSpec::n_cells)
      .def("center", &GridSpec::center)
      .def("cell_of", &GridSpec::cell_of)
      .def_property_readonly("width", &GridSpec::width);

  py::class_<GriddedDensity>(m, "GriddedDensity")
      .def(py::init<GridSpec, std::vector<double>, double>(), py::arg("grid"), py::arg("mass"),
           py::arg("support_tol") = 0.0)
      .def_static("from_weights", &GriddedDensity::from_weights, py::arg("grid"),
                  py::arg("weights"), py::arg("support_tol") = 0.0)
      .def_static("uniform", &GriddedDensity::uniform)
      .def_property_readonly("grid", &GriddedDensity::grid)
      .def_property_readonly("mass", [](const GriddedDensity& d) { return vec(d.mass()); })
      .def_property_readonly("support_tol", &GriddedDensity::support_tol)
      .def("support", &GriddedDensity::support)
      .def("with_support_tol", &GriddedDensity::with_support_tol)
      .def("__len__", &GriddedDensity::size);

  py::class_<AttributePartition>(m, "AttributePartition")
      .def(py::init<GridSpec, std::vector<std::size_t>, std::vector<std::string>>(),
           py::arg("grid"), py::arg("labels"), py::arg("names") = std::vector<std::string>{})
      .def_static("half_line", &AttributePartition::half_line, py::arg("grid"),
                  py::arg("threshold") = 0.0)
      .def_property_readonly("num_groups", &AttributePartition::num_groups)
      .def_property_readonly("names", &AttributePartition::names)
      .def_property_readonly("labels", [](const AttributePartition& p) {
        return std::vector<std::size_t>(p.labels().begin(), p.labels().end());
      });

  py::class_<GroupedDistribution>(m, "GroupedDistribution")
      .def(py::init<AttributePartition, std::vector<double>,
                    std::vector<std::optional<GriddedDensity>>>(),
           py::arg("partition"), py::arg("proportions"), py::arg("conditionals"))
      .def_property_readonly("partition", &GroupedDistribution::partition)
      .def_property_readonly("num_groups", &GroupedDistribution::num_groups)
      .def_property_readonly("proportions",
                             [](const GroupedDistribution& g) { return vec(g.proportions()); })
      .def("conditional", &GroupedDistribution::conditional)
      .def("recombine", &recombine);

  m.def("decompose", &decompose, py::arg("density"), py::arg("partition"));
  m.def("warmup_target", &warmup_target, py::arg("grid"), py::arg("offset") = 0.5,
        py::arg("std_dev") = 0.3);
  m.def(
      "rescaled_gaussian_model",
      [](const GridSpec& g, double mu, double sigma, const AttributePartition& part,
         const std::vector<double>& props) {
        return rescaled_gaussian_model(g, mu, sigma, part, props);
      },
      py::arg("grid"), py::arg("mu"), py::arg("sigma"), py::arg("partition"),
      py::arg("proportions"));
  m.def("read_distribution", [](const std::filesystem::path& p) {
    DistributionFile f = read_distribution(p);
    return py::make_tuple(f.density, f.partition);
  });
  m.def("write_distribution", py::overload_cast<const std::filesystem::path&,
                                                const GroupedDistribution&>(&write_distribution));
}

void register_divergence(py::module_& m) {
  py::class_<FGenerator>(m, "FGenerator")
      .def(py::init([](const std::string& name, double base) {
             return builtin_generator(name, base);
           }),
           py::arg("name"), py::arg("log_base") = 0.0)
      .def_property_readonly("name", &FGenerator::name)
      .def("__call__", &FGenerator::operator())
      .def("at_zero", [](const FGenerator& f) { return ext(f.at_zero()); })
      .def("slope_at_infinity", [](const FGenerator& f) { return ext(f.slope_at_infinity()); })
      .def("__repr__", [](const FGenerator& f) { return "FGenerator('" + f.name() + "')"; });

  m.def("builtin_generators", [] {
    std::vector<std::string> names;
    for (const FGenerator& f : all_builtin_generators()) names.push_back(f.name());
    return names;
  });
  m.def(
      "f_divergence",
      [](const FGenerator& f, const GriddedDensity& p, const GriddedDensity& q) {
        return ext(f_divergence(f, p, q));
      },
      py::arg("f"), py::arg("p"), py::arg("q"));
  m.def(
      "precision_recall",
      [](const GriddedDensity& q, const GriddedDensity& p) {
        const PrecisionRecall pr = support_precision_recall(q, p);
        return py::make_tuple(pr.precision, pr.recall);
      },
      py::arg("q"), py::arg("p"));
  m.def(
      "decomposition_check",
      [](const FGenerator& f, const GroupedDistribution& p, const GroupedDistribution& q) {
        const DecompositionCheck c = decomposition_check(f, p, q);
        return py::make_tuple(ext(c.lhs), ext(c.rhs), c.residual);
      },
      py::arg("f"), py::arg("p"), py::arg("q"));
}

void register_fairness(py::module_& m) {
  m.def("check_mgo", [](const GroupedDistribution& p, const GroupedDistribution& q, double d) {
    const CriterionResult r = check_mgo(p, q, d);
    return py::make_tuple(r.passed, r.gap);
  });
  m.def("check_ego", [](const GroupedDistribution& q, double d) {
    const CriterionResult r = check_ego(q, d);
    return py::make_tuple(r.passed, r.gap);
  });
  m.def("check_egt", [](const FGenerator& f, const GroupedDistribution& p,
                        const GroupedDistribution& q, double d) {
    const EgtResult r = check_egt(f, p, q, d);
    py::list per;
    for (const ExtendedReal& x : r.per_group) per.append(ext(x));
    return py::make_tuple(r.passed, ext(r.gap), per);
  });
  m.def(
      "fairness_report",
      [](const FGenerator& f, const GroupedDistribution& p, const GroupedDistribution& q,
         double tol) { return report_dict(fairness_report(f, p, q, tol)); },
      py::arg("f"), py::arg("p"), py::arg("q"), py::arg("support_tol") = 0.0);
  m.def(
      "closure_optimum",
      [](const FGenerator& f, const GroupedDistribution& p,
         const std::vector<GroupedDistribution>& family) {
        const ClosureOptimum o = closure_optimum(f, p, ClosureFamily(family));
        py::list per;
        for (const ExtendedReal& x : o.per_group_min) per.append(ext(x));
        return py::dict(py::arg("q_star") = o.q_star, py::arg("value") = ext(o.value),
                        py::arg("per_group_min") = per, py::arg("argmin") = o.argmin,
                        py::arg("enumeration_verified") = o.enumeration_verified);
      },
      py::arg("f"), py::arg("p"), py::arg("family"));
  m.def(
      "verify_lower_bound",
      [](const FGenerator& f, const GroupedDistribution& p,
         const std::vector<GroupedDistribution>& family, double delta) {
        const LowerBoundReport r = verify_lower_bound(f, p, ClosureFamily(family), delta);
        return py::dict(py::arg("delta") = r.delta, py::arg("bound") = ext(r.bound),
                        py::arg("checked") = r.checked, py::arg("violations") = r.violations);
      },
      py::arg("f"), py::arg("p"), py::arg("family"), py::arg("delta"));
}

void register_counterexample(py::module_& m) {
  m.def("phi", &phi, py::arg("f"), py::arg("alpha"), py::arg("beta"));
  m.def(
      "invert_phi",
      [](const FGenerator& f, double target) {
        const PhiPoint p = invert_phi(f, target);
        return py::make_tuple(p.alpha, p.beta, p.value);
      },
      py::arg("f"), py::arg("target"));
  m.def(
      "build_q_alpha_beta",
      [](const FGenerator& f, const GriddedDensity& r, double alpha, double beta) {
        return build_q_alpha_beta(f, r, alpha, beta).q;
      },
      py::arg("f"), py::arg("r"), py::arg("alpha"), py::arg("beta"));
  m.def(
      "build_counterexample",
      [](const FGenerator& f, const GroupedDistribution& p, double epsilon, double gamma,
         std::size_t bar_a) {
        const Counterexample c = build_counterexample(f, p, {epsilon, gamma, bar_a});
        py::list per;
        for (const ExtendedReal& x : c.egt.per_group) per.append(ext(x));
        return py::dict(py::arg("q") = c.q, py::arg("targets") = c.targets,
                        py::arg("global_divergence") = ext(c.global_divergence),
                        py::arg("per_group") = per, py::arg("delta_egt") = ext(c.egt.gap),
                        py::arg("mgo_pass") = c.mgo.passed, py::arg("ego_pass") = c.ego.passed);
      },
      py::arg("f"), py::arg("p"), py::arg("epsilon") = 1.0, py::arg("gamma") = 0.5,
      py::arg("bar_a") = 0);
}

void register_level_set(py::module_& m) {
  m.def(
      "level_set",
      [](const GroupedDistribution& p, const FGenerator& f, double epsilon,
         std::tuple<double, double, std::size_t> mu, std::tuple<double, double, std::size_t> sigma,
         double level_tol) {
        SweepGrid g;
        g.mu = {std::get<0>(mu), std::get<1>(mu), std::get<2>(mu)};
        g.sigma = {std::get<0>(sigma), std::get<1>(sigma), std::get<2>(sigma)};
        g.epsilon = epsilon;
        const SweepField field = sweep(p, g, f);
        py::list out;
        for (const LevelSetPoint& pt : extract_level_set(field, epsilon, level_tol)) {
          out.append(py::dict(py::arg("mu") = pt.mu, py::arg("sigma") = pt.sigma,
                              py::arg("global") = pt.global, py::arg("cond") = pt.cond,
                              py::arg("delta_egt") = pt.delta_egt));
        }
        return out;
      },
      py::arg("p"), py::arg("f"), py::arg("epsilon") = 1.0,
      py::arg("mu") = std::make_tuple(-1.5, 1.5, std::size_t{301}),
      py::arg("sigma") = std::make_tuple(0.05, 2.0, std::size_t{301}),
      py::arg("level_tol") = 1e-4);
}

void register_sampling(py::module_& m) {
  m.def(
      "sample",
      [](const GriddedDensity& q, std::size_t n, std::uint64_t seed,
         std::optional<AttributePartition> part) {
        const SampleBatch b = sample(q, n, seed, part ? &*part : nullptr);
        return py::make_tuple(b.values, b.labels);
      },
      py::arg("q"), py::arg("n"), py::arg("seed"), py::arg("partition") = py::none());
  m.def(
      "rejection_plan",
      [](const std::vector<double>& source, const std::string& mode,
         const std::vector<double>& target) {
        RejectionMode rm;
        if (mode == "mgo") {
          rm = RejectionMode::mgo;
        } else if (mode == "ego") {
          rm = RejectionMode::ego;
        } else {
          throw ValidationError("mode must be 'mgo' or 'ego'");
        }
        const RejectionPlan plan = make_rejection_plan(source, rm, target);
        return py::dict(py::arg("target_proportions") = plan.target_proportions,
                        py::arg("acceptance") = plan.acceptance,
                        py::arg("acceptance_rate") = plan.acceptance_rate());
      },
      py::arg("source"), py::arg("mode"), py::arg("target") = std::vector<double>{});
  m.def(
      "rejection_sample",
      [](const GriddedDensity& q, const AttributePartition& part, std::size_t n,
         std::uint64_t seed, const std::vector<double>& source, const std::string& mode,
         const std::vector<double>& target) {
        const RejectionPlan plan = make_rejection_plan(
            source, mode == "ego" ? RejectionMode::ego : RejectionMode::mgo, target);
        const SampleBatch b = accepted_only(rejection_filter(sample(q, n, seed, &part), plan, seed));
        return py::make_tuple(b.values, b.labels);
      },
      py::arg("q"), py::arg("partition"), py::arg("n"), py::arg("seed"), py::arg("source"),
      py::arg("mode") = "mgo", py::arg("target") = std::vector<double>{});
}

void register_trainers(py::module_& m) {
  py::class_<EmaTracker>(m, "EmaTracker")
      .def(py::init<std::size_t, double>(), py::arg("n"), py::arg("decay") = 0.9)
      .def("update", &EmaTracker::update)
      .def("value", &EmaTracker::value)
      .def_property_readonly("values", &EmaTracker::values)
      .def("argmax", &EmaTracker::argmax);

  m.def(
      "train",
      [](const GroupedDistribution& p, const std::string& method, const FGenerator& f,
         double lr, std::size_t steps, std::size_t batch, double lambda, std::uint64_t seed,
         double mu, double sigma, double jitter) {
        TrainConfig cfg;
        cfg.method = parse_method(method);
        cfg.f = f;
        cfg.learning_rate = lr;
        cfg.steps = steps;
        cfg.batch_size = batch;
        cfg.lambda = lambda;
        cfg.seed = seed;
        cfg.validate();
        std::vector<double> props;
        if (cfg.method == Method::conditional) props = vec(p.proportions());
        const TrainResult r =
            train(gaussian_init(p.partition(), mu, sigma, jitter, seed, props), p, cfg);
        py::list history;
        for (const HistoryRow& h : r.history) {
          history.append(py::dict(py::arg("step") = h.step, py::arg("value") = h.value,
                                  py::arg("global") = h.global,
                                  py::arg("per_group") = h.per_group,
                                  py::arg("delta_egt") = h.delta_egt));
        }
        return py::make_tuple(r.model.grouped(), history);
      },
      py::arg("p"), py::arg("method"), py::arg("f"), py::arg("learning_rate") = 8.0,
      py::arg("steps") = 2000, py::arg("batch_size") = 0, py::arg("lambda_") = 0.0,
      py::arg("seed") = 0, py::arg("init_mu") = 0.4, py::arg("init_sigma") = 0.4,
      py::arg("init_jitter") = 0.05);

  m.def(
      "train_diffusion",
      [](const std::vector<std::tuple<double, double, double>>& groups, const std::string& method,
         std::size_t n_levels, double lo, double hi, double lr, std::size_t steps,
         std::size_t batch, std::uint64_t seed) {
        std::vector<GaussianGroup> gs;
        for (const auto& [mean, sd, pi] : groups) gs.push_back({mean, sd, pi});
        TrainConfig cfg;
        cfg.method = parse_method(method);
        cfg.learning_rate = lr;
        cfg.steps = steps;
        cfg.batch_size = batch;
        cfg.seed = seed;
        cfg.validate();
        const DiffusionResult r = diffusion_train(
            make_diffusion_toy(gs, n_levels, lo, hi, cfg.method == Method::conditional), cfg);
        return py::dict(py::arg("noise_levels") = r.toy.noise_levels,
                        py::arg("losses") = diffusion_losses(r.toy),
                        py::arg("gap") = diffusion_gap(r.toy));
      },
      py::arg("groups"), py::arg("method"), py::arg("n_levels") = 8, py::arg("sigma_lo") = 0.02,
      py::arg("sigma_hi") = 2.0, py::arg("learning_rate") = 0.05, py::arg("steps") = 3000,
      py::arg("batch_size") = 64, py::arg("seed") = 0);
}

void register_runner(py::module_& m) {
  m.def(
      "run_scenario",
      [](const std::string& config_json, const std::filesystem::path& dir) {
        nlohmann::json config;
        try {
          config = nlohmann::json::parse(config_json);
        } catch (const nlohmann::json::parse_error& e) {
          throw ValidationError(e.what());
        }
        const ScenarioOutcome out = run_scenario(config, dir);
        return py::make_tuple(out.exit_code, out.summary.dump(), out.table.to_csv());
      },
      py::arg("config_json"), py::arg("dir"));
}

}  // namespace

PYBIND11_MODULE(_egt, m) {
  m.doc() = "Fairness metrics, counterexamples and training for gridded generative models";
  register_errors(m);
  register_grid(m);
  register_divergence(m);
  register_fairness(m);
  register_counterexample(m);
  register_level_set(m);
  register_sampling(m);
  register_trainers(m);
  register_runner(m);
}
