#include "egt/divergence.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <limits>

#include "egt/error.hpp"

namespace egt {

double ExtendedReal::value() const {
  if (infinite_) throw NumericalError("extended real: value() on +inf");
  return value_;
}

double ExtendedReal::as_double() const {
  return infinite_ ? std::numeric_limits<double>::infinity() : value_;
}

ExtendedReal operator+(ExtendedReal a, ExtendedReal b) {
  if (a.infinite_ || b.infinite_) return ExtendedReal::infinity();
  return ExtendedReal(a.value_ + b.value_);
}

ExtendedReal operator*(double s, ExtendedReal x) {
  if (s == 0.0) return ExtendedReal(0.0);
  if (x.infinite_) {
    if (s < 0.0) throw NumericalError("extended real: negative multiple of +inf");
    return ExtendedReal::infinity();
  }
  return ExtendedReal(s * x.value_);
}

bool operator==(ExtendedReal a, ExtendedReal b) {
  if (a.infinite_ || b.infinite_) return a.infinite_ == b.infinite_;
  return a.value_ == b.value_;
}

bool operator<(ExtendedReal a, ExtendedReal b) {
  if (a.infinite_) return false;
  if (b.infinite_) return true;
  return a.value_ < b.value_;
}

std::string to_string(ExtendedReal x) {
  if (x.is_infinite()) return "inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x.value());
  return buf;
}

FGenerator::FGenerator(GeneratorKind kind, double log_base) : kind_(kind) {
  const bool log_family = kind == GeneratorKind::kl || kind == GeneratorKind::reverse_kl ||
                          kind == GeneratorKind::js;
  if (log_base <= 0.0) log_base = kind == GeneratorKind::js ? 2.0 : std::exp(1.0);
  if (log_family && (log_base == 1.0 || !std::isfinite(log_base))) {
    throw ValidationError("generator: invalid log base");
  }
  log_base_ = log_family ? log_base : 0.0;
  log_scale_ = log_family ? 1.0 / std::log(log_base) : 1.0;
  const double ln2 = std::log(2.0) * log_scale_;
  switch (kind) {
    case GeneratorKind::kl:
      name_ = "KL";
      at_zero_ = 0.0;
      slope_inf_ = ExtendedReal::infinity();
      break;
    case GeneratorKind::reverse_kl:
      name_ = "reverse-KL";
      at_zero_ = ExtendedReal::infinity();
      slope_inf_ = 0.0;
      break;
    case GeneratorKind::js:
      name_ = "JS";
      at_zero_ = ln2;
      slope_inf_ = ln2;
      break;
    case GeneratorKind::tv:
      name_ = "TV";
      at_zero_ = 0.5;
      slope_inf_ = 0.5;
      break;
    case GeneratorKind::chi2:
      name_ = "chi2";
      at_zero_ = 1.0;
      slope_inf_ = ExtendedReal::infinity();
      break;
    case GeneratorKind::precision:
      name_ = "precision";
      at_zero_ = 1.0;
      slope_inf_ = 0.0;
      break;
    case GeneratorKind::recall:
      name_ = "recall";
      at_zero_ = 0.0;
      slope_inf_ = 1.0;
      break;
    case GeneratorKind::precision_recall:
      name_ = "precision-recall";
      at_zero_ = 1.0;
      slope_inf_ = 1.0;
      break;
  }
}

double FGenerator::operator()(double t) const {
  switch (kind_) {
    case GeneratorKind::kl:
      return t * std::log(t) * log_scale_;
    case GeneratorKind::reverse_kl:
      return -std::log(t) * log_scale_;
    case GeneratorKind::js:
      return (t * std::log(2.0 * t / (t + 1.0)) + std::log(2.0 / (t + 1.0))) * log_scale_;
    case GeneratorKind::tv:
      return 0.5 * std::abs(t - 1.0);
    case GeneratorKind::chi2:
      return (t - 1.0) * (t - 1.0);
    default:
      return 0.0;
  }
}

double FGenerator::derivative(double t) const {
  switch (kind_) {
    case GeneratorKind::kl:
      return (std::log(t) + 1.0) * log_scale_;
    case GeneratorKind::reverse_kl:
      return -log_scale_ / t;
    case GeneratorKind::js:
      return std::log(2.0 * t / (t + 1.0)) * log_scale_;
    case GeneratorKind::tv:
      return t > 1.0 ? 0.5 : (t < 1.0 ? -0.5 : 0.0);
    case GeneratorKind::chi2:
      return 2.0 * (t - 1.0);
    default:
      return 0.0;
  }
}

double FGenerator::perspective(double p, double q) const {
  switch (kind_) {
    case GeneratorKind::kl:
      return p * (std::log(p) - std::log(q)) * log_scale_;
    case GeneratorKind::reverse_kl:
      return q * (std::log(q) - std::log(p)) * log_scale_;
    case GeneratorKind::js: {
      const double s = p + q;
      return (p * std::log(2.0 * p / s) + q * std::log(2.0 * q / s)) * log_scale_;
    }
    case GeneratorKind::tv:
      return 0.5 * std::abs(p - q);
    case GeneratorKind::chi2:
      return (p - q) * (p - q) / q;
    default:
      return 0.0;
  }
}

double FGenerator::perspective_dq(double p, double q) const {
  if (p == 0.0) {
    if (at_zero_.is_infinite()) throw NumericalError("generator: f(0) is infinite");
    return at_zero_.value();
  }
  switch (kind_) {
    case GeneratorKind::kl:
      return -(p / q) * log_scale_;
    case GeneratorKind::reverse_kl:
      return (std::log(q / p) + 1.0) * log_scale_;
    case GeneratorKind::js:
      return std::log(2.0 * q / (p + q)) * log_scale_;
    case GeneratorKind::tv:
      return q > p ? 0.5 : (q < p ? -0.5 : 0.0);
    case GeneratorKind::chi2: {
      const double t = p / q;
      return 1.0 - t * t;
    }
    default:
      return 0.0;
  }
}

bool FGenerator::strictly_convex() const {
  return kind_ == GeneratorKind::kl || kind_ == GeneratorKind::reverse_kl ||
         kind_ == GeneratorKind::js || kind_ == GeneratorKind::chi2;
}

bool FGenerator::support_based() const {
  return kind_ == GeneratorKind::precision || kind_ == GeneratorKind::recall ||
         kind_ == GeneratorKind::precision_recall;
}

FGenerator builtin_generator(std::string_view name, double log_base) {
  std::string key(name);
  std::transform(key.begin(), key.end(), key.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (key == "kl") return FGenerator(GeneratorKind::kl, log_base);
  if (key == "reverse-kl" || key == "reverse_kl") {
    return FGenerator(GeneratorKind::reverse_kl, log_base);
  }
  if (key == "js") return FGenerator(GeneratorKind::js, log_base);
  if (key == "tv") return FGenerator(GeneratorKind::tv);
  if (key == "chi2") return FGenerator(GeneratorKind::chi2);
  if (key == "precision") return FGenerator(GeneratorKind::precision);
  if (key == "recall") return FGenerator(GeneratorKind::recall);
  if (key == "precision-recall" || key == "pr") {
    return FGenerator(GeneratorKind::precision_recall);
  }
  throw ValidationError("unknown generator '" + std::string(name) + "'");
}

std::vector<FGenerator> all_builtin_generators() {
  return {FGenerator(GeneratorKind::kl),        FGenerator(GeneratorKind::reverse_kl),
          FGenerator(GeneratorKind::js),        FGenerator(GeneratorKind::tv),
          FGenerator(GeneratorKind::chi2),      FGenerator(GeneratorKind::precision),
          FGenerator(GeneratorKind::recall),    FGenerator(GeneratorKind::precision_recall)};
}

ExtendedReal f_divergence(const FGenerator& f, const GriddedDensity& p, const GriddedDensity& q) {
  if (!(p.grid() == q.grid())) throw ValidationError("f_divergence: grid mismatch");
  double total = 0.0;
  double escaped = 0.0;
  bool infinite = false;
  for (std::size_t i = 0; i < q.size(); ++i) {
    const double qi = q[i];
    const double pi = p[i];
    if (!q.in_support(i)) {
      escaped += pi;
      continue;
    }
    if (!p.in_support(i)) {
      if (f.at_zero().is_infinite()) {
        infinite = true;
      } else {
        total += qi * f.at_zero().value();
      }
      continue;
    }
    total += f.perspective(pi, qi);
  }
  if (escaped > 0.0) {
    if (f.slope_at_infinity().is_infinite()) {
      infinite = true;
    } else {
      total += f.slope_at_infinity().value() * escaped;
    }
  }
  if (std::isnan(total)) throw NumericalError("f_divergence: generator produced NaN");
  if (infinite || std::isinf(total)) return ExtendedReal::infinity();
  // Rounding can leave tiny negative sums when P == Q.
  return ExtendedReal(std::max(total, 0.0));
}

PrecisionRecall support_precision_recall(const GriddedDensity& q, const GriddedDensity& p) {
  if (!(p.grid() == q.grid())) throw ValidationError("support_precision_recall: grid mismatch");
  PrecisionRecall pr;
  for (std::size_t i = 0; i < q.size(); ++i) {
    if (p.in_support(i)) pr.precision += q[i];
    if (q.in_support(i)) pr.recall += p[i];
  }
  pr.precision = std::min(pr.precision, 1.0);
  pr.recall = std::min(pr.recall, 1.0);
  return pr;
}

DecompositionCheck decomposition_check(const FGenerator& f, const GroupedDistribution& p,
                                       const GroupedDistribution& q, double mgo_tol) {
  if (!(p.partition() == q.partition())) {
    throw ValidationError("decomposition_check: partition mismatch");
  }
  if (!p.is_nontrivial()) throw ValidationError("decomposition_check: P is trivial");
  for (std::size_t a = 0; a < p.num_groups(); ++a) {
    if (std::abs(p.proportion(a) - q.proportion(a)) > mgo_tol) {
      throw ValidationError("decomposition_check: matching proportions violated for group " +
                            std::to_string(a));
    }
  }
  DecompositionCheck out;
  out.lhs = f_divergence(f, recombine(p), recombine(q));
  ExtendedReal rhs = 0.0;
  for (std::size_t a = 0; a < p.num_groups(); ++a) {
    rhs = rhs + q.proportion(a) * f_divergence(f, p.conditional(a), q.conditional(a));
  }
  out.rhs = rhs;
  if (out.lhs.is_infinite() || out.rhs.is_infinite()) {
    out.residual = out.lhs.is_infinite() == out.rhs.is_infinite()
                       ? 0.0
                       : std::numeric_limits<double>::infinity();
  } else {
    out.residual = std::abs(out.lhs.value() - out.rhs.value());
  }
  return out;
}

}  // namespace egt
