#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "lsem/error.hpp"
#include "lsem/graph.hpp"
#include "lsem/matrix.hpp"
#include "lsem/random.hpp"
#include "lsem/recovery.hpp"

namespace lsem {

/// max over entries with a(i,j) != 0 of |a(i,j) - b(i,j)| / |a(i,j)|.
/// Entries where the reference is zero are skipped, so the measure is not
/// symmetric in its arguments.
inline double rel_dist(const Matrix& a, const Matrix& b) {
  require_same_shape(a, b, "rel_dist: shapes differ");
  auto av = a.values();
  auto bv = b.values();
  double worst = 0.0;
  bool any = false;
  for (std::size_t k = 0; k < av.size(); ++k) {
    if (av[k] == 0.0) continue;
    any = true;
    worst = std::max(worst, std::abs(av[k] - bv[k]) / std::abs(av[k]));
  }
  if (!any) throw Error(ErrorCode::AllZeroReference, "rel_dist: reference matrix is identically zero");
  return worst;
}

enum class PerturbationMode { GaussianAdditive, RelativeGamma, UniformAdditive };
enum class PerturbationTarget { NonzeroEntries, AllEntries };

/// How a covariance matrix is perturbed.
///  - GaussianAdditive: add N(0, magnitude^2) per entry.
///  - RelativeGamma: e(i,j) uniform in [-g|S(i,j)|, g|S(i,j)|], rescaled so the
///    largest |e(i,j)| / |S(i,j)| equals g exactly.
///  - UniformAdditive: add the constant `magnitude` to every targeted entry.
/// With `symmetric`, one draw per unordered pair is mirrored to (j, i).
struct PerturbationSpec {
  PerturbationMode mode = PerturbationMode::GaussianAdditive;
  double magnitude = 1e-6;
  PerturbationTarget target = PerturbationTarget::NonzeroEntries;
  bool symmetric = true;
};

inline const char* to_string(PerturbationMode m) {
  switch (m) {
    case PerturbationMode::GaussianAdditive: return "gaussian";
    case PerturbationMode::RelativeGamma: return "relative";
    case PerturbationMode::UniformAdditive: return "uniform";
  }
  return "?";
}

inline Matrix perturb(const Matrix& sigma, const PerturbationSpec& spec, Rng& rng) {
  if (!std::isfinite(spec.magnitude) || spec.magnitude < 0.0)
    throw Error(ErrorCode::InvalidArgument, "perturbation magnitude must be finite and nonnegative");
  const std::size_t rows = sigma.rows();
  const std::size_t cols = sigma.cols();
  const bool mirror = spec.symmetric && sigma.is_square();
  auto targeted = [&](std::size_t i, std::size_t j) {
    return spec.target == PerturbationTarget::AllEntries || sigma(i, j) != 0.0;
  };

  Matrix e(rows, cols);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  for (std::size_t i = 0; i < rows; ++i) {
    for (std::size_t j = mirror ? i : 0; j < cols; ++j) {
      if (!targeted(i, j)) continue;
      double d = 0.0;
      switch (spec.mode) {
        case PerturbationMode::GaussianAdditive: d = spec.magnitude * normal(rng); break;
        case PerturbationMode::RelativeGamma: d = spec.magnitude * std::abs(sigma(i, j)) * unit(rng); break;
        case PerturbationMode::UniformAdditive: d = spec.magnitude; break;
      }
      e(i, j) = d;
      if (mirror) e(j, i) = d;
    }
  }

  if (spec.mode == PerturbationMode::RelativeGamma && spec.magnitude > 0.0) {
    double worst = 0.0;
    for (std::size_t i = 0; i < rows; ++i)
      for (std::size_t j = 0; j < cols; ++j)
        if (sigma(i, j) != 0.0) worst = std::max(worst, std::abs(e(i, j)) / std::abs(sigma(i, j)));
    if (worst > 0.0) {
      const double factor = spec.magnitude / worst;
      for (double& x : e.values()) x *= factor;
    }
  }
  return sigma + e;
}

struct Histogram {
  std::vector<double> edges;
  std::vector<std::size_t> counts;
};

/// `bins` log-spaced bins spanning the observed positive range. Zeros fall in
/// the first bin. A single distinct value gets a one-decade window around it.
inline Histogram log_histogram(const std::vector<double>& values, std::size_t bins = 30) {
  Histogram h;
  double lo = std::numeric_limits<double>::infinity();
  double hi = 0.0;
  for (double v : values)
    if (v > 0.0 && std::isfinite(v)) {
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
  if (!(hi > 0.0)) return h;
  double llo = std::log10(lo);
  double lhi = std::log10(hi);
  if (lhi - llo < 1e-12) {
    llo -= 0.5;
    lhi += 0.5;
  }
  h.edges.resize(bins + 1);
  for (std::size_t k = 0; k <= bins; ++k)
    h.edges[k] = std::pow(10.0, llo + (lhi - llo) * static_cast<double>(k) / static_cast<double>(bins));
  h.counts.assign(bins, 0);
  for (double v : values) {
    if (!std::isfinite(v)) continue;
    std::size_t b = 0;
    if (v > 0.0) {
      const double t = (std::log10(v) - llo) / (lhi - llo) * static_cast<double>(bins);
      b = static_cast<std::size_t>(std::clamp(t, 0.0, static_cast<double>(bins - 1)));
    }
    ++h.counts[b];
  }
  return h;
}

struct ConditionReport {
  std::size_t trials = 0;
  std::vector<double> kappas;  // successful trials only, in trial order
  double mean_kappa = std::numeric_limits<double>::quiet_NaN();
  std::size_t failed_trials = 0;
  Histogram histogram;
};

inline ConditionReport summarize_kappas(std::size_t trials, std::vector<double> kappas, std::size_t failed) {
  ConditionReport r;
  r.trials = trials;
  r.failed_trials = failed;
  if (!kappas.empty())
    r.mean_kappa = std::accumulate(kappas.begin(), kappas.end(), 0.0) / static_cast<double>(kappas.size());
  r.histogram = log_histogram(kappas);
  r.kappas = std::move(kappas);
  return r;
}

namespace detail {
inline RecoveryResult baseline_recovery(const Matrix& sigma, const MixedGraph& g) {
  try {
    return recover_lambda(sigma, g);
  } catch (const Error& e) {
    if (!is_numerical(e.code())) throw;
    throw Error(ErrorCode::BaselineRecoveryFailed, std::string("unperturbed recovery failed: ") + e.what(), e.node());
  }
}
}  // namespace detail

/// Monte Carlo estimate of E[RelDist(Lambda, Lambda~) / RelDist(Sigma, Sigma~)].
/// Lambda is recovered from the unperturbed Sigma. Trial r uses its own
/// generator seeded from one base draw of `rng` and r, so the report does not
/// depend on execution order. Trials whose recovery fails are counted and
/// left out of the mean.
inline ConditionReport randomized_condition_number(const Matrix& sigma, const MixedGraph& g,
                                                   const PerturbationSpec& spec, std::size_t trials, Rng& rng) {
  if (!(spec.magnitude > 0.0) || !std::isfinite(spec.magnitude))
    throw Error(ErrorCode::InvalidArgument, "perturbation magnitude must be positive");
  const Matrix lambda = detail::baseline_recovery(sigma, g).lambda_hat;
  const std::uint64_t base = rng();
  std::vector<double> kappas;
  kappas.reserve(trials);
  std::size_t failed = 0;
  for (std::size_t r = 0; r < trials; ++r) {
    Rng trial_rng(derive_seed(base, r));
    const Matrix tilde = perturb(sigma, spec, trial_rng);
    try {
      const double ds = rel_dist(sigma, tilde);
      const double dl = rel_dist(lambda, recover_lambda(tilde, g).lambda_hat);
      if (!(ds > 0.0) || !std::isfinite(dl)) {
        ++failed;
        continue;
      }
      kappas.push_back(dl / ds);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::NearSingularSystem && e.code() != ErrorCode::AllZeroReference) throw;
      ++failed;
    }
  }
  return summarize_kappas(trials, std::move(kappas), failed);
}

enum class Verdict { WellConditioned, IllConditioned };

inline const char* to_string(Verdict v) {
  return v == Verdict::WellConditioned ? "well-conditioned" : "ill-conditioned";
}

struct HeuristicResult {
  Verdict verdict = Verdict::WellConditioned;
  double mean_kappa = 0.0;
  double eps = 0.0;
  double tau = 0.0;
  std::size_t trials = 0;
  std::size_t failed_trials = 0;
  std::vector<double> kappas;
  std::string explanation;
};

/// Default noise level and trial count of the practitioner check: 1/n^4 and n^4.
inline double heuristic_default_eps(std::size_t n) {
  const double nn = static_cast<double>(n);
  return 1.0 / (nn * nn * nn * nn);
}
inline std::size_t heuristic_default_trials(std::size_t n) { return n * n * n * n; }

/// Practitioner's conditioning check. Each trial adds N(0, eps^2) to every
/// entry of Sigma (mirrored, so Sigma~ stays symmetric), recovers, and records
/// the absolute ratio max|Lambda~ - Lambda| / max|Sigma~ - Sigma|. The mean
/// ratio is compared against `tau`.
inline HeuristicResult condition_heuristic(const Matrix& sigma, const MixedGraph& g, double tau,
                                           std::optional<std::size_t> trials_override,
                                           std::optional<double> eps_override, Rng& rng) {
  if (!(tau > 0.0)) throw Error(ErrorCode::InvalidArgument, "threshold tau must be positive");
  const std::size_t n = g.size();
  HeuristicResult res;
  res.tau = tau;
  res.eps = eps_override.value_or(heuristic_default_eps(n));
  res.trials = trials_override.value_or(heuristic_default_trials(n));
  if (!(res.eps > 0.0)) throw Error(ErrorCode::InvalidArgument, "eps must be positive");
  if (res.trials == 0) throw Error(ErrorCode::InvalidArgument, "trials must be positive");

  const Matrix lambda = detail::baseline_recovery(sigma, g).lambda_hat;
  const PerturbationSpec spec{PerturbationMode::GaussianAdditive, res.eps, PerturbationTarget::AllEntries, true};
  const std::uint64_t base = rng();
  for (std::size_t r = 0; r < res.trials; ++r) {
    Rng trial_rng(derive_seed(base, r));
    const Matrix tilde = perturb(sigma, spec, trial_rng);
    const double ds = max_abs(tilde - sigma);
    try {
      const Matrix lt = recover_lambda(tilde, g).lambda_hat;
      const double dl = max_abs(lt - lambda);
      if (!(ds > 0.0) || !std::isfinite(dl)) {
        ++res.failed_trials;
        continue;
      }
      res.kappas.push_back(dl / ds);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::NearSingularSystem) throw;
      ++res.failed_trials;
    }
  }
  if (res.kappas.empty()) {
    res.mean_kappa = std::numeric_limits<double>::infinity();
  } else {
    res.mean_kappa =
        std::accumulate(res.kappas.begin(), res.kappas.end(), 0.0) / static_cast<double>(res.kappas.size());
  }
  res.verdict = res.mean_kappa >= tau ? Verdict::IllConditioned : Verdict::WellConditioned;
  res.explanation = "mean kappa " + format_double(res.mean_kappa) + (res.mean_kappa >= tau ? " >= " : " < ") +
                    "tau " + format_double(tau) + " over " + std::to_string(res.kappas.size()) + " trials";
  if (res.failed_trials > 0)
    res.explanation += "; " + std::to_string(res.failed_trials) + " of " + std::to_string(res.trials) +
                       " perturbed recoveries failed, which itself indicates ill-conditioning";
  return res;
}

/// Local-dominance diagnostics for a path covariance.
struct ModelCheckReport {
  double alpha_min = 0.0;
  double lambda_param = 0.0;
  bool satisfied = false;
  /// Indexed by i in 0..n-2; empty where the neighbour is out of range.
  std::vector<std::optional<double>> left_ratio;    // |Sigma(i-1,i)|   / Sigma(i,i)
  std::vector<std::optional<double>> right_ratio;   // |Sigma(i,i+1)|   / Sigma(i,i)
  std::vector<std::optional<double>> across_ratio;  // |Sigma(i-1,i+1)| / Sigma(i,i)
  double min_abs_lambda = 0.0;
  double max_abs_lambda = 0.0;

  /// Only the covariance half of the assumption, at threshold `zeta`.
  bool data_property_holds(double zeta) const { return alpha_min <= zeta; }
};

inline constexpr double kLocalDominanceAlpha = 0.2;

inline ModelCheckReport check_model_assumptions(const Matrix& sigma, const Matrix& lambda) {
  const std::size_t n = sigma.rows();
  if (n < 2 || !sigma.is_square()) throw Error(ErrorCode::NotAPath, "need an n x n covariance with n >= 2");
  if (lambda.rows() != n || lambda.cols() != n) throw Error(ErrorCode::NotAPath, "Lambda shape does not match Sigma");
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      if (j != i + 1 && lambda(i, j) != 0.0) throw Error(ErrorCode::NotAPath, "Lambda has weight off the path");

  ModelCheckReport rep;
  rep.left_ratio.resize(n - 1);
  rep.right_ratio.resize(n - 1);
  rep.across_ratio.resize(n - 1);
  double alpha = 0.0;
  for (std::size_t i = 0; i + 1 < n; ++i) {
    const double d = sigma(i, i);
    rep.right_ratio[i] = std::abs(sigma(i, i + 1)) / d;
    alpha = std::max(alpha, *rep.right_ratio[i]);
    if (i > 0) {
      rep.left_ratio[i] = std::abs(sigma(i - 1, i)) / d;
      rep.across_ratio[i] = std::abs(sigma(i - 1, i + 1)) / d;
      alpha = std::max({alpha, *rep.left_ratio[i], *rep.across_ratio[i]});
    }
  }
  rep.alpha_min = alpha;
  rep.min_abs_lambda = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i + 1 < n; ++i) {
    rep.min_abs_lambda = std::min(rep.min_abs_lambda, std::abs(lambda(i, i + 1)));
    rep.max_abs_lambda = std::max(rep.max_abs_lambda, std::abs(lambda(i, i + 1)));
  }
  rep.lambda_param = 1.0 / rep.min_abs_lambda;
  const double nn = static_cast<double>(n);
  rep.satisfied = rep.alpha_min <= kLocalDominanceAlpha && rep.min_abs_lambda >= 1.0 / (nn * nn) &&
                  rep.max_abs_lambda <= 1.0;
  return rep;
}

struct KappaBound {
  double tau = 0.0;
  double beta_c = 0.0;
  double bound = 0.0;
  /// gamma <= 1/n^6, the perturbation size under which the bound is derived.
  bool gamma_within_model = false;
};

/// Upper bound lambda * beta_c / (1 - gamma) on the relative condition ratio
/// of the path recurrence, with tau = 1 + 5 n gamma and
///   beta_c = ((3 + 3 tau) alpha + (tau + 1)) / (1 - (tau + 2) alpha - (tau + 1) alpha^2 - 4 n gamma).
inline KappaBound theoretical_kappa_bound(double alpha, double gamma, std::size_t n, double lambda_param) {
  if (!(alpha >= 0.0 && alpha <= kLocalDominanceAlpha))
    throw Error(ErrorCode::BoundInapplicable, "alpha must lie in [0, 1/5]");
  if (!(gamma >= 0.0 && gamma < 1.0)) throw Error(ErrorCode::BoundInapplicable, "gamma must lie in [0, 1)");
  if (!(lambda_param > 0.0) || !std::isfinite(lambda_param))
    throw Error(ErrorCode::BoundInapplicable, "lambda parameter must be positive and finite");
  const double nn = static_cast<double>(n);
  KappaBound kb;
  kb.tau = 1.0 + 5.0 * nn * gamma;
  const double den = 1.0 - (kb.tau + 2.0) * alpha - (kb.tau + 1.0) * alpha * alpha - 4.0 * nn * gamma;
  if (!(den > 0.0)) throw Error(ErrorCode::BoundInapplicable, "beta_c denominator is not positive");
  kb.beta_c = ((3.0 + 3.0 * kb.tau) * alpha + (kb.tau + 1.0)) / den;
  kb.bound = lambda_param * kb.beta_c / (1.0 - gamma);
  kb.gamma_within_model = gamma <= 1.0 / std::pow(nn, 6.0);
  return kb;
}

}  // namespace lsem
