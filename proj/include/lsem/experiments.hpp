#pragma once

// Experiment drivers behind the command-line tool. Each returns its outputs
// in memory (file name -> contents) so the caller can validate everything
// before touching the filesystem.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "lsem/error.hpp"
#include "lsem/graph.hpp"
#include "lsem/instances.hpp"
#include "lsem/matrix.hpp"
#include "lsem/random.hpp"
#include "lsem/recovery.hpp"
#include "lsem/scm.hpp"
#include "lsem/serialize.hpp"
#include "lsem/stability.hpp"

namespace lsem::experiments {

class CsvTable {
 public:
  explicit CsvTable(std::vector<std::string> header) : header_(std::move(header)) {}

  /// Empty optionals become empty cells.
  void add_row(const std::vector<std::optional<double>>& cells) {
    std::vector<std::string> row;
    row.reserve(cells.size());
    for (const auto& c : cells) row.push_back(c && !std::isnan(*c) ? format_double(*c) : std::string());
    rows_.push_back(std::move(row));
  }
  void add_text_row(std::vector<std::string> row) { rows_.push_back(std::move(row)); }

  std::size_t size() const { return rows_.size(); }

  std::string str() const {
    std::ostringstream os;
    auto line = [&](const std::vector<std::string>& r) {
      for (std::size_t k = 0; k < r.size(); ++k) os << (k ? "," : "") << r[k];
      os << '\n';
    };
    line(header_);
    for (const auto& r : rows_) line(r);
    return os.str();
  }

 private:
  std::vector<std::string> header_;
  std::vector<std::vector<std::string>> rows_;
};

struct Output {
  std::map<std::string, std::string> files;
  Json summary = Json::object();
};

inline std::size_t dimension_or_default(std::size_t d, std::size_t n) { return d == 0 ? default_dimension(n) : d; }

inline std::string kappa_csv(const std::vector<double>& kappas) {
  CsvTable t({"trial", "kappa"});
  for (std::size_t r = 0; r < kappas.size(); ++r) t.add_row({static_cast<double>(r), kappas[r]});
  return t.str();
}

inline std::string histogram_csv(const Histogram& h) {
  CsvTable t({"bin_lo", "bin_hi", "count"});
  for (std::size_t b = 0; b < h.counts.size(); ++b)
    t.add_row({h.edges[b], h.edges[b + 1], static_cast<double>(h.counts[b])});
  return t.str();
}

// ---------------------------------------------------------------------------
// local-dominance

struct LocalDominanceConfig {
  std::size_t n = 50;
  double h = 1.0;
  std::size_t d = 0;  // 0: default_dimension(n)
  std::size_t runs = 3;
};

/// One CSV per run with |Sigma(i,i)|, |Sigma(i,i+1)|, |Sigma(i-1,i)|,
/// |Sigma(i-1,i+1)| for every 0-based i (blank where out of range).
inline Output local_dominance(const LocalDominanceConfig& cfg, std::uint64_t seed) {
  if (cfg.n < 2) throw Error(ErrorCode::InvalidSize, "n must be at least 2");
  if (cfg.runs == 0) throw Error(ErrorCode::InvalidArgument, "runs must be positive");
  const MixedGraph g = path_graph(cfg.n);
  const GeneratorConfig gen{cfg.h, dimension_or_default(cfg.d, cfg.n)};
  Output out;
  Json alphas = Json::array();
  for (std::size_t run = 0; run < cfg.runs; ++run) {
    Rng rng(derive_seed(seed, run));
    const Parameters p = random_parameters(g, gen, rng);
    const Matrix s = forward_covariance(p);
    CsvTable t({"i", "sigma_ii", "sigma_i_ip1", "sigma_im1_i", "sigma_im1_ip1"});
    const std::size_t n = cfg.n;
    for (std::size_t i = 0; i < n; ++i) {
      std::optional<double> right, left, across;
      if (i + 1 < n) right = std::abs(s(i, i + 1));
      if (i > 0) left = std::abs(s(i - 1, i));
      if (i > 0 && i + 1 < n) across = std::abs(s(i - 1, i + 1));
      t.add_row({static_cast<double>(i), std::abs(s(i, i)), right, left, across});
    }
    out.files["local_dominance_run" + std::to_string(run) + ".csv"] = t.str();
    alphas.push_back(check_model_assumptions(s, p.lambda).alpha_min);
  }
  out.summary["alpha_min"] = std::move(alphas);
  return out;
}

// ---------------------------------------------------------------------------
// perturb

enum class ErrorSource { Both, SamplingOnly, PerturbationOnly };

inline ErrorSource parse_error_source(const std::string& s) {
  if (s == "both") return ErrorSource::Both;
  if (s == "sampling-only") return ErrorSource::SamplingOnly;
  if (s == "perturbation-only") return ErrorSource::PerturbationOnly;
  throw Error(ErrorCode::InvalidArgument, "error source must be both, sampling-only or perturbation-only");
}

struct PerturbConfig {
  std::size_t n = 50;
  double h = 1.0;
  std::size_t d = 0;
  ErrorSource source = ErrorSource::Both;
  double eps = 1e-6;
  std::size_t samples = 10000;
  std::size_t trials = 100;
};

/// Random path instance; each trial builds Sigma~ from finite samples and/or
/// N(0, eps^2) noise on the nonzero entries of Sigma, recovers Lambda~ and
/// records RelDist(Lambda, Lambda~) / RelDist(Sigma, Sigma~). Lambda and
/// Sigma are the exact (unperturbed) quantities.
inline Output perturb_experiment(const PerturbConfig& cfg, std::uint64_t seed) {
  if (cfg.n < 2) throw Error(ErrorCode::InvalidSize, "n must be at least 2");
  if (cfg.trials == 0) throw Error(ErrorCode::InvalidArgument, "trials must be positive");
  const bool sampling = cfg.source != ErrorSource::PerturbationOnly;
  const bool perturbing = cfg.source != ErrorSource::SamplingOnly;
  if (perturbing && !(cfg.eps > 0.0)) throw Error(ErrorCode::InvalidArgument, "eps must be positive");
  if (sampling && cfg.samples == 0) throw Error(ErrorCode::InvalidArgument, "samples must be positive");

  Rng rng(derive_seed(seed, 0));
  const MixedGraph g = path_graph(cfg.n);
  const Parameters p = random_parameters(g, {cfg.h, dimension_or_default(cfg.d, cfg.n)}, rng);
  const Matrix sigma = forward_covariance(p);
  const Matrix lambda = detail::baseline_recovery(sigma, g).lambda_hat;
  const PerturbationSpec spec{PerturbationMode::GaussianAdditive, cfg.eps, PerturbationTarget::NonzeroEntries, true};

  std::vector<double> kappas;
  std::size_t failed = 0;
  std::optional<Matrix> first_recovered;
  for (std::size_t r = 0; r < cfg.trials; ++r) {
    Rng trial(derive_seed(seed, r + 1));
    Matrix tilde = sampling ? sample_covariance(sample_observations(p, cfg.samples, trial)) : sigma;
    if (perturbing) tilde = perturb(tilde, spec, trial);
    try {
      const Matrix lt = recover_lambda(tilde, g).lambda_hat;
      if (!first_recovered) first_recovered = lt;
      const double ds = rel_dist(sigma, tilde);
      if (!(ds > 0.0)) {
        ++failed;
        continue;
      }
      kappas.push_back(rel_dist(lambda, lt) / ds);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::NearSingularSystem) throw;
      ++failed;
    }
  }
  const ConditionReport rep = summarize_kappas(cfg.trials, kappas, failed);

  Output out;
  CsvTable lam({"i", "lambda_true", "lambda_recovered", "difference"});
  for (std::size_t i = 0; i + 1 < cfg.n; ++i) {
    std::optional<double> rec, diff;
    if (first_recovered) {
      rec = (*first_recovered)(i, i + 1);
      diff = *rec - p.lambda(i, i + 1);
    }
    lam.add_row({static_cast<double>(i), p.lambda(i, i + 1), rec, diff});
  }
  out.files["lambda.csv"] = lam.str();
  out.files["kappas.csv"] = kappa_csv(rep.kappas);
  out.files["kappa_histogram.csv"] = histogram_csv(rep.histogram);
  out.summary["report"] = condition_report_to_json(rep);
  return out;
}

// ---------------------------------------------------------------------------
// bad-region

enum class RegionTarget { Lambda, Omega };

struct BadRegionConfig {
  double region_eps = -1.0;  // required; negative means unset
  RegionTarget target = RegionTarget::Lambda;
  std::size_t centers = 20;
  std::size_t trials = 100;
  double instance_eps = 1e-6;
  double perturb_eps = 1e-6;
};

/// Jitters the nonzero entries of Lambda (or Omega, symmetrically) of the
/// unstable 4-node instance by N(0, region_eps^2) and measures the mean
/// randomized condition number at each jittered center.
inline Output bad_region(const BadRegionConfig& cfg, std::uint64_t seed) {
  if (!(cfg.region_eps >= 0.0)) throw Error(ErrorCode::InvalidArgument, "--region-eps is required and must be >= 0");
  if (cfg.centers == 0 || cfg.trials == 0) throw Error(ErrorCode::InvalidArgument, "centers and trials must be positive");
  if (!(cfg.perturb_eps > 0.0)) throw Error(ErrorCode::InvalidArgument, "perturbation eps must be positive");
  const Parameters base = instability_instance(cfg.instance_eps);
  const PerturbationSpec spec{PerturbationMode::GaussianAdditive, cfg.perturb_eps, PerturbationTarget::NonzeroEntries,
                              true};
  CsvTable t({"center", "mean_kappa", "failed_trials", "trials"});
  Json means = Json::array();
  for (std::size_t c = 0; c < cfg.centers; ++c) {
    Rng rng(derive_seed(seed, c));
    Parameters p = base;
    const PerturbationSpec jitter{PerturbationMode::GaussianAdditive, cfg.region_eps,
                                  PerturbationTarget::NonzeroEntries, true};
    if (cfg.target == RegionTarget::Lambda) {
      PerturbationSpec lj = jitter;
      lj.symmetric = false;
      p.lambda = perturb(p.lambda, lj, rng);
    } else {
      p.omega = perturb(p.omega, jitter, rng);
    }
    const Matrix sigma = forward_covariance(p);
    std::optional<double> mean;
    std::size_t failed = cfg.trials;
    try {
      const ConditionReport rep = randomized_condition_number(sigma, p.graph, spec, cfg.trials, rng);
      if (!std::isnan(rep.mean_kappa)) mean = rep.mean_kappa;
      failed = rep.failed_trials;
    } catch (const Error& e) {
      if (e.code() != ErrorCode::BaselineRecoveryFailed) throw;
    }
    t.add_row({static_cast<double>(c), mean, static_cast<double>(failed), static_cast<double>(cfg.trials)});
    means.push_back(optional_number(mean));
  }
  Output out;
  out.files["bad_region.csv"] = t.str();
  out.summary["mean_kappa_per_center"] = std::move(means);
  return out;
}

// ---------------------------------------------------------------------------
// eps-sweep

struct EpsSweepConfig {
  std::vector<double> eps_values;
  std::size_t runs = 100;
  bool center = false;
};

/// For each eps: add N(0, eps^2) to every entry of the observational data,
/// rebuild Sigma~, recover, and average RelDist(Lambda, Lambda~) /
/// RelDist(Sigma, Sigma~) over the runs.
inline Output eps_sweep(const Matrix& data, const MixedGraph& g, const EpsSweepConfig& cfg, std::uint64_t seed) {
  if (data.cols() != g.size())
    throw Error(ErrorCode::ShapeMismatch, "data has " + std::to_string(data.cols()) + " columns but graph has " +
                                              std::to_string(g.size()) + " vertices");
  if (cfg.eps_values.empty()) throw Error(ErrorCode::InvalidArgument, "at least one eps value is required");
  for (double e : cfg.eps_values)
    if (!(e > 0.0)) throw Error(ErrorCode::InvalidArgument, "eps values must be positive");
  if (cfg.runs == 0) throw Error(ErrorCode::InvalidArgument, "runs must be positive");

  auto covariance = [&](const Matrix& x) { return sample_covariance(cfg.center ? center_columns(x) : x); };
  const Matrix sigma = covariance(data);
  const Matrix lambda = detail::baseline_recovery(sigma, g).lambda_hat;

  CsvTable t({"eps", "mean_kappa", "failed", "runs"});
  Json rows = Json::array();
  for (std::size_t k = 0; k < cfg.eps_values.size(); ++k) {
    const double eps = cfg.eps_values[k];
    const PerturbationSpec spec{PerturbationMode::GaussianAdditive, eps, PerturbationTarget::AllEntries, false};
    std::vector<double> kappas;
    std::size_t failed = 0;
    for (std::size_t r = 0; r < cfg.runs; ++r) {
      Rng rng(derive_seed(derive_seed(seed, k), r));
      const Matrix tilde = covariance(perturb(data, spec, rng));
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
    const ConditionReport rep = summarize_kappas(cfg.runs, kappas, failed);
    std::optional<double> mean;
    if (!std::isnan(rep.mean_kappa)) mean = rep.mean_kappa;
    t.add_row({eps, mean, static_cast<double>(failed), static_cast<double>(cfg.runs)});
    rows.push_back({{"eps", eps}, {"mean_kappa", optional_number(mean)}, {"failed", failed}});
  }
  Output out;
  out.files["eps_sweep.csv"] = t.str();
  out.summary["sweep"] = std::move(rows);
  return out;
}

// ---------------------------------------------------------------------------
// graph-families

struct FamilyPreset {
  std::string name;
  std::size_t n = 20;
  std::size_t k = 2;
  std::optional<double> drop;  // layered graph when set
};

inline std::vector<FamilyPreset> default_family_presets() {
  return {{"clique-n20-k2", 20, 2, std::nullopt},      {"clique-n30-k5", 30, 5, std::nullopt},
          {"layered-n30-k5-p0.2", 30, 5, 0.2},          {"layered-n30-k5-p0.5", 30, 5, 0.5},
          {"layered-n30-k5-p0.8", 30, 5, 0.8},          {"path-n20-k1", 20, 1, std::nullopt}};
}

inline FamilyPreset find_family_preset(const std::string& name) {
  for (const auto& p : default_family_presets())
    if (p.name == name) return p;
  throw Error(ErrorCode::InvalidArgument, "unknown graph-family preset '" + name + "'");
}

struct GraphFamiliesConfig {
  std::vector<FamilyPreset> presets = default_family_presets();
  double h = 1.0;
  std::size_t d = 0;
  std::size_t trials = 100;
  double eps = 1e-6;
  std::size_t max_redraws = 10;
};

inline MixedGraph build_family_graph(const FamilyPreset& preset, Rng& rng) {
  if (preset.drop) return layered_graph(preset.n, preset.k, *preset.drop, rng);
  return clique_of_paths(preset.n, preset.k);
}

/// Randomized condition-number histograms for clique-of-paths and layered
/// graphs. An instance whose unperturbed recovery fails is redrawn.
inline Output graph_families(const GraphFamiliesConfig& cfg, std::uint64_t seed) {
  if (cfg.presets.empty()) throw Error(ErrorCode::InvalidArgument, "no presets selected");
  if (cfg.trials == 0 || !(cfg.eps > 0.0)) throw Error(ErrorCode::InvalidArgument, "trials and eps must be positive");
  for (const auto& pr : cfg.presets) {
    if (pr.k == 0 || pr.n % pr.k != 0) throw Error(ErrorCode::InvalidSize, pr.name + ": k must divide n");
    if (pr.k > 1 && dimension_or_default(cfg.d, pr.n) < 4 * pr.k)
      throw Error(ErrorCode::InvalidArgument, pr.name + ": d must be at least 4k");
  }
  const PerturbationSpec spec{PerturbationMode::GaussianAdditive, cfg.eps, PerturbationTarget::NonzeroEntries, true};
  Output out;
  CsvTable summary({"preset", "n", "k", "p", "directed_edges", "mean_kappa", "failed", "trials", "redraws"});
  for (std::size_t idx = 0; idx < cfg.presets.size(); ++idx) {
    const FamilyPreset& pr = cfg.presets[idx];
    std::optional<ConditionReport> rep;
    std::size_t edges = 0;
    std::size_t redraw = 0;
    for (; redraw <= cfg.max_redraws && !rep; ++redraw) {
      Rng rng(derive_seed(derive_seed(seed, idx), redraw));
      const MixedGraph g = build_family_graph(pr, rng);
      const Parameters p = random_parameters(g, {cfg.h, dimension_or_default(cfg.d, pr.n)}, rng);
      try {
        rep = randomized_condition_number(forward_covariance(p), g, spec, cfg.trials, rng);
        edges = g.directed().size();
      } catch (const Error& e) {
        if (e.code() != ErrorCode::BaselineRecoveryFailed) throw;
      }
    }
    if (!rep) throw Error(ErrorCode::BaselineRecoveryFailed, pr.name + ": no recoverable instance after redraws");
    out.files["kappas_" + pr.name + ".csv"] = kappa_csv(rep->kappas);
    out.files["histogram_" + pr.name + ".csv"] = histogram_csv(rep->histogram);
    std::optional<double> mean;
    if (!std::isnan(rep->mean_kappa)) mean = rep->mean_kappa;
    summary.add_text_row({pr.name, std::to_string(pr.n), std::to_string(pr.k),
                          pr.drop ? format_double(*pr.drop) : std::string(), std::to_string(edges),
                          mean ? format_double(*mean) : std::string(), std::to_string(rep->failed_trials),
                          std::to_string(rep->trials), std::to_string(redraw - 1)});
    out.summary[pr.name] = {{"mean_kappa", optional_number(mean)}, {"failed", rep->failed_trials}};
  }
  out.files["graph_families.csv"] = summary.str();
  return out;
}

}  // namespace lsem::experiments
