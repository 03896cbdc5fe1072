// lsem: seeded experiments and file-level tools for linear structural
// equation models. Every command computes all of its outputs in memory and
// only then writes them, together with run_manifest.json, into --out.

#include <openssl/evp.h>

#include <CLI11.hpp>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "lsem/lsem.hpp"

namespace fs = std::filesystem;
using lsem::Error;
using lsem::ErrorCode;
using lsem::Json;

namespace {

constexpr int kExitValidation = 2;
constexpr int kExitNumerical = 3;

std::string sha256_hex(const std::string& bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  if (!ctx || EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr) != 1 ||
      EVP_DigestUpdate(ctx, bytes.data(), bytes.size()) != 1 || EVP_DigestFinal_ex(ctx, digest, &len) != 1) {
    EVP_MD_CTX_free(ctx);
    throw Error(ErrorCode::IoError, "SHA-256 computation failed");
  }
  EVP_MD_CTX_free(ctx);
  std::ostringstream os;
  for (unsigned int k = 0; k < len; ++k) os << std::hex << std::setw(2) << std::setfill('0') << int(digest[k]);
  return os.str();
}

/// Options shared by every subcommand, filled in by CLI11.
struct Common {
  std::optional<std::uint64_t> seed;
  std::string out = ".";
  std::string config;
};

struct Run {
  std::string command;
  CLI::App* app = nullptr;
  lsem::experiments::Output output;
  std::string plot;
};

Json effective_config(const CLI::App& app) {
  Json cfg = Json::object();
  for (const CLI::Option* opt : app.get_options()) {
    const std::string name = opt->get_name(false, true);
    if (name.rfind("--", 0) != 0 || name == "--help" || name == "--config") continue;
    const std::string key = name.substr(2);
    if (opt->count() > 0) {
      const auto& res = opt->results();
      if (opt->get_expected_max() > 1 || res.size() > 1) {
        cfg[key] = res;
      } else if (opt->get_type_size() == 0) {
        cfg[key] = true;
      } else {
        cfg[key] = res.empty() ? std::string() : res.front();
      }
    } else if (!opt->get_default_str().empty()) {
      cfg[key] = opt->get_default_str();
    }
  }
  return cfg;
}

/// Writes every output file and the manifest. The directory is created only
/// here, after all computation has succeeded.
void write_outputs(const Run& run, const Common& common) {
  const fs::path dir(common.out);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw Error(ErrorCode::IoError, "cannot create output directory " + common.out);

  Json outputs = Json::array();
  for (const auto& [name, contents] : run.output.files) {
    std::ofstream f(dir / name, std::ios::binary);
    if (!f) throw Error(ErrorCode::IoError, "cannot write " + (dir / name).string());
    f << contents;
    if (!f) throw Error(ErrorCode::IoError, "write failed for " + (dir / name).string());
    outputs.push_back({{"file", name}, {"bytes", contents.size()}, {"sha256", sha256_hex(contents)}});
  }
  Json manifest;
  manifest["command"] = run.command;
  manifest["version"] = lsem::kVersion;
  manifest["seed"] = common.seed ? Json(*common.seed) : Json(nullptr);
  manifest["config"] = effective_config(*run.app);
  manifest["outputs"] = std::move(outputs);
  manifest["summary"] = run.output.summary;
  manifest["plot"] = run.plot;
  std::ofstream f(dir / "run_manifest.json");
  if (!f) throw Error(ErrorCode::IoError, "cannot write run manifest in " + common.out);
  f << manifest.dump(2) << '\n';
}

/// Scans argv for --config FILE and turns its JSON object into extra
/// arguments for every key not already given on the command line.
std::vector<std::string> expand_config(std::vector<std::string> args) {
  std::string path;
  std::set<std::string> given;
  for (std::size_t k = 0; k < args.size(); ++k) {
    const std::string& a = args[k];
    if (a.rfind("--", 0) != 0) continue;
    const auto eq = a.find('=');
    const std::string key = a.substr(2, eq == std::string::npos ? std::string::npos : eq - 2);
    given.insert(key);
    if (key == "config") path = eq == std::string::npos ? (k + 1 < args.size() ? args[k + 1] : "") : a.substr(eq + 1);
  }
  if (path.empty()) return args;
  const Json cfg = lsem::read_json_file(path);
  if (!cfg.is_object()) throw Error(ErrorCode::ParseError, path + ": config must be a JSON object");
  auto scalar = [&](const std::string& key, const Json& v) -> std::string {
    if (v.is_string()) return v.get<std::string>();
    if (v.is_number_integer() || v.is_number_unsigned()) return v.dump();
    if (v.is_number_float()) return lsem::format_double(v.get<double>());
    throw Error(ErrorCode::ParseError, path + ": unsupported value for '" + key + "'");
  };
  for (const auto& [key, v] : cfg.items()) {
    if (given.count(key)) continue;
    if (v.is_boolean()) {
      if (v.get<bool>()) args.push_back("--" + key);
    } else if (v.is_array()) {
      for (const auto& e : v) {
        args.push_back("--" + key);
        args.push_back(scalar(key, e));
      }
    } else {
      args.push_back("--" + key);
      args.push_back(scalar(key, v));
    }
  }
  return args;
}

void add_common(CLI::App* sub, Common& c, bool stochastic) {
  auto* s = sub->add_option("--seed", c.seed, "Base seed for all random draws");
  if (stochastic) s->required();
  sub->add_option("--out", c.out, "Output directory")->capture_default_str();
  sub->add_option("--config", c.config, "JSON file of option values; command-line flags take precedence");
}

lsem::MixedGraph load_graph(const std::string& path) { return lsem::graph_from_json(lsem::read_json_file(path)); }

/// Covariance from either a matrix CSV or an observational data CSV.
lsem::Matrix load_sigma(const std::string& sigma_path, const std::string& data_path, bool center) {
  if (sigma_path.empty() == data_path.empty())
    throw Error(ErrorCode::InvalidArgument, "give exactly one of --sigma and --data");
  if (!sigma_path.empty()) return lsem::read_matrix_csv_file(sigma_path);
  const auto table = lsem::read_data_csv_file(data_path);
  return lsem::sample_covariance(center ? lsem::center_columns(table.values) : table.values);
}

std::string matrix_csv(const lsem::Matrix& m) {
  std::ostringstream os;
  lsem::write_matrix_csv(os, m);
  return os.str();
}

lsem::PerturbationMode parse_mode(const std::string& s) {
  if (s == "gaussian") return lsem::PerturbationMode::GaussianAdditive;
  if (s == "relative") return lsem::PerturbationMode::RelativeGamma;
  if (s == "uniform") return lsem::PerturbationMode::UniformAdditive;
  throw Error(ErrorCode::InvalidArgument, "mode must be gaussian, relative or uniform");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Linear structural equation model workbench"};
  app.set_help_flag("--help", "Print this help message and exit");
  app.set_version_flag("--version", std::string(lsem::kVersion));
  app.require_subcommand(1);
  Common common;
  Run run;
  namespace ex = lsem::experiments;

  // local-dominance
  ex::LocalDominanceConfig ld;
  auto* ld_cmd = app.add_subcommand("local-dominance", "Sigma diagonal vs near-diagonal magnitudes on random paths");
  ld_cmd->add_option("--n", ld.n, "Path length")->capture_default_str();
  ld_cmd->add_option("--h", ld.h, "Lambda entries ~ U[-h, h]")->capture_default_str();
  ld_cmd->add_option("--d", ld.d, "Gram vector dimension (0: max(1000, 4n))")->capture_default_str();
  ld_cmd->add_option("--runs", ld.runs, "Independent instances")->capture_default_str();
  add_common(ld_cmd, common, true);

  // perturb
  ex::PerturbConfig pc;
  std::string source = "both";
  auto* pc_cmd = app.add_subcommand("perturb", "Recovery error under sampling and/or perturbation noise");
  pc_cmd->add_option("--n", pc.n)->capture_default_str();
  pc_cmd->add_option("--h", pc.h)->capture_default_str();
  pc_cmd->add_option("--d", pc.d)->capture_default_str();
  pc_cmd->add_option("--source", source, "both, sampling-only or perturbation-only")->capture_default_str();
  pc_cmd->add_option("--eps", pc.eps, "Std of the entry perturbation")->capture_default_str();
  pc_cmd->add_option("--samples", pc.samples, "Samples per trial")->capture_default_str();
  pc_cmd->add_option("--trials", pc.trials)->capture_default_str();
  add_common(pc_cmd, common, true);

  // bad-region
  ex::BadRegionConfig br;
  std::string region_target = "lambda";
  auto* br_cmd = app.add_subcommand("bad-region", "Condition numbers around the unstable 4-node instance");
  br_cmd->add_option("--region-eps", br.region_eps, "Std of the jitter applied to each center")->required();
  br_cmd->add_option("--target", region_target, "lambda or omega")->capture_default_str();
  br_cmd->add_option("--centers", br.centers)->capture_default_str();
  br_cmd->add_option("--trials", br.trials)->capture_default_str();
  br_cmd->add_option("--instance-eps", br.instance_eps)->capture_default_str();
  br_cmd->add_option("--eps", br.perturb_eps, "Std of the covariance perturbation")->capture_default_str();
  add_common(br_cmd, common, true);

  // eps-sweep
  ex::EpsSweepConfig es;
  std::string es_data, es_graph;
  auto* es_cmd = app.add_subcommand("eps-sweep", "Mean condition ratio vs noise added to observational data");
  es_cmd->add_option("--data", es_data, "CSV with a header row, one sample per row")->required();
  es_cmd->add_option("--graph", es_graph, "Graph JSON")->required();
  es_cmd->add_option("--eps", es.eps_values, "Noise levels")->required()->delimiter(',');
  es_cmd->add_option("--runs", es.runs)->capture_default_str();
  es_cmd->add_flag("--center", es.center, "Subtract column means before forming the covariance");
  add_common(es_cmd, common, true);

  // graph-families
  ex::GraphFamiliesConfig gf;
  std::vector<std::string> presets;
  std::optional<std::size_t> gf_n, gf_k;
  std::optional<double> gf_p;
  auto* gf_cmd = app.add_subcommand("graph-families", "Condition-number histograms on clique and layered graphs");
  gf_cmd->add_option("--preset", presets, "Preset names (default: all)")->delimiter(',');
  gf_cmd->add_option("--n", gf_n, "Custom family: vertex count");
  gf_cmd->add_option("--k", gf_k, "Custom family: layer width");
  gf_cmd->add_option("--p", gf_p, "Custom family: edge drop probability (layered)");
  gf_cmd->add_option("--h", gf.h)->capture_default_str();
  gf_cmd->add_option("--d", gf.d)->capture_default_str();
  gf_cmd->add_option("--trials", gf.trials)->capture_default_str();
  gf_cmd->add_option("--eps", gf.eps)->capture_default_str();
  add_common(gf_cmd, common, true);

  // heuristic
  std::string hs_sigma, hs_data, hs_graph;
  double tau = 0.0;
  std::optional<std::size_t> hs_trials;
  std::optional<double> hs_eps;
  bool hs_center = false;
  auto* hs_cmd = app.add_subcommand("heuristic", "Well/ill-conditioned verdict for an instance");
  hs_cmd->add_option("--sigma", hs_sigma, "Covariance CSV");
  hs_cmd->add_option("--data", hs_data, "Observational data CSV");
  hs_cmd->add_option("--graph", hs_graph, "Graph JSON")->required();
  hs_cmd->add_option("--tau", tau, "Threshold on the mean ratio")->required();
  hs_cmd->add_option("--trials", hs_trials, "Override the n^4 default");
  hs_cmd->add_option("--eps", hs_eps, "Override the 1/n^4 default");
  hs_cmd->add_flag("--center", hs_center);
  add_common(hs_cmd, common, true);

  // generate
  std::string gen_graph, family = "path";
  std::size_t gen_n = 10, gen_k = 2;
  double gen_p = 0.5;
  lsem::GeneratorConfig gen{0.5, 0};
  auto* gen_cmd = app.add_subcommand("generate", "Random parameters on a bow-free graph");
  gen_cmd->add_option("--graph", gen_graph, "Graph JSON (overrides --family)");
  gen_cmd->add_option("--family", family, "path, clique or layered")->capture_default_str();
  gen_cmd->add_option("--n", gen_n)->capture_default_str();
  gen_cmd->add_option("--k", gen_k)->capture_default_str();
  gen_cmd->add_option("--p", gen_p)->capture_default_str();
  gen_cmd->add_option("--h", gen.h)->capture_default_str();
  gen_cmd->add_option("--d", gen.d, "0: max(1000, 4n)")->capture_default_str();
  add_common(gen_cmd, common, true);

  // forward
  std::string fw_params;
  auto* fw_cmd = app.add_subcommand("forward", "Exact covariance of a parameter file");
  fw_cmd->add_option("--params", fw_params, "Parameters JSON")->required();
  add_common(fw_cmd, common, false);

  // sample
  std::string sm_params;
  std::size_t sm_m = 1000;
  bool sm_center = false;
  auto* sm_cmd = app.add_subcommand("sample", "Draw observational data from a parameter file");
  sm_cmd->add_option("--params", sm_params)->required();
  sm_cmd->add_option("--m", sm_m, "Number of samples")->capture_default_str();
  sm_cmd->add_flag("--center", sm_center, "Subtract column means from the drawn batch");
  add_common(sm_cmd, common, true);

  // recover
  std::string rc_sigma, rc_data, rc_graph;
  bool rc_center = false;
  auto* rc_cmd = app.add_subcommand("recover", "Recover Lambda and Omega from a covariance or data");
  rc_cmd->add_option("--sigma", rc_sigma);
  rc_cmd->add_option("--data", rc_data);
  rc_cmd->add_option("--graph", rc_graph)->required();
  rc_cmd->add_flag("--center", rc_center);
  add_common(rc_cmd, common, false);

  // condition
  std::string cd_sigma, cd_data, cd_graph, cd_mode = "gaussian";
  std::size_t cd_trials = 100;
  double cd_eps = 1e-6;
  bool cd_all = false, cd_center = false;
  auto* cd_cmd = app.add_subcommand("condition", "Randomized condition number of an instance");
  cd_cmd->add_option("--sigma", cd_sigma);
  cd_cmd->add_option("--data", cd_data);
  cd_cmd->add_option("--graph", cd_graph)->required();
  cd_cmd->add_option("--mode", cd_mode, "gaussian, relative or uniform")->capture_default_str();
  cd_cmd->add_option("--eps", cd_eps)->capture_default_str();
  cd_cmd->add_option("--trials", cd_trials)->capture_default_str();
  cd_cmd->add_flag("--all-entries", cd_all, "Perturb every entry, not only the nonzero ones");
  cd_cmd->add_flag("--center", cd_center);
  add_common(cd_cmd, common, true);

  try {
    std::vector<std::string> args(argv + 1, argv + argc);
    args = expand_config(std::move(args));
    std::reverse(args.begin(), args.end());
    app.parse(args);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitValidation;
  } catch (const Error& e) {
    std::cerr << "error [" << lsem::to_string(e.code()) << "]: " << e.what() << '\n';
    return kExitValidation;
  }

  try {
    const std::uint64_t seed = common.seed.value_or(0);
    if (ld_cmd->parsed()) {
      run = {"local-dominance", ld_cmd, ex::local_dominance(ld, seed),
             "plot 'local_dominance_run0.csv' using 1:2 with lines title 'sigma_ii', '' using 1:3 with lines, '' using "
             "1:4 with lines, '' using 1:5 with lines"};
    } else if (pc_cmd->parsed()) {
      pc.source = ex::parse_error_source(source);
      run = {"perturb", pc_cmd, ex::perturb_experiment(pc, seed),
             "set logscale x; plot 'kappa_histogram.csv' using (sqrt($1*$2)):3 with boxes"};
    } else if (br_cmd->parsed()) {
      if (region_target == "lambda") {
        br.target = ex::RegionTarget::Lambda;
      } else if (region_target == "omega") {
        br.target = ex::RegionTarget::Omega;
      } else {
        throw Error(ErrorCode::InvalidArgument, "--target must be lambda or omega");
      }
      run = {"bad-region", br_cmd, ex::bad_region(br, seed), "plot 'bad_region.csv' using 1:2 with points"};
    } else if (es_cmd->parsed()) {
      const lsem::MixedGraph g = load_graph(es_graph);
      const auto table = lsem::read_data_csv_file(es_data);
      run = {"eps-sweep", es_cmd, ex::eps_sweep(table.values, g, es, seed),
             "set logscale xy; plot 'eps_sweep.csv' using 1:2 with linespoints"};
    } else if (gf_cmd->parsed()) {
      if (gf_n || gf_k || gf_p) {
        if (!gf_n || !gf_k) throw Error(ErrorCode::InvalidArgument, "a custom family needs both --n and --k");
        std::string name = (gf_p ? "layered" : "clique") + std::string("-n") + std::to_string(*gf_n) + "-k" +
                           std::to_string(*gf_k);
        if (gf_p) name += "-p" + lsem::format_double(*gf_p);
        gf.presets = {{name, *gf_n, *gf_k, gf_p}};
        if (!presets.empty()) throw Error(ErrorCode::InvalidArgument, "use either --preset or --n/--k/--p");
      } else if (!presets.empty()) {
        gf.presets.clear();
        for (const auto& p : presets) gf.presets.push_back(ex::find_family_preset(p));
      }
      run = {"graph-families", gf_cmd, ex::graph_families(gf, seed),
             "set logscale x; plot 'histogram_clique-n20-k2.csv' using (sqrt($1*$2)):3 with boxes"};
    } else if (hs_cmd->parsed()) {
      const lsem::MixedGraph g = load_graph(hs_graph);
      const lsem::Matrix sigma = load_sigma(hs_sigma, hs_data, hs_center);
      if (sigma.rows() != g.size() || sigma.cols() != g.size())
        throw Error(ErrorCode::ShapeMismatch, "covariance size does not match the graph");
      lsem::Rng rng(seed);
      const auto res = lsem::condition_heuristic(sigma, g, tau, hs_trials, hs_eps, rng);
      run.command = "heuristic";
      run.app = hs_cmd;
      run.output.files["heuristic.json"] = lsem::heuristic_to_json(res).dump(2) + "\n";
      run.output.files["kappas.csv"] = ex::kappa_csv(res.kappas);
      run.output.summary["verdict"] = lsem::to_string(res.verdict);
      run.plot = "plot 'kappas.csv' using 1:2 with points";
      std::cout << lsem::to_string(res.verdict) << ": " << res.explanation << '\n';
    } else if (gen_cmd->parsed()) {
      lsem::Rng rng(seed);
      lsem::MixedGraph g;
      if (!gen_graph.empty()) {
        g = load_graph(gen_graph);
      } else if (family == "path") {
        g = lsem::path_graph(gen_n);
      } else if (family == "clique") {
        g = lsem::clique_of_paths(gen_n, gen_k);
      } else if (family == "layered") {
        g = lsem::layered_graph(gen_n, gen_k, gen_p, rng);
      } else {
        throw Error(ErrorCode::InvalidArgument, "--family must be path, clique or layered");
      }
      if (gen.d == 0) gen.d = lsem::default_dimension(g.size());
      const lsem::Parameters p = lsem::random_parameters(g, gen, rng);
      run.command = "generate";
      run.app = gen_cmd;
      run.output.files["parameters.json"] = lsem::parameters_to_json(p).dump(2) + "\n";
      run.output.files["graph.json"] = lsem::graph_to_json(g).dump(2) + "\n";
    } else if (fw_cmd->parsed()) {
      const lsem::Parameters p = lsem::parameters_from_json(lsem::read_json_file(fw_params));
      run.command = "forward";
      run.app = fw_cmd;
      run.output.files["sigma.csv"] = matrix_csv(lsem::forward_covariance(p));
    } else if (sm_cmd->parsed()) {
      const lsem::Parameters p = lsem::parameters_from_json(lsem::read_json_file(sm_params));
      lsem::validate_parameters(p);
      lsem::Rng rng(seed);
      lsem::DataTable t;
      t.values = lsem::sample_observations(p, sm_m, rng);
      if (sm_center) t.values = lsem::center_columns(t.values);
      for (std::size_t j = 0; j < p.graph.size(); ++j) t.names.push_back("x" + std::to_string(j));
      std::ostringstream os;
      lsem::write_data_csv(os, t);
      run.command = "sample";
      run.app = sm_cmd;
      run.output.files["data.csv"] = os.str();
    } else if (rc_cmd->parsed()) {
      const lsem::MixedGraph g = load_graph(rc_graph);
      const lsem::Matrix sigma = load_sigma(rc_sigma, rc_data, rc_center);
      if (sigma.rows() != g.size() || sigma.cols() != g.size())
        throw Error(ErrorCode::ShapeMismatch, "covariance size does not match the graph");
      lsem::RecoveryResult r = lsem::recover_lambda(sigma, g);
      r.omega_hat = lsem::recover_omega(sigma, r.lambda_hat);
      run.command = "recover";
      run.app = rc_cmd;
      run.output.files["recovery.json"] = lsem::recovery_to_json(r).dump(2) + "\n";
      run.output.files["lambda.csv"] = matrix_csv(r.lambda_hat);
      run.output.files["omega.csv"] = matrix_csv(*r.omega_hat);
    } else if (cd_cmd->parsed()) {
      const lsem::MixedGraph g = load_graph(cd_graph);
      const lsem::Matrix sigma = load_sigma(cd_sigma, cd_data, cd_center);
      if (sigma.rows() != g.size() || sigma.cols() != g.size())
        throw Error(ErrorCode::ShapeMismatch, "covariance size does not match the graph");
      const lsem::PerturbationSpec spec{parse_mode(cd_mode), cd_eps,
                                        cd_all ? lsem::PerturbationTarget::AllEntries
                                               : lsem::PerturbationTarget::NonzeroEntries,
                                        true};
      if (cd_trials == 0) throw Error(ErrorCode::InvalidArgument, "trials must be positive");
      lsem::Rng rng(seed);
      const auto rep = lsem::randomized_condition_number(sigma, g, spec, cd_trials, rng);
      run.command = "condition";
      run.app = cd_cmd;
      run.output.files["condition.json"] = lsem::condition_report_to_json(rep).dump(2) + "\n";
      run.output.files["kappas.csv"] = ex::kappa_csv(rep.kappas);
      run.output.files["kappa_histogram.csv"] = ex::histogram_csv(rep.histogram);
      run.output.summary["mean_kappa"] = lsem::optional_number(rep.mean_kappa);
      run.plot = "set logscale x; plot 'kappa_histogram.csv' using (sqrt($1*$2)):3 with boxes";
    }
    write_outputs(run, common);
  } catch (const Error& e) {
    std::cerr << "error [" << lsem::to_string(e.code()) << "]";
    if (e.node()) std::cerr << " at node " << *e.node();
    std::cerr << ": " << e.what() << '\n';
    return lsem::is_numerical(e.code()) ? kExitNumerical : kExitValidation;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitValidation;
  }
  return 0;
}
