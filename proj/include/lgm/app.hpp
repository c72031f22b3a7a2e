#pragma once

// Command implementations behind the CLI: simulate, fit, predict, compare.
// Each command writes its artifacts under an output directory and returns
// normally on success; errors propagate as typed exceptions.

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include "lgm/artifacts.hpp"
#include "lgm/config.hpp"
#include "lgm/criteria.hpp"
#include "lgm/csv.hpp"
#include "lgm/domain.hpp"
#include "lgm/graph.hpp"
#include "lgm/laplace.hpp"
#include "lgm/log.hpp"
#include "lgm/model.hpp"
#include "lgm/parallel.hpp"
#include "lgm/predict.hpp"
#include "lgm/simulate.hpp"
#include "lgm/version.hpp"

namespace lgm {

struct RunConfig {
  std::string config_path;
  std::string data_path;
  std::string graph_path;
  std::string out_dir;
  std::string fit_dir;        // predict
  std::string profiles_path;  // predict
  std::vector<std::string> compare_dirs;
  std::int64_t seed = -1;     // -1: take from config
  int draws = 0;              // 0: take from config
  int threads = 1;
  bool plugin = false;
};

inline Family parse_family(const std::string& s) {
  if (s == "logit") return Family::logit;
  if (s == "weibull") return Family::weibull;
  throw BadConfig("unknown family '" + s + "' (expected logit or weibull)");
}

inline ModelSpec spec_from_config(const Config& cfg) {
  ModelSpec spec;
  spec.family = parse_family(cfg.get_string("model.family", "logit"));
  const std::string effect = cfg.get_string("model.effect", "none");
  if (effect == "none") {
    spec.effect = EffectType::none;
  } else if (effect == "iid") {
    spec.effect = EffectType::iid;
  } else if (effect == "leroux") {
    spec.effect = EffectType::leroux;
  } else if (effect == "icar") {
    spec.effect = EffectType::leroux;
    spec.phi_fixed = 1.0;
  } else {
    throw BadConfig("unknown effect '" + effect + "'");
  }
  if (cfg.has("model.covariates")) spec.covariate_names = cfg.get_list("model.covariates");
  if (cfg.has("model.phi")) {
    if (effect == "icar") throw BadConfig("effect icar already fixes phi at 1");
    spec.phi_fixed = cfg.get_double("model.phi");
  }
  spec.priors.beta_precision = cfg.get_double("model.beta_precision", 0.001);
  spec.priors.intercept_precision = cfg.get_double("model.intercept_precision", 0.0);
  spec.priors.logit_phi_mean = cfg.get_double("model.logit_phi_mean", 0.0);
  spec.priors.logit_phi_precision = cfg.get_double("model.logit_phi_precision", 0.1);
  spec.priors.pc_alpha_rate = cfg.get_double("model.pc_rate", 5.0);
  spec.grid.delta = cfg.get_double("grid.delta", 0.75);
  spec.grid.drop = cfg.get_double("grid.drop", 6.0);
  spec.grid.max_points = static_cast<int>(cfg.get_int("grid.max_points", 2000));
  spec.grid.log_tau_min = cfg.get_double("grid.log_tau_min", -12.0);
  spec.grid.log_tau_max = cfg.get_double("grid.log_tau_max", 12.0);
  spec.grid.logit_phi_min = cfg.get_double("grid.logit_phi_min", -8.0);
  spec.grid.logit_phi_max = cfg.get_double("grid.logit_phi_max", 8.0);
  spec.grid.alpha_raw_min = cfg.get_double("grid.alpha_raw_min", -60.0);
  spec.grid.alpha_raw_max = cfg.get_double("grid.alpha_raw_max", 60.0);
  spec.seed = static_cast<std::uint64_t>(cfg.get_int("run.seed", 1));
  spec.validate();
  return spec;
}

namespace detail {

inline std::uint64_t resolve_seed(const RunConfig& rc, const Config& cfg) {
  if (rc.seed >= 0) return static_cast<std::uint64_t>(rc.seed);
  return static_cast<std::uint64_t>(cfg.get_int("run.seed", 1));
}

inline int resolve_draws(const RunConfig& rc, const Config& cfg) {
  if (rc.draws > 0) return rc.draws;
  return static_cast<int>(cfg.get_int("run.draws", 2000));
}

inline void ensure_out_dir(const std::string& dir) {
  if (dir.empty()) throw BadConfig("an output directory is required (--out)");
  std::filesystem::create_directories(dir);
}

inline std::vector<double> parse_doubles(const Config& cfg, const std::string& key) {
  std::vector<double> out;
  for (const auto& tok : cfg.get_list(key)) out.push_back(parse_double(tok, key));
  return out;
}

inline void echo_model(const ModelSpec& spec, ConfigWriter& w) {
  w.section("model");
  w.kv("family", family_name(spec.family));
  w.kv("effect", effect_name(spec.effect));
  std::string cov;
  for (const auto& c : spec.covariate_names) {
    if (!cov.empty()) cov += " ";
    cov += c;
  }
  if (!cov.empty()) w.kv("covariates", cov);
  if (spec.phi_is_fixed()) w.kv("phi", spec.phi_fixed);
  w.kv("beta_precision", spec.priors.beta_precision);
  w.kv("intercept_precision", spec.priors.intercept_precision);
  if (spec.family == Family::weibull) w.kv("pc_rate", spec.priors.pc_alpha_rate);
}

}  // namespace detail

inline Truth truth_from_config(const Config& cfg) {
  const Family family = parse_family(cfg.get_string("model.family", "logit"));
  Truth t = default_truth(family);
  const std::string effect = cfg.get_string("model.effect", "leroux");
  if (effect == "none") t.effect = EffectType::none;
  else if (effect == "iid") t.effect = EffectType::iid;
  else if (effect == "leroux") t.effect = EffectType::leroux;
  else if (effect == "icar") t.effect = EffectType::leroux;
  else throw BadConfig("unknown effect '" + effect + "'");
  if (effect == "icar") t.phi = 1.0;

  if (cfg.has("model.covariates")) {
    t.covariate_names = cfg.get_list("model.covariates");
    if (!cfg.has("simulate.beta"))
      throw BadConfig("custom covariates need simulate.beta values");
    t.covariate_prob.assign(t.covariate_names.size(), 0.5);
  }
  if (cfg.has("simulate.beta")) {
    const auto beta = detail::parse_doubles(cfg, "simulate.beta");
    if (beta.size() != t.covariate_names.size())
      throw BadConfig("simulate.beta length does not match covariates");
    t.beta = Eigen::Map<const Eigen::VectorXd>(beta.data(),
                                               static_cast<Eigen::Index>(beta.size()));
  }
  if (cfg.has("simulate.covariate_prob")) {
    t.covariate_prob = detail::parse_doubles(cfg, "simulate.covariate_prob");
    if (t.covariate_prob.size() != t.covariate_names.size())
      throw BadConfig("simulate.covariate_prob length does not match covariates");
  }
  t.intercept = cfg.get_double("simulate.intercept", t.intercept);
  t.tau = cfg.get_double("simulate.tau", t.tau);
  t.phi = cfg.get_double("simulate.phi", t.phi);
  t.alpha = cfg.get_double("simulate.alpha", t.alpha);
  t.horizon = cfg.get_double("simulate.horizon", t.horizon);
  t.validate();
  return t;
}

inline void cmd_simulate(const RunConfig& rc) {
  Config cfg = rc.config_path.empty() ? Config() : Config::load(rc.config_path);
  const std::uint64_t seed = detail::resolve_seed(rc, cfg);
  detail::ensure_out_dir(rc.out_dir);

  Truth truth = truth_from_config(cfg);
  RegionGraph graph;
  if (!rc.graph_path.empty()) {
    graph = parse_adjacency(read_file(rc.graph_path));
  } else {
    const std::string kind = cfg.get_string("simulate.graph", "gabriel");
    if (kind == "lattice") {
      const int rows = static_cast<int>(cfg.get_int("simulate.rows", 10));
      const int cols = static_cast<int>(cfg.get_int("simulate.cols", 10));
      graph = make_lattice(rows, cols);
    } else if (kind == "gabriel") {
      const int J = static_cast<int>(cfg.get_int("simulate.J", 100));
      graph = make_gabriel(J, seed);
    } else {
      throw BadConfig("unknown graph kind '" + kind + "' (lattice or gabriel)");
    }
  }
  const int n = static_cast<int>(cfg.get_int("simulate.n", 5000));

  Simulation sim = simulate_dataset(truth, graph, n, seed);
  save_simulation(sim, rc.out_dir);

  ConfigWriter mw;
  mw.section("run");
  mw.kv("version", std::string(kVersion));
  mw.kv("command", std::string("simulate"));
  mw.kv("seed", static_cast<std::int64_t>(seed));
  mw.blank();
  mw.section("truth");
  mw.kv("family", family_name(truth.family));
  mw.kv("effect", effect_name(truth.effect));
  mw.kv("n", static_cast<std::int64_t>(n));
  mw.kv("J", static_cast<std::int64_t>(graph.J));
  mw.kv("intercept", truth.intercept);
  if (truth.effect != EffectType::none) {
    mw.kv("tau", truth.tau);
    if (truth.effect == EffectType::leroux) mw.kv("phi", truth.phi);
  }
  if (truth.family == Family::weibull) {
    mw.kv("alpha", truth.alpha);
    mw.kv("horizon", truth.horizon);
    mw.kv("event_rate", sim.event_rate);
  }
  mw.save(rc.out_dir + "/manifest.txt");
  log_info("simulated %d rows over %d regions", n, graph.J);
}

inline FitResult run_fit(const ModelSpec& spec, const Dataset& data,
                         const RegionGraph& graph, int draws, std::uint64_t seed,
                         DrawSet* keep = nullptr) {
  ModelContext ctx(spec, data, graph);
  LaplaceEngine engine(ctx);
  FitResult fit;
  fit.spec = spec;
  fit.hyper_grid = engine.explore_hyperparameters();
  engine.latent_marginals(fit.hyper_grid, fit);
  fit.time_scale = data.time_scale;
  fit.region_ids = ctx.J_eff() > 0 ? graph.ids : std::vector<std::string>{};
  const CriteriaResult crit = compute_criteria(engine, fit.hyper_grid, draws, seed, keep);
  fit.dic = crit.dic;
  fit.waic = crit.waic;
  return fit;
}

inline std::vector<SummaryRow> summary_rows(const FitResult& fit, const DrawSet& keep) {
  std::vector<SummaryRow> rows;
  for (std::size_t k = 0; k < fit.fixed_names.size(); ++k)
    rows.push_back(summary_from_marginal(fit.fixed_names[k], fit.fixed_marginals[k]));
  for (std::size_t j = 0; j < fit.random_summaries.size(); ++j)
    rows.push_back(summary_from_moments("gamma_" + fit.region_ids[j],
                                        fit.random_summaries[j].mean,
                                        fit.random_summaries[j].sd));
  for (std::size_t k = 0; k < fit.hyper_names.size(); ++k)
    rows.push_back(summary_from_marginal(fit.hyper_names[k], fit.hyper_marginals[k]));
  if (fit.spec.family == Family::weibull) {
    // AFT-scale coefficients: beta = -zeta / alpha, one value per draw
    const std::size_t S = keep.latent.size();
    std::vector<double> vals(S);
    for (std::size_t k = 0; k < fit.fixed_names.size(); ++k) {
      for (std::size_t s = 0; s < S; ++s)
        vals[s] = -keep.latent[s][static_cast<int>(k)] / keep.alpha[s];
      rows.push_back(summary_from_draws("aft_" + fit.fixed_names[k], vals));
    }
  }
  return rows;
}

inline void cmd_fit(const RunConfig& rc) {
  if (rc.config_path.empty()) throw BadConfig("fit needs --config");
  if (rc.data_path.empty()) throw BadConfig("fit needs --data");
  if (rc.graph_path.empty()) throw BadConfig("fit needs --graph");
  Config cfg = Config::load(rc.config_path);
  ModelSpec spec = spec_from_config(cfg);
  const std::uint64_t seed = detail::resolve_seed(rc, cfg);
  spec.seed = seed;
  const int draws = detail::resolve_draws(rc, cfg);
  set_worker_count(rc.threads);
  detail::ensure_out_dir(rc.out_dir);

  RegionGraph graph = parse_adjacency(read_file(rc.graph_path));
  Dataset data = validate_dataset(read_csv(rc.data_path), spec, graph);
  log_info("fitting %s+%s on n=%d", family_name(spec.family).c_str(),
           effect_name(spec.effect).c_str(), data.n);

  DrawSet keep;
  FitResult fit = run_fit(spec, data, graph, draws, seed, &keep);

  ModelContext ctx(spec, data, graph);
  write_summaries(summary_rows(fit, keep), rc.out_dir + "/summaries.csv");
  write_marginals(fit, rc.out_dir + "/marginals.csv");
  write_hypergrid(fit, ctx.hyper_internal_names(), rc.out_dir + "/hypergrid.csv");
  write_scores(fit.dic, fit.waic, rc.out_dir + "/scores.csv");
  write_draws(ctx.latent_names(), keep, spec.family == Family::weibull,
              rc.out_dir + "/draws.csv");

  ConfigWriter mw;
  mw.section("run");
  mw.kv("version", std::string(kVersion));
  mw.kv("command", std::string("fit"));
  mw.kv("seed", static_cast<std::int64_t>(seed));
  mw.kv("draws", static_cast<std::int64_t>(draws));
  mw.blank();
  detail::echo_model(spec, mw);
  mw.blank();
  mw.section("data");
  mw.kv("n", static_cast<std::int64_t>(data.n));
  mw.kv("J", static_cast<std::int64_t>(graph.J));
  mw.kv("time_scale", fit.time_scale);
  mw.kv("grid_points", static_cast<std::int64_t>(fit.hyper_grid.size()));
  mw.save(rc.out_dir + "/manifest.txt");
}

inline void cmd_predict(const RunConfig& rc) {
  if (rc.fit_dir.empty()) throw BadConfig("predict needs --fit");
  if (rc.profiles_path.empty()) throw BadConfig("predict needs --profiles");
  Config manifest = Config::load(rc.fit_dir + "/manifest.txt");
  const Family family = parse_family(manifest.get_string("model.family"));
  std::vector<std::string> covariates;
  if (manifest.has("model.covariates")) covariates = manifest.get_list("model.covariates");
  const double time_scale = manifest.get_double("data.time_scale", 1.0);
  const std::string out_dir = rc.out_dir.empty() ? rc.fit_dir : rc.out_dir;
  detail::ensure_out_dir(out_dir);

  ProfileTable profiles = read_profiles(rc.profiles_path, covariates);
  std::vector<PredictionRow> rows;
  if (rc.plugin) {
    rows = predict_plugin(family, covariates, time_scale,
                          read_summaries(rc.fit_dir + "/summaries.csv"), profiles);
  } else {
    rows = predict_from_draws(family, covariates, time_scale,
                              read_draws(rc.fit_dir + "/draws.csv"), profiles, rc.draws);
  }
  write_predictions(rows, family, out_dir + "/predictions.csv");
}

inline void cmd_compare(const RunConfig& rc, std::ostream& os = std::cout) {
  if (rc.compare_dirs.empty()) throw BadConfig("compare needs at least one fit directory");
  CsvWriter w({"fit", "dic", "p_d", "waic", "p_waic"});
  os << "fit,dic,p_d,waic,p_waic\n";
  for (const auto& dir : rc.compare_dirs) {
    const Scores s = read_scores(dir + "/scores.csv");
    w.cell(dir);
    w.cell(s.dic);
    w.cell(s.p_d);
    w.cell(s.waic);
    w.cell(s.p_waic);
    w.end_row();
    os << dir << "," << fmt_double(s.dic) << "," << fmt_double(s.p_d) << ","
       << fmt_double(s.waic) << "," << fmt_double(s.p_waic) << "\n";
  }
  if (!rc.out_dir.empty()) {
    detail::ensure_out_dir(rc.out_dir);
    w.save(rc.out_dir + "/comparison.csv");
  }
}

}  // namespace lgm
