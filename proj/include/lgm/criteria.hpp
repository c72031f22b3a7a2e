#pragma once

// DIC and WAIC from Monte Carlo draws of the mixture-of-Gaussians posterior
// approximation. One pass produces both scores. Draw s is generated from its
// own counter-based RNG stream, so results depend only on (seed, draws), not
// on scheduling; per-observation accumulators are updated draw-by-draw with
// chunk-ordered reductions.

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <vector>

#include "lgm/domain.hpp"
#include "lgm/laplace.hpp"
#include "lgm/model.hpp"
#include "lgm/parallel.hpp"
#include "lgm/rng.hpp"

namespace lgm {

struct ScorePair {
  double score = 0.0;
  double effective_params = 0.0;
  int mc_draws = 0;
  std::uint64_t seed = 0;
};

struct CriteriaResult {
  DicScore dic;
  WaicScore waic;
  int draws = 0;
  std::uint64_t seed = 0;
};

// Optionally captures the sampled latent fields (and natural-scale alpha per
// draw) for downstream prediction artifacts.
struct DrawSet {
  std::vector<Eigen::VectorXd> latent;
  std::vector<double> alpha;
};

inline CriteriaResult compute_criteria(LaplaceEngine& engine,
                                       const std::vector<HyperPoint>& grid, int draws,
                                       std::uint64_t seed, DrawSet* keep = nullptr) {
  if (grid.empty()) throw EmptyGrid("criteria need a hyperparameter grid");
  if (draws < 500)
    throw InsufficientDraws("need at least 500 draws, got " +
                            fmt_int(static_cast<std::int64_t>(draws)));
  const ModelContext& ctx = engine.context();
  const int n = ctx.data().n;
  const int m = ctx.m();
  const std::size_t K = grid.size();

  std::vector<const GaussianApprox*> apx(K);
  std::vector<double> weights(K), alphas(K);
  for (std::size_t k = 0; k < K; ++k) {
    apx[k] = &engine.approx_at(grid[k].theta);
    weights[k] = grid[k].weight;
    alphas[k] = apx[k]->nat.alpha;
  }

  std::vector<double> ll_max(n, -std::numeric_limits<double>::infinity());
  std::vector<double> ll_sumexp(n, 0.0);
  std::vector<double> ll_mean(n, 0.0);
  std::vector<double> ll_m2(n, 0.0);
  std::vector<double> chunk_sum(chunk_count(n), 0.0);
  Eigen::VectorXd eta;
  std::vector<double> ll;

  if (keep) {
    keep->latent.clear();
    keep->alpha.clear();
    keep->latent.reserve(draws);
    keep->alpha.reserve(draws);
  }

  double deviance_sum = 0.0;
  for (int s = 0; s < draws; ++s) {
    Rng rng = Rng::stream(seed, static_cast<std::uint64_t>(s));
    const std::size_t k = rng.categorical(weights);
    Eigen::VectorXd x = apx[k]->mode + apx[k]->factor->sample_zero_mean(rng);
    const double alpha = alphas[k];
    ctx.linear_predictor(x, eta);
    ctx.per_obs_loglik(eta, alpha, ll);
    parallel_chunks(static_cast<std::size_t>(n),
                    [&](std::size_t c, std::size_t lo, std::size_t hi) {
                      double acc = 0.0;
                      for (std::size_t i = lo; i < hi; ++i) {
                        const double l = ll[i];
                        acc += l;
                        if (l > ll_max[i]) {
                          ll_sumexp[i] = ll_sumexp[i] * std::exp(ll_max[i] - l) + 1.0;
                          ll_max[i] = l;
                        } else {
                          ll_sumexp[i] += std::exp(l - ll_max[i]);
                        }
                        const double delta = l - ll_mean[i];
                        ll_mean[i] += delta / (s + 1);
                        ll_m2[i] += delta * (l - ll_mean[i]);
                      }
                      chunk_sum[c] = acc;
                    });
    double total_ll = 0.0;
    for (double v : chunk_sum) total_ll += v;
    deviance_sum += -2.0 * total_ll;
    if (keep) {
      keep->latent.push_back(std::move(x));
      keep->alpha.push_back(alpha);
    }
  }

  // plug-in at the mixture mean (natural-scale alpha averaged by weight)
  Eigen::VectorXd x_bar = Eigen::VectorXd::Zero(m);
  double alpha_bar = 0.0;
  for (std::size_t k = 0; k < K; ++k) {
    x_bar += weights[k] * apx[k]->mode;
    alpha_bar += weights[k] * alphas[k];
  }
  const double dev_plug = -2.0 * ctx.log_lik(x_bar, alpha_bar);
  const double dev_mean = deviance_sum / draws;

  CriteriaResult out;
  out.draws = draws;
  out.seed = seed;
  out.dic.p_d = dev_mean - dev_plug;
  out.dic.dic = 2.0 * dev_mean - dev_plug;

  std::vector<double> chunk_lppd(chunk_count(n), 0.0);
  std::vector<double> chunk_pw(chunk_count(n), 0.0);
  parallel_chunks(static_cast<std::size_t>(n),
                  [&](std::size_t c, std::size_t lo, std::size_t hi) {
                    double lppd = 0.0, pw = 0.0;
                    for (std::size_t i = lo; i < hi; ++i) {
                      lppd += ll_max[i] + std::log(ll_sumexp[i]) - std::log(double(draws));
                      pw += ll_m2[i] / (draws - 1);
                    }
                    chunk_lppd[c] = lppd;
                    chunk_pw[c] = pw;
                  });
  double lppd = 0.0, p_waic = 0.0;
  for (std::size_t c = 0; c < chunk_lppd.size(); ++c) {
    lppd += chunk_lppd[c];
    p_waic += chunk_pw[c];
  }
  out.waic.p_waic = p_waic;
  out.waic.waic = -2.0 * (lppd - p_waic);
  return out;
}

inline ScorePair compute_dic(const FitResult& fit, const ModelSpec& spec,
                             const Dataset& data, const RegionGraph& graph, int draws,
                             std::uint64_t seed) {
  ModelContext ctx(spec, data, graph);
  LaplaceEngine engine(ctx);
  const CriteriaResult r = compute_criteria(engine, fit.hyper_grid, draws, seed);
  return {r.dic.dic, r.dic.p_d, r.draws, r.seed};
}

inline ScorePair compute_waic(const FitResult& fit, const ModelSpec& spec,
                              const Dataset& data, const RegionGraph& graph, int draws,
                              std::uint64_t seed) {
  ModelContext ctx(spec, data, graph);
  LaplaceEngine engine(ctx);
  const CriteriaResult r = compute_criteria(engine, fit.hyper_grid, draws, seed);
  return {r.waic.waic, r.waic.p_waic, r.draws, r.seed};
}

}  // namespace lgm
