#pragma once

// Reference MCMC sampler: blocked random-walk Metropolis over the same
// posterior the engine approximates. Deliberately derivative-free and
// structurally independent of the Laplace machinery so the two paths can
// cross-check each other at desk scale. Not a user-facing fitting path.

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <string>
#include <vector>

#include "lgm/csv.hpp"
#include "lgm/domain.hpp"
#include "lgm/graph.hpp"
#include "lgm/likelihood.hpp"
#include "lgm/model.hpp"
#include "lgm/rng.hpp"

namespace lgm {

struct McmcSettings {
  int burn_in = -1;  // default: iters / 4
  int thin = 10;
  int max_n = 20000;
  int max_J = 100;
  bool prior_only = false;
  double tau_fixed = std::numeric_limits<double>::quiet_NaN();
};

struct Chain {
  std::vector<std::string> names;
  Eigen::MatrixXd draws;  // kept x dim
  std::vector<double> acceptance;  // beta, gamma, hyper blocks
  std::uint64_t seed = 0;
  int burn_in = 0;
  int thin = 1;
  Eigen::VectorXd mean, sd, mcse;

  int index_of(const std::string& name) const {
    for (std::size_t i = 0; i < names.size(); ++i)
      if (names[i] == name) return static_cast<int>(i);
    throw BadIndex("chain has no column " + name);
  }
};

namespace detail {

class McmcTarget {
 public:
  McmcTarget(const ModelSpec& spec, const Dataset& data, const RegionGraph& graph,
             const McmcSettings& s)
      : ctx_(spec, data, graph), data_(data), graph_(graph), settings_(s) {
    Xr_ = data.X;
    if (ctx_.J_eff() > 0) {
      by_region_.resize(graph.J);
      for (int i = 0; i < data.n; ++i) by_region_[data.region[i]].push_back(i);
    }
    if (spec.effect == EffectType::leroux && spec.phi_is_fixed() &&
        spec.phi_fixed == 1.0) {
      icar_ = true;
      if (graph.n_components != 1)
        throw GuardRailExceeded("intrinsic-CAR oracle requires a connected graph");
      icar_logdet_ = generalized_logdet(leroux_structure(graph_, 1.0).Q).logdet;
    }
  }

  const ModelContext& ctx() const { return ctx_; }
  bool prior_only() const { return settings_.prior_only; }
  bool icar() const { return icar_; }
  const std::vector<std::vector<int>>& by_region() const { return by_region_; }

  double obs_ll(int i, double eta, double alpha) const {
    if (data_.family == Family::logit) return bernoulli_logit_terms(eta, data_.y[i]).ll;
    return weibull_terms(eta, alpha, data_.time[i], data_.event[i]).ll;
  }

  double full_ll(const Eigen::VectorXd& eta, double alpha) const {
    if (settings_.prior_only) return 0.0;
    double s = 0.0;
    for (int i = 0; i < data_.n; ++i) s += obs_ll(i, eta[i], alpha);
    return s;
  }

  double region_ll(int j, const Eigen::VectorXd& eta, double shift, double alpha) const {
    if (settings_.prior_only) return 0.0;
    double s = 0.0;
    for (int i : by_region_[j]) s += obs_ll(i, eta[i] + shift, alpha);
    return s;
  }

  // (M(phi) gamma)_j from the neighbor lists; isolated regions have a unit
  // diagonal.
  double m_gamma_row(const Eigen::VectorXd& gamma, double phi, int j) const {
    if (ctx_.spec().effect == EffectType::iid) return gamma[j];
    if (graph_.n_j[j] == 0) return gamma[j];
    double acc = ((1.0 - phi) + phi * graph_.n_j[j]) * gamma[j];
    for (int l : graph_.neighbors[j]) acc -= phi * gamma[l];
    return acc;
  }

  double gamma_quad(const Eigen::VectorXd& gamma, double phi) const {
    double q = 0.0;
    for (int j = 0; j < graph_.J; ++j) q += gamma[j] * m_gamma_row(gamma, phi, j);
    return q;
  }

  // log pi(gamma | tau, phi) including the theta-dependent normalizer.
  double gamma_logprior(const Eigen::VectorXd& gamma, double tau, double phi) const {
    if (ctx_.J_eff() == 0) return 0.0;
    const int J = graph_.J;
    double logdet, rank;
    if (icar_) {
      logdet = icar_logdet_;
      rank = J - 1;
    } else if (ctx_.spec().effect == EffectType::iid) {
      logdet = 0.0;
      rank = J;
    } else {
      auto it = logdet_cache_.find(phi);
      if (it == logdet_cache_.end()) {
        Eigen::MatrixXd M(leroux_structure(graph_, phi).Q);
        Eigen::LDLT<Eigen::MatrixXd> ldlt(M);
        const double ld = ldlt.vectorD().array().log().sum();
        it = logdet_cache_.emplace(phi, ld).first;
      }
      logdet = it->second;
      rank = J;
    }
    return 0.5 * rank * (std::log(tau) - std::log(2.0 * M_PI)) + 0.5 * logdet -
           0.5 * tau * gamma_quad(gamma, phi);
  }

  double beta_logprior(const Eigen::VectorXd& beta) const {
    const auto& pr = ctx_.spec().priors;
    double lp = 0.0;
    if (pr.intercept_precision > 0)
      lp += 0.5 * std::log(pr.intercept_precision / (2.0 * M_PI)) -
            0.5 * pr.intercept_precision * beta[0] * beta[0];
    for (int c = 1; c < ctx_.p(); ++c)
      lp += 0.5 * std::log(pr.beta_precision / (2.0 * M_PI)) -
            0.5 * pr.beta_precision * beta[c] * beta[c];
    return lp;
  }

  void eta_from_state(const Eigen::VectorXd& beta, const Eigen::VectorXd& gamma,
                      Eigen::VectorXd& eta) const {
    eta.resize(data_.n);
    const int q = ctx_.p() - 1;
    for (int i = 0; i < data_.n; ++i) {
      double e = beta[0];
      for (int c = 0; c < q; ++c) e += Xr_(i, c) * beta[c + 1];
      if (ctx_.J_eff() > 0) e += gamma[data_.region[i]];
      eta[i] = e;
    }
  }

 private:
  ModelContext ctx_;
  const Dataset& data_;
  const RegionGraph& graph_;
  McmcSettings settings_;
  Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> Xr_;
  std::vector<std::vector<int>> by_region_;
  bool icar_ = false;
  double icar_logdet_ = 0.0;
  mutable std::map<double, double> logdet_cache_;
};

struct BlockAdapter {
  double scale;
  double target;
  int accepted = 0;
  int attempts = 0;
  int batch = 0;

  BlockAdapter(double s0, double t) : scale(s0), target(t) {}

  void record(bool accept) {
    attempts += 1;
    accepted += accept ? 1 : 0;
  }
  void maybe_adapt() {
    if (attempts < 50) return;
    const double rate = double(accepted) / attempts;
    const double step = std::min(0.1, 3.0 / std::sqrt(1.0 + batch));
    scale *= std::exp(step * (rate - target));
    if (!(scale > 1e-14) || !(scale < 1e14))
      throw DegenerateProposal("proposal scale diverged");
    accepted = 0;
    attempts = 0;
    ++batch;
  }
};

}  // namespace detail

inline Chain mcmc_sample(const ModelSpec& spec, const Dataset& data,
                         const RegionGraph& graph, int iters, std::uint64_t seed,
                         McmcSettings settings = {}) {
  if (data.n > settings.max_n || graph.J > settings.max_J)
    throw GuardRailExceeded("oracle guard rails: n <= " + fmt_int(settings.max_n) +
                            ", J <= " + fmt_int(settings.max_J));
  detail::McmcTarget target(spec, data, graph, settings);
  const ModelContext& ctx = target.ctx();
  const int p = ctx.p();
  const int J = ctx.J_eff();
  const int hd = ctx.hyper_dim();
  const int dim = p + J + hd;
  const int burn_in = settings.burn_in >= 0 ? settings.burn_in : iters / 4;
  const int kept = iters / settings.thin;
  if (kept < 4) throw BadConfig("too few retained draws");

  Rng rng(seed);

  Eigen::VectorXd beta = Eigen::VectorXd::Zero(p);
  Eigen::VectorXd gamma = Eigen::VectorXd::Zero(J);
  Eigen::VectorXd theta = Eigen::VectorXd::Zero(hd);
  // a dispersed start keeps the tau-gamma funnel from swallowing the chain:
  // from gamma = 0 exactly, every tau increase would be accepted outright
  for (int j = 0; j < J; ++j) gamma[j] = 0.3 * rng.normal();

  // pinned coordinates: flat-prior intercept and log tau in prior-only mode
  std::vector<int> beta_free, hyper_free;
  for (int c = 0; c < p; ++c)
    if (!(settings.prior_only && c == 0)) beta_free.push_back(c);
  const auto& coords = ctx.coords();
  for (int d = 0; d < hd; ++d) {
    if (coords[d] == HyperCoord::log_tau && settings.prior_only) {
      if (!std::isfinite(settings.tau_fixed))
        throw BadConfig("prior-only sampling requires tau_fixed (improper tau prior)");
      theta[d] = std::log(settings.tau_fixed);
      continue;
    }
    hyper_free.push_back(d);
  }

  // both paths integrate the same box-truncated posterior: proposals outside
  // the grid search bounds are rejected
  std::vector<double> box_lo(hd), box_hi(hd);
  for (int d = 0; d < hd; ++d) ctx.coord_box(d, box_lo[d], box_hi[d]);

  Eigen::VectorXd eta;
  target.eta_from_state(beta, gamma, eta);
  HyperNat nat = ctx.decode(theta);
  double cur_ll = target.full_ll(eta, nat.alpha);
  double cur_gamma_lp = target.gamma_logprior(gamma, nat.tau, nat.phi);
  double cur_beta_lp = target.beta_logprior(beta);
  double cur_hyper_lp = ctx.log_hyper_prior(theta);

  detail::BlockAdapter beta_adapt(0.1, beta_free.size() == 1 ? 0.44 : 0.234);
  detail::BlockAdapter gamma_adapt(0.5, 0.44);
  detail::BlockAdapter hyper_adapt(0.3, hyper_free.size() == 1 ? 0.44 : 0.234);

  Eigen::MatrixXd beta_chol = Eigen::MatrixXd::Identity(p, p);
  Eigen::MatrixXd hyper_chol = Eigen::MatrixXd::Identity(hd, hd);
  std::vector<Eigen::VectorXd> beta_hist, hyper_hist;

  long long acc_beta = 0, att_beta = 0, acc_gamma = 0, att_gamma = 0, acc_hyper = 0,
            att_hyper = 0;

  Chain chain;
  chain.names = ctx.latent_names();
  for (const auto& hn : ctx.hyper_internal_names()) chain.names.push_back(hn);
  chain.draws.resize(kept, dim);
  chain.seed = seed;
  chain.burn_in = burn_in;
  chain.thin = settings.thin;

  auto empirical_chol = [](const std::vector<Eigen::VectorXd>& hist, int d) {
    Eigen::VectorXd mu = Eigen::VectorXd::Zero(d);
    for (const auto& v : hist) mu += v;
    mu /= double(hist.size());
    Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(d, d);
    for (const auto& v : hist) cov += (v - mu) * (v - mu).transpose();
    cov /= double(hist.size() - 1);
    cov += 1e-10 * Eigen::MatrixXd::Identity(d, d);
    Eigen::LLT<Eigen::MatrixXd> llt(cov);
    return llt.info() == Eigen::Success ? Eigen::MatrixXd(llt.matrixL())
                                        : Eigen::MatrixXd::Identity(d, d);
  };

  const int total = burn_in + iters;
  int stored = 0;
  for (int sweep = 0; sweep < total; ++sweep) {
    const bool adapting = sweep < burn_in;

    // beta block
    if (!beta_free.empty()) {
      Eigen::VectorXd eps = Eigen::VectorXd::Zero(p);
      for (int c : beta_free) eps[c] = rng.normal();
      Eigen::VectorXd prop = beta + beta_adapt.scale * (beta_chol * eps);
      for (int c = 0; c < p; ++c)
        if (std::find(beta_free.begin(), beta_free.end(), c) == beta_free.end())
          prop[c] = beta[c];
      Eigen::VectorXd eta_prop;
      target.eta_from_state(prop, gamma, eta_prop);
      const double ll_prop = target.full_ll(eta_prop, nat.alpha);
      const double lp_prop = target.beta_logprior(prop);
      const double log_ratio = (ll_prop + lp_prop) - (cur_ll + cur_beta_lp);
      const bool accept = std::log(rng.uniform_pos()) < log_ratio;
      if (accept) {
        beta = prop;
        eta = eta_prop;
        cur_ll = ll_prop;
        cur_beta_lp = lp_prop;
      }
      if (adapting) {
        beta_adapt.record(accept);
        beta_adapt.maybe_adapt();
      } else {
        att_beta += 1;
        acc_beta += accept ? 1 : 0;
      }
    }

    // gamma block: single-site sweep
    for (int j = 0; j < J; ++j) {
      const double dg = gamma_adapt.scale * rng.normal();
      // prior change for gamma_j -> gamma_j + dg:
      // tau * (dg * (M gamma)_j + 0.5 * M_jj * dg^2)
      const double mrow = target.m_gamma_row(gamma, nat.phi, j);
      const double mjj = target.m_gamma_row(Eigen::VectorXd::Unit(J, j), nat.phi, j);
      const double dprior = -nat.tau * (dg * mrow + 0.5 * mjj * dg * dg);
      const double dll = target.prior_only()
                             ? 0.0
                             : target.region_ll(j, eta, dg, nat.alpha) -
                                   target.region_ll(j, eta, 0.0, nat.alpha);
      const bool accept = std::log(rng.uniform_pos()) < dll + dprior;
      if (accept) {
        gamma[j] += dg;
        cur_ll += dll;
        cur_gamma_lp += dprior;
        if (!target.prior_only())
          for (int i : target.by_region()[j]) eta[i] += dg;
      }
      if (adapting) {
        gamma_adapt.record(accept);
        gamma_adapt.maybe_adapt();
      } else {
        att_gamma += 1;
        acc_gamma += accept ? 1 : 0;
      }
    }

    // intrinsic-CAR recentring: project onto the sum-to-zero representative,
    // compensating through the flat intercept so eta is untouched
    if (target.icar() && J > 0) {
      const double c = gamma.mean();
      gamma.array() -= c;
      if (!settings.prior_only) {
        beta[0] += c;
        cur_beta_lp = target.beta_logprior(beta);
      }
      cur_gamma_lp = target.gamma_logprior(gamma, nat.tau, nat.phi);
    }

    // hyper block
    if (!hyper_free.empty()) {
      Eigen::VectorXd eps = Eigen::VectorXd::Zero(hd);
      for (int d : hyper_free) eps[d] = rng.normal();
      Eigen::VectorXd prop = theta + hyper_adapt.scale * (hyper_chol * eps);
      for (int d = 0; d < hd; ++d)
        if (std::find(hyper_free.begin(), hyper_free.end(), d) == hyper_free.end())
          prop[d] = theta[d];
      bool inside = true;
      for (int d : hyper_free)
        if (prop[d] < box_lo[d] || prop[d] > box_hi[d]) inside = false;
      bool accept = false;
      if (inside) {
        const HyperNat nat_prop = ctx.decode(prop);
        const double hyper_lp_prop = ctx.log_hyper_prior(prop);
        double log_ratio = hyper_lp_prop - cur_hyper_lp;
        double gamma_lp_prop = cur_gamma_lp;
        if (J > 0) {
          gamma_lp_prop = target.gamma_logprior(gamma, nat_prop.tau, nat_prop.phi);
          log_ratio += gamma_lp_prop - cur_gamma_lp;
        }
        double ll_prop = cur_ll;
        if (ctx.spec().family == Family::weibull && !target.prior_only()) {
          ll_prop = target.full_ll(eta, nat_prop.alpha);
          log_ratio += ll_prop - cur_ll;
        }
        accept = std::isfinite(log_ratio) && std::log(rng.uniform_pos()) < log_ratio;
        if (accept) {
          theta = prop;
          nat = nat_prop;
          cur_hyper_lp = hyper_lp_prop;
          cur_gamma_lp = gamma_lp_prop;
          cur_ll = ll_prop;
        }
      }
      if (adapting) {
        hyper_adapt.record(accept);
        hyper_adapt.maybe_adapt();
      } else {
        att_hyper += 1;
        acc_hyper += accept ? 1 : 0;
      }
    }

    // proposal covariance adaptation from burn-in history
    if (adapting) {
      if (sweep >= burn_in / 4) {
        if (!beta_free.empty()) beta_hist.push_back(beta);
        if (!hyper_free.empty()) hyper_hist.push_back(theta);
      }
      if (sweep == burn_in / 2 || sweep == (3 * burn_in) / 4) {
        if (beta_hist.size() > 50) beta_chol = empirical_chol(beta_hist, p);
        if (hyper_hist.size() > 50) hyper_chol = empirical_chol(hyper_hist, hd);
      }
    }

    if (sweep >= burn_in && (sweep - burn_in) % settings.thin == 0 && stored < kept) {
      for (int c = 0; c < p; ++c) chain.draws(stored, c) = beta[c];
      for (int j = 0; j < J; ++j) chain.draws(stored, p + j) = gamma[j];
      for (int d = 0; d < hd; ++d) chain.draws(stored, p + J + d) = theta[d];
      ++stored;
    }
  }
  chain.draws.conservativeResize(stored, dim);

  chain.acceptance = {att_beta ? double(acc_beta) / att_beta : 0.0,
                      att_gamma ? double(acc_gamma) / att_gamma : 0.0,
                      att_hyper ? double(acc_hyper) / att_hyper : 0.0};

  // summaries: mean, sd, batch-means MCSE
  const int S = stored;
  chain.mean.resize(dim);
  chain.sd.resize(dim);
  chain.mcse.resize(dim);
  const int nb = std::max(10, std::min(50, S / 100));
  const int bs = std::max(1, S / nb);
  for (int c = 0; c < dim; ++c) {
    const auto col = chain.draws.col(c);
    const double mu = col.mean();
    chain.mean[c] = mu;
    chain.sd[c] = std::sqrt((col.array() - mu).square().sum() / std::max(1, S - 1));
    double bvar = 0.0;
    int used = 0;
    for (int b = 0; b + 1 <= nb && (b + 1) * bs <= S; ++b) {
      const double bm = col.segment(b * bs, bs).mean();
      bvar += (bm - mu) * (bm - mu);
      ++used;
    }
    chain.mcse[c] = used > 1 ? std::sqrt(bvar / (used - 1) / used) : chain.sd[c];
  }
  return chain;
}

// Columnar export in the shared CSV dialect.
inline void write_chain_csv(const Chain& chain, const std::string& path) {
  std::vector<std::string> cols = {"iter"};
  for (const auto& n : chain.names) cols.push_back(n);
  CsvWriter w(cols);
  for (int s = 0; s < chain.draws.rows(); ++s) {
    w.cell(static_cast<std::int64_t>(s));
    for (int c = 0; c < chain.draws.cols(); ++c) w.cell(chain.draws(s, c));
    w.end_row();
  }
  w.save(path);
}

// Largest standardized difference between half-chain means; < 3 indicates
// the two halves agree within Monte Carlo error.
inline double split_chain_max_z(const Chain& chain) {
  const int S = static_cast<int>(chain.draws.rows());
  const int h = S / 2;
  double worst = 0.0;
  for (int c = 0; c < chain.draws.cols(); ++c) {
    const double m1 = chain.draws.col(c).head(h).mean();
    const double m2 = chain.draws.col(c).tail(h).mean();
    const double se = chain.mcse[c] * std::sqrt(2.0);
    if (se > 0) worst = std::max(worst, std::abs(m1 - m2) / (se * std::sqrt(2.0)));
  }
  return worst;
}

}  // namespace lgm
