#pragma once

// ModelContext: one fitting problem (spec + data + graph) with its latent
// layout, hyperparameter coding, priors, and deterministic data-parallel
// likelihood passes.
//
// Latent layout: x = [beta_0 .. beta_q, gamma_0 .. gamma_{J-1}], gamma block
// absent when effect = none. Internal hyperparameter coordinates, in order:
// log tau (any random effect), logit phi (leroux with free phi), alpha_raw
// (weibull, alpha = exp(0.1 * alpha_raw)).

#include <Eigen/Dense>
#include <Eigen/SparseCholesky>
#include <Eigen/SparseCore>
#include <cmath>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "lgm/domain.hpp"
#include "lgm/graph.hpp"
#include "lgm/likelihood.hpp"
#include "lgm/parallel.hpp"
#include "lgm/sparse.hpp"

namespace lgm {

struct HyperNat {
  double tau = 1.0;
  double phi = 0.0;
  double alpha = 1.0;
};

enum class HyperCoord { log_tau, logit_phi, alpha_raw };

struct LikDerivs {
  double ll = 0.0;
  Eigen::VectorXd grad_beta;   // p
  Eigen::VectorXd grad_gamma;  // J_eff
  Eigen::MatrixXd bb;          // p x p curvature
  Eigen::MatrixXd bg;          // p x J_eff curvature
  Eigen::VectorXd gg;          // J_eff diagonal curvature
};

struct PriorPack {
  SpMat P;                                  // m x m latent prior precision
  std::vector<Eigen::VectorXd> constraints; // length-m rows, gamma block
  double log_norm = 0.0;                    // proper-dimension normalizer
};

class ModelContext {
 public:
  ModelContext(const ModelSpec& spec, const Dataset& data, const RegionGraph& graph)
      : spec_(spec), data_(data), graph_(graph) {
    spec_.validate();
    p_ = spec_.n_covariates() + 1;
    J_eff_ = spec_.effect == EffectType::none ? 0 : graph_.J;
    m_ = p_ + J_eff_;
    Xr_ = data_.X;  // row-major copy for per-row passes

    coords_.clear();
    if (spec_.effect != EffectType::none) coords_.push_back(HyperCoord::log_tau);
    if (spec_.effect == EffectType::leroux && !spec_.phi_is_fixed())
      coords_.push_back(HyperCoord::logit_phi);
    if (spec_.family == Family::weibull) coords_.push_back(HyperCoord::alpha_raw);

    accum_.resize(chunk_count(data_.n));
  }

  const ModelSpec& spec() const { return spec_; }
  const Dataset& data() const { return data_; }
  const RegionGraph& graph() const { return graph_; }
  int p() const { return p_; }
  int J_eff() const { return J_eff_; }
  int m() const { return m_; }
  int hyper_dim() const { return static_cast<int>(coords_.size()); }
  const std::vector<HyperCoord>& coords() const { return coords_; }

  std::vector<std::string> hyper_internal_names() const {
    std::vector<std::string> out;
    for (auto c : coords_)
      out.push_back(c == HyperCoord::log_tau ? "log_tau"
                    : c == HyperCoord::logit_phi ? "logit_phi" : "alpha_raw");
    return out;
  }

  std::vector<std::string> latent_names() const {
    std::vector<std::string> out;
    out.push_back("Intercept");
    for (const auto& c : spec_.covariate_names) out.push_back(c);
    for (int j = 0; j < J_eff_; ++j) out.push_back("gamma_" + graph_.ids[j]);
    return out;
  }

  HyperNat decode(const Eigen::VectorXd& theta) const {
    HyperNat h;
    if (spec_.effect == EffectType::leroux)
      h.phi = spec_.phi_is_fixed() ? spec_.phi_fixed : 0.0;
    for (int d = 0; d < hyper_dim(); ++d) {
      switch (coords_[d]) {
        case HyperCoord::log_tau: h.tau = std::exp(theta[d]); break;
        case HyperCoord::logit_phi: h.phi = logistic(theta[d]); break;
        case HyperCoord::alpha_raw: h.alpha = std::exp(0.1 * theta[d]); break;
      }
    }
    return h;
  }

  // Box bounds for grid exploration, in internal coordinates.
  void coord_box(int d, double& lo, double& hi) const {
    const auto& g = spec_.grid;
    switch (coords_[d]) {
      case HyperCoord::log_tau: lo = g.log_tau_min; hi = g.log_tau_max; break;
      case HyperCoord::logit_phi: lo = g.logit_phi_min; hi = g.logit_phi_max; break;
      case HyperCoord::alpha_raw: lo = g.alpha_raw_min; hi = g.alpha_raw_max; break;
    }
  }

  // log prior of theta in internal coordinates (Jacobians included):
  // improper-uniform tau gives +log tau, logit phi is Gaussian, alpha_raw
  // carries the PC prior.
  double log_hyper_prior(const Eigen::VectorXd& theta) const {
    double lp = 0.0;
    for (int d = 0; d < hyper_dim(); ++d) {
      switch (coords_[d]) {
        case HyperCoord::log_tau:
          if (spec_.priors.tau_uniform) lp += theta[d];
          break;
        case HyperCoord::logit_phi: {
          const double prec = spec_.priors.logit_phi_precision;
          const double c = theta[d] - spec_.priors.logit_phi_mean;
          lp += 0.5 * std::log(prec / (2.0 * M_PI)) - 0.5 * prec * c * c;
          break;
        }
        case HyperCoord::alpha_raw:
          lp += pc_prior_alpha_logdensity(theta[d], spec_.priors.pc_alpha_rate);
          break;
      }
    }
    return lp;
  }

  // Latent prior precision, constraints, and its theta-dependent normalizer.
  PriorPack latent_prior(const Eigen::VectorXd& theta) const {
    const HyperNat h = decode(theta);
    PriorPack pack;
    std::vector<Eigen::Triplet<double>> trips;
    trips.emplace_back(0, 0, spec_.priors.intercept_precision);
    for (int c = 1; c < p_; ++c) trips.emplace_back(c, c, spec_.priors.beta_precision);

    double log_norm = 0.0;
    if (spec_.priors.intercept_precision > 0)
      log_norm += 0.5 * std::log(spec_.priors.intercept_precision / (2.0 * M_PI));
    if (spec_.priors.beta_precision > 0)
      log_norm += 0.5 * (p_ - 1) * std::log(spec_.priors.beta_precision / (2.0 * M_PI));

    if (spec_.effect != EffectType::none) {
      SparsePrecision structure = effect_structure(h.phi);
      for (int k = 0; k < structure.Q.outerSize(); ++k)
        for (SpMat::InnerIterator it(structure.Q, k); it; ++it)
          trips.emplace_back(p_ + static_cast<int>(it.row()), p_ + k, h.tau * it.value());
      for (const auto& row : structure.constraints) {
        Eigen::VectorXd full = Eigen::VectorXd::Zero(m_);
        full.tail(J_eff_) = row;
        pack.constraints.push_back(std::move(full));
      }
      const int r = J_eff_ - static_cast<int>(structure.constraints.size());
      log_norm += 0.5 * r * (std::log(h.tau) - std::log(2.0 * M_PI)) +
                  0.5 * structure_logdet(h.phi);
    }
    pack.P.resize(m_, m_);
    pack.P.setFromTriplets(trips.begin(), trips.end());
    pack.log_norm = log_norm;
    return pack;
  }

  // eta_i = beta_0 + x_i' beta + gamma_{region(i)}
  void linear_predictor(const Eigen::VectorXd& x, Eigen::VectorXd& eta) const {
    eta.resize(data_.n);
    const int q = p_ - 1;
    parallel_chunks(data_.n, [&](std::size_t, std::size_t lo, std::size_t hi) {
      for (std::size_t i = lo; i < hi; ++i) {
        double e = x[0];
        for (int c = 0; c < q; ++c) e += Xr_(static_cast<Eigen::Index>(i), c) * x[c + 1];
        if (J_eff_ > 0) e += x[p_ + data_.region[i]];
        eta[static_cast<Eigen::Index>(i)] = e;
      }
    });
  }

  double obs_loglik(double eta, double alpha, std::size_t i) const {
    if (data_.family == Family::logit) return bernoulli_logit_terms(eta, data_.y[i]).ll;
    return weibull_terms(eta, alpha, data_.time[i], data_.event[i]).ll;
  }

  // Total log-likelihood at latent x, natural-scale alpha.
  double log_lik(const Eigen::VectorXd& x, double alpha) const {
    Eigen::VectorXd eta;
    linear_predictor(x, eta);
    return log_lik_eta(eta, alpha);
  }

  double log_lik_eta(const Eigen::VectorXd& eta, double alpha) const {
    std::vector<double> part(chunk_count(data_.n), 0.0);
    parallel_chunks(data_.n, [&](std::size_t c, std::size_t lo, std::size_t hi) {
      double s = 0.0;
      for (std::size_t i = lo; i < hi; ++i)
        s += obs_loglik(eta[static_cast<Eigen::Index>(i)], alpha, i);
      part[c] = s;
    });
    double total = 0.0;
    for (double s : part) total += s;
    return total;
  }

  // Full derivative pass: log-likelihood, gradient blocks, curvature blocks.
  LikDerivs lik_derivs(const Eigen::VectorXd& x, double alpha) const {
    Eigen::VectorXd eta;
    linear_predictor(x, eta);
    const int q = p_ - 1;
    const std::size_t nchunks = chunk_count(data_.n);
    for (auto& a : accum_) a.reset(p_, J_eff_);
    parallel_chunks(data_.n, [&](std::size_t c, std::size_t lo, std::size_t hi) {
      Accum& a = accum_[c];
      Eigen::VectorXd xrow(p_);
      xrow[0] = 1.0;
      for (std::size_t i = lo; i < hi; ++i) {
        const auto ii = static_cast<Eigen::Index>(i);
        const LikTerms lt = data_.family == Family::logit
                                ? bernoulli_logit_terms(eta[ii], data_.y[i])
                                : weibull_terms(eta[ii], alpha, data_.time[i],
                                                data_.event[i]);
        for (int cv = 0; cv < q; ++cv) xrow[cv + 1] = Xr_(ii, cv);
        a.ll += lt.ll;
        const double w = -lt.d2;
        a.gb.noalias() += lt.d1 * xrow;
        a.bb.noalias() += w * xrow * xrow.transpose();
        if (J_eff_ > 0) {
          const int r = data_.region[i];
          a.gg[r] += lt.d1;
          a.bg.col(r).noalias() += w * xrow;
          a.gg_curv[r] += w;
        }
      }
    });
    LikDerivs out;
    out.grad_beta = Eigen::VectorXd::Zero(p_);
    out.grad_gamma = Eigen::VectorXd::Zero(J_eff_);
    out.bb = Eigen::MatrixXd::Zero(p_, p_);
    out.bg = Eigen::MatrixXd::Zero(p_, J_eff_);
    out.gg = Eigen::VectorXd::Zero(J_eff_);
    for (std::size_t c = 0; c < nchunks; ++c) {
      const Accum& a = accum_[c];
      out.ll += a.ll;
      out.grad_beta += a.gb;
      out.bb += a.bb;
      if (J_eff_ > 0) {
        out.grad_gamma += a.gg;
        out.bg += a.bg;
        out.gg += a.gg_curv;
      }
    }
    return out;
  }

  // H = likelihood curvature + prior precision, as one sparse matrix.
  SpMat assemble_precision(const LikDerivs& d, const SpMat& P) const {
    std::vector<Eigen::Triplet<double>> trips;
    trips.reserve(static_cast<std::size_t>(p_ * p_ + 2 * p_ * J_eff_ + J_eff_) +
                  static_cast<std::size_t>(P.nonZeros()));
    for (int a = 0; a < p_; ++a)
      for (int b = 0; b < p_; ++b) trips.emplace_back(a, b, d.bb(a, b));
    for (int j = 0; j < J_eff_; ++j) {
      for (int a = 0; a < p_; ++a) {
        trips.emplace_back(a, p_ + j, d.bg(a, j));
        trips.emplace_back(p_ + j, a, d.bg(a, j));
      }
      trips.emplace_back(p_ + j, p_ + j, d.gg[j]);
    }
    for (int k = 0; k < P.outerSize(); ++k)
      for (SpMat::InnerIterator it(P, k); it; ++it)
        trips.emplace_back(static_cast<int>(it.row()), k, it.value());
    SpMat H(m_, m_);
    H.setFromTriplets(trips.begin(), trips.end());
    return H;
  }

  // Per-observation log-likelihood into out[], for WAIC accumulation.
  void per_obs_loglik(const Eigen::VectorXd& eta, double alpha,
                      std::vector<double>& out) const {
    out.resize(data_.n);
    parallel_chunks(data_.n, [&](std::size_t, std::size_t lo, std::size_t hi) {
      for (std::size_t i = lo; i < hi; ++i)
        out[i] = obs_loglik(eta[static_cast<Eigen::Index>(i)], alpha, i);
    });
  }

 private:
  SparsePrecision effect_structure(double phi) const {
    if (spec_.effect == EffectType::iid) {
      SparsePrecision s;
      s.J = graph_.J;
      s.Q.resize(graph_.J, graph_.J);
      s.Q.setIdentity();
      return s;
    }
    return leroux_structure(graph_, phi);
  }

  double structure_logdet(double phi) const {
    if (spec_.effect == EffectType::iid) return 0.0;
    if (phi == 1.0) {
      if (!icar_logdet_.has_value())
        icar_logdet_ = generalized_logdet(leroux_structure(graph_, 1.0).Q).logdet;
      return *icar_logdet_;
    }
    auto it = logdet_cache_.find(phi);
    if (it != logdet_cache_.end()) return it->second;
    Eigen::SimplicialLDLT<SpMat> ldlt(leroux_structure(graph_, phi).Q);
    if (ldlt.info() != Eigen::Success)
      throw SingularPrecision("Leroux structure factorization failed");
    const double ld = ldlt.vectorD().array().log().sum();
    logdet_cache_.emplace(phi, ld);
    return ld;
  }

  struct Accum {
    double ll = 0.0;
    Eigen::VectorXd gb, gg, gg_curv;
    Eigen::MatrixXd bb, bg;
    void reset(int p, int J) {
      ll = 0.0;
      gb = Eigen::VectorXd::Zero(p);
      gg = Eigen::VectorXd::Zero(J);
      gg_curv = Eigen::VectorXd::Zero(J);
      bb = Eigen::MatrixXd::Zero(p, p);
      bg = Eigen::MatrixXd::Zero(p, J);
    }
  };

  ModelSpec spec_;
  const Dataset& data_;
  const RegionGraph& graph_;
  int p_ = 0, J_eff_ = 0, m_ = 0;
  Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> Xr_;
  std::vector<HyperCoord> coords_;
  mutable std::vector<Accum> accum_;
  mutable std::map<double, double> logdet_cache_;
  mutable std::optional<double> icar_logdet_;
};

}  // namespace lgm
