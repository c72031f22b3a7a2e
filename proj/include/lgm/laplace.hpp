#pragma once

// Nested approximation engine: Gaussian approximation of the latent field at
// fixed hyperparameters (Newton with step halving, constraints by kriging),
// hyperparameter mode search and grid exploration, and mixture marginals.

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <map>
#include <memory>
#include <set>
#include <utility>
#include <vector>

#include "lgm/domain.hpp"
#include "lgm/model.hpp"
#include "lgm/sparse.hpp"

namespace lgm {

struct GaussianApprox {
  Eigen::VectorXd mode;
  std::unique_ptr<PrecisionFactor> factor;
  HyperNat nat;
  double loglik = 0.0;      // sum of per-observation ll at the mode
  double objective = 0.0;   // loglik + latent prior quadratic at the mode
  double log_hyper = 0.0;   // unnormalized log posterior of theta
  int iters = 0;
  Eigen::VectorXd variances;
  bool have_variances = false;
};

class LaplaceEngine {
 public:
  explicit LaplaceEngine(const ModelContext& ctx) : ctx_(ctx) {}

  const ModelContext& context() const { return ctx_; }

  const GaussianApprox& approx_at(const Eigen::VectorXd& theta) {
    std::vector<double> key(theta.data(), theta.data() + theta.size());
    auto it = memo_.find(key);
    if (it != memo_.end()) return *it->second;
    auto approx = std::make_unique<GaussianApprox>(compute_approx(theta));
    const GaussianApprox& ref = *approx;
    memo_.emplace(std::move(key), std::move(approx));
    return ref;
  }

  double log_hyper_posterior(const Eigen::VectorXd& theta) {
    return approx_at(theta).log_hyper;
  }

  const Eigen::VectorXd& variances_at(const Eigen::VectorXd& theta) {
    auto& a = const_cast<GaussianApprox&>(approx_at(theta));
    if (!a.have_variances) {
      a.variances = a.factor->marginal_variances();
      a.have_variances = true;
    }
    return a.variances;
  }

  // Mode search (coordinate pattern search), FD curvature scaling, and
  // BFS grid expansion until the log posterior drops below the threshold.
  std::vector<HyperPoint> explore_hyperparameters() {
    const int dim = ctx_.hyper_dim();
    std::vector<HyperPoint> grid;
    if (dim == 0) {
      HyperPoint pt;
      pt.theta = Eigen::VectorXd(0);
      pt.log_post = log_hyper_posterior(pt.theta);
      pt.weight = 1.0;
      grid.push_back(pt);
      grid_scales_.assign(1, 1.0);
      return grid;
    }
    const GridSettings& gs = ctx_.spec().grid;

    Eigen::VectorXd theta = Eigen::VectorXd::Zero(dim);
    for (int d = 0; d < dim; ++d) {
      double lo, hi;
      ctx_.coord_box(d, lo, hi);
      theta[d] = std::min(std::max(theta[d], lo), hi);
    }
    double best = log_hyper_posterior(theta);
    double step = 1.0;
    int evals = 0;
    const int eval_cap = 1000;
    while (step >= 1e-3) {
      bool moved = false;
      for (int d = 0; d < dim; ++d) {
        double lo, hi;
        ctx_.coord_box(d, lo, hi);
        for (double sign : {+1.0, -1.0}) {
          Eigen::VectorXd cand = theta;
          cand[d] = std::min(std::max(theta[d] + sign * step, lo), hi);
          if (cand[d] == theta[d]) continue;
          if (++evals > eval_cap)
            throw ModeSearchFailure("hyperparameter mode search exceeded budget");
          const double lp = log_hyper_posterior(cand);
          if (lp > best) {
            best = lp;
            theta = cand;
            moved = true;
            break;
          }
        }
      }
      if (!moved) step *= 0.5;
    }

    // FD curvature -> per-axis scales for the standardized grid
    grid_scales_.assign(dim, 1.0);
    for (int d = 0; d < dim; ++d) {
      double lo, hi;
      ctx_.coord_box(d, lo, hi);
      const double h = 0.5;
      Eigen::VectorXd up = theta, dn = theta;
      up[d] = std::min(theta[d] + h, hi);
      dn[d] = std::max(theta[d] - h, lo);
      const double span = up[d] - dn[d];
      double scale = 1.0;
      if (span > 1e-8) {
        const double fup = log_hyper_posterior(up);
        const double fdn = log_hyper_posterior(dn);
        // three-point curvature, valid also when clamping made it one-sided
        const double fdd =
            2.0 * (fup * (theta[d] - dn[d]) + fdn * (up[d] - theta[d]) - best * span) /
            ((up[d] - theta[d]) * (theta[d] - dn[d]) * span + 1e-300);
        if (fdd < -1e-8) scale = 1.0 / std::sqrt(-fdd);
      }
      const double max_scale = (hi - lo) / (4.0 * gs.delta);
      grid_scales_[d] = std::min(std::max(scale, 1e-3), std::max(max_scale, 1e-3));
    }

    // BFS over the integer lattice around the mode
    const double lp_mode = best;
    std::set<std::vector<int>> visited;
    std::deque<std::vector<int>> queue;
    std::vector<std::pair<std::vector<int>, double>> kept;
    const std::vector<int> origin(dim, 0);
    visited.insert(origin);
    kept.emplace_back(origin, lp_mode);
    queue.push_back(origin);
    auto lattice_theta = [&](const std::vector<int>& k) {
      Eigen::VectorXd t = theta;
      for (int d = 0; d < dim; ++d) t[d] += gs.delta * grid_scales_[d] * k[d];
      return t;
    };
    while (!queue.empty()) {
      const std::vector<int> base = queue.front();
      queue.pop_front();
      for (int d = 0; d < dim; ++d) {
        for (int sign : {+1, -1}) {
          std::vector<int> nb = base;
          nb[d] += sign;
          if (!visited.insert(nb).second) continue;
          const Eigen::VectorXd t = lattice_theta(nb);
          bool in_box = true;
          for (int e = 0; e < dim; ++e) {
            double elo, ehi;
            ctx_.coord_box(e, elo, ehi);
            if (t[e] < elo || t[e] > ehi) in_box = false;
          }
          if (!in_box) continue;
          const double lp = log_hyper_posterior(t);
          if (lp >= lp_mode - gs.drop) {
            kept.emplace_back(nb, lp);
            if (static_cast<int>(kept.size()) > gs.max_points)
              throw GridExplosion("hyperparameter grid exceeded " +
                                  fmt_int((std::int64_t)gs.max_points) + " points");
            queue.push_back(nb);
          }
        }
      }
    }
    std::sort(kept.begin(), kept.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });

    double lp_max = -std::numeric_limits<double>::infinity();
    for (const auto& [k, lp] : kept) lp_max = std::max(lp_max, lp);
    double total = 0.0;
    for (const auto& [k, lp] : kept) total += std::exp(lp - lp_max);
    for (const auto& [k, lp] : kept) {
      HyperPoint pt;
      pt.theta = lattice_theta(k);
      pt.log_post = lp;
      pt.weight = std::exp(lp - lp_max) / total;
      grid.push_back(std::move(pt));
    }
    return grid;
  }

  // Mixture marginals over the grid: Gaussian mixtures for the latent field,
  // kernel-smoothed grid marginals for the hyperparameters.
  void latent_marginals(const std::vector<HyperPoint>& grid, FitResult& out) {
    if (grid.empty()) throw EmptyGrid("no hyperparameter grid points");
    const int p = ctx_.p();
    const std::size_t K = grid.size();

    std::vector<const GaussianApprox*> apx(K);
    std::vector<const Eigen::VectorXd*> vars(K);
    for (std::size_t k = 0; k < K; ++k) {
      vars[k] = &variances_at(grid[k].theta);
      apx[k] = &approx_at(grid[k].theta);
    }

    auto mixture_marginal = [&](int coord) {
      double mean = 0.0, second = 0.0;
      for (std::size_t k = 0; k < K; ++k) {
        const double mu = apx[k]->mode[coord];
        const double v = (*vars[k])[coord];
        mean += grid[k].weight * mu;
        second += grid[k].weight * (v + mu * mu);
      }
      const double var = std::max(second - mean * mean, 1e-300);
      return std::pair<double, double>(mean, std::sqrt(var));
    };

    out.fixed_names = ctx_.latent_names();
    out.fixed_names.resize(p);
    out.fixed_marginals.clear();
    for (int c = 0; c < p; ++c) {
      auto [mean, sd] = mixture_marginal(c);
      Marginal mg;
      const int npts = 201;
      mg.support.resize(npts);
      mg.density.resize(npts);
      for (int i = 0; i < npts; ++i) {
        const double x = mean - 5.0 * sd + 10.0 * sd * i / (npts - 1);
        mg.support[i] = x;
        double dens = 0.0;
        for (std::size_t k = 0; k < K; ++k) {
          const double v = (*vars[k])[c];
          const double z = x - apx[k]->mode[c];
          dens += grid[k].weight * std::exp(-0.5 * z * z / v) / std::sqrt(2.0 * M_PI * v);
        }
        mg.density[i] = dens;
      }
      normalize_marginal(mg);
      out.fixed_marginals.push_back(std::move(mg));
    }

    out.random_summaries.clear();
    for (int j = 0; j < ctx_.J_eff(); ++j) {
      auto [mean, sd] = mixture_marginal(p + j);
      out.random_summaries.push_back({mean, sd});
    }

    out.hyper_names.clear();
    out.hyper_marginals.clear();
    const auto& coords = ctx_.coords();
    for (int d = 0; d < ctx_.hyper_dim(); ++d) {
      // discrete grid marginal for this coordinate
      std::map<double, double> discrete;
      for (const auto& pt : grid) discrete[pt.theta[d]] += pt.weight;
      const double h =
          (d < static_cast<int>(grid_scales_.size()) ? grid_scales_[d] : 1.0) *
          ctx_.spec().grid.delta;
      const double tmin = discrete.begin()->first - 4.0 * h;
      const double tmax = discrete.rbegin()->first + 4.0 * h;
      const int npts = 201;
      Marginal mg;
      mg.support.resize(npts);
      mg.density.resize(npts);
      std::string name;
      for (int i = 0; i < npts; ++i) {
        const double t = tmin + (tmax - tmin) * i / (npts - 1);
        double dens = 0.0;
        for (const auto& [tk, w] : discrete)
          dens += w * std::exp(-0.5 * (t - tk) * (t - tk) / (h * h)) /
                  (h * std::sqrt(2.0 * M_PI));
        double x = t, jac = 1.0;  // density in natural scale: dens * |dt/dx|
        switch (coords[d]) {
          case HyperCoord::log_tau:
            name = "tau";
            x = std::exp(t);
            jac = 1.0 / x;
            break;
          case HyperCoord::logit_phi: {
            name = "phi";
            x = logistic(t);
            jac = 1.0 / std::max(x * (1.0 - x), 1e-300);
            break;
          }
          case HyperCoord::alpha_raw:
            name = "alpha";
            x = std::exp(0.1 * t);
            jac = 10.0 / x;
            break;
        }
        mg.support[i] = x;
        mg.density[i] = dens * jac;
      }
      normalize_marginal(mg);
      out.hyper_names.push_back(name);
      out.hyper_marginals.push_back(std::move(mg));
    }
  }

 private:
  GaussianApprox compute_approx(const Eigen::VectorXd& theta) {
    const HyperNat nat = ctx_.decode(theta);
    const PriorPack prior = ctx_.latent_prior(theta);
    const int m = ctx_.m();
    const int k = static_cast<int>(prior.constraints.size());

    // orthogonal projector for warm-start feasibility and gradient tests
    Eigen::MatrixXd A;
    Eigen::LLT<Eigen::MatrixXd> gram;
    if (k > 0) {
      A.resize(k, m);
      for (int r = 0; r < k; ++r) A.row(r) = prior.constraints[r].transpose();
      gram.compute(A * A.transpose());
    }
    auto project_feasible = [&](Eigen::VectorXd x) {
      if (k > 0) x -= A.transpose() * gram.solve(A * x);
      return x;
    };
    auto projected_grad = [&](const Eigen::VectorXd& g) {
      if (k == 0) return g;
      Eigen::VectorXd pg = g - A.transpose() * gram.solve(A * g);
      return pg;
    };

    Eigen::VectorXd x = warm_start_.size() == m ? project_feasible(warm_start_)
                                                : Eigen::VectorXd::Zero(m);
    auto objective = [&](const Eigen::VectorXd& z) {
      return ctx_.log_lik(z, nat.alpha) - 0.5 * z.dot(prior.P * z);
    };

    GaussianApprox out;
    out.nat = nat;
    double f = 0.0;
    bool converged = false;
    for (int iter = 0; iter < 100; ++iter) {
      const LikDerivs d = ctx_.lik_derivs(x, nat.alpha);
      Eigen::VectorXd g(m);
      g.head(ctx_.p()) = d.grad_beta;
      if (ctx_.J_eff() > 0) g.tail(ctx_.J_eff()) = d.grad_gamma;
      g -= prior.P * x;
      f = d.ll - 0.5 * x.dot(prior.P * x);

      const SpMat H = ctx_.assemble_precision(d, prior.P);
      out.factor = std::make_unique<PrecisionFactor>(H, prior.constraints);
      out.loglik = d.ll;
      out.iters = iter;

      if (projected_grad(g).lpNorm<Eigen::Infinity>() < 1e-8) {
        converged = true;
        break;
      }
      const Eigen::VectorXd step = out.factor->constrained_step(g);
      const double decrement = g.dot(step);
      if (decrement < 1e-10) {
        converged = true;
        break;
      }
      double t = 1.0;
      bool improved = false;
      for (int half = 0; half < 30; ++half) {
        const double f_new = objective(x + t * step);
        if (f_new > f) {
          x += t * step;
          f = f_new;
          improved = true;
          break;
        }
        t *= 0.5;
      }
      if (!improved) {
        if (decrement < 1e-6) {
          converged = true;
          break;
        }
        throw NonConvergence("line search stalled away from optimum");
      }
    }
    if (!converged) throw NonConvergence("Newton iteration cap exceeded");

    out.mode = x;
    out.objective = f;
    out.log_hyper = f + prior.log_norm + ctx_.log_hyper_prior(theta) -
                    (0.5 * out.factor->logdet_subspace() -
                     0.5 * out.factor->free_dims() * std::log(2.0 * M_PI));
    warm_start_ = x;
    return out;
  }

  const ModelContext& ctx_;
  std::map<std::vector<double>, std::unique_ptr<GaussianApprox>> memo_;
  Eigen::VectorXd warm_start_;
  std::vector<double> grid_scales_;
};

}  // namespace lgm
