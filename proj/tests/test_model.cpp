#include <catch_amalgamated.hpp>

#include <Eigen/Dense>
#include <cmath>
#include <string>
#include <vector>

#include "lgm/likelihood.hpp"
#include "lgm/model.hpp"
#include "lgm/rng.hpp"

namespace {

constexpr double kTwoPi = 6.283185307179586476925286766559;

lgm::Dataset logit_data(int n, int J, int q, lgm::Rng& rng) {
  lgm::Dataset d;
  d.n = n;
  d.J = J;
  d.family = lgm::Family::logit;
  d.y.resize(n);
  d.X.resize(n, q);
  d.region.resize(n);
  for (int i = 0; i < n; ++i) {
    d.region[i] = i % J;
    for (int c = 0; c < q; ++c) d.X(i, c) = rng.normal();
    d.y[i] = rng.uniform() < 0.5 ? 1.0 : 0.0;
  }
  return d;
}

lgm::Dataset weibull_data(int n, int J, int q, lgm::Rng& rng) {
  lgm::Dataset d;
  d.n = n;
  d.J = J;
  d.family = lgm::Family::weibull;
  d.time.resize(n);
  d.event.resize(n);
  d.X.resize(n, q);
  d.region.resize(n);
  for (int i = 0; i < n; ++i) {
    d.region[i] = i % J;
    for (int c = 0; c < q; ++c) d.X(i, c) = rng.normal();
    d.time[i] = 0.05 + 0.95 * rng.uniform();
    d.event[i] = static_cast<std::uint8_t>(i % 3 != 0);
  }
  return d;
}

lgm::ModelSpec base_spec(lgm::Family fam, lgm::EffectType eff, int q) {
  lgm::ModelSpec s;
  s.family = fam;
  s.effect = eff;
  for (int c = 0; c < q; ++c) s.covariate_names.push_back("x" + std::to_string(c + 1));
  return s;
}

lgm::RegionGraph path3() { return lgm::make_graph({{1}, {0, 2}, {1}}); }

}  // namespace

TEST_CASE("latent layout and hyperparameter coordinates follow the spec") {
  lgm::Rng rng(501);
  lgm::RegionGraph g = path3();

  lgm::Dataset d = logit_data(30, 3, 2, rng);
  lgm::ModelContext none(base_spec(lgm::Family::logit, lgm::EffectType::none, 2), d, g);
  REQUIRE(none.p() == 3);
  REQUIRE(none.J_eff() == 0);
  REQUIRE(none.m() == 3);
  REQUIRE(none.hyper_dim() == 0);
  REQUIRE(none.latent_names() ==
          std::vector<std::string>{"Intercept", "x1", "x2"});

  lgm::ModelContext ler(base_spec(lgm::Family::logit, lgm::EffectType::leroux, 2), d, g);
  REQUIRE(ler.m() == 6);
  REQUIRE(ler.hyper_internal_names() ==
          std::vector<std::string>{"log_tau", "logit_phi"});
  REQUIRE(ler.latent_names().back() == "gamma_R2");

  lgm::ModelSpec fixed = base_spec(lgm::Family::logit, lgm::EffectType::leroux, 2);
  fixed.phi_fixed = 1.0;
  lgm::ModelContext icar(fixed, d, g);
  REQUIRE(icar.hyper_internal_names() == std::vector<std::string>{"log_tau"});

  lgm::Dataset w = weibull_data(30, 3, 1, rng);
  lgm::ModelContext wib(base_spec(lgm::Family::weibull, lgm::EffectType::iid, 1), w, g);
  REQUIRE(wib.hyper_internal_names() ==
          std::vector<std::string>{"log_tau", "alpha_raw"});

  lgm::ModelContext wnone(base_spec(lgm::Family::weibull, lgm::EffectType::none, 1), w, g);
  REQUIRE(wnone.hyper_internal_names() == std::vector<std::string>{"alpha_raw"});
}

TEST_CASE("internal coordinates decode to natural hyperparameters") {
  lgm::Rng rng(502);
  lgm::RegionGraph g = path3();
  lgm::Dataset d = logit_data(30, 3, 1, rng);

  lgm::ModelContext ler(base_spec(lgm::Family::logit, lgm::EffectType::leroux, 1), d, g);
  Eigen::VectorXd theta(2);
  theta << 1.2, -0.4;
  const lgm::HyperNat h = ler.decode(theta);
  REQUIRE(h.tau == Catch::Approx(std::exp(1.2)).epsilon(1e-15));
  REQUIRE(h.phi == Catch::Approx(1.0 / (1.0 + std::exp(0.4))).epsilon(1e-12));
  REQUIRE(h.alpha == 1.0);

  lgm::ModelSpec fixed = base_spec(lgm::Family::logit, lgm::EffectType::leroux, 1);
  fixed.phi_fixed = 0.3;
  lgm::ModelContext fix(fixed, d, g);
  Eigen::VectorXd t1(1);
  t1 << 0.0;
  REQUIRE(fix.decode(t1).phi == 0.3);

  lgm::Dataset w = weibull_data(30, 3, 1, rng);
  lgm::ModelContext wib(base_spec(lgm::Family::weibull, lgm::EffectType::iid, 1), w, g);
  Eigen::VectorXd t2(2);
  t2 << 0.5, 3.0;
  REQUIRE(wib.decode(t2).alpha == Catch::Approx(std::exp(0.3)).epsilon(1e-15));

  double lo = 0.0, hi = 0.0;
  wib.coord_box(0, lo, hi);
  REQUIRE(lo == -12.0);
  REQUIRE(hi == 12.0);
  wib.coord_box(1, lo, hi);
  REQUIRE(lo == -60.0);
  REQUIRE(hi == 60.0);
  ler.coord_box(1, lo, hi);
  REQUIRE(lo == -8.0);
  REQUIRE(hi == 8.0);
}

TEST_CASE("hyper prior densities match their closed forms") {
  lgm::Rng rng(503);
  lgm::RegionGraph g = path3();
  lgm::Dataset d = logit_data(30, 3, 1, rng);

  lgm::ModelContext ler(base_spec(lgm::Family::logit, lgm::EffectType::leroux, 1), d, g);
  Eigen::VectorXd theta(2);
  theta << 1.7, 2.0;
  // uniform tau contributes the log tau Jacobian; logit phi is Gaussian
  const double prec = 0.1;
  const double want =
      1.7 + 0.5 * std::log(prec / kTwoPi) - 0.5 * prec * 4.0;
  REQUIRE(ler.log_hyper_prior(theta) == Catch::Approx(want).epsilon(1e-14));

  lgm::Dataset w = weibull_data(30, 3, 1, rng);
  lgm::ModelContext wib(base_spec(lgm::Family::weibull, lgm::EffectType::iid, 1), w, g);
  Eigen::VectorXd t2(2);
  t2 << -0.3, 4.0;
  const double want2 = -0.3 + lgm::pc_prior_alpha_logdensity(4.0, 5.0);
  REQUIRE(wib.log_hyper_prior(t2) == Catch::Approx(want2).epsilon(1e-13));
}

TEST_CASE("latent prior assembles the right precision and normalizer") {
  lgm::Rng rng(504);
  lgm::RegionGraph g = path3();
  lgm::Dataset d = logit_data(30, 3, 2, rng);

  SECTION("no random effect") {
    lgm::ModelContext ctx(base_spec(lgm::Family::logit, lgm::EffectType::none, 2), d, g);
    Eigen::VectorXd theta(0);
    lgm::PriorPack pack = ctx.latent_prior(theta);
    Eigen::MatrixXd P = Eigen::MatrixXd(pack.P);
    Eigen::MatrixXd want = Eigen::MatrixXd::Zero(3, 3);
    want(1, 1) = 0.001;
    want(2, 2) = 0.001;
    REQUIRE((P - want).cwiseAbs().maxCoeff() == 0.0);
    REQUIRE(pack.constraints.empty());
    REQUIRE(pack.log_norm == Catch::Approx(std::log(0.001 / kTwoPi)).epsilon(1e-14));
  }

  SECTION("iid effect is a scaled identity with a full-rank normalizer") {
    lgm::ModelContext ctx(base_spec(lgm::Family::logit, lgm::EffectType::iid, 2), d, g);
    Eigen::VectorXd theta(1);
    theta << 0.8;
    const double tau = std::exp(0.8);
    lgm::PriorPack pack = ctx.latent_prior(theta);
    Eigen::MatrixXd P = Eigen::MatrixXd(pack.P);
    REQUIRE(P.bottomRightCorner(3, 3).isApprox(tau * Eigen::MatrixXd::Identity(3, 3), 1e-15));
    REQUIRE(pack.constraints.empty());
    const double beta_part = std::log(0.001 / kTwoPi);
    REQUIRE(pack.log_norm ==
            Catch::Approx(beta_part + 1.5 * (0.8 - std::log(kTwoPi))).epsilon(1e-13));
  }

  SECTION("leroux effect matches a dense log-determinant oracle") {
    lgm::ModelContext ctx(base_spec(lgm::Family::logit, lgm::EffectType::leroux, 2), d, g);
    Eigen::VectorXd theta(2);
    theta << 0.4, 0.9;
    const lgm::HyperNat h = ctx.decode(theta);
    lgm::PriorPack pack = ctx.latent_prior(theta);
    Eigen::MatrixXd Qphi =
        Eigen::MatrixXd(lgm::leroux_structure(g, h.phi).Q);
    Eigen::MatrixXd P = Eigen::MatrixXd(pack.P);
    REQUIRE((P.bottomRightCorner(3, 3) - h.tau * Qphi).cwiseAbs().maxCoeff() < 1e-14);
    // proper Gaussian: log normalizer is (logdet(tau Q_phi) - J log 2pi)/2
    const double ld = std::log((h.tau * Qphi).determinant());
    const double beta_part = std::log(0.001 / kTwoPi);
    REQUIRE(pack.log_norm ==
            Catch::Approx(beta_part + 0.5 * ld - 1.5 * std::log(kTwoPi)).epsilon(1e-12));
  }

  SECTION("intrinsic limit carries constraints and a rank-deficient normalizer") {
    lgm::ModelSpec spec = base_spec(lgm::Family::logit, lgm::EffectType::leroux, 2);
    spec.phi_fixed = 1.0;
    lgm::ModelContext ctx(spec, d, g);
    Eigen::VectorXd theta(1);
    theta << -0.6;
    const double tau = std::exp(-0.6);
    lgm::PriorPack pack = ctx.latent_prior(theta);
    REQUIRE(pack.constraints.size() == 1);
    REQUIRE(pack.constraints[0].head(3).cwiseAbs().maxCoeff() == 0.0);
    REQUIRE(pack.constraints[0].tail(3).sum() == 3.0);
    const lgm::GenLogDet gen = lgm::generalized_logdet(lgm::leroux_structure(g, 1.0).Q);
    REQUIRE(gen.rank == 2);
    const double beta_part = std::log(0.001 / kTwoPi);
    const double want = beta_part + 0.5 * 2 * (-0.6 - std::log(kTwoPi)) + 0.5 * gen.logdet;
    REQUIRE(pack.log_norm == Catch::Approx(want).epsilon(1e-12));
    REQUIRE(pack.P.coeff(3, 3) == Catch::Approx(tau * 1.0).epsilon(1e-15));
  }
}

TEST_CASE("linear predictor adds intercept, covariates, and region effect") {
  lgm::RegionGraph g = path3();
  lgm::Dataset d;
  d.n = 3;
  d.J = 3;
  d.family = lgm::Family::logit;
  d.y = {1.0, 0.0, 1.0};
  d.X.resize(3, 1);
  d.X << 2.0, -1.0, 0.5;
  d.region = {0, 2, 1};
  lgm::ModelContext ctx(base_spec(lgm::Family::logit, lgm::EffectType::iid, 1), d, g);
  Eigen::VectorXd x(5);
  x << 0.3, 1.5, 0.1, -0.2, 0.4;  // intercept, beta, gamma0..2
  Eigen::VectorXd eta;
  ctx.linear_predictor(x, eta);
  REQUIRE(eta[0] == Catch::Approx(0.3 + 3.0 + 0.1).epsilon(1e-15));
  REQUIRE(eta[1] == Catch::Approx(0.3 - 1.5 + 0.4).epsilon(1e-15));
  REQUIRE(eta[2] == Catch::Approx(0.3 + 0.75 - 0.2).epsilon(1e-15));
}

TEST_CASE("derivative passes match finite differences of the log-likelihood") {
  lgm::Rng rng(505);
  lgm::RegionGraph g = path3();
  const double h = 1e-4;

  auto check_family = [&](lgm::Family fam, double alpha) {
    lgm::Dataset d = fam == lgm::Family::logit ? logit_data(40, 3, 2, rng)
                                               : weibull_data(40, 3, 2, rng);
    lgm::ModelContext ctx(base_spec(fam, lgm::EffectType::iid, 2), d, g);
    const int m = ctx.m();
    Eigen::VectorXd x(m);
    for (int i = 0; i < m; ++i) x[i] = 0.3 * rng.normal();

    const lgm::LikDerivs der = ctx.lik_derivs(x, alpha);
    REQUIRE(der.ll == Catch::Approx(ctx.log_lik(x, alpha)).epsilon(1e-13));

    auto ll_at = [&](const Eigen::VectorXd& v) { return ctx.log_lik(v, alpha); };
    Eigen::VectorXd grad(m);
    for (int a = 0; a < m; ++a) {
      Eigen::VectorXd xp = x, xm = x;
      xp[a] += h;
      xm[a] -= h;
      grad[a] = (ll_at(xp) - ll_at(xm)) / (2.0 * h);
    }
    for (int a = 0; a < ctx.p(); ++a)
      REQUIRE(der.grad_beta[a] == Catch::Approx(grad[a]).epsilon(1e-6).margin(1e-7));
    for (int j = 0; j < ctx.J_eff(); ++j)
      REQUIRE(der.grad_gamma[j] ==
              Catch::Approx(grad[ctx.p() + j]).epsilon(1e-6).margin(1e-7));

    // curvature blocks store the negated Hessian
    Eigen::MatrixXd hess(m, m);
    for (int a = 0; a < m; ++a)
      for (int b = a; b < m; ++b) {
        Eigen::VectorXd v1 = x, v2 = x, v3 = x, v4 = x;
        v1[a] += h; v1[b] += h;
        v2[a] += h; v2[b] -= h;
        v3[a] -= h; v3[b] += h;
        v4[a] -= h; v4[b] -= h;
        hess(a, b) = (ll_at(v1) - ll_at(v2) - ll_at(v3) + ll_at(v4)) / (4.0 * h * h);
        hess(b, a) = hess(a, b);
      }
    for (int a = 0; a < ctx.p(); ++a)
      for (int b = 0; b < ctx.p(); ++b)
        REQUIRE(der.bb(a, b) == Catch::Approx(-hess(a, b)).epsilon(1e-4).margin(1e-5));
    for (int a = 0; a < ctx.p(); ++a)
      for (int j = 0; j < ctx.J_eff(); ++j)
        REQUIRE(der.bg(a, j) ==
                Catch::Approx(-hess(a, ctx.p() + j)).epsilon(1e-4).margin(1e-5));
    for (int j = 0; j < ctx.J_eff(); ++j) {
      REQUIRE(der.gg[j] ==
              Catch::Approx(-hess(ctx.p() + j, ctx.p() + j)).epsilon(1e-4).margin(1e-5));
      // regions never share an observation, so gamma cross-curvature vanishes
      for (int k = j + 1; k < ctx.J_eff(); ++k)
        REQUIRE(hess(ctx.p() + j, ctx.p() + k) == Catch::Approx(0.0).margin(1e-5));
    }
  };

  check_family(lgm::Family::logit, 1.0);
  check_family(lgm::Family::weibull, 1.3);
}

TEST_CASE("assembled precision is symmetric and equals its dense blocks") {
  lgm::Rng rng(506);
  lgm::RegionGraph g = path3();
  lgm::Dataset d = logit_data(50, 3, 2, rng);
  lgm::ModelContext ctx(base_spec(lgm::Family::logit, lgm::EffectType::leroux, 2), d, g);
  Eigen::VectorXd theta(2);
  theta << 0.2, 0.5;
  lgm::PriorPack pack = ctx.latent_prior(theta);
  Eigen::VectorXd x = Eigen::VectorXd::Zero(ctx.m());
  const lgm::LikDerivs der = ctx.lik_derivs(x, 1.0);
  const Eigen::MatrixXd H = Eigen::MatrixXd(ctx.assemble_precision(der, pack.P));

  REQUIRE((H - H.transpose()).cwiseAbs().maxCoeff() == 0.0);

  Eigen::MatrixXd want = Eigen::MatrixXd(pack.P);
  want.topLeftCorner(3, 3) += der.bb;
  want.topRightCorner(3, 3) += der.bg;
  want.bottomLeftCorner(3, 3) += der.bg.transpose();
  want.bottomRightCorner(3, 3) += der.gg.asDiagonal().toDenseMatrix();
  REQUIRE((H - want).cwiseAbs().maxCoeff() < 1e-15);
}

TEST_CASE("per-observation log-likelihoods sum to the total") {
  lgm::Rng rng(507);
  lgm::RegionGraph g = path3();
  lgm::Dataset d = weibull_data(60, 3, 1, rng);
  lgm::ModelContext ctx(base_spec(lgm::Family::weibull, lgm::EffectType::iid, 1), d, g);
  Eigen::VectorXd x = Eigen::VectorXd::Constant(ctx.m(), 0.1);
  Eigen::VectorXd eta;
  ctx.linear_predictor(x, eta);
  std::vector<double> per;
  ctx.per_obs_loglik(eta, 1.2, per);
  double total = 0.0;
  for (double v : per) total += v;
  REQUIRE(total == Catch::Approx(ctx.log_lik_eta(eta, 1.2)).epsilon(1e-12));
}

TEST_CASE("model specs with bad settings are rejected") {
  lgm::Rng rng(508);
  lgm::RegionGraph g = path3();
  lgm::Dataset d = logit_data(10, 3, 1, rng);

  lgm::ModelSpec dup = base_spec(lgm::Family::logit, lgm::EffectType::none, 1);
  dup.covariate_names.push_back("x1");
  REQUIRE_THROWS_AS(lgm::ModelContext(dup, d, g), lgm::BadConfig);

  lgm::ModelSpec bad_delta = base_spec(lgm::Family::logit, lgm::EffectType::none, 1);
  bad_delta.grid.delta = 0.0;
  REQUIRE_THROWS_AS(lgm::ModelContext(bad_delta, d, g), lgm::BadConfig);

  lgm::ModelSpec bad_phi = base_spec(lgm::Family::logit, lgm::EffectType::leroux, 1);
  bad_phi.phi_fixed = 1.5;
  REQUIRE_THROWS_AS(lgm::ModelContext(bad_phi, d, g), lgm::PhiOutOfRange);
}
