#pragma once

// Per-observation log-likelihood kernels with analytic derivatives in the
// linear predictor, plus the PC prior for the Weibull shape.

#include <cmath>
#include <limits>

#include "lgm/errors.hpp"

namespace lgm {

struct LikTerms {
  double ll;
  double d1;  // d ll / d eta
  double d2;  // d^2 ll / d eta^2
};

inline double log1pexp(double x) {
  return x > 0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

inline double logistic(double x) {
  return x >= 0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
}

// ll = y*eta - log(1 + e^eta); p = logistic(eta)
inline LikTerms bernoulli_logit_terms(double eta, double y) {
  const double p = logistic(eta);
  return {y * eta - log1pexp(eta), y - p, -p * (1.0 - p)};
}

// Weibull hazard h(t) = e^eta * alpha * t^(alpha-1), survival exp(-e^eta t^alpha).
// Event rows contribute log h + log S, censored rows log S.
inline LikTerms weibull_terms(double eta, double alpha, double t, double event) {
  if (!(t > 0)) throw NonPositiveTime("weibull kernel needs t > 0");
  if (!(alpha > 0)) throw NonPositiveShape("weibull kernel needs alpha > 0");
  const double log_t = std::log(t);
  const double lam_t = std::exp(eta + alpha * log_t);  // e^eta * t^alpha
  const double ll = event * (eta + std::log(alpha) + (alpha - 1.0) * log_t) - lam_t;
  return {ll, event - lam_t, -lam_t};
}

// ---------------------------------------------------------------------------
// Adaptive Simpson quadrature

namespace detail {

inline double simpson_leaf(double a, double b, double fa, double fm, double fb) {
  return (b - a) / 6.0 * (fa + 4.0 * fm + fb);
}

template <typename F>
double simpson_rec(const F& f, double a, double fa, double b, double fb, double m,
                   double fm, double whole, double abs_tol, double rel_tol, int depth,
                   bool& ok) {
  const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
  const double flm = f(lm), frm = f(rm);
  const double left = simpson_leaf(a, m, fa, flm, fm);
  const double right = simpson_leaf(m, b, fm, frm, fb);
  const double err = left + right - whole;
  if (std::abs(err) <= 15.0 * (abs_tol + rel_tol * std::abs(left + right)))
    return left + right + err / 15.0;
  if (depth <= 0) {
    ok = false;
    return left + right;
  }
  return simpson_rec(f, a, fa, m, fm, lm, flm, left, 0.5 * abs_tol, rel_tol, depth - 1, ok) +
         simpson_rec(f, m, fm, b, fb, rm, frm, right, 0.5 * abs_tol, rel_tol, depth - 1, ok);
}

}  // namespace detail

template <typename F>
double adaptive_simpson(const F& f, double a, double b, double abs_tol = 1e-14,
                        double rel_tol = 1e-12, int max_depth = 48) {
  const double m = 0.5 * (a + b);
  const double fa = f(a), fb = f(b), fm = f(m);
  const double whole = detail::simpson_leaf(a, b, fa, fm, fb);
  bool ok = true;
  const double s = detail::simpson_rec(f, a, fa, b, fb, m, fm, whole, abs_tol, rel_tol,
                                       max_depth, ok);
  if (!ok || !std::isfinite(s))
    throw QuadratureFailure("adaptive Simpson did not converge");
  return s;
}

// ---------------------------------------------------------------------------
// PC prior for the Weibull shape, alpha = exp(0.1 * alpha_prime)

// KLD( Weibull(alpha, 1) || Weibull(1, 1) ). Substituting u = t^alpha and
// then u = e^v gives a smooth integrand with double-exponential decay:
//   integrand(v) = e^{v - e^v} (log a + (1 - 1/a) v - e^v + e^{v/a}).
// The e^{v/a} term peaks near v = log(1 + 1/a) with peak height ~
// Gamma(1 + 1/a); small alpha overflows double range, where the closed form
// log a - (a-1)*gamma_E/a - 1 + Gamma(1 + 1/a) takes over (and the distance
// is effectively infinite once even that overflows).
inline double kld_weibull_vs_exponential(double alpha) {
  if (!(alpha > 0)) throw NonPositiveShape("KLD needs alpha > 0");
  constexpr double kEulerGamma = 0.57721566490153286;
  const double inv = 1.0 / alpha;
  const double peak_log = (1.0 + inv) * (std::log(1.0 + inv) - 1.0);
  if (peak_log > 600.0) {
    const double lg = std::lgamma(1.0 + inv);
    if (lg > 700.0) return std::numeric_limits<double>::infinity();
    return std::log(alpha) - (alpha - 1.0) * inv * kEulerGamma - 1.0 + std::exp(lg);
  }
  const double log_a = std::log(alpha);
  auto integrand = [&](double v) {
    const double u = std::exp(v);
    return std::exp(v - u) * (log_a + (1.0 - inv) * v - u + std::exp(v * inv));
  };
  return adaptive_simpson(integrand, -40.0, 6.0);
}

// Signed distance from the base model alpha = 1; smooth through the kink
// that |d| has there, so central differences of it are well behaved.
inline double pc_signed_distance(double alpha) {
  const double kld = kld_weibull_vs_exponential(alpha);
  const double d = std::sqrt(2.0 * std::max(kld, 0.0));
  return alpha >= 1.0 ? d : -d;
}

// log pi(alpha_prime) for the two-sided PC prior with the given rate:
//   pi(alpha) = (rate/2) exp(-rate d(alpha)) |d'(alpha)|,  alpha = exp(0.1 a')
inline double pc_prior_alpha_logdensity(double alpha_prime, double rate) {
  if (!(rate > 0)) throw NonPositiveShape("PC prior rate must be > 0");
  const double alpha = std::exp(0.1 * alpha_prime);
  const double dist = pc_signed_distance(alpha);
  if (!std::isfinite(dist)) return -std::numeric_limits<double>::infinity();
  const double h = 1e-4 * std::max(1.0, alpha);
  const double dprime =
      (pc_signed_distance(alpha + h) - pc_signed_distance(alpha - h)) / (2.0 * h);
  const double jac = 0.1 * alpha;  // d alpha / d alpha_prime
  return std::log(0.5 * rate) - rate * std::abs(dist) + std::log(std::abs(dprime)) +
         std::log(jac);
}

}  // namespace lgm
