#pragma once

// Core data model: datasets, model specification, marginals, fit results.

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "lgm/csv.hpp"
#include "lgm/errors.hpp"
#include "lgm/graph.hpp"

namespace lgm {

enum class Family { logit, weibull };
enum class EffectType { none, iid, leroux };

inline std::string family_name(Family f) { return f == Family::logit ? "logit" : "weibull"; }
inline std::string effect_name(EffectType e) {
  switch (e) {
    case EffectType::none: return "none";
    case EffectType::iid: return "iid";
    default: return "leroux";
  }
}

struct PriorSet {
  double beta_precision = 0.001;
  double intercept_precision = 0.0;
  bool tau_uniform = true;          // improper uniform on (0, inf)
  double logit_phi_mean = 0.0;
  double logit_phi_precision = 0.1;
  double pc_alpha_rate = 5.0;
};

struct GridSettings {
  double delta = 0.75;          // step in standardized theta coordinates
  double drop = 6.0;            // log-density drop threshold
  int max_points = 2000;
  // Box bounds on the internal scales. The tau prior is improper, so for
  // degenerate data the log-posterior in log tau need not fall off; the box
  // keeps exploration finite. Wide enough to be inactive for any data with
  // signal.
  double log_tau_min = -12.0, log_tau_max = 12.0;
  double logit_phi_min = -8.0, logit_phi_max = 8.0;
  double alpha_raw_min = -60.0, alpha_raw_max = 60.0;
};

struct ModelSpec {
  Family family = Family::logit;
  std::vector<std::string> covariate_names;  // excludes intercept (implicit)
  EffectType effect = EffectType::none;
  PriorSet priors;
  GridSettings grid;
  std::uint64_t seed = 1;
  // Fixing phi turns the Leroux field into a pure combination; phi_fixed = 1
  // is the intrinsic CAR with its sum-to-zero constraint.
  double phi_fixed = std::numeric_limits<double>::quiet_NaN();

  bool phi_is_fixed() const { return std::isfinite(phi_fixed); }
  int n_covariates() const { return static_cast<int>(covariate_names.size()); }

  void validate() const {
    for (std::size_t i = 0; i < covariate_names.size(); ++i) {
      if (!valid_identifier(covariate_names[i]))
        throw BadConfig("invalid covariate name: " + covariate_names[i]);
      for (std::size_t k = i + 1; k < covariate_names.size(); ++k)
        if (covariate_names[i] == covariate_names[k])
          throw BadConfig("duplicate covariate: " + covariate_names[i]);
    }
    if (!(spec_pos(grid.delta))) throw BadConfig("grid delta must be > 0");
    if (!(spec_pos(grid.drop))) throw BadConfig("grid drop threshold must be > 0");
    if (grid.max_points < 1) throw BadConfig("grid max_points must be >= 1");
    if (!(priors.pc_alpha_rate > 0)) throw BadConfig("pc_alpha_rate must be > 0");
    if (priors.beta_precision < 0 || priors.intercept_precision < 0 ||
        priors.logit_phi_precision < 0)
      throw BadConfig("precisions must be >= 0");
    if (phi_is_fixed() && (phi_fixed < 0.0 || phi_fixed > 1.0))
      throw PhiOutOfRange("fixed phi " + fmt_double(phi_fixed) + " outside [0,1]");
  }

 private:
  static bool spec_pos(double x) { return std::isfinite(x) && x > 0; }
};

struct Dataset {
  int n = 0;
  int J = 0;
  Family family = Family::logit;
  // logit: y holds 0/1; weibull: time (rescaled to max 1) and event 0/1.
  std::vector<double> y;
  std::vector<double> time;
  std::vector<std::uint8_t> event;
  Eigen::MatrixXd X;             // n x q, intercept NOT included
  std::vector<std::int32_t> region;
  double time_scale = 1.0;       // original max(time); reported times multiply by this
};

struct LatentField {
  Eigen::VectorXd beta;   // intercept first
  Eigen::VectorXd gamma;  // length 0 when effect = none
  int m() const { return static_cast<int>(beta.size() + gamma.size()); }
};

struct HyperPoint {
  Eigen::VectorXd theta;  // internal scale: log tau, logit phi, alpha_raw
  double log_post = 0.0;
  double weight = 0.0;
};

struct Marginal {
  std::vector<double> support;   // ascending
  std::vector<double> density;   // nonnegative, integrates to ~1
  double mean = 0.0, sd = 0.0;
  double q025 = 0.0, q50 = 0.0, q975 = 0.0;
};

struct RandomSummary {
  double mean = 0.0;
  double sd = 0.0;
};

struct DicScore {
  double dic = 0.0;
  double p_d = 0.0;
};

struct WaicScore {
  double waic = 0.0;
  double p_waic = 0.0;
};

struct FitResult {
  ModelSpec spec;
  std::vector<std::string> fixed_names;   // intercept + covariates
  std::vector<Marginal> fixed_marginals;
  std::vector<RandomSummary> random_summaries;
  std::vector<std::string> hyper_names;   // natural scale: tau, phi, alpha
  std::vector<Marginal> hyper_marginals;
  std::vector<HyperPoint> hyper_grid;
  DicScore dic;
  WaicScore waic;
  double time_scale = 1.0;
  std::vector<std::string> region_ids;
};

// ---------------------------------------------------------------------------
// Marginal arithmetic

inline double trapezoid(const std::vector<double>& x, const std::vector<double>& f) {
  double s = 0.0;
  for (std::size_t i = 1; i < x.size(); ++i)
    s += 0.5 * (f[i] + f[i - 1]) * (x[i] - x[i - 1]);
  return s;
}

// Quantile of a piecewise-linear density: walk the cumulative trapezoid and
// solve the quadratic segment equation for the crossing.
inline double marginal_quantile(const Marginal& m, double p, double total) {
  const auto& x = m.support;
  const auto& f = m.density;
  const double target = p * total;
  double cum = 0.0;
  for (std::size_t i = 1; i < x.size(); ++i) {
    const double h = x[i] - x[i - 1];
    const double seg = 0.5 * (f[i] + f[i - 1]) * h;
    if (cum + seg >= target || i + 1 == x.size()) {
      const double need = target - cum;
      const double a = 0.5 * (f[i] - f[i - 1]) / h;
      const double b = f[i - 1];
      double t;
      if (std::abs(a) * h < 1e-12 * (std::abs(b) + 1e-300)) {
        t = b > 0 ? need / b : 0.0;
      } else {
        const double disc = b * b + 4.0 * a * need;
        t = disc >= 0 ? (-b + std::sqrt(disc)) / (2.0 * a) : need / std::max(b, 1e-300);
      }
      t = std::min(std::max(t, 0.0), h);
      return x[i - 1] + t;
    }
    cum += seg;
  }
  return x.back();
}

inline void summarize_marginal(Marginal& m) {
  const std::size_t k = m.support.size();
  std::vector<double> xf(k), xxf(k);
  for (std::size_t i = 0; i < k; ++i) {
    xf[i] = m.support[i] * m.density[i];
    xxf[i] = m.support[i] * xf[i];
  }
  const double total = trapezoid(m.support, m.density);
  if (!(total > 0) || !std::isfinite(total))
    throw QuadratureFailure("marginal has non-positive mass");
  m.mean = trapezoid(m.support, xf) / total;
  const double ex2 = trapezoid(m.support, xxf) / total;
  m.sd = std::sqrt(std::max(ex2 - m.mean * m.mean, 0.0));
  m.q025 = marginal_quantile(m, 0.025, total);
  m.q50 = marginal_quantile(m, 0.5, total);
  m.q975 = marginal_quantile(m, 0.975, total);
}

inline void normalize_marginal(Marginal& m) {
  const double total = trapezoid(m.support, m.density);
  if (!(total > 0) || !std::isfinite(total))
    throw QuadratureFailure("marginal has non-positive mass");
  for (auto& d : m.density) d /= total;
  summarize_marginal(m);
}

// ---------------------------------------------------------------------------
// Dataset validation

inline Dataset validate_dataset(const RawTable& raw, const ModelSpec& spec,
                                const RegionGraph& graph) {
  if (raw.rows == 0) throw EmptyDataset("dataset has no rows");
  const int region_col = raw.column_index("region");
  if (region_col < 0) throw MissingValue("dataset lacks a 'region' column");

  Dataset data;
  data.n = static_cast<int>(raw.rows);
  data.J = graph.J;
  data.family = spec.family;

  std::vector<int> cov_cols;
  for (const auto& name : spec.covariate_names) {
    int c = raw.column_index(name);
    if (c < 0) throw MissingValue("dataset lacks covariate column '" + name + "'");
    cov_cols.push_back(c);
  }

  int y_col = -1, time_col = -1, event_col = -1;
  if (spec.family == Family::logit) {
    y_col = raw.column_index("y");
    if (y_col < 0) throw MissingValue("dataset lacks outcome column 'y'");
    data.y.resize(raw.rows);
  } else {
    time_col = raw.column_index("time");
    event_col = raw.column_index("event");
    if (time_col < 0 || event_col < 0)
      throw MissingValue("dataset lacks 'time'/'event' columns");
    data.time.resize(raw.rows);
    data.event.resize(raw.rows);
  }

  data.X.resize(data.n, spec.n_covariates());
  data.region.resize(raw.rows);

  auto rowctx = [&](std::size_t r, const std::string& col) {
    return "row " + fmt_int((std::int64_t)(r + 2)) + ", column " + col;
  };

  double max_time = 0.0;
  int n_events = 0;
  for (std::size_t r = 0; r < raw.rows; ++r) {
    const std::string rid(raw.at(r, region_col));
    auto it = graph.id_index.find(rid);
    if (it == graph.id_index.end())
      throw UnknownRegion("region '" + rid + "' at row " + fmt_int((std::int64_t)(r + 2)) +
                          " is not in the graph");
    data.region[r] = it->second;

    for (int c = 0; c < spec.n_covariates(); ++c)
      data.X(static_cast<int>(r), c) =
          parse_double(raw.at(r, cov_cols[c]), rowctx(r, spec.covariate_names[c]));

    if (spec.family == Family::logit) {
      const double yv = parse_double(raw.at(r, y_col), rowctx(r, "y"));
      if (yv != 0.0 && yv != 1.0)
        throw MissingValue("outcome at " + rowctx(r, "y") + " is not 0/1");
      data.y[r] = yv;
    } else {
      const double t = parse_double(raw.at(r, time_col), rowctx(r, "time"));
      if (!(t > 0.0) || !std::isfinite(t))
        throw NonPositiveTime("time at row " + fmt_int((std::int64_t)(r + 2)) +
                              " must be strictly positive");
      const double ev = parse_double(raw.at(r, event_col), rowctx(r, "event"));
      if (ev != 0.0 && ev != 1.0)
        throw MissingValue("event flag at " + rowctx(r, "event") + " is not 0/1");
      data.time[r] = t;
      data.event[r] = static_cast<std::uint8_t>(ev);
      max_time = std::max(max_time, t);
      n_events += data.event[r];
    }
  }

  if (spec.family == Family::weibull) {
    if (n_events == 0) throw NoEvents("all rows are censored");
    data.time_scale = max_time;
    for (auto& t : data.time) t /= max_time;
  }
  return data;
}

}  // namespace lgm
