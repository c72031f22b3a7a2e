#pragma once

// Fit artifact schemas: summaries.csv, marginals.csv, hypergrid.csv,
// scores.csv, draws.csv. Writers emit shortest round-trip decimals so a
// re-run with the same seed is byte-identical.

#include <Eigen/Dense>
#include <algorithm>
#include <cstdint>
#include <string>
#include <vector>

#include "lgm/criteria.hpp"
#include "lgm/csv.hpp"
#include "lgm/domain.hpp"

namespace lgm {

struct SummaryRow {
  std::string name;
  double mean = 0.0, sd = 0.0, q025 = 0.0, q50 = 0.0, q975 = 0.0;
};

inline SummaryRow summary_from_marginal(const std::string& name, const Marginal& m) {
  return {name, m.mean, m.sd, m.q025, m.q50, m.q975};
}

// Gaussian interval; the conditional posterior of a single effect is
// approximately normal and full marginals for hundreds of regions would
// dominate the artifact size.
inline SummaryRow summary_from_moments(const std::string& name, double mean, double sd) {
  return {name, mean, sd, mean - 1.959963984540054 * sd, mean,
          mean + 1.959963984540054 * sd};
}

inline SummaryRow summary_from_draws(const std::string& name, std::vector<double> v) {
  SummaryRow r;
  r.name = name;
  const std::size_t S = v.size();
  double mu = 0.0;
  for (double x : v) mu += x;
  mu /= double(S);
  double ss = 0.0;
  for (double x : v) ss += (x - mu) * (x - mu);
  r.mean = mu;
  r.sd = S > 1 ? std::sqrt(ss / double(S - 1)) : 0.0;
  std::sort(v.begin(), v.end());
  auto quant = [&](double q) {
    const double pos = q * double(S - 1);
    const std::size_t lo = static_cast<std::size_t>(pos);
    const std::size_t hi = std::min(lo + 1, S - 1);
    const double frac = pos - double(lo);
    return v[lo] * (1.0 - frac) + v[hi] * frac;
  };
  r.q025 = quant(0.025);
  r.q50 = quant(0.5);
  r.q975 = quant(0.975);
  return r;
}

inline void write_summaries(const std::vector<SummaryRow>& rows, const std::string& path) {
  CsvWriter w({"name", "mean", "sd", "q2.5", "q50", "q97.5"});
  for (const auto& r : rows) {
    w.cell(r.name);
    w.cell(r.mean);
    w.cell(r.sd);
    w.cell(r.q025);
    w.cell(r.q50);
    w.cell(r.q975);
    w.end_row();
  }
  w.save(path);
}

inline std::vector<SummaryRow> read_summaries(const std::string& path) {
  RawTable t = read_csv(path);
  std::vector<SummaryRow> rows;
  const int c_name = t.column_index("name");
  const int c_mean = t.column_index("mean");
  const int c_sd = t.column_index("sd");
  const int c_lo = t.column_index("q2.5");
  const int c_md = t.column_index("q50");
  const int c_hi = t.column_index("q97.5");
  if (c_name < 0 || c_mean < 0 || c_sd < 0 || c_lo < 0 || c_md < 0 || c_hi < 0)
    throw MissingFitArtifact(path + " lacks summary columns");
  for (std::size_t i = 0; i < t.rows; ++i) {
    SummaryRow r;
    r.name = std::string(t.at(i, c_name));
    r.mean = parse_double(t.at(i, c_mean), path);
    r.sd = parse_double(t.at(i, c_sd), path);
    r.q025 = parse_double(t.at(i, c_lo), path);
    r.q50 = parse_double(t.at(i, c_md), path);
    r.q975 = parse_double(t.at(i, c_hi), path);
    rows.push_back(std::move(r));
  }
  return rows;
}

inline void write_marginals(const FitResult& fit, const std::string& path) {
  CsvWriter w({"parameter", "x", "density"});
  auto emit = [&](const std::string& name, const Marginal& m) {
    for (std::size_t i = 0; i < m.support.size(); ++i) {
      w.cell(name);
      w.cell(m.support[i]);
      w.cell(m.density[i]);
      w.end_row();
    }
  };
  for (std::size_t k = 0; k < fit.fixed_names.size(); ++k)
    emit(fit.fixed_names[k], fit.fixed_marginals[k]);
  for (std::size_t k = 0; k < fit.hyper_names.size(); ++k)
    emit(fit.hyper_names[k], fit.hyper_marginals[k]);
  w.save(path);
}

inline void write_hypergrid(const FitResult& fit,
                            const std::vector<std::string>& internal_names,
                            const std::string& path) {
  std::vector<std::string> cols = internal_names;
  cols.push_back("log_post");
  cols.push_back("weight");
  CsvWriter w(cols);
  for (const auto& pt : fit.hyper_grid) {
    for (int d = 0; d < pt.theta.size(); ++d) w.cell(pt.theta[d]);
    w.cell(pt.log_post);
    w.cell(pt.weight);
    w.end_row();
  }
  w.save(path);
}

inline void write_scores(const DicScore& dic, const WaicScore& waic,
                         const std::string& path) {
  CsvWriter w({"dic", "p_d", "waic", "p_waic"});
  w.cell(dic.dic);
  w.cell(dic.p_d);
  w.cell(waic.waic);
  w.cell(waic.p_waic);
  w.end_row();
  w.save(path);
}

struct Scores {
  double dic = 0.0, p_d = 0.0, waic = 0.0, p_waic = 0.0;
};

inline Scores read_scores(const std::string& path) {
  RawTable t = read_csv(path);
  if (t.rows != 1) throw MissingFitArtifact(path + " should have exactly one row");
  auto field = [&](const char* name) {
    const int c = t.column_index(name);
    if (c < 0) throw MissingFitArtifact(path + " lacks column " + name);
    return parse_double(t.at(0, c), path);
  };
  Scores s;
  s.dic = field("dic");
  s.p_d = field("p_d");
  s.waic = field("waic");
  s.p_waic = field("p_waic");
  return s;
}

inline void write_draws(const std::vector<std::string>& latent_names,
                        const DrawSet& draws, bool with_alpha,
                        const std::string& path) {
  std::vector<std::string> cols = {"draw"};
  if (with_alpha) cols.push_back("alpha");
  for (const auto& n : latent_names) cols.push_back(n);
  CsvWriter w(cols);
  for (std::size_t s = 0; s < draws.latent.size(); ++s) {
    w.cell(static_cast<std::int64_t>(s));
    if (with_alpha) w.cell(draws.alpha[s]);
    for (int c = 0; c < draws.latent[s].size(); ++c) w.cell(draws.latent[s][c]);
    w.end_row();
  }
  w.save(path);
}

struct StoredDraws {
  std::vector<std::string> latent_names;
  Eigen::MatrixXd latent;  // draws x dim
  Eigen::VectorXd alpha;   // empty when the fit had no shape parameter
};

inline StoredDraws read_draws(const std::string& path) {
  RawTable t = read_csv(path);
  StoredDraws out;
  int first_latent = 1;
  const bool with_alpha = t.columns.size() > 1 && t.columns[1] == "alpha";
  if (with_alpha) first_latent = 2;
  for (std::size_t c = static_cast<std::size_t>(first_latent); c < t.columns.size(); ++c)
    out.latent_names.push_back(t.columns[c]);
  const int dim = static_cast<int>(out.latent_names.size());
  out.latent.resize(t.rows, dim);
  if (with_alpha) out.alpha.resize(t.rows);
  for (std::size_t i = 0; i < t.rows; ++i) {
    if (with_alpha) out.alpha[i] = parse_double(t.at(i, 1), path);
    for (int c = 0; c < dim; ++c)
      out.latent(i, c) = parse_double(t.at(i, first_latent + c), path);
  }
  return out;
}

}  // namespace lgm
