#pragma once

// Synthetic data generation: region graphs (lattice or Gabriel), covariate
// draws, random effects from the requested prior, and outcomes from the
// requested likelihood. Streams are split by purpose so changing one knob
// does not reshuffle unrelated draws.

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "lgm/csv.hpp"
#include "lgm/domain.hpp"
#include "lgm/graph.hpp"
#include "lgm/likelihood.hpp"
#include "lgm/rng.hpp"
#include "lgm/sparse.hpp"

namespace lgm {

struct Truth {
  Family family = Family::logit;
  EffectType effect = EffectType::leroux;
  std::vector<std::string> covariate_names;
  std::vector<double> covariate_prob;  // Bernoulli rates, aligned with names
  double intercept = 0.0;
  Eigen::VectorXd beta;                // aligned with names
  double tau = 1.0;
  double phi = 0.5;
  double alpha = 1.0;                  // weibull shape
  double horizon = std::numeric_limits<double>::infinity();

  void validate() const {
    if (covariate_prob.size() != covariate_names.size() ||
        beta.size() != static_cast<Eigen::Index>(covariate_names.size()))
      throw BadConfig("covariate names, probabilities, and coefficients disagree");
    for (double p : covariate_prob)
      if (!(p >= 0.0 && p <= 1.0)) throw BadConfig("covariate probability outside [0, 1]");
    if (!(tau > 0.0)) throw BadConfig("tau must be positive");
    if (!(phi >= 0.0 && phi <= 1.0)) throw PhiOutOfRange("phi outside [0, 1]");
    if (!(alpha > 0.0)) throw NonPositiveShape("alpha must be positive");
    if (!(horizon > 0.0)) throw BadConfig("censoring horizon must be positive");
  }
};

// The default truths mirror the fitted spatial models' posterior means on the
// Polish stroke registry, so simulated data exercise realistic magnitudes.
inline Truth default_truth(Family family) {
  Truth t;
  t.family = family;
  t.effect = EffectType::leroux;
  t.covariate_names = {"Woman", "Age2", "Age3", "City", "T_A10", "T_B01", "T_C", "Depr"};
  t.covariate_prob.assign(8, 0.5);
  t.beta.resize(8);
  if (family == Family::logit) {
    t.intercept = -5.912;
    t.beta << -0.216, 0.933, 1.728, 0.007, 0.239, 0.236, 0.324, 0.096;
    t.tau = 11.3;
    t.phi = 0.866;
  } else {
    t.intercept = -5.914;
    t.beta << -0.214, 0.932, 1.72, 0.007, 0.236, 0.234, 0.322, 0.095;
    t.tau = 9.365;
    t.phi = 0.889;
    t.alpha = 1.112;
  }
  return t;
}

inline RegionGraph make_lattice(int rows, int cols) {
  if (rows < 1 || cols < 1) throw BadConfig("lattice dimensions must be positive");
  const int J = rows * cols;
  std::vector<std::vector<int>> nb(J);
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) {
      const int j = r * cols + c;
      if (r > 0) nb[j].push_back(j - cols);
      if (r + 1 < rows) nb[j].push_back(j + cols);
      if (c > 0) nb[j].push_back(j - 1);
      if (c + 1 < cols) nb[j].push_back(j + 1);
    }
  return make_graph(std::move(nb));
}

// Gabriel graph on uniform random points: i ~ j iff the open disc with
// diameter ij contains no other point. Contains the Euclidean MST, so it is
// connected; planar-like sparsity matches administrative maps.
inline RegionGraph make_gabriel(int J, std::uint64_t seed) {
  if (J < 1) throw BadConfig("need at least one region");
  Rng rng = Rng::stream(seed, 17);
  std::vector<double> px(J), py(J);
  for (int j = 0; j < J; ++j) {
    px[j] = rng.uniform();
    py[j] = rng.uniform();
  }
  std::vector<std::vector<int>> nb(J);
  for (int i = 0; i < J; ++i)
    for (int j = i + 1; j < J; ++j) {
      const double mx = 0.5 * (px[i] + px[j]);
      const double my = 0.5 * (py[i] + py[j]);
      const double r2 =
          0.25 * ((px[i] - px[j]) * (px[i] - px[j]) + (py[i] - py[j]) * (py[i] - py[j]));
      bool open = true;
      for (int k = 0; k < J && open; ++k) {
        if (k == i || k == j) continue;
        const double d2 = (px[k] - mx) * (px[k] - mx) + (py[k] - my) * (py[k] - my);
        if (d2 < r2) open = false;
      }
      if (open) {
        nb[i].push_back(j);
        nb[j].push_back(i);
      }
    }
  return make_graph(std::move(nb));
}

struct Simulation {
  std::vector<std::string> data_lines;  // full data.csv content
  std::string truth_csv;
  std::string graph_text;
  Eigen::VectorXd gamma;
  double event_rate = 0.0;  // weibull only
};

inline Eigen::VectorXd sample_effects(const Truth& truth, const RegionGraph& graph,
                                      std::uint64_t seed) {
  Rng rng = Rng::stream(seed, 23);
  Eigen::VectorXd gamma = Eigen::VectorXd::Zero(graph.J);
  if (truth.effect == EffectType::none) return gamma;
  if (truth.effect == EffectType::iid) {
    const double sd = 1.0 / std::sqrt(truth.tau);
    for (int j = 0; j < graph.J; ++j) gamma[j] = sd * rng.normal();
    return gamma;
  }
  SparsePrecision sp = leroux_structure(graph, truth.phi);
  SpMat H = truth.tau * sp.Q;
  PrecisionFactor factor(H, sp.constraints);
  return factor.sample_zero_mean(rng);
}

inline std::string graph_to_text(const RegionGraph& g) {
  std::string out;
  for (int j = 0; j < g.J; ++j) {
    out += g.ids[j];
    out += ":";
    for (int l : g.neighbors[j]) {
      out += " ";
      out += g.ids[l];
    }
    out += "\n";
  }
  return out;
}

inline Simulation simulate_dataset(const Truth& truth, const RegionGraph& graph, int n,
                                   std::uint64_t seed) {
  truth.validate();
  if (n < 1) throw BadConfig("need at least one observation");
  const int q = static_cast<int>(truth.covariate_names.size());

  Simulation sim;
  sim.gamma = sample_effects(truth, graph, seed);

  Rng cov_rng = Rng::stream(seed, 29);
  Rng region_rng = Rng::stream(seed, 31);
  Rng outcome_rng = Rng::stream(seed, 37);

  std::string header = "region";
  for (const auto& c : truth.covariate_names) header += "," + c;
  header += truth.family == Family::logit ? ",y" : ",time,event";
  sim.data_lines.push_back(header);

  int events = 0;
  std::vector<int> x(q);
  const Eigen::VectorXd region_weights = Eigen::VectorXd::Ones(graph.J);
  for (int i = 0; i < n; ++i) {
    const int j = region_rng.categorical(region_weights);
    double eta = truth.intercept + sim.gamma[j];
    for (int c = 0; c < q; ++c) {
      x[c] = cov_rng.bernoulli(truth.covariate_prob[c]) ? 1 : 0;
      eta += x[c] * truth.beta[c];
    }
    std::string line = graph.ids[j];
    for (int c = 0; c < q; ++c) line += x[c] ? ",1" : ",0";
    if (truth.family == Family::logit) {
      const int y = outcome_rng.bernoulli(logistic(eta)) ? 1 : 0;
      line += y ? ",1" : ",0";
    } else {
      const double u = outcome_rng.uniform_pos();
      double t = std::pow(-std::log(u) * std::exp(-eta), 1.0 / truth.alpha);
      int ev = 1;
      if (t >= truth.horizon) {
        t = truth.horizon;
        ev = 0;
      }
      events += ev;
      line += "," + fmt_double(t) + (ev ? ",1" : ",0");
    }
    sim.data_lines.push_back(line);
  }
  if (truth.family == Family::weibull) sim.event_rate = double(events) / n;

  sim.graph_text = graph_to_text(graph);

  CsvWriter tw({"name", "value"});
  tw.cell("intercept");
  tw.cell(truth.intercept);
  tw.end_row();
  for (int c = 0; c < q; ++c) {
    tw.cell(truth.covariate_names[c]);
    tw.cell(truth.beta[c]);
    tw.end_row();
  }
  if (truth.effect != EffectType::none) {
    tw.cell("tau");
    tw.cell(truth.tau);
    tw.end_row();
    if (truth.effect == EffectType::leroux) {
      tw.cell("phi");
      tw.cell(truth.phi);
      tw.end_row();
    }
  }
  if (truth.family == Family::weibull) {
    tw.cell("alpha");
    tw.cell(truth.alpha);
    tw.end_row();
  }
  for (int j = 0; j < graph.J; ++j) {
    tw.cell("gamma_" + graph.ids[j]);
    tw.cell(sim.gamma[j]);
    tw.end_row();
  }
  sim.truth_csv = tw.str();
  return sim;
}

inline void save_simulation(const Simulation& sim, const std::string& dir) {
  std::string data;
  for (const auto& line : sim.data_lines) {
    data += line;
    data += "\n";
  }
  write_file(dir + "/data.csv", data);
  write_file(dir + "/graph.txt", sim.graph_text);
  write_file(dir + "/truth.csv", sim.truth_csv);
}

}  // namespace lgm
