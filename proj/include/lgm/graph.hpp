#pragma once

// Region adjacency graphs and the sparse precision structure matrices for
// the IID, ICAR, and Leroux random effects.

#include <Eigen/Dense>
#include <Eigen/SparseCore>
#include <algorithm>
#include <string>
#include <unordered_map>
#include <vector>

#include "lgm/csv.hpp"
#include "lgm/errors.hpp"
#include "lgm/log.hpp"

namespace lgm {

struct RegionGraph {
  int J = 0;
  std::vector<std::string> ids;                   // original identifiers, index order
  std::unordered_map<std::string, int> id_index;
  std::vector<std::vector<int>> neighbors;        // sorted ascending
  std::vector<int> n_j;
  std::vector<int> component;                     // per-region component label
  int n_components = 0;
  std::vector<int> component_size;
  bool has_isolated = false;
};

namespace detail {

inline void label_components(RegionGraph& g) {
  g.component.assign(g.J, -1);
  g.component_size.clear();
  g.n_components = 0;
  std::vector<int> stack;
  for (int s = 0; s < g.J; ++s) {
    if (g.component[s] >= 0) continue;
    const int label = g.n_components++;
    int size = 0;
    stack.push_back(s);
    g.component[s] = label;
    while (!stack.empty()) {
      int j = stack.back();
      stack.pop_back();
      ++size;
      for (int l : g.neighbors[j]) {
        if (g.component[l] < 0) {
          g.component[l] = label;
          stack.push_back(l);
        }
      }
    }
    g.component_size.push_back(size);
  }
}

inline void finalize_graph(RegionGraph& g) {
  g.J = static_cast<int>(g.neighbors.size());
  g.n_j.resize(g.J);
  g.has_isolated = false;
  for (int j = 0; j < g.J; ++j) {
    auto& nb = g.neighbors[j];
    std::sort(nb.begin(), nb.end());
    g.n_j[j] = static_cast<int>(nb.size());
    if (nb.empty()) g.has_isolated = true;
    for (std::size_t k = 0; k < nb.size(); ++k) {
      if (nb[k] < 0 || nb[k] >= g.J)
        throw BadIndex("neighbor index out of range for region " + g.ids[j]);
      if (nb[k] == j) throw BadIndex("self-loop at region " + g.ids[j]);
      if (k > 0 && nb[k] == nb[k - 1])
        throw BadIndex("duplicate neighbor " + g.ids[nb[k]] + " for region " + g.ids[j]);
    }
  }
  for (int j = 0; j < g.J; ++j)
    for (int l : g.neighbors[j])
      if (!std::binary_search(g.neighbors[l].begin(), g.neighbors[l].end(), j))
        throw AsymmetricEdge("edge " + g.ids[j] + " ~ " + g.ids[l] +
                             " is not reciprocated");
  label_components(g);
  if (g.has_isolated)
    log_warn("graph has isolated regions (no neighbors)");
}

}  // namespace detail

// Adjacency format: one line per region, `<region_id>: <id> <id> ...`.
inline RegionGraph parse_adjacency(const std::string& text) {
  struct Line {
    std::string id;
    std::vector<std::string> nbrs;
  };
  std::vector<Line> lines;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    std::size_t eol = text.find('\n', pos);
    if (eol == std::string::npos) eol = text.size();
    std::string_view line = trim(std::string_view(text).substr(pos, eol - pos));
    pos = eol + 1;
    if (line.empty() || line.front() == '#') continue;
    std::size_t colon = line.find(':');
    if (colon == std::string_view::npos)
      throw BadIndex("adjacency line lacks ':': " + std::string(line));
    Line parsed;
    parsed.id = std::string(trim(line.substr(0, colon)));
    if (!valid_identifier(parsed.id))
      throw BadIndex("invalid region identifier: '" + parsed.id + "'");
    for (auto tok : split_view(line.substr(colon + 1), ' '))
      if (!trim(tok).empty()) parsed.nbrs.emplace_back(trim(tok));
    lines.push_back(std::move(parsed));
  }
  if (lines.empty()) throw EmptyDataset("adjacency file has no regions");

  RegionGraph g;
  for (const auto& l : lines) {
    if (!g.id_index.emplace(l.id, static_cast<int>(g.ids.size())).second)
      throw DuplicateRegion("region " + l.id + " declared twice");
    g.ids.push_back(l.id);
  }
  g.neighbors.resize(lines.size());
  for (std::size_t j = 0; j < lines.size(); ++j) {
    for (const auto& nb : lines[j].nbrs) {
      auto it = g.id_index.find(nb);
      if (it == g.id_index.end())
        throw BadIndex("region " + lines[j].id + " lists unknown neighbor " + nb);
      g.neighbors[j].push_back(it->second);
    }
  }
  detail::finalize_graph(g);
  return g;
}

// Programmatic construction (tests, simulation). Ids default to 0..J-1.
inline RegionGraph make_graph(std::vector<std::vector<int>> neighbors,
                              std::vector<std::string> ids = {}) {
  RegionGraph g;
  g.neighbors = std::move(neighbors);
  if (ids.empty())
    for (std::size_t j = 0; j < g.neighbors.size(); ++j)
      ids.push_back("R" + fmt_int(static_cast<std::int64_t>(j)));
  g.ids = std::move(ids);
  for (std::size_t j = 0; j < g.ids.size(); ++j)
    if (!g.id_index.emplace(g.ids[j], static_cast<int>(j)).second)
      throw DuplicateRegion("region " + g.ids[j] + " declared twice");
  detail::finalize_graph(g);
  return g;
}

struct SparsePrecision {
  int J = 0;
  Eigen::SparseMatrix<double> Q;
  // Sum-to-zero rows (one per constrained block); empty when the matrix is
  // nonsingular on its own.
  std::vector<Eigen::VectorXd> constraints;
};

// Q_jj = n_j, Q_jl = -1 iff j ~ l. Textbook intrinsic CAR structure with the
// single all-ones sum-to-zero row.
inline SparsePrecision icar_structure(const RegionGraph& g) {
  SparsePrecision p;
  p.J = g.J;
  std::vector<Eigen::Triplet<double>> trips;
  for (int j = 0; j < g.J; ++j) {
    trips.emplace_back(j, j, static_cast<double>(g.n_j[j]));
    for (int l : g.neighbors[j]) trips.emplace_back(j, l, -1.0);
  }
  p.Q.resize(g.J, g.J);
  p.Q.setFromTriplets(trips.begin(), trips.end());
  p.constraints.push_back(Eigen::VectorXd::Ones(g.J));
  return p;
}

// (1-phi) I + phi Q, with isolated-region diagonals pinned to 1 so the block
// stays nonsingular at phi = 1 (isolated regions keep an exchangeable prior).
// At phi = 1 the connected part is intrinsic and gets one sum-to-zero row per
// non-singleton component.
inline SparsePrecision leroux_structure(const RegionGraph& g, double phi) {
  if (!(phi >= 0.0 && phi <= 1.0))
    throw PhiOutOfRange("phi = " + fmt_double(phi) + " outside [0,1]");
  SparsePrecision p;
  p.J = g.J;
  std::vector<Eigen::Triplet<double>> trips;
  for (int j = 0; j < g.J; ++j) {
    const double diag = g.n_j[j] == 0 ? 1.0 : (1.0 - phi) + phi * g.n_j[j];
    trips.emplace_back(j, j, diag);
    for (int l : g.neighbors[j]) trips.emplace_back(j, l, -phi);
  }
  p.Q.resize(g.J, g.J);
  p.Q.setFromTriplets(trips.begin(), trips.end());
  if (phi == 1.0) {
    for (int c = 0; c < g.n_components; ++c) {
      if (g.component_size[c] < 2) continue;
      Eigen::VectorXd row = Eigen::VectorXd::Zero(g.J);
      for (int j = 0; j < g.J; ++j)
        if (g.component[j] == c) row[j] = 1.0;
      p.constraints.push_back(std::move(row));
    }
  }
  return p;
}

struct GenLogDet {
  int rank = 0;
  double logdet = 0.0;  // sum of logs of eigenvalues above tolerance
};

// Dense eigendecomposition; used once per fit for the intrinsic normalizer
// and in tests. Fine for J up to a few hundred.
inline GenLogDet generalized_logdet(const Eigen::SparseMatrix<double>& Q) {
  Eigen::MatrixXd dense = Eigen::MatrixXd(Q);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(dense);
  if (eig.info() != Eigen::Success)
    throw SingularPrecision("eigendecomposition failed");
  const auto& ev = eig.eigenvalues();
  const double tol = 1e-9 * std::max(1.0, ev.cwiseAbs().maxCoeff()) * ev.size();
  GenLogDet out;
  for (int i = 0; i < ev.size(); ++i) {
    if (ev[i] > tol) {
      ++out.rank;
      out.logdet += std::log(ev[i]);
    }
  }
  return out;
}

}  // namespace lgm
