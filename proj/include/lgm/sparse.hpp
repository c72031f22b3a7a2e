#pragma once

// Sparse symmetric factorization plus everything the engine needs on top of
// it: log-determinants restricted to a constraint subspace, selected
// inversion for marginal variances, kriging corrections, and zero-mean
// sampling. Constraints Ax = 0 are handled exactly: we factor
// H~ = H + c A'A (SPD whenever null(H) and null(A) intersect trivially) and
// correct steps/samples/variances through V = H~^{-1}A'. All corrected
// quantities are independent of c.

#include <Eigen/Dense>
#include <Eigen/SparseCholesky>
#include <Eigen/SparseCore>
#include <cmath>
#include <vector>

#include "lgm/errors.hpp"
#include "lgm/rng.hpp"

namespace lgm {

using SpMat = Eigen::SparseMatrix<double>;

namespace detail {

// Takahashi recurrences on an LDL' factor: computes the entries of the
// inverse on the factor's sparsity pattern, in particular its diagonal.
// Columns are processed last to first; every off-pattern entry the
// recurrence would touch is zero-free by the elimination-tree closure of
// the pattern.
class SelectedInverse {
 public:
  SelectedInverse(const SpMat& L, const Eigen::VectorXd& D) {
    const int m = static_cast<int>(L.cols());
    col_ptr_.resize(m + 1, 0);
    // column patterns: diagonal slot first, then strictly-lower entries
    std::vector<std::vector<int>> rows(m);
    std::vector<std::vector<double>> lvals(m);
    for (int j = 0; j < m; ++j) {
      rows[j].push_back(j);
      lvals[j].push_back(1.0);
      for (SpMat::InnerIterator it(L, j); it; ++it) {
        if (it.row() <= j) continue;
        rows[j].push_back(static_cast<int>(it.row()));
        lvals[j].push_back(it.value());
      }
    }
    for (int j = 0; j < m; ++j) col_ptr_[j + 1] = col_ptr_[j] + static_cast<int>(rows[j].size());
    row_idx_.resize(col_ptr_[m]);
    sigma_.assign(col_ptr_[m], 0.0);
    for (int j = 0; j < m; ++j)
      for (std::size_t t = 0; t < rows[j].size(); ++t) row_idx_[col_ptr_[j] + t] = rows[j][t];

    for (int j = m - 1; j >= 0; --j) {
      const auto& r = rows[j];
      const auto& lv = lvals[j];
      const int s = static_cast<int>(r.size());
      for (int t = s - 1; t >= 1; --t) {
        const int i = r[t];
        double acc = 0.0;
        for (int u = 1; u < s; ++u) {
          const int k = r[u];
          acc += lv[u] * lookup(std::max(i, k), std::min(i, k));
        }
        sigma_[col_ptr_[j] + t] = -acc;
      }
      double acc = 0.0;
      for (int u = 1; u < s; ++u) acc += lv[u] * sigma_[col_ptr_[j] + u];
      sigma_[col_ptr_[j]] = 1.0 / D[j] - acc;
    }
  }

  double diag(int j) const { return sigma_[col_ptr_[j]]; }

 private:
  double lookup(int i, int k) const {  // i >= k
    const int lo = col_ptr_[k], hi = col_ptr_[k + 1];
    int a = lo, b = hi;
    while (a < b) {
      const int mid = (a + b) / 2;
      if (row_idx_[mid] < i)
        a = mid + 1;
      else
        b = mid;
    }
    return (a < hi && row_idx_[a] == i) ? sigma_[a] : 0.0;
  }

  std::vector<int> col_ptr_;
  std::vector<int> row_idx_;
  std::vector<double> sigma_;
};

}  // namespace detail

class PrecisionFactor {
 public:
  // H must be SPD on {x : Ax = 0}; constraint rows may be empty.
  PrecisionFactor(const SpMat& H, const std::vector<Eigen::VectorXd>& constraints)
      : m_(static_cast<int>(H.rows())), k_(static_cast<int>(constraints.size())) {
    SpMat Htilde = H;
    if (k_ > 0) {
      double diag_scale = 0.0;
      for (int i = 0; i < m_; ++i) diag_scale += H.coeff(i, i);
      penalty_ = std::max(1.0, diag_scale / m_);
      A_.resize(k_, m_);
      for (int r = 0; r < k_; ++r) A_.row(r) = constraints[r].transpose();
      Eigen::MatrixXd ata = A_.transpose() * A_;
      SpMat AtA = ata.sparseView();
      Htilde = H + penalty_ * AtA;
    }
    ldlt_.compute(Htilde);
    if (ldlt_.info() != Eigen::Success)
      throw SingularPrecision("sparse factorization failed");
    const Eigen::VectorXd D = ldlt_.vectorD();
    logdet_tilde_ = 0.0;
    for (int i = 0; i < m_; ++i) {
      if (!(D[i] > 0.0))
        throw SingularPrecision("factor has non-positive pivot");
      logdet_tilde_ += std::log(D[i]);
    }
    if (k_ > 0) {
      V_.resize(m_, k_);
      for (int r = 0; r < k_; ++r) V_.col(r) = ldlt_.solve(constraints[r]);
      Eigen::MatrixXd S = A_ * V_;
      schur_llt_.compute(0.5 * (S + S.transpose()));
      if (schur_llt_.info() != Eigen::Success)
        throw SingularPrecision("constraint Schur complement not SPD");
      Eigen::MatrixXd AAt = A_ * A_.transpose();
      Eigen::LLT<Eigen::MatrixXd> gram(AAt);
      if (gram.info() != Eigen::Success)
        throw SingularPrecision("constraint rows are linearly dependent");
      logdet_S_ = 2.0 * schur_llt_.matrixLLT().diagonal().array().log().sum();
      logdet_AAt_ = 2.0 * gram.matrixLLT().diagonal().array().log().sum();
    }
  }

  int dim() const { return m_; }
  int n_constraints() const { return k_; }
  int free_dims() const { return m_ - k_; }

  // log det of the precision restricted to the constraint subspace
  // (orthonormal basis); equals log det H when unconstrained.
  double logdet_subspace() const {
    return k_ == 0 ? logdet_tilde_ : logdet_tilde_ + logdet_S_ - logdet_AAt_;
  }

  Eigen::VectorXd solve(const Eigen::VectorXd& b) const { return ldlt_.solve(b); }

  // x - V S^{-1} A x: projects onto Ax = 0 along the H~-conjugate directions.
  Eigen::VectorXd krige(const Eigen::VectorXd& x) const {
    if (k_ == 0) return x;
    return x - V_ * schur_llt_.solve(A_ * x);
  }

  // Newton step for gradient g restricted to {A step = 0}.
  Eigen::VectorXd constrained_step(const Eigen::VectorXd& g) const {
    return krige(ldlt_.solve(g));
  }

  // diag of the (constrained) covariance, via selected inversion plus the
  // rank-k kriging correction.
  Eigen::VectorXd marginal_variances() const {
    const SpMat L = ldlt_.matrixL();
    detail::SelectedInverse sel(L, ldlt_.vectorD());
    const auto& perm = ldlt_.permutationP().indices();
    Eigen::VectorXd var(m_);
    for (int i = 0; i < m_; ++i) var[i] = sel.diag(perm[i]);
    if (k_ > 0) {
      Eigen::MatrixXd W = schur_llt_.matrixL().solve(V_.transpose());  // k x m
      for (int i = 0; i < m_; ++i) var[i] -= W.col(i).squaredNorm();
    }
    return var;
  }

  // Zero-mean draw with covariance = (constrained) inverse precision.
  // Normals are consumed in coordinate order, so a fixed Rng stream gives a
  // fixed draw.
  Eigen::VectorXd sample_zero_mean(Rng& rng) const {
    Eigen::VectorXd eps(m_);
    for (int i = 0; i < m_; ++i) eps[i] = rng.normal();
    const Eigen::VectorXd D = ldlt_.vectorD();
    Eigen::VectorXd w = eps.array() / D.array().sqrt();
    const SpMat L = ldlt_.matrixL();
    solve_unit_upper(L, w);
    const auto& perm = ldlt_.permutationP().indices();
    Eigen::VectorXd z(m_);
    for (int i = 0; i < m_; ++i) z[i] = w[perm[i]];
    return krige(z);
  }

 private:
  // Solves L' y = w in place, treating L as unit lower triangular (its
  // strictly-lower entries are the stored ones; any stored diagonal is
  // ignored).
  static void solve_unit_upper(const SpMat& L, Eigen::VectorXd& w) {
    for (int j = static_cast<int>(L.cols()) - 1; j >= 0; --j) {
      double acc = w[j];
      for (SpMat::InnerIterator it(L, j); it; ++it)
        if (it.row() > j) acc -= it.value() * w[it.row()];
      w[j] = acc;
    }
  }

  int m_;
  int k_;
  double penalty_ = 0.0;
  Eigen::SimplicialLDLT<SpMat, Eigen::Lower, Eigen::AMDOrdering<int>> ldlt_;
  Eigen::MatrixXd A_;   // k x m
  Eigen::MatrixXd V_;   // H~^{-1} A'
  Eigen::LLT<Eigen::MatrixXd> schur_llt_;
  double logdet_tilde_ = 0.0;
  double logdet_S_ = 0.0;
  double logdet_AAt_ = 0.0;
};

}  // namespace lgm
