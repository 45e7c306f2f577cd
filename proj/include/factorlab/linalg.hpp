#pragma once

#include "factorlab/panel.hpp"

#include <Eigen/Dense>

#include <span>

namespace factorlab {

/// Dense symmetric matrix. Construction symmetrizes the input as (A + A^T)/2,
/// so values()(i, j) == values()(j, i) holds bit-for-bit afterwards.
class SymMatrix {
 public:
  explicit SymMatrix(const Eigen::MatrixXd& a);

  static SymMatrix identity(Index n);
  static SymMatrix diagonal(const Eigen::VectorXd& d);

  Index dim() const { return values_.rows(); }
  const Eigen::MatrixXd& values() const { return values_; }
  double operator()(Index i, Index j) const { return values_(i, j); }

 private:
  Eigen::MatrixXd values_;
};

/// Eigenpairs sorted by non-increasing eigenvalue; column j of `vectors`
/// pairs with values[j]. Each column has its largest-magnitude entry
/// non-negative (first such index on ties).
struct EigenSystem {
  Eigen::VectorXd values;
  Eigen::MatrixXd vectors;

  Index size() const { return values.size(); }
  EigenSystem leading(Index k) const;
};

enum class EigenSolver {
  Auto,         // Jacobi up to kJacobiAutoLimit, tridiagonal QR above
  Jacobi,       // cyclic Jacobi rotations
  Tridiagonal,  // Householder tridiagonalization + implicit QR
};

inline constexpr Index kJacobiAutoLimit = 64;

struct JacobiOptions {
  int max_sweeps = 100;
  double relative_tolerance = 1e-12;  // on ||offdiag||_F / ||A||_F
};

EigenSystem sym_eigen(const SymMatrix& a, EigenSolver solver = EigenSolver::Auto);
EigenSystem jacobi_eigen(const SymMatrix& a, const JacobiOptions& options = {});
EigenSystem top_k_eigen(const SymMatrix& a, Index k,
                        EigenSolver solver = EigenSolver::Auto);

/// Cholesky-based inverse; throws SingularMatrix unless clearly positive definite.
SymMatrix invert_spd(const SymMatrix& a);

/// |rows|^-1 sum_{t in rows} x_t x_t^T, rows being 0-based indices into x.
/// With `center`, the mean over `rows` is subtracted first.
SymMatrix sample_covariance(const Eigen::MatrixXd& x, std::span<const Index> rows,
                            bool center = false);
SymMatrix sample_covariance(const Eigen::MatrixXd& x, bool center = false);

/// Flip column signs so every column's largest-|entry| is non-negative.
void apply_sign_convention(Eigen::MatrixXd& vectors);

/// Leading spectrum of the sample covariance of x restricted to `rows`.
struct CovarianceSpectrum {
  EigenSystem leading;  // k pairs; eigenvalues below 1e-12 * mu_1 clamped to 0
  double trace = 0.0;   // trace of the full sample covariance
};

/// Computes the k leading eigenpairs of the (uncentered) sample covariance.
/// When n exceeds |rows| the |rows| x |rows| Gram matrix is decomposed
/// instead and eigenvectors are mapped back through x^T; directions with a
/// zero eigenvalue are then returned as zero columns.
CovarianceSpectrum covariance_spectrum(const Eigen::MatrixXd& x,
                                       std::span<const Index> rows, Index k,
                                       EigenSolver solver = EigenSolver::Auto);
CovarianceSpectrum covariance_spectrum(const Eigen::MatrixXd& x, Index k,
                                       EigenSolver solver = EigenSolver::Auto);

/// Gathers the listed rows of x into a new matrix.
Eigen::MatrixXd gather_rows(const Eigen::MatrixXd& x, std::span<const Index> rows);

}  // namespace factorlab
