#include "factorlab/linalg.hpp"

#include "factorlab/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <vector>

namespace factorlab {

std::vector<Index> iota_indices(Index count) {
  std::vector<Index> out(static_cast<std::size_t>(std::max<Index>(count, 0)));
  std::iota(out.begin(), out.end(), Index{0});
  return out;
}

SymMatrix::SymMatrix(const Eigen::MatrixXd& a) {
  if (a.rows() == 0 || a.rows() != a.cols()) {
    throw InvalidInput("SymMatrix requires a non-empty square matrix, got " +
                       std::to_string(a.rows()) + "x" + std::to_string(a.cols()));
  }
  values_ = 0.5 * (a + a.transpose());
}

SymMatrix SymMatrix::identity(Index n) {
  return SymMatrix(Eigen::MatrixXd::Identity(n, n));
}

SymMatrix SymMatrix::diagonal(const Eigen::VectorXd& d) {
  return SymMatrix(Eigen::MatrixXd(d.asDiagonal()));
}

EigenSystem EigenSystem::leading(Index k) const {
  return EigenSystem{values.head(k), vectors.leftCols(k)};
}

void apply_sign_convention(Eigen::MatrixXd& vectors) {
  for (Index j = 0; j < vectors.cols(); ++j) {
    Index arg = 0;
    double best = -1.0;
    for (Index i = 0; i < vectors.rows(); ++i) {
      const double mag = std::abs(vectors(i, j));
      if (mag > best) {
        best = mag;
        arg = i;
      }
    }
    if (vectors.rows() > 0 && vectors(arg, j) < 0.0) vectors.col(j) *= -1.0;
  }
}

namespace {

void require_finite(const SymMatrix& a) {
  if (!a.values().allFinite()) {
    throw InvalidInput("eigendecomposition input has non-finite entries");
  }
}

// Sorts eigenpairs into non-increasing order (stable in the original index)
// and fixes the sign of each eigenvector.
EigenSystem finalize(const Eigen::VectorXd& values, const Eigen::MatrixXd& vectors) {
  const Index n = values.size();
  std::vector<Index> order = iota_indices(n);
  std::stable_sort(order.begin(), order.end(),
                   [&](Index l, Index r) { return values[l] > values[r]; });
  EigenSystem out;
  out.values.resize(n);
  out.vectors.resize(vectors.rows(), n);
  for (Index j = 0; j < n; ++j) {
    out.values[j] = values[order[static_cast<std::size_t>(j)]];
    out.vectors.col(j) = vectors.col(order[static_cast<std::size_t>(j)]);
  }
  apply_sign_convention(out.vectors);
  return out;
}

double offdiagonal_norm(const Eigen::MatrixXd& m) {
  double sum = 0.0;
  for (Index j = 0; j < m.cols(); ++j) {
    for (Index i = 0; i < m.rows(); ++i) {
      if (i != j) sum += m(i, j) * m(i, j);
    }
  }
  return std::sqrt(sum);
}

EigenSystem tridiagonal_eigen(const SymMatrix& a) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(a.values());
  if (solver.info() != Eigen::Success) {
    throw NumericalFailure("tridiagonal QR eigensolver did not converge");
  }
  // Eigen returns ascending order; finalize() re-sorts.
  return finalize(solver.eigenvalues(), solver.eigenvectors());
}

}  // namespace

EigenSystem jacobi_eigen(const SymMatrix& a, const JacobiOptions& options) {
  require_finite(a);
  const Index n = a.dim();
  Eigen::MatrixXd m = a.values();
  Eigen::MatrixXd v = Eigen::MatrixXd::Identity(n, n);
  const double target = options.relative_tolerance * m.norm();

  int sweep = 0;
  while (offdiagonal_norm(m) > target) {
    if (sweep == options.max_sweeps) {
      throw NumericalFailure("Jacobi eigensolver did not converge in " +
                             std::to_string(options.max_sweeps) + " sweeps");
    }
    ++sweep;
    for (Index p = 0; p + 1 < n; ++p) {
      for (Index q = p + 1; q < n; ++q) {
        const double apq = m(p, q);
        if (apq == 0.0) continue;
        const double theta = (m(q, q) - m(p, p)) / (2.0 * apq);
        double t;
        if (std::abs(theta) > 1e150) {
          t = 0.5 / theta;
        } else {
          t = (theta >= 0.0 ? 1.0 : -1.0) /
              (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        }
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;

        for (Index k = 0; k < n; ++k) {
          const double mkp = m(k, p);
          const double mkq = m(k, q);
          m(k, p) = c * mkp - s * mkq;
          m(k, q) = s * mkp + c * mkq;
        }
        for (Index k = 0; k < n; ++k) {
          const double mpk = m(p, k);
          const double mqk = m(q, k);
          m(p, k) = c * mpk - s * mqk;
          m(q, k) = s * mpk + c * mqk;
        }
        m(p, q) = 0.0;
        m(q, p) = 0.0;
        for (Index k = 0; k < n; ++k) {
          const double vkp = v(k, p);
          const double vkq = v(k, q);
          v(k, p) = c * vkp - s * vkq;
          v(k, q) = s * vkp + c * vkq;
        }
      }
    }
  }
  return finalize(m.diagonal(), v);
}

EigenSystem sym_eigen(const SymMatrix& a, EigenSolver solver) {
  require_finite(a);
  if (solver == EigenSolver::Auto) {
    solver = a.dim() <= kJacobiAutoLimit ? EigenSolver::Jacobi : EigenSolver::Tridiagonal;
  }
  return solver == EigenSolver::Jacobi ? jacobi_eigen(a) : tridiagonal_eigen(a);
}

EigenSystem top_k_eigen(const SymMatrix& a, Index k, EigenSolver solver) {
  if (k < 1 || k > a.dim()) {
    throw InvalidInput("top_k_eigen: k=" + std::to_string(k) + " outside [1, " +
                       std::to_string(a.dim()) + "]");
  }
  return sym_eigen(a, solver).leading(k);
}

SymMatrix invert_spd(const SymMatrix& a) {
  if (!a.values().allFinite()) throw InvalidInput("invert_spd: non-finite entries");
  const Eigen::LLT<Eigen::MatrixXd> llt(a.values());
  if (llt.info() != Eigen::Success) {
    throw SingularMatrix("matrix is not positive definite");
  }
  // Smallest squared pivot bounds the smallest eigenvalue from above and the
  // largest diagonal entry bounds the largest eigenvalue from below.
  const Eigen::VectorXd pivots = llt.matrixL().toDenseMatrix().diagonal().array().square();
  const double scale = a.values().diagonal().maxCoeff();
  if (!(pivots.minCoeff() > 1e-12 * scale)) {
    throw SingularMatrix("matrix is numerically singular");
  }
  const Index n = a.dim();
  return SymMatrix(llt.solve(Eigen::MatrixXd::Identity(n, n)));
}

Eigen::MatrixXd gather_rows(const Eigen::MatrixXd& x, std::span<const Index> rows) {
  Eigen::MatrixXd out(static_cast<Index>(rows.size()), x.cols());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const Index t = rows[r];
    if (t < 0 || t >= x.rows()) {
      throw InvalidInput("row index " + std::to_string(t) + " out of range");
    }
    out.row(static_cast<Index>(r)) = x.row(t);
  }
  return out;
}

SymMatrix sample_covariance(const Eigen::MatrixXd& x, std::span<const Index> rows,
                            bool center) {
  if (rows.empty()) throw InvalidInput("sample_covariance: empty index set");
  if (!x.allFinite()) throw InvalidInput("sample_covariance: panel has missing values");
  Eigen::MatrixXd xs = gather_rows(x, rows);
  if (center) xs.rowwise() -= xs.colwise().mean();
  const double m = static_cast<double>(xs.rows());
  return SymMatrix((xs.transpose() * xs) / m);
}

SymMatrix sample_covariance(const Eigen::MatrixXd& x, bool center) {
  const auto rows = iota_indices(x.rows());
  return sample_covariance(x, rows, center);
}

CovarianceSpectrum covariance_spectrum(const Eigen::MatrixXd& x,
                                       std::span<const Index> rows, Index k,
                                       EigenSolver solver) {
  if (rows.empty()) throw InvalidInput("covariance_spectrum: empty index set");
  const Index n = x.cols();
  if (k < 1 || k > n) {
    throw InvalidInput("covariance_spectrum: k=" + std::to_string(k) + " outside [1, " +
                       std::to_string(n) + "]");
  }
  const Eigen::MatrixXd xs = gather_rows(x, rows);
  if (!xs.allFinite()) throw InvalidInput("covariance_spectrum: non-finite data");
  const Index m = xs.rows();

  CovarianceSpectrum out;
  out.trace = xs.squaredNorm() / static_cast<double>(m);

  if (n <= m) {
    const SymMatrix cov((xs.transpose() * xs) / static_cast<double>(m));
    out.leading = sym_eigen(cov, solver).leading(k);
  } else {
    const SymMatrix gram((xs * xs.transpose()) / static_cast<double>(m));
    const EigenSystem dual = sym_eigen(gram, solver);
    out.leading.values = Eigen::VectorXd::Zero(k);
    out.leading.vectors = Eigen::MatrixXd::Zero(n, k);
    const double top = std::max(dual.values[0], 0.0);
    for (Index j = 0; j < std::min(k, m); ++j) {
      const double mu = dual.values[j];
      if (!(mu > 1e-12 * top)) continue;
      Eigen::VectorXd w = xs.transpose() * dual.vectors.col(j);
      const double norm = w.norm();
      if (!(norm > 0.0)) continue;
      out.leading.values[j] = mu;
      out.leading.vectors.col(j) = w / norm;
    }
    apply_sign_convention(out.leading.vectors);
  }

  const double top = std::max(out.leading.values[0], 0.0);
  for (Index j = 0; j < k; ++j) {
    if (!(out.leading.values[j] >= 1e-12 * top) || out.leading.values[j] <= 0.0) {
      out.leading.values[j] = 0.0;
    }
  }
  return out;
}

CovarianceSpectrum covariance_spectrum(const Eigen::MatrixXd& x, Index k,
                                       EigenSolver solver) {
  const auto rows = iota_indices(x.rows());
  return covariance_spectrum(x, rows, k, solver);
}

const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::InvalidInput: return "InvalidInput";
    case ErrorKind::NumericalFailure: return "NumericalFailure";
    case ErrorKind::SingularMatrix: return "SingularMatrix";
    case ErrorKind::DegenerateSpectrum: return "DegenerateSpectrum";
    case ErrorKind::BlockingInfeasible: return "BlockingInfeasible";
    case ErrorKind::DegenerateOracle: return "DegenerateOracle";
    case ErrorKind::StudyFailed: return "StudyFailed";
    case ErrorKind::PoetInfeasible: return "PoetInfeasible";
    case ErrorKind::Io: return "IoError";
  }
  return "Error";
}

}  // namespace factorlab
