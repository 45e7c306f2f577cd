#pragma once

// Independent reference implementations used by the tests. Nothing here
// calls into the library; matrices are plain row-major vectors of vectors.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <stdexcept>
#include <vector>

namespace oracle {

using Mat = std::vector<std::vector<double>>;
using Vec = std::vector<double>;

inline Mat from_eigen(const Eigen::MatrixXd& m) {
  Mat out(static_cast<std::size_t>(m.rows()), Vec(static_cast<std::size_t>(m.cols())));
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) out[i][j] = m(i, j);
  return out;
}

inline Eigen::MatrixXd to_eigen(const Mat& m) {
  Eigen::MatrixXd out(m.size(), m.empty() ? 0 : m[0].size());
  for (std::size_t i = 0; i < m.size(); ++i)
    for (std::size_t j = 0; j < m[i].size(); ++j) out(i, j) = m[i][j];
  return out;
}

inline Mat zeros(std::size_t r, std::size_t c) { return Mat(r, Vec(c, 0.0)); }

inline Mat transpose(const Mat& a) {
  Mat out = zeros(a[0].size(), a.size());
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < a[0].size(); ++j) out[j][i] = a[i][j];
  return out;
}

inline Mat multiply(const Mat& a, const Mat& b) {
  Mat out = zeros(a.size(), b[0].size());
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t k = 0; k < b.size(); ++k)
      for (std::size_t j = 0; j < b[0].size(); ++j) out[i][j] += a[i][k] * b[k][j];
  return out;
}

// |rows|^-1 sum_t x_t x_t^T by a double loop over (i, i').
inline Mat covariance(const Mat& x, const std::vector<std::size_t>& rows) {
  const std::size_t n = x[0].size();
  Mat out = zeros(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t k = 0; k < n; ++k) {
      double s = 0.0;
      for (std::size_t t : rows) s += x[t][i] * x[t][k];
      out[i][k] = s / static_cast<double>(rows.size());
    }
  return out;
}

// Number of eigenvalues of symmetric a below sigma: the count of negative
// pivots when eliminating a - sigma I (sign changes of its leading principal
// minors, i.e. of the characteristic polynomials of the leading blocks).
inline int count_below(const Mat& a, long double sigma) {
  const std::size_t n = a.size();
  std::vector<std::vector<long double>> m(n, std::vector<long double>(n));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) m[i][j] = a[i][j] - (i == j ? sigma : 0.0L);
  int negatives = 0;
  for (std::size_t k = 0; k < n; ++k) {
    long double p = m[k][k];
    if (p == 0.0L) p = std::numeric_limits<long double>::epsilon() * 1e-3L;
    if (p < 0) ++negatives;
    for (std::size_t i = k + 1; i < n; ++i) {
      const long double f = m[i][k] / p;
      for (std::size_t j = k + 1; j < n; ++j) m[i][j] -= f * m[k][j];
    }
  }
  return negatives;
}

// All eigenvalues of symmetric a, non-increasing, by bisection on count_below.
inline Vec bisection_eigenvalues(const Mat& a) {
  const std::size_t n = a.size();
  long double bound = 0.0L;
  for (std::size_t i = 0; i < n; ++i) {
    long double row = 0.0L;
    for (std::size_t j = 0; j < n; ++j) row += std::fabs(a[i][j]);
    bound = std::max(bound, row);
  }
  bound += 1.0L;
  Vec out(n);
  for (std::size_t k = 0; k < n; ++k) {
    // k-th smallest: smallest sigma with count_below(sigma) > k
    long double lo = -bound, hi = bound;
    for (int it = 0; it < 200 && hi - lo > 1e-15L * (1.0L + bound); ++it) {
      const long double mid = 0.5L * (lo + hi);
      if (count_below(a, mid) > static_cast<int>(k)) hi = mid;
      else lo = mid;
    }
    out[n - 1 - k] = static_cast<double>(0.5L * (lo + hi));
  }
  return out;
}

// Gauss-Jordan inverse with partial pivoting.
inline Mat gauss_jordan_inverse(const Mat& a) {
  const std::size_t n = a.size();
  Mat m = a;
  Mat inv = zeros(n, n);
  for (std::size_t i = 0; i < n; ++i) inv[i][i] = 1.0;
  for (std::size_t c = 0; c < n; ++c) {
    std::size_t piv = c;
    for (std::size_t r = c + 1; r < n; ++r)
      if (std::fabs(m[r][c]) > std::fabs(m[piv][c])) piv = r;
    if (m[piv][c] == 0.0) throw std::runtime_error("singular");
    std::swap(m[piv], m[c]);
    std::swap(inv[piv], inv[c]);
    const double d = m[c][c];
    for (std::size_t j = 0; j < n; ++j) {
      m[c][j] /= d;
      inv[c][j] /= d;
    }
    for (std::size_t r = 0; r < n; ++r) {
      if (r == c) continue;
      const double f = m[r][c];
      if (f == 0.0) continue;
      for (std::size_t j = 0; j < n; ++j) {
        m[r][j] -= f * m[c][j];
        inv[r][j] -= f * inv[c][j];
      }
    }
  }
  return inv;
}

struct Eig {
  Vec values;  // non-increasing
  Mat vectors; // column j pairs with values[j]
};

// Classical cyclic Jacobi, swept until the off-diagonal mass is negligible.
inline Eig jacobi(const Mat& a_in) {
  const std::size_t n = a_in.size();
  Mat a = a_in;
  Mat v = zeros(n, n);
  for (std::size_t i = 0; i < n; ++i) v[i][i] = 1.0;
  for (int sweep = 0; sweep < 200; ++sweep) {
    double off = 0.0, total = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) {
        total += a[i][j] * a[i][j];
        if (i != j) off += a[i][j] * a[i][j];
      }
    if (off <= 1e-30 * total || off == 0.0) break;
    for (std::size_t p = 0; p + 1 < n; ++p)
      for (std::size_t q = p + 1; q < n; ++q) {
        if (a[p][q] == 0.0) continue;
        const double theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
        const double t = (theta >= 0 ? 1.0 : -1.0) /
                         (std::fabs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0), s = t * c;
        for (std::size_t k = 0; k < n; ++k) {
          const double akp = a[k][p], akq = a[k][q];
          a[k][p] = c * akp - s * akq;
          a[k][q] = s * akp + c * akq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double apk = a[p][k], aqk = a[q][k];
          a[p][k] = c * apk - s * aqk;
          a[q][k] = s * apk + c * aqk;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double vkp = v[k][p], vkq = v[k][q];
          v[k][p] = c * vkp - s * vkq;
          v[k][q] = s * vkp + c * vkq;
        }
      }
  }
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  std::sort(order.begin(), order.end(),
            [&](std::size_t x, std::size_t y) { return a[x][x] > a[y][y]; });
  Eig out;
  out.values.resize(n);
  out.vectors = zeros(n, n);
  for (std::size_t j = 0; j < n; ++j) {
    out.values[j] = a[order[j]][order[j]];
    for (std::size_t i = 0; i < n; ++i) out.vectors[i][j] = v[i][order[j]];
  }
  return out;
}

// Common component of a (centered) window: x W_load W_dir^T with W the
// leading eigenvectors of the window second-moment matrix.
// kind: 'p' principal components, 's' scaled, 'c' capped, 'h' shrunk.
inline Mat common_component(const Mat& x, int r, char kind) {
  const std::size_t T = x.size(), n = x[0].size();
  if (r == 0) return zeros(T, n);
  std::vector<std::size_t> all(T);
  for (std::size_t t = 0; t < T; ++t) all[t] = t;
  const Eig e = jacobi(covariance(x, all));
  Mat load = zeros(n, r), dir = zeros(n, r);
  double top = 0.0;
  for (std::size_t i = 0; i < n; ++i) top = std::max(top, std::fabs(e.vectors[i][0]));
  const double cw = 1.1 * std::sqrt(double(n)) * top;
  for (int j = 0; j < r; ++j) {
    double m = 0.0;
    for (std::size_t i = 0; i < n; ++i) m = std::max(m, std::fabs(e.vectors[i][j]));
    const double nu = std::max(1.0, std::sqrt(double(n)) * m / cw);
    const double shrink = std::sqrt(std::max(e.values[j], 0.0) / e.values[0]);
    for (std::size_t i = 0; i < n; ++i) {
      const double w = e.vectors[i][j];
      const double bound = cw / std::sqrt(double(n));
      const double clipped = std::fabs(w) > bound ? (w > 0 ? bound : -bound) : w;
      load[i][j] = kind == 's' ? w / nu : kind == 'h' ? w * shrink : kind == 'c' ? clipped : w;
      dir[i][j] = kind == 's' ? w / nu : kind == 'c' ? clipped : w;
    }
  }
  return multiply(multiply(x, dir), transpose(load));
}

// Covariance forecast of a raw window. poet_c < 0 gives the exact factor
// model (diagonal residual), otherwise hard-thresholded residuals.
inline Mat window_covariance(const Mat& raw, int r, char kind, double poet_c) {
  const std::size_t T = raw.size(), n = raw[0].size();
  Mat x = raw;
  for (std::size_t i = 0; i < n; ++i) {
    double mu = 0.0;
    for (std::size_t t = 0; t < T; ++t) mu += raw[t][i];
    mu /= double(T);
    for (std::size_t t = 0; t < T; ++t) x[t][i] -= mu;
  }
  const Mat chi = common_component(x, r, kind);
  Mat eps = x;
  for (std::size_t t = 0; t < T; ++t)
    for (std::size_t i = 0; i < n; ++i) eps[t][i] -= chi[t][i];
  std::vector<std::size_t> all(T);
  for (std::size_t t = 0; t < T; ++t) all[t] = t;
  Mat sigma = covariance(chi, all);
  const Mat s = covariance(eps, all);
  const double omega = 1.0 / std::sqrt(double(n)) + std::sqrt(std::log(double(n)) / double(T));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t k = 0; k < n; ++k) {
      if (i == k) {
        sigma[i][k] += s[i][k];
        continue;
      }
      if (poet_c < 0) continue;
      double theta = 0.0;
      for (std::size_t t = 0; t < T; ++t) {
        const double d = eps[t][i] * eps[t][k] - s[i][k];
        theta += d * d;
      }
      theta /= double(T);
      if (std::fabs(s[i][k]) >= poet_c * omega * std::sqrt(theta)) sigma[i][k] += s[i][k];
    }
  return sigma;
}

struct Backtest {
  double tau = 0.0;
  double sigma2 = 0.0;
  double sharpe = 0.0;
  std::vector<Vec> weights;
};

// Rolling minimum-variance backtest written directly from the definitions.
inline Backtest backtest(const Mat& x, std::size_t W, std::size_t step, int r, char kind,
                         double poet_c) {
  const std::size_t T = x.size(), n = x[0].size();
  Backtest out;
  double pooled = 0.0, ratios = 0.0;
  int used = 0;
  for (std::size_t start = 0; start + W < T; start += step) {
    const Mat window(x.begin() + start, x.begin() + start + W);
    const Mat inv = gauss_jordan_inverse(window_covariance(window, r, kind, poet_c));
    Vec w(n, 0.0);
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t k = 0; k < n; ++k) w[i] += inv[i][k];
      total += w[i];
    }
    for (double& v : w) v /= total;
    out.weights.push_back(w);
    Vec ret;
    for (std::size_t t = start + W; t < std::min(T, start + W + step); ++t) {
      double p = 0.0;
      for (std::size_t i = 0; i < n; ++i) p += w[i] * x[t][i];
      ret.push_back(p);
    }
    double tau = 0.0;
    for (double v : ret) tau += v;
    const double mu = tau / double(ret.size());
    double ss = 0.0;
    for (double v : ret) ss += (v - mu) * (v - mu);
    out.tau += tau;
    pooled += ss;
    if (ss > 0) {
      ratios += tau / std::sqrt(ss / double(ret.size()));
      ++used;
    }
  }
  out.sigma2 = pooled / double(T - W);
  out.sharpe = used > 0 ? ratios / used : std::numeric_limits<double>::infinity();
  return out;
}

}  // namespace oracle
