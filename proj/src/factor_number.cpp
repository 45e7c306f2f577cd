#include "factorlab/factor_number.hpp"

#include "factorlab/errors.hpp"

#include <cmath>
#include <limits>
#include <numeric>
#include <string>

namespace factorlab {

namespace {

constexpr double kZeroTail = 1e-12;

void check_args(const SpectrumView& s, Index n, Index T, int r_max, std::size_t needed) {
  if (n < 1 || T < 1) throw InvalidInput("n and T must be positive");
  if (r_max < 1) throw InvalidInput("r_max must be >= 1");
  if (s.leading.size() < needed) {
    throw InvalidInput("spectrum has " + std::to_string(s.leading.size()) +
                       " eigenvalues, " + std::to_string(needed) + " required");
  }
  if (!std::isfinite(s.trace)) throw InvalidInput("spectrum trace is not finite");
}

// tail[q] = sum_{j > q} mu_j for q = 0..count-1 (1-based q in the formulas).
std::vector<double> tail_sums(const SpectrumView& s, std::size_t count) {
  std::vector<double> tail(count + 1);
  double head = 0.0;
  tail[0] = s.trace;
  for (std::size_t q = 1; q <= count; ++q) {
    head += s.leading[q - 1];
    const double t = s.trace - head;
    tail[q] = t > kZeroTail * std::abs(s.trace) ? t : 0.0;
  }
  return tail;
}

void require_tail(double tail, int q) {
  if (!(tail > 0.0)) {
    throw DegenerateSpectrum("tail eigenvalue sum vanishes at q=" + std::to_string(q) +
                                 " (rank-deficient spectrum)",
                             q);
  }
}

}  // namespace

std::string to_string(FactorNumberMethod method) {
  return method == FactorNumberMethod::BaiNgIC ? "bai-ng-ic" : "ahn-horenstein-gr";
}

int default_r_max(Index n, Index T) {
  const Index m = std::min(n, T);
  Index root = static_cast<Index>(std::sqrt(static_cast<double>(m)));
  while (root * root > m) --root;
  while ((root + 1) * (root + 1) <= m) ++root;
  return static_cast<int>(std::max<Index>(root, 1));
}

double bai_ng_penalty(Index n, Index T) {
  const double nd = static_cast<double>(n);
  const double td = static_cast<double>(T);
  return (nd + td) * std::log(std::min(nd, td)) / (nd * td);
}

FactorNumberResult ic_bai_ng(const SpectrumView& s, Index n, Index T, int r_max,
                             std::optional<double> penalty) {
  check_args(s, n, T, r_max, static_cast<std::size_t>(r_max));
  const double g = penalty.value_or(bai_ng_penalty(n, T));
  const auto tail = tail_sums(s, static_cast<std::size_t>(r_max));

  FactorNumberResult out;
  out.method = FactorNumberMethod::BaiNgIC;
  out.r_max = r_max;
  out.criterion.resize(static_cast<std::size_t>(r_max));
  double best = std::numeric_limits<double>::infinity();
  for (int q = 1; q <= r_max; ++q) {
    const double t = tail[static_cast<std::size_t>(q)];
    require_tail(t, q);
    const double ic = std::log(t / static_cast<double>(n)) + q * g;
    out.criterion[static_cast<std::size_t>(q - 1)] = ic;
    if (ic < best) {
      best = ic;
      out.r_hat = q;
    }
  }
  return out;
}

FactorNumberResult gr_ahn_horenstein(const SpectrumView& s, Index n, Index T, int r_max) {
  check_args(s, n, T, r_max, static_cast<std::size_t>(r_max) + 1);
  const auto tail = tail_sums(s, static_cast<std::size_t>(r_max) + 1);
  const double inf = std::numeric_limits<double>::infinity();

  // mu*_q for q = 1..r_max+1; a zero eigenvalue gives mu* = 0.
  auto scaled = [&](int q) {
    const double mu = s.leading[static_cast<std::size_t>(q - 1)];
    if (!(mu > 0.0)) return 0.0;
    const double t = tail[static_cast<std::size_t>(q)];
    return t > 0.0 ? mu / t : inf;
  };

  FactorNumberResult out;
  out.method = FactorNumberMethod::AhnHorensteinGR;
  out.r_max = r_max;
  out.criterion.resize(static_cast<std::size_t>(r_max));
  double best = -inf;
  for (int q = 1; q <= r_max; ++q) {
    require_tail(tail[static_cast<std::size_t>(q)], q);
    const double num = std::log1p(scaled(q));
    const double next = scaled(q + 1);
    double gr;
    if (next == 0.0) {
      gr = inf;
    } else if (std::isinf(next)) {
      gr = 0.0;
    } else {
      gr = num / std::log1p(next);
    }
    out.criterion[static_cast<std::size_t>(q - 1)] = gr;
    if (gr > best) {
      best = gr;
      out.r_hat = q;
    }
  }
  return out;
}

FactorNumberResult ic_bai_ng(std::span<const double> eigenvalues, Index n, Index T, int r_max,
                             std::optional<double> penalty) {
  const double trace = std::accumulate(eigenvalues.begin(), eigenvalues.end(), 0.0);
  return ic_bai_ng(SpectrumView{eigenvalues, trace}, n, T, r_max, penalty);
}

FactorNumberResult gr_ahn_horenstein(std::span<const double> eigenvalues, Index n, Index T,
                                     int r_max) {
  const double trace = std::accumulate(eigenvalues.begin(), eigenvalues.end(), 0.0);
  return gr_ahn_horenstein(SpectrumView{eigenvalues, trace}, n, T, r_max);
}

}  // namespace factorlab
