#pragma once

#include "factorlab/panel.hpp"

#include <optional>
#include <span>
#include <string>
#include <vector>

namespace factorlab {

enum class FactorNumberMethod { BaiNgIC, AhnHorensteinGR };

std::string to_string(FactorNumberMethod method);

struct FactorNumberResult {
  int r_hat = 0;
  std::vector<double> criterion;  // criterion[q-1] for q = 1..r_max
  int r_max = 0;
  FactorNumberMethod method = FactorNumberMethod::BaiNgIC;
};

/// floor(sqrt(min(n, T))), at least 1.
int default_r_max(Index n, Index T);

/// (n + T) log(min(n, T)) / (n T).
double bai_ng_penalty(Index n, Index T);

/// Spectrum summary consumed by both estimators: the leading eigenvalues of
/// the sample covariance (at least r_max + 1 of them, non-increasing) and
/// the trace, from which every tail sum sum_{j>q} mu_j is derived.
struct SpectrumView {
  std::span<const double> leading;
  double trace = 0.0;
};

/// Bai-Ng information criterion; IC(q) = log(n^-1 sum_{j>q} mu_j) + q g.
/// r_hat = argmin with ties resolved toward the smaller q.
FactorNumberResult ic_bai_ng(const SpectrumView& spectrum, Index n, Index T, int r_max,
                             std::optional<double> penalty = std::nullopt);

/// Ahn-Horenstein growth ratio; r_hat = argmax of
/// GR(q) = log(1 + mu*_q) / log(1 + mu*_{q+1}), ties toward the smaller q.
FactorNumberResult gr_ahn_horenstein(const SpectrumView& spectrum, Index n, Index T,
                                     int r_max);

/// Overloads taking a full spectrum; the trace is its sum.
FactorNumberResult ic_bai_ng(std::span<const double> eigenvalues, Index n, Index T, int r_max,
                             std::optional<double> penalty = std::nullopt);
FactorNumberResult gr_ahn_horenstein(std::span<const double> eigenvalues, Index n, Index T,
                                     int r_max);

}  // namespace factorlab
