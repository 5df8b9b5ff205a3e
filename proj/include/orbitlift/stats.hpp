#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include <boost/math/special_functions/gamma.hpp>

#include "orbitlift/error.hpp"

namespace orbitlift {

/// Upper tail of the chi-square distribution.
inline double chi_square_sf(double statistic, double dof) {
  if (dof <= 0) return 1.0;
  if (statistic <= 0) return 1.0;
  return boost::math::gamma_q(dof / 2.0, statistic / 2.0);
}

struct ChiSquareResult {
  double statistic = 0;
  double dof = 0;
  double p_value = 1;
};

/// Goodness of fit of `counts` against category probabilities `probs`.
/// Categories with zero expected mass must have zero count.
inline ChiSquareResult chi_square_gof(const std::vector<std::uint64_t>& counts,
                                      const std::vector<double>& probs) {
  if (counts.size() != probs.size()) throw Error("chi-square: size mismatch");
  double total = 0;
  for (auto c : counts) total += static_cast<double>(c);
  ChiSquareResult r;
  if (total == 0) return r;
  int used = 0;
  for (std::size_t k = 0; k < counts.size(); ++k) {
    const double e = probs[k] * total;
    if (e <= 0) {
      if (counts[k] > 0) return {INFINITY, 0, 0.0};
      continue;
    }
    const double d = static_cast<double>(counts[k]) - e;
    r.statistic += d * d / e;
    ++used;
  }
  r.dof = std::max(0, used - 1);
  r.p_value = chi_square_sf(r.statistic, r.dof);
  return r;
}

/// Homogeneity test over rows of a contingency table (rows = groups,
/// columns = outcome categories). Columns that are empty everywhere are
/// dropped; identical rows give p = 1.
inline ChiSquareResult chi_square_homogeneity(const std::vector<std::vector<std::uint64_t>>& table) {
  ChiSquareResult r;
  if (table.size() < 2) return r;
  const auto cols = table.front().size();
  std::vector<double> col_total(cols, 0), row_total(table.size(), 0);
  double total = 0;
  for (std::size_t i = 0; i < table.size(); ++i) {
    if (table[i].size() != cols) throw Error("chi-square: ragged table");
    for (std::size_t k = 0; k < cols; ++k) {
      const auto x = static_cast<double>(table[i][k]);
      col_total[k] += x;
      row_total[i] += x;
      total += x;
    }
  }
  const auto rows_used = std::count_if(row_total.begin(), row_total.end(), [](double x) { return x > 0; });
  const auto cols_used = std::count_if(col_total.begin(), col_total.end(), [](double x) { return x > 0; });
  if (rows_used < 2 || cols_used < 2) return r;
  for (std::size_t i = 0; i < table.size(); ++i) {
    if (row_total[i] == 0) continue;
    for (std::size_t k = 0; k < cols; ++k) {
      if (col_total[k] == 0) continue;
      const double e = row_total[i] * col_total[k] / total;
      const double d = static_cast<double>(table[i][k]) - e;
      r.statistic += d * d / e;
    }
  }
  r.dof = static_cast<double>((rows_used - 1) * (cols_used - 1));
  r.p_value = chi_square_sf(r.statistic, r.dof);
  return r;
}

/// 2x2 table laid out as
///   a b
///   c d
struct ContingencyTable2x2 {
  std::uint64_t a = 0, b = 0, c = 0, d = 0;
};

/// Two-sided Fisher exact test: total probability of all tables with the
/// observed margins that are no more likely than the observed one.
inline double fisher_exact(const ContingencyTable2x2& t) {
  const std::uint64_t row1 = t.a + t.b, row2 = t.c + t.d, col1 = t.a + t.c;
  const std::uint64_t n = row1 + row2;
  if (n == 0 || row1 == 0 || row2 == 0 || col1 == 0 || col1 == n) return 1.0;
  const std::uint64_t lo = col1 > row2 ? col1 - row2 : 0;
  const std::uint64_t hi = std::min(row1, col1);
  if (n <= 60) {
    // Exact integer weights C(row1, x) C(row2, col1 - x); the largest is at
    // most C(60, 30) < 2^64. Ties with the observed table are then exact.
    using u128 = unsigned __int128;
    auto choose = [](std::uint64_t m, std::uint64_t k) {
      u128 r = 1;
      for (std::uint64_t i = 1; i <= k; ++i) r = r * (m - k + i) / i;
      return static_cast<std::uint64_t>(r);
    };
    std::vector<std::uint64_t> w(hi - lo + 1);
    w[0] = choose(row1, lo) * choose(row2, col1 - lo);
    for (std::uint64_t x = lo; x < hi; ++x) {
      const u128 num = static_cast<u128>(w[x - lo]) * (row1 - x) * (col1 - x);
      w[x - lo + 1] = static_cast<std::uint64_t>(num / ((x + 1) * (row2 + x + 1 - col1)));
    }
    const auto observed = w[t.a - lo];
    std::uint64_t total = 0, tail = 0;
    for (auto v : w) {
      total += v;
      if (v <= observed) tail += v;
    }
    return static_cast<double>(tail) / static_cast<double>(total);
  }
  // Unnormalised weights via the ratio recurrence
  //   w(x+1)/w(x) = (row1-x)(col1-x) / ((x+1)(row2-col1+x+1)),
  // rescaled whenever the running weight grows too large.
  std::vector<double> w(hi - lo + 1);
  w[0] = 1.0;
  for (std::uint64_t x = lo; x < hi; ++x) {
    const double num = static_cast<double>(row1 - x) * static_cast<double>(col1 - x);
    const double den = static_cast<double>(x + 1) * static_cast<double>(row2 + x + 1 - col1);
    w[x - lo + 1] = w[x - lo] * num / den;
    if (w[x - lo + 1] > 1e250) {
      for (std::uint64_t y = 0; y <= x - lo + 1; ++y) w[y] *= 1e-250;
    }
  }
  double total = 0;
  for (auto v : w) total += v;
  const double observed = w[t.a - lo];
  const double cutoff = observed * (1.0 + 1e-12);
  double tail = 0;
  for (auto v : w) {
    if (v <= cutoff) tail += v;
  }
  return std::min(1.0, tail / total);
}

}  // namespace orbitlift
