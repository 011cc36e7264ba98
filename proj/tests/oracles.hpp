#pragma once

// Independent reference implementations used only by the tests. Each one is
// written the slow, obvious way so it shares no code path with the library.

#include "mfband/core.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

namespace oracle {

using mfband::ComponentValues;
using mfband::MFCurve;

// max over every (j, g) by direct scan
inline double sup_score(const MFCurve& r, const ComponentValues& s) {
  double best = 0.0;
  for (std::size_t j = 0; j < r.values.size(); ++j)
    for (std::size_t g = 0; g < r.values[j].size(); ++g)
      best = std::max(best, std::fabs(r.values[j][g]) / s[j][g]);
  return best;
}

// integral of the piecewise-linear interpolant, segment by segment, each
// segment split into `refine` pieces
inline double linear_integral(const std::vector<double>& t, const std::vector<double>& f,
                              int refine = 8) {
  double total = 0.0;
  for (std::size_t g = 0; g + 1 < t.size(); ++g) {
    const double h = (t[g + 1] - t[g]) / refine;
    for (int k = 0; k < refine; ++k) {
      const double a = static_cast<double>(k) / refine;
      const double b = static_cast<double>(k + 1) / refine;
      const double fa = f[g] + a * (f[g + 1] - f[g]);
      const double fb = f[g] + b * (f[g + 1] - f[g]);
      total += 0.5 * h * (fa + fb);
    }
  }
  return total;
}

// k-th smallest (1-based) by full sort
inline double kth_smallest(std::vector<double> v, long k) {
  std::sort(v.begin(), v.end());
  if (k < 1 || static_cast<std::size_t>(k) > v.size()) throw std::out_of_range("kth_smallest");
  return v[static_cast<std::size_t>(k - 1)];
}

// least squares through the normal equations and Gauss-Jordan with partial pivoting
inline std::vector<double> ols_normal_equations(const std::vector<std::vector<double>>& X,
                                                const std::vector<double>& y) {
  const std::size_t q = X.front().size();
  std::vector<std::vector<double>> A(q, std::vector<double>(q + 1, 0.0));
  for (std::size_t i = 0; i < X.size(); ++i)
    for (std::size_t a = 0; a < q; ++a) {
      for (std::size_t b = 0; b < q; ++b) A[a][b] += X[i][a] * X[i][b];
      A[a][q] += X[i][a] * y[i];
    }
  for (std::size_t c = 0; c < q; ++c) {
    std::size_t piv = c;
    for (std::size_t r = c + 1; r < q; ++r)
      if (std::fabs(A[r][c]) > std::fabs(A[piv][c])) piv = r;
    std::swap(A[c], A[piv]);
    for (std::size_t r = 0; r < q; ++r) {
      if (r == c) continue;
      const double f = A[r][c] / A[c][c];
      for (std::size_t k = c; k <= q; ++k) A[r][k] -= f * A[c][k];
    }
  }
  std::vector<double> beta(q);
  for (std::size_t c = 0; c < q; ++c) beta[c] = A[c][q] / A[c][c];
  return beta;
}

// sample standard deviation, divisor n - 1, two passes
inline double sample_sd(const std::vector<double>& v) {
  double mean = 0.0;
  for (double x : v) mean += x;
  mean /= static_cast<double>(v.size());
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

// textbook recursive Cox-de Boor definition; right-closed at the last knot
inline double cox_de_boor(const std::vector<double>& knots, std::size_t i, int order, double t) {
  if (order == 1) {
    const double last = knots.back();
    if (t == last) {
      // the last non-degenerate interval owns the right end point
      std::size_t k = knots.size() - 1;
      while (k > 0 && knots[k - 1] == last) --k;
      return i + 1 == k ? 1.0 : 0.0;
    }
    return knots[i] <= t && t < knots[i + 1] ? 1.0 : 0.0;
  }
  double v = 0.0;
  const double d1 = knots[i + static_cast<std::size_t>(order) - 1] - knots[i];
  const double d2 = knots[i + static_cast<std::size_t>(order)] - knots[i + 1];
  if (d1 > 0) v += (t - knots[i]) / d1 * cox_de_boor(knots, i, order - 1, t);
  if (d2 > 0)
    v += (knots[i + static_cast<std::size_t>(order)] - t) / d2 *
         cox_de_boor(knots, i + 1, order - 1, t);
  return v;
}

// conformal p-values by counting
inline double p_count(const std::vector<double>& calib, double r) {
  std::size_t ge = 0;
  for (double c : calib) ge += c >= r;
  return (static_cast<double>(ge) + 1.0) / static_cast<double>(calib.size() + 1);
}

inline double p_count_smoothed(const std::vector<double>& calib, double r, double tau) {
  std::size_t gt = 0, eq = 0;
  for (double c : calib) {
    gt += c > r;
    eq += c == r;
  }
  return (static_cast<double>(gt) + tau * (static_cast<double>(eq) + 1.0)) /
         static_cast<double>(calib.size() + 1);
}

}  // namespace oracle
