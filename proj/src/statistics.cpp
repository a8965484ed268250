#include <algorithm>
#include <boost/math/distributions/students_t.hpp>
#include <cmath>
#include <limits>
#include <numeric>

#include "affect_router/analysis.hpp"
#include "affect_router/error.hpp"

namespace affect_router {

std::string_view to_string(MwuMethod method) noexcept {
  switch (method) {
    case MwuMethod::automatic: return "automatic";
    case MwuMethod::exact: return "exact";
    case MwuMethod::normal_approx: return "normal_approx";
  }
  return "automatic";
}

std::vector<double> mwu_null_counts(std::size_t n1, std::size_t n2) {
  // counts[i][j][u]: arrangements of i x-values and j y-values with statistic u.
  // Adding the largest element: if it is an x it beats all j y-values.
  std::vector<std::vector<std::vector<double>>> counts(n1 + 1, std::vector<std::vector<double>>(n2 + 1));
  for (std::size_t i = 0; i <= n1; ++i) {
    for (std::size_t j = 0; j <= n2; ++j) {
      auto& cell = counts[i][j];
      cell.assign(i * j + 1, 0.0);
      if (i == 0 || j == 0) {
        cell[0] = 1.0;
        continue;
      }
      const auto& without_x = counts[i - 1][j];
      const auto& without_y = counts[i][j - 1];
      for (std::size_t u = 0; u < without_x.size(); ++u) cell[u + j] += without_x[u];
      for (std::size_t u = 0; u < without_y.size(); ++u) cell[u] += without_y[u];
    }
  }
  return counts[n1][n2];
}

MwuResult mann_whitney_u(std::span<const double> x, std::span<const double> y, MwuMethod method) {
  if (x.empty() || y.empty()) throw ValidationError("mann_whitney_u: empty sample");
  MwuResult result;
  result.n1 = x.size();
  result.n2 = y.size();
  double u = 0.0;
  for (double xi : x) {
    for (double yj : y) {
      if (xi > yj) {
        u += 1.0;
      } else if (xi == yj) {
        u += 0.5;
      }
    }
  }
  result.u_statistic = u;

  std::vector<double> pooled(x.begin(), x.end());
  pooled.insert(pooled.end(), y.begin(), y.end());
  std::sort(pooled.begin(), pooled.end());
  double tie_term = 0.0;
  bool ties = false;
  for (std::size_t i = 0; i < pooled.size();) {
    std::size_t j = i;
    while (j < pooled.size() && pooled[j] == pooled[i]) ++j;
    const double t = static_cast<double>(j - i);
    if (t > 1.0) ties = true;
    tie_term += t * t * t - t;
    i = j;
  }

  const std::size_t n = x.size() + y.size();
  if (method == MwuMethod::automatic) method = (n <= 16 && !ties) ? MwuMethod::exact : MwuMethod::normal_approx;
  result.method = method;
  constexpr double kMinP = std::numeric_limits<double>::min();

  if (method == MwuMethod::exact) {
    if (ties) throw ValidationError("mann_whitney_u: exact method requires tie-free samples");
    const auto counts = mwu_null_counts(x.size(), y.size());
    const double total = std::accumulate(counts.begin(), counts.end(), 0.0);
    const auto k = static_cast<std::size_t>(u);
    double lower = 0.0;
    double upper = 0.0;
    for (std::size_t i = 0; i < counts.size(); ++i) {
      if (i <= k) lower += counts[i];
      if (i >= k) upper += counts[i];
    }
    result.p_value = std::clamp(2.0 * std::min(lower, upper) / total, kMinP, 1.0);
    return result;
  }

  const double n1 = static_cast<double>(x.size());
  const double n2 = static_cast<double>(y.size());
  const double nn = static_cast<double>(n);
  const double mean = n1 * n2 / 2.0;
  const double variance = n1 * n2 / 12.0 * ((nn + 1.0) - tie_term / (nn * (nn - 1.0)));
  if (!(variance > 0.0)) {
    result.p_value = 1.0;
    return result;
  }
  const double z = std::max(0.0, std::abs(u - mean) - 0.5) / std::sqrt(variance);
  result.p_value = std::clamp(std::erfc(z / std::sqrt(2.0)), kMinP, 1.0);
  return result;
}

RegressionResult ols_fit(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw ValidationError("ols_fit: x and y differ in length");
  if (x.size() < 2) throw ValidationError("ols_fit: need at least 2 points");
  const double n = static_cast<double>(x.size());
  const double mean_x = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double mean_y = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxx = 0.0;
  double sxy = 0.0;
  double tss = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = x[i] - mean_x;
    const double dy = y[i] - mean_y;
    sxx += dx * dx;
    sxy += dx * dy;
    tss += dy * dy;
  }
  if (!(sxx > 0.0)) throw ValidationError("degenerate regressor");

  RegressionResult r;
  r.n = x.size();
  r.slope = sxy / sxx;
  r.intercept = mean_y - r.slope * mean_x;
  double rss = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double residual = y[i] - (r.intercept + r.slope * x[i]);
    rss += residual * residual;
  }
  r.r_squared = tss > 0.0 ? std::clamp(1.0 - rss / tss, 0.0, 1.0) : 0.0;
  constexpr double kParameters = 2.0;
  r.bic = n * std::log(rss / n) + kParameters * std::log(n);
  if (x.size() >= 3) {
    const double dof = n - 2.0;
    const double se = std::sqrt(rss / dof / sxx);
    if (se > 0.0) {
      const boost::math::students_t dist(dof);
      r.slope_p_value = 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(r.slope / se)));
    } else {
      r.slope_p_value = r.slope != 0.0 ? 0.0 : 1.0;
    }
  }
  return r;
}

}  // namespace affect_router
