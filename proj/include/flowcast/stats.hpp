#pragma once

#include <cmath>
#include <limits>
#include <numeric>
#include <span>

#include <boost/math/distributions/students_t.hpp>

#include "flowcast/errors.hpp"

namespace flowcast {

inline double mean(std::span<const double> xs) {
  if (xs.empty()) return std::numeric_limits<double>::quiet_NaN();
  return std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
}

// Sample standard deviation (n - 1 denominator); 0 for fewer than two values.
inline double sample_stdev(std::span<const double> xs) {
  if (xs.size() < 2) return 0.0;
  const double m = mean(xs);
  double ss = 0;
  for (double x : xs) ss += (x - m) * (x - m);
  return std::sqrt(ss / static_cast<double>(xs.size() - 1));
}

struct TTestResult {
  double t = 0;
  double p = 0.5;
  double degrees_of_freedom = 0;
};

// Pooled-variance two-sample t-test. The one-tailed p-value is for the
// alternative mean(a) > mean(b).
inline TTestResult ttest_one_tailed(std::span<const double> a, std::span<const double> b) {
  if (a.size() < 2 || b.size() < 2) throw Error("ttest_one_tailed: each sample needs at least two values");
  const double na = static_cast<double>(a.size());
  const double nb = static_cast<double>(b.size());
  const double ma = mean(a), mb = mean(b);
  double ssa = 0, ssb = 0;
  for (double x : a) ssa += (x - ma) * (x - ma);
  for (double x : b) ssb += (x - mb) * (x - mb);
  TTestResult r;
  r.degrees_of_freedom = na + nb - 2;
  const double pooled = (ssa + ssb) / r.degrees_of_freedom;
  const double diff = ma - mb;
  const double se = std::sqrt(pooled * (1 / na + 1 / nb));
  if (se == 0) {
    if (diff == 0) return {0.0, 0.5, r.degrees_of_freedom};
    r.t = diff > 0 ? std::numeric_limits<double>::infinity() : -std::numeric_limits<double>::infinity();
    r.p = diff > 0 ? 0.0 : 1.0;
    return r;
  }
  r.t = diff / se;
  boost::math::students_t dist(r.degrees_of_freedom);
  r.p = boost::math::cdf(boost::math::complement(dist, r.t));
  return r;
}

}  // namespace flowcast
