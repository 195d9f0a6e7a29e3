#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "ergokit/model.hpp"

namespace ergokit {

/// Monte Carlo point estimate with its standard error. Scalars are stored as
/// length-1 vectors.
struct EstimatorResult {
  Vec value;
  Vec std_error;
  long samples = 0;
  std::uint64_t seed = 0;

  double scalar() const { return value(0); }
  double scalar_se() const { return std_error(0); }
};

/// Sample mean and standard error of per-replication vectors. Deviations are
/// taken from the first sample so a constant sample has exactly zero error and
/// its mean is reproduced bit-for-bit.
inline EstimatorResult summarize(const std::vector<Vec>& samples, std::uint64_t seed) {
  require(!samples.empty(), "summarize: no samples");
  const auto n = static_cast<double>(samples.size());
  const Vec& anchor = samples.front();
  Vec sum = Vec::Zero(anchor.size());
  Vec sumsq = Vec::Zero(anchor.size());
  for (const Vec& s : samples) {
    const Vec d = s - anchor;
    sum += d;
    sumsq += d.cwiseProduct(d);
  }
  EstimatorResult r;
  const Vec mean_dev = sum / n;
  r.value = anchor + mean_dev;
  if (samples.size() > 1) {
    const Vec var = ((sumsq - n * mean_dev.cwiseProduct(mean_dev)) / (n - 1.0)).cwiseMax(0.0);
    r.std_error = (var / n).cwiseSqrt();
  } else {
    r.std_error = Vec::Zero(anchor.size());
  }
  r.samples = static_cast<long>(samples.size());
  r.seed = seed;
  return r;
}

inline EstimatorResult summarize(const std::vector<double>& samples, std::uint64_t seed) {
  std::vector<Vec> v;
  v.reserve(samples.size());
  for (double s : samples) v.push_back(Vec::Constant(1, s));
  return summarize(v, seed);
}

}  // namespace ergokit
