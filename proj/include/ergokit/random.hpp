#pragma once

#include <cstdint>
#include <random>

namespace ergokit {

namespace detail {
constexpr std::uint64_t splitmix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}
}  // namespace detail

/// Seeded source of uniform and Gaussian variates.
///
/// Every replication of a Monte Carlo estimator owns one stream obtained from
/// `RandomStream::substream(master_seed, rep_index)`, so results never depend
/// on how replications are distributed across workers.
class RandomStream {
public:
  explicit RandomStream(std::uint64_t seed) : engine_(detail::splitmix64(seed)) {}

  static RandomStream substream(std::uint64_t master_seed, std::uint64_t index) {
    return RandomStream(detail::splitmix64(master_seed) ^
                        detail::splitmix64(index + 0x632be59bd9b4e019ULL));
  }

  double normal() { return normal_(engine_); }
  double uniform(double lo, double hi) { return lo + (hi - lo) * unit_(engine_); }
  double unit() { return unit_(engine_); }

  std::mt19937_64& engine() { return engine_; }

private:
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
  std::uniform_real_distribution<double> unit_{0.0, 1.0};
};

}  // namespace ergokit
