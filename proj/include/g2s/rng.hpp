#pragma once

#include <cstdint>
#include <vector>

namespace g2s {

/// Seedable generator with platform-independent distributions.
///
/// Distributions from <random> are implementation-defined, which would make
/// datasets and checkpoints differ between standard libraries. The engine is
/// xoshiro256** seeded through splitmix64, and the derived distributions are
/// defined here.
class Rng {
public:
  explicit Rng(std::uint64_t seed = 0);

  std::uint64_t next_u64();
  /// Uniform in [0, 1).
  double uniform();
  double uniform(double lo, double hi);
  /// Uniform integer in [0, n). n must be > 0.
  std::uint64_t below(std::uint64_t n);
  int uniform_int(int lo, int hi_inclusive);
  /// Standard normal via Box-Muller (caches the second variate).
  double normal();
  std::vector<double> normals(std::size_t n);

  template <class Seq>
  void shuffle(Seq& s) {
    for (std::size_t i = s.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(below(i));
      using std::swap;
      swap(s[i - 1], s[j]);
    }
  }

private:
  std::uint64_t s_[4];
  bool has_spare_ = false;
  double spare_ = 0.0;
};

/// splitmix64 mixing step; used to derive independent sub-seeds.
std::uint64_t mix_seed(std::uint64_t x);
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream);

}  // namespace g2s
