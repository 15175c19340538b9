#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>

namespace heterodyn {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// Deterministic RNG wrapper. All randomness in the library goes through this
// so that seeded runs are reproducible bit-for-bit: mt19937_64 raw output is
// standardized, and doubles are derived by the fixed 53-bit conversion below
// instead of std::uniform_real_distribution (whose algorithm is
// implementation-defined).
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : eng_(seed) {}

  double u01() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * u01(); }

  // Uniform integer in [0, n).
  int below(int n) {
    if (n <= 0) throw std::invalid_argument("Rng::below: n must be positive");
    return static_cast<int>(eng_() % static_cast<std::uint64_t>(n));
  }

  std::uint64_t raw() { return eng_(); }

 private:
  std::mt19937_64 eng_;
};

// Uniform draw from the probability simplex via sorted spacings.
inline Vector random_simplex_row(Rng& rng, int n_strategies) {
  Vector cuts(n_strategies + 1);
  cuts(0) = 0.0;
  cuts(n_strategies) = 1.0;
  for (int i = 1; i < n_strategies; ++i) cuts(i) = rng.u01();
  std::sort(cuts.data() + 1, cuts.data() + n_strategies);
  Vector row(n_strategies);
  for (int s = 0; s < n_strategies; ++s) row(s) = cuts(s + 1) - cuts(s);
  return row;
}

inline bool all_finite(const Matrix& m) { return m.allFinite(); }

}  // namespace heterodyn
