#pragma once

#include <cstdint>
#include <random>

#include <Eigen/Core>

namespace kinflow {

std::uint64_t splitmix64(std::uint64_t x);

// Deterministic PRNG. The engine (mt19937_64) is fully specified by the
// standard; the output transforms below are coded explicitly instead of
// going through std distributions, whose algorithms are
// implementation-defined. Same seed => same stream, everywhere.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : seed_(seed), engine_(seed) {}

  std::uint64_t seed() const { return seed_; }

  std::uint64_t next_u64() { return engine_(); }

  // [0, 1), 53-bit resolution
  double uniform01() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double a, double b) { return a + (b - a) * uniform01(); }

  // [0, n), unbiased by rejection
  int uniform_int(int n);

  // standard normal via the Marsaglia polar method (sqrt/log only)
  double normal();

  Eigen::MatrixXd normal_matrix(Eigen::Index rows, Eigen::Index cols);
  Eigen::MatrixXd uniform_matrix(Eigen::Index rows, Eigen::Index cols, double a, double b);
  Eigen::VectorXd normal_vector(Eigen::Index n);
  Eigen::VectorXd uniform_vector(Eigen::Index n, double a, double b);

  // Independent child stream, e.g. one per dataset sample.
  Rng substream(std::uint64_t index) const {
    return Rng(splitmix64(splitmix64(seed_ + 0x9e3779b97f4a7c15ULL) ^ index));
  }

  // Deterministic Fisher-Yates (std::shuffle is implementation-defined).
  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (int i = static_cast<int>(v.size()) - 1; i > 0; --i) {
      std::swap(v[static_cast<std::size_t>(i)],
                v[static_cast<std::size_t>(uniform_int(i + 1))]);
    }
  }

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace kinflow
