// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "gdkm/numerics.hpp"

#include <cstdint>
#include <random>

namespace gdkm {

/// Independent random streams derived from one user seed. Each purpose gets
/// its own generator so that, e.g., changing the number of Monte-Carlo
/// samples never perturbs the generated graph.
///
/// Stream splitting rule: the generator for (seed, stream, index) is an
/// mt19937_64 seeded with splitmix64(splitmix64(seed ^ (stream << 56)) + index).
enum class Stream : std::uint64_t {
  Graph = 1,
  Features = 2,
  Init = 3,
  Inducing = 4,
  Split = 5,
  MonteCarlo = 6,
  Labels = 7,
};

std::uint64_t splitmix64(std::uint64_t x);

class Rng {
 public:
  Rng(std::uint64_t seed, Stream stream, std::uint64_t index = 0);

  double uniform();
  double normal();
  bool bernoulli(double p);
  /// Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n);
  Matrix normal_matrix(Index rows, Index cols);

  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
  std::uniform_real_distribution<double> uniform_{0.0, 1.0};
};

}  // namespace gdkm
