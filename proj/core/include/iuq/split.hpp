#pragma once

#include <cstdint>
#include <vector>

namespace iuq {

struct SplitProportions {
  double train = 0.70;
  double validation = 0.15;
  double test = 0.15;
};

/// Disjoint index sets covering 0..n-1.
struct TrainTestSplit {
  std::vector<std::size_t> train;
  std::vector<std::size_t> validation;
  std::vector<std::size_t> test;
};

/// Seeded random partition. Validation and test counts are rounded to the
/// nearest integer; the training set takes the remainder.
TrainTestSplit split_data(std::size_t n, const SplitProportions& proportions, std::uint64_t seed);

}  // namespace iuq
