#include "iuq/split.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "iuq/errors.hpp"

namespace iuq {

TrainTestSplit split_data(std::size_t n, const SplitProportions& p, std::uint64_t seed) {
  if (n < 3) throw ArgumentError("split_data: need at least 3 samples");
  if (!(p.train > 0.0) || p.validation < 0.0 || p.test < 0.0) {
    throw ArgumentError("split_data: proportions must be non-negative with a positive train share");
  }
  if (std::abs(p.train + p.validation + p.test - 1.0) > 1e-9) {
    throw ArgumentError("split_data: proportions must sum to 1");
  }
  const auto n_val = static_cast<std::size_t>(std::llround(p.validation * static_cast<double>(n)));
  const auto n_test = static_cast<std::size_t>(std::llround(p.test * static_cast<double>(n)));
  if (n_val + n_test >= n) throw ArgumentError("split_data: training set would be empty");

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);

  TrainTestSplit s;
  const auto val_end = order.begin() + static_cast<std::ptrdiff_t>(n_val);
  const auto test_end = val_end + static_cast<std::ptrdiff_t>(n_test);
  s.validation.assign(order.begin(), val_end);
  s.test.assign(val_end, test_end);
  s.train.assign(test_end, order.end());
  std::sort(s.train.begin(), s.train.end());
  std::sort(s.validation.begin(), s.validation.end());
  std::sort(s.test.begin(), s.test.end());
  return s;
}

}  // namespace iuq
