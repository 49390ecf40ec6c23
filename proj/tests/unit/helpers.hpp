#pragma once

#include <cmath>
#include <functional>
#include <vector>

#include "iuq/reflood_sim.hpp"

namespace iuq::test {

inline TransientCurve make_curve(const TimeGrid& grid, const std::function<double(double)>& f) {
  std::vector<double> v(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) v[i] = f(grid.time(i));
  return {grid, std::move(v)};
}

inline double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

inline std::vector<TransientCurve> simulate_all(const std::vector<CalibrationVector>& design,
                                                const TimeGrid& grid) {
  std::vector<TransientCurve> out;
  for (const auto& th : design) out.push_back(simulate_pct(th, grid));
  return out;
}

}  // namespace iuq::test
