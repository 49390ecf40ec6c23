#include "iuq/fda_align.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "iuq/errors.hpp"

namespace iuq {

namespace {

void require_same_grid(const TimeGrid& a, const TimeGrid& b, const char* where) {
  if (!(a == b)) throw ArgumentError(std::string(where) + ": grid mismatch");
}

std::vector<double> derivative(const std::vector<double>& f, double h) {
  const std::size_t n = f.size();
  std::vector<double> d(n);
  for (std::size_t i = 1; i + 1 < n; ++i) d[i] = (f[i + 1] - f[i - 1]) / (2.0 * h);
  d[0] = (-3.0 * f[0] + 4.0 * f[1] - f[2]) / (2.0 * h);
  d[n - 1] = (3.0 * f[n - 1] - 4.0 * f[n - 2] + f[n - 3]) / (2.0 * h);
  return d;
}

// Fourth-order differences: five-point central in the interior, one-sided
// five-point stencils at the two nodes nearest each end.
std::vector<double> derivative4(const std::vector<double>& f, double h) {
  const std::size_t n = f.size();
  if (n < 5) return derivative(f, h);
  std::vector<double> d(n);
  for (std::size_t i = 2; i + 2 < n; ++i) d[i] = (f[i - 2] - 8.0 * f[i - 1] + 8.0 * f[i + 1] - f[i + 2]) / (12.0 * h);
  d[0] = (-25.0 * f[0] + 48.0 * f[1] - 36.0 * f[2] + 16.0 * f[3] - 3.0 * f[4]) / (12.0 * h);
  d[1] = (-3.0 * f[0] - 10.0 * f[1] + 18.0 * f[2] - 6.0 * f[3] + f[4]) / (12.0 * h);
  d[n - 1] = (25.0 * f[n - 1] - 48.0 * f[n - 2] + 36.0 * f[n - 3] - 16.0 * f[n - 4] + 3.0 * f[n - 5]) / (12.0 * h);
  d[n - 2] = (3.0 * f[n - 1] + 10.0 * f[n - 2] - 18.0 * f[n - 3] + 6.0 * f[n - 4] - f[n - 5]) / (12.0 * h);
  return d;
}

double signed_sqrt(double x) { return x >= 0.0 ? std::sqrt(x) : -std::sqrt(-x); }

double trapezoid_sq(const std::vector<double>& v, double h) {
  double acc = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    const double w = (i == 0 || i + 1 == v.size()) ? 0.5 : 1.0;
    acc += w * v[i] * v[i];
  }
  return acc * h;
}

struct Step {
  int a;  // template cells
  int b;  // curve cells
  double slope;
  double sqrt_slope;
  std::vector<int> offset;  // floor(m * b / a)
  std::vector<double> frac;
};

std::vector<Step> make_steps(int max_step) {
  std::vector<Step> steps;
  // (1, 1) first so exact ties resolve to the diagonal.
  for (int a = 1; a <= max_step; ++a) {
    for (int b = 1; b <= max_step; ++b) {
      if (std::gcd(a, b) != 1) continue;
      Step s{a, b, static_cast<double>(b) / a, std::sqrt(static_cast<double>(b) / a), {}, {}};
      for (int m = 0; m <= a; ++m) {
        const int num = m * b;
        s.offset.push_back(num / a);
        s.frac.push_back(static_cast<double>(num % a) / a);
      }
      steps.push_back(std::move(s));
    }
  }
  return steps;
}

std::vector<double> sample_on(const SrsfCurve& q, const std::vector<double>& times) {
  std::vector<double> out(times.size());
  for (std::size_t i = 0; i < times.size(); ++i) {
    out[i] = numeric::interp_uniform(q.grid.t_start(), q.grid.spacing(), q.q, times[i]);
  }
  return out;
}

}  // namespace

WarpingFunction WarpingFunction::identity(const TimeGrid& grid) { return {grid, grid.times()}; }

bool WarpingFunction::satisfies_invariants(double tolerance) const {
  if (gamma.size() != grid.size()) return false;
  const double scale = grid.t_end() - grid.t_start();
  if (std::abs(gamma.front() - grid.t_start()) > tolerance * scale) return false;
  if (std::abs(gamma.back() - grid.t_end()) > tolerance * scale) return false;
  for (std::size_t i = 0; i < gamma.size(); ++i) {
    if (!std::isfinite(gamma[i])) return false;
    if (gamma[i] < grid.t_start() - tolerance * scale) return false;
    if (gamma[i] > grid.t_end() + tolerance * scale) return false;
    if (i > 0 && gamma[i] < gamma[i - 1]) return false;
  }
  return true;
}

bool WarpingFunction::strictly_increasing() const {
  for (std::size_t i = 1; i < gamma.size(); ++i) {
    if (!(gamma[i] > gamma[i - 1])) return false;
  }
  return true;
}

SrsfCurve srsf(const TransientCurve& f) {
  if (f.size() < 3) throw ArgumentError("srsf: need at least 3 grid points");
  const auto d = derivative4(f.values, f.grid.spacing());
  std::vector<double> q(d.size());
  std::transform(d.begin(), d.end(), q.begin(), signed_sqrt);
  return {f.grid, std::move(q)};
}

TransientCurve srsf_to_curve(const SrsfCurve& q, double f0) {
  const double h = q.grid.spacing();
  const std::size_t n = q.q.size();
  std::vector<double> v(n);
  for (std::size_t i = 0; i < n; ++i) v[i] = q.q[i] * std::abs(q.q[i]);
  // Cubic-interpolation quadrature per cell; trapezoid when too short.
  std::vector<double> f(n);
  f[0] = f0;
  for (std::size_t i = 1; i < n; ++i) {
    double cell;
    if (n < 4) {
      cell = 0.5 * (v[i - 1] + v[i]);
    } else if (i == 1) {
      cell = (9.0 * v[0] + 19.0 * v[1] - 5.0 * v[2] + v[3]) / 24.0;
    } else if (i + 1 == n) {
      cell = (9.0 * v[i] + 19.0 * v[i - 1] - 5.0 * v[i - 2] + v[i - 3]) / 24.0;
    } else {
      cell = (-v[i - 2] + 13.0 * v[i - 1] + 13.0 * v[i] - v[i + 1]) / 24.0;
    }
    f[i] = f[i - 1] + h * cell;
  }
  return {q.grid, std::move(f)};
}

TransientCurve warp_curve(const TransientCurve& f, const WarpingFunction& gamma) {
  require_same_grid(f.grid, gamma.grid, "warp_curve");
  std::vector<double> out(f.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = f.at(gamma.gamma[i]);
  return {f.grid, std::move(out)};
}

SrsfCurve warp_srsf(const SrsfCurve& q, const WarpingFunction& gamma) {
  require_same_grid(q.grid, gamma.grid, "warp_srsf");
  const auto dgamma = derivative(gamma.gamma, gamma.grid.spacing());
  std::vector<double> out(q.q.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double v = numeric::interp_uniform(q.grid.t_start(), q.grid.spacing(), q.q, gamma.gamma[i]);
    out[i] = v * std::sqrt(std::max(dgamma[i], 0.0));
  }
  return {q.grid, std::move(out)};
}

WarpingFunction invert_warping(const WarpingFunction& gamma) {
  const auto times = gamma.grid.times();
  WarpingFunction inv{gamma.grid, std::vector<double>(times.size())};
  for (std::size_t i = 0; i < times.size(); ++i) {
    inv.gamma[i] = numeric::interp_linear(gamma.gamma, times, times[i]);
  }
  inv.gamma.front() = gamma.grid.t_start();
  inv.gamma.back() = gamma.grid.t_end();
  return inv;
}

WarpingFunction compose(const WarpingFunction& outer, const WarpingFunction& inner) {
  require_same_grid(outer.grid, inner.grid, "compose");
  WarpingFunction out{inner.grid, std::vector<double>(inner.gamma.size())};
  for (std::size_t i = 0; i < out.gamma.size(); ++i) {
    out.gamma[i] = numeric::interp_uniform(outer.grid.t_start(), outer.grid.spacing(), outer.gamma,
                                           inner.gamma[i]);
  }
  return out;
}

double srsf_norm(const SrsfCurve& q) { return std::sqrt(trapezoid_sq(q.q, q.grid.spacing())); }

double warp_cost(const SrsfCurve& q1, const SrsfCurve& q2, const WarpingFunction& gamma) {
  require_same_grid(q1.grid, q2.grid, "warp_cost");
  const SrsfCurve moved = warp_srsf(q2, gamma);
  std::vector<double> diff(q1.q.size());
  for (std::size_t i = 0; i < diff.size(); ++i) diff[i] = q1.q[i] - moved.q[i];
  return std::sqrt(trapezoid_sq(diff, q1.grid.spacing()));
}

namespace {

struct LatticePath {
  std::vector<int> template_nodes;
  std::vector<int> curve_nodes;
};

// Minimum-energy monotone path from (0, 0) to (m-1, m-1). Row i may only use
// curve nodes in [band_lo[i], band_hi[i]]; storage covers the band only.
LatticePath dp_path(const std::vector<double>& a_vals, const std::vector<double>& b_vals, double h,
                    double lambda, const std::vector<Step>& steps, int max_step,
                    std::vector<int> band_lo, std::vector<int> band_hi) {
  const int m_nodes = static_cast<int>(a_vals.size());
  const int last = m_nodes - 1;
  const double inf = std::numeric_limits<double>::infinity();
  band_lo[0] = 0;
  band_hi[0] = 0;
  std::vector<std::size_t> row_start(a_vals.size() + 1, 0);
  for (int i = 0; i < m_nodes; ++i) {
    const auto r = static_cast<std::size_t>(i);
    band_lo[r] = std::clamp(band_lo[r], 0, last);
    band_hi[r] = std::clamp(band_hi[r], band_lo[r], last);
    row_start[r + 1] = row_start[r] + static_cast<std::size_t>(band_hi[r] - band_lo[r] + 1);
  }
  std::vector<double> energy(row_start.back(), inf);
  std::vector<std::int16_t> choice(row_start.back(), -1);
  auto slot = [&](int i, int j) -> std::ptrdiff_t {
    const auto r = static_cast<std::size_t>(i);
    if (j < band_lo[r] || j > band_hi[r]) return -1;
    return static_cast<std::ptrdiff_t>(row_start[r] + static_cast<std::size_t>(j - band_lo[r]));
  };
  energy[0] = 0.0;

  for (int i = 1; i < m_nodes; ++i) {
    const int j_lo = std::max(1, band_lo[static_cast<std::size_t>(i)]);
    const int j_hi = band_hi[static_cast<std::size_t>(i)];
    for (int j = j_lo; j <= j_hi; ++j) {
      // Nodes outside the slope cone cannot lie on an admissible path.
      if (j * max_step < i || j > i * max_step) continue;
      if ((last - j) * max_step < (last - i) || (last - j) > (last - i) * max_step) continue;
      double best = inf;
      int best_step = -1;
      for (std::size_t s = 0; s < steps.size(); ++s) {
        const Step& st = steps[s];
        const int k = i - st.a;
        const int l = j - st.b;
        if (k < 0 || l < 0) continue;
        const auto at = slot(k, l);
        if (at < 0) continue;
        const double prev = energy[static_cast<std::size_t>(at)];
        if (prev == inf) continue;
        double seg = 0.0;
        for (int m = 0; m <= st.a; ++m) {
          const int lo = l + st.offset[static_cast<std::size_t>(m)];
          const double fr = st.frac[static_cast<std::size_t>(m)];
          double bv = b_vals[static_cast<std::size_t>(lo)];
          if (fr > 0.0) bv += fr * (b_vals[static_cast<std::size_t>(lo + 1)] - bv);
          const double e = a_vals[static_cast<std::size_t>(k + m)] - st.sqrt_slope * bv;
          seg += (m == 0 || m == st.a ? 0.5 : 1.0) * e * e;
        }
        const double pen = (1.0 - st.sqrt_slope) * (1.0 - st.sqrt_slope) * st.a;
        const double total = prev + h * (seg + lambda * pen);
        if (total < best) {
          best = total;
          best_step = static_cast<int>(s);
        }
      }
      const auto here = static_cast<std::size_t>(slot(i, j));
      energy[here] = best;
      choice[here] = static_cast<std::int16_t>(best_step);
    }
  }
  const auto end = slot(last, last);
  if (end < 0 || choice[static_cast<std::size_t>(end)] < 0) throw NumericError("optimal_warp: no admissible path");

  LatticePath path{{last}, {last}};
  int i = last;
  int j = last;
  while (i > 0 || j > 0) {
    const Step& st = steps[static_cast<std::size_t>(choice[static_cast<std::size_t>(slot(i, j))])];
    i -= st.a;
    j -= st.b;
    path.template_nodes.push_back(i);
    path.curve_nodes.push_back(j);
  }
  std::reverse(path.template_nodes.begin(), path.template_nodes.end());
  std::reverse(path.curve_nodes.begin(), path.curve_nodes.end());
  return path;
}

struct LatticeProblem {
  std::vector<double> times;
  std::vector<double> a_vals;
  std::vector<double> b_vals;
  double h;
};

LatticeProblem make_problem(const SrsfCurve& q1, const SrsfCurve& q2, std::size_t nodes) {
  const TimeGrid lattice(q1.grid.t_start(), q1.grid.t_end(), nodes);
  LatticeProblem p{lattice.times(), {}, {}, lattice.spacing()};
  p.a_vals = sample_on(q1, p.times);
  p.b_vals = sample_on(q2, p.times);
  return p;
}

std::vector<double> path_times(const std::vector<int>& nodes, const std::vector<double>& times) {
  std::vector<double> out(nodes.size());
  for (std::size_t k = 0; k < nodes.size(); ++k) out[k] = times[static_cast<std::size_t>(nodes[k])];
  return out;
}

}  // namespace

WarpingFunction optimal_warp(const SrsfCurve& q1, const SrsfCurve& q2, const WarpOptions& options) {
  require_same_grid(q1.grid, q2.grid, "optimal_warp");
  if (options.max_step < 1) throw ArgumentError("optimal_warp: max_step must be >= 1");
  if (options.subgrid_factor < 1) throw ArgumentError("optimal_warp: subgrid_factor must be >= 1");
  const TimeGrid& grid = q1.grid;
  const bool coarse = grid.size() > options.max_full_lattice;
  const auto steps = make_steps(options.max_step);

  // The penalty weight is tied to the full-resolution signal so both passes agree.
  double mean_sq = 0.0;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    mean_sq += 0.5 * (q1.q[i] * q1.q[i] + q2.q[i] * q2.q[i]);
  }
  mean_sq /= static_cast<double>(grid.size());
  const double lambda = options.penalty * std::max(mean_sq, 1e-12);

  const std::size_t first_nodes = coarse ? options.coarse_lattice_nodes : grid.size();
  const LatticeProblem first = make_problem(q1, q2, first_nodes);
  const int first_last = static_cast<int>(first_nodes) - 1;
  LatticePath path = dp_path(first.a_vals, first.b_vals, first.h, lambda, steps, options.max_step,
                             std::vector<int>(first_nodes, 0),
                             std::vector<int>(first_nodes, first_last));
  std::vector<double> path_template = path_times(path.template_nodes, first.times);
  std::vector<double> path_curve = path_times(path.curve_nodes, first.times);

  // Later passes search a finer lattice within a band around the previous path.
  const auto refine = [&](std::size_t nodes, int band) {
    const LatticeProblem fine = make_problem(q1, q2, nodes);
    std::vector<int> lo(nodes);
    std::vector<int> hi(nodes);
    for (std::size_t i = 0; i < nodes; ++i) {
      const double centre =
          (numeric::interp_linear(path_template, path_curve, fine.times[i]) - grid.t_start()) / fine.h;
      lo[i] = static_cast<int>(std::floor(centre)) - band;
      hi[i] = static_cast<int>(std::ceil(centre)) + band;
    }
    path = dp_path(fine.a_vals, fine.b_vals, fine.h, lambda, steps, options.max_step, lo, hi);
    path_template = path_times(path.template_nodes, fine.times);
    path_curve = path_times(path.curve_nodes, fine.times);
  };
  if (coarse && options.refine_band > 0) refine(grid.size(), static_cast<int>(options.refine_band));
  if (options.subgrid_factor > 1) {
    const int f = options.subgrid_factor;
    refine((grid.size() - 1) * static_cast<std::size_t>(f) + 1, 2 * f);
  }

  const auto times = grid.times();
  WarpingFunction gamma{grid, std::vector<double>(times.size())};
  for (std::size_t k = 0; k < times.size(); ++k) {
    gamma.gamma[k] = numeric::interp_linear(path_template, path_curve, times[k]);
  }
  gamma.gamma.front() = grid.t_start();
  gamma.gamma.back() = grid.t_end();
  return gamma;
}

AlignedEnsemble align_ensemble(const std::vector<TransientCurve>& curves,
                               const AlignOptions& options) {
  if (curves.size() < 2) throw ArgumentError("align_ensemble: need at least 2 curves");
  if (options.iterations < 1) throw ArgumentError("align_ensemble: iterations must be >= 1");
  const TimeGrid grid = curves.front().grid;
  for (const auto& c : curves) require_same_grid(grid, c.grid, "align_ensemble");

  const std::size_t n = curves.size();
  const std::size_t p = grid.size();
  std::vector<SrsfCurve> qs;
  qs.reserve(n);
  for (const auto& c : curves) qs.push_back(srsf(c));

  // Start from the curve whose SRSF is closest to the mean SRSF.
  std::vector<double> q_bar(p, 0.0);
  for (const auto& q : qs) {
    for (std::size_t k = 0; k < p; ++k) q_bar[k] += q.q[k] / static_cast<double>(n);
  }
  std::size_t start = 0;
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < n; ++i) {
    double d = 0.0;
    for (std::size_t k = 0; k < p; ++k) d += (qs[i].q[k] - q_bar[k]) * (qs[i].q[k] - q_bar[k]);
    if (d < best) {
      best = d;
      start = i;
    }
  }
  SrsfCurve tmpl = qs[start];

  std::vector<WarpingFunction> warps(n, WarpingFunction::identity(grid));
  for (int it = 0; it < options.iterations; ++it) {
    for (std::size_t i = 0; i < n; ++i) warps[i] = optimal_warp(tmpl, qs[i], options.warp);
    if (it + 1 == options.iterations) break;

    // Re-estimate the template from the warped SRSFs, re-centred on the mean warp.
    std::vector<double> q_mean(p, 0.0);
    std::vector<double> gamma_mean(p, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      const SrsfCurve qw = srsf(warp_curve(curves[i], warps[i]));
      for (std::size_t k = 0; k < p; ++k) {
        q_mean[k] += qw.q[k] / static_cast<double>(n);
        gamma_mean[k] += warps[i].gamma[k] / static_cast<double>(n);
      }
    }
    const WarpingFunction centre = invert_warping(WarpingFunction{grid, gamma_mean});
    tmpl = warp_srsf(SrsfCurve{grid, q_mean}, centre);
  }

  std::vector<TransientCurve> warped;
  warped.reserve(n);
  for (std::size_t i = 0; i < n; ++i) warped.push_back(warp_curve(curves[i], warps[i]));
  return {std::move(warped), std::move(warps), std::move(tmpl)};
}

WarpingFunction align_to_template(const TransientCurve& curve, const SrsfCurve& template_srsf,
                                  const WarpOptions& options, double smoothing_seconds) {
  require_same_grid(curve.grid, template_srsf.grid, "align_to_template");
  if (smoothing_seconds > 0.0) {
    // The template gets the same kernel so both sides share the blurred shape.
    const double width = smoothing_seconds / curve.grid.spacing();
    const TransientCurve template_curve = srsf_to_curve(template_srsf, 0.0);
    const SrsfCurve smoothed_template =
        srsf(TransientCurve(curve.grid, numeric::gaussian_smooth(template_curve.values, width)));
    const auto smooth = numeric::gaussian_smooth(curve.values, width);
    return optimal_warp(smoothed_template, srsf(TransientCurve(curve.grid, smooth)), options);
  }
  return optimal_warp(template_srsf, srsf(curve), options);
}

WarpingFunction repair_warping(const WarpingFunction& gamma, const RepairOptions& options) {
  const TimeGrid& grid = gamma.grid;
  if (gamma.gamma.size() != grid.size()) throw ArgumentError("repair_warping: size mismatch");
  for (double g : gamma.gamma) {
    if (!std::isfinite(g)) throw NumericError("repair_warping: non-finite warp value");
  }
  std::vector<double> g = numeric::isotonic_projection(gamma.gamma);
  bool modified = false;
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (g[i] != gamma.gamma[i]) {
      modified = true;
      break;
    }
  }
  const double lo = g.front();
  const double hi = g.back();
  if (!(hi - lo > 1e-12 * (grid.t_end() - grid.t_start()))) {
    throw NumericError("repair_warping: warp has no increase and cannot be repaired");
  }
  const double scale = (grid.t_end() - grid.t_start()) / (hi - lo);
  for (double& v : g) v = grid.t_start() + (v - lo) * scale;

  WarpingFunction out{grid, std::move(g)};
  if (modified || !out.strictly_increasing()) {
    out.gamma = numeric::moving_average(out.gamma, options.smoothing_width);
  }
  if (!out.strictly_increasing()) {
    const auto times = grid.times();
    for (std::size_t i = 0; i < times.size(); ++i) {
      out.gamma[i] = (1.0 - options.identity_blend) * out.gamma[i] + options.identity_blend * times[i];
    }
  }
  out.gamma.front() = grid.t_start();
  out.gamma.back() = grid.t_end();
  if (!out.strictly_increasing()) throw NumericError("repair_warping: repair failed");
  return out;
}

TransientCurve reconstruct_curve(const TransientCurve& warped, const WarpingFunction& gamma) {
  require_same_grid(warped.grid, gamma.grid, "reconstruct_curve");
  const WarpingFunction valid =
      (gamma.satisfies_invariants() && gamma.strictly_increasing()) ? gamma : repair_warping(gamma);
  return warp_curve(warped, invert_warping(valid));
}

LandmarkSpread landmark_spread(const std::vector<TransientCurve>& curves) {
  if (curves.size() < 2) throw ArgumentError("landmark_spread: need at least 2 curves");
  std::vector<double> peaks;
  std::vector<double> quenches;
  for (const auto& c : curves) {
    peaks.push_back(argmax_time(c));
    quenches.push_back(steepest_descent_time(c));
  }
  return {numeric::stddev(peaks), numeric::stddev(quenches)};
}

}  // namespace iuq
