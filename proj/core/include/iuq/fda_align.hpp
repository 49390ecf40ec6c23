#pragma once

// Elastic functional alignment with square-root slope functions (SRSF).
//
// A curve f is represented by q = sign(f') sqrt(|f'|). Warping f by a
// boundary-fixed monotone gamma acts on q as (q o gamma) sqrt(gamma'), which
// preserves the L2 norm, so the alignment cost ||q1 - (q2 o gamma) sqrt(gamma')||
// is a proper distance to minimise. The minimiser is found by dynamic
// programming over a lattice with bounded slopes.

#include <vector>

#include "iuq/reflood_sim.hpp"

namespace iuq {

struct SrsfCurve {
  TimeGrid grid;
  std::vector<double> q;
};

/// gamma maps (template) time to (curve) time. Invariants: gamma(t_start) =
/// t_start, gamma(t_end) = t_end, non-decreasing, values inside the window.
struct WarpingFunction {
  TimeGrid grid;
  std::vector<double> gamma;

  static WarpingFunction identity(const TimeGrid& grid);

  bool satisfies_invariants(double tolerance = 1e-9) const;
  bool strictly_increasing() const;
};

struct AlignedEnsemble {
  std::vector<TransientCurve> warped_curves;
  std::vector<WarpingFunction> warpings;
  SrsfCurve template_srsf;

  std::size_t size() const { return warped_curves.size(); }
  const TimeGrid& grid() const { return template_srsf.grid; }
};

/// Fourth-order finite differences (five-point stencils).
SrsfCurve srsf(const TransientCurve& f);

/// f(t) = f0 + integral of q|q| (cumulative fourth-order quadrature).
TransientCurve srsf_to_curve(const SrsfCurve& q, double f0);

/// f o gamma on the shared grid, linear interpolation.
TransientCurve warp_curve(const TransientCurve& f, const WarpingFunction& gamma);

/// Group action on SRSFs: (q o gamma) sqrt(gamma').
SrsfCurve warp_srsf(const SrsfCurve& q, const WarpingFunction& gamma);

/// Inverse by monotone linear interpolation; gamma must be non-decreasing.
WarpingFunction invert_warping(const WarpingFunction& gamma);

/// (outer o inner)(t) = outer(inner(t)).
WarpingFunction compose(const WarpingFunction& outer, const WarpingFunction& inner);

double srsf_norm(const SrsfCurve& q);

/// ||q1 - (q2 o gamma) sqrt(gamma')|| on the grid, trapezoidal quadrature.
double warp_cost(const SrsfCurve& q1, const SrsfCurve& q2, const WarpingFunction& gamma);

struct WarpOptions {
  /// Grids with more points than this are searched on a coarser lattice.
  std::size_t max_full_lattice = 600;
  std::size_t coarse_lattice_nodes = 300;
  /// After a coarse pass, the full grid is searched within this many cells of
  /// the coarse path. 0 keeps the coarse path.
  std::size_t refine_band = 6;
  /// Final pass on a lattice this many times finer than the grid, within two
  /// grid cells of the previous path. 1 disables it.
  int subgrid_factor = 1;
  /// Admissible DP steps are (a, b) with 1 <= a, b <= max_step, so slopes
  /// lie in [1/max_step, max_step].
  int max_step = 7;
  /// Weight of the elasticity penalty (1 - sqrt(gamma'))^2 relative to the
  /// mean squared SRSF magnitude. Keeps zero-information stretches straight.
  double penalty = 0.2;
};

/// Warp gamma minimising the lattice-discretised alignment cost of q2 onto q1.
WarpingFunction optimal_warp(const SrsfCurve& q1, const SrsfCurve& q2,
                             const WarpOptions& options = {});

struct AlignOptions {
  int iterations = 3;
  WarpOptions warp;
};

/// Iterative template alignment: the template starts as the SRSF closest to
/// the mean SRSF and is re-estimated from the warped SRSFs
/// (re-centred so the mean warp is the identity) between passes.
AlignedEnsemble align_ensemble(const std::vector<TransientCurve>& curves,
                               const AlignOptions& options = {});

/// Warp of a single (possibly noisy) curve onto an existing template.
/// smoothing_seconds > 0 applies Gaussian smoothing before the SRSF is taken;
/// the returned warp is meant to be applied to the unsmoothed curve.
WarpingFunction align_to_template(const TransientCurve& curve, const SrsfCurve& template_srsf,
                                  const WarpOptions& options = {}, double smoothing_seconds = 0.0);

struct RepairOptions {
  int smoothing_width = 5;
  /// Blend weight with the identity used when pooled flats remain.
  double identity_blend = 1e-3;
};

/// Turns an arbitrary sampled gamma (e.g. a PCA reconstruction) into a valid,
/// strictly increasing warp: isotonic projection, endpoint renormalisation and,
/// when the input needed fixing, moving-average smoothing. Throws NumericError
/// when gamma carries no increase at all (e.g. a constant).
WarpingFunction repair_warping(const WarpingFunction& gamma, const RepairOptions& options = {});

/// f(t) = warped(gamma^-1(t)); gamma is repaired first when it is not a
/// strictly increasing boundary-fixed warp.
TransientCurve reconstruct_curve(const TransientCurve& warped, const WarpingFunction& gamma);

struct LandmarkSpread {
  double peak_time_std = 0.0;
  double quench_time_std = 0.0;
};

/// Std of argmax time and steepest-descent time across an ensemble.
LandmarkSpread landmark_spread(const std::vector<TransientCurve>& curves);

}  // namespace iuq
