#include "iuq/std_shortcut.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "iuq/errors.hpp"
#include "iuq/numeric.hpp"

namespace iuq {

double StdShortcut::operator()(double prediction) const {
  double s;
  if (mode == Mode::Linear) {
    s = slope * prediction + intercept;
  } else {
    const bool first = std::abs(prediction - centroids[0].prediction) <=
                       std::abs(prediction - centroids[1].prediction);
    s = first ? centroids[0].std : centroids[1].std;
  }
  return std::max(s, floor);
}

namespace {

struct TwoMeans {
  std::vector<int> label;
  double silhouette = -1.0;
};

// Lloyd iterations in the plane, started from the two mutually farthest points.
TwoMeans two_means(const std::vector<double>& a, const std::vector<double>& b) {
  const std::size_t n = a.size();
  auto dist = [&](std::size_t i, std::size_t j) { return std::hypot(a[i] - a[j], b[i] - b[j]); };
  std::size_t p = 0;
  std::size_t q = 0;
  double far = -1.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      if (dist(i, j) > far) {
        far = dist(i, j);
        p = i;
        q = j;
      }
    }
  }
  std::array<double, 2> ca{a[p], a[q]};
  std::array<double, 2> cb{b[p], b[q]};
  TwoMeans out{std::vector<int>(n, 0), -1.0};
  for (int it = 0; it < 100; ++it) {
    bool changed = false;
    for (std::size_t i = 0; i < n; ++i) {
      const double d0 = std::hypot(a[i] - ca[0], b[i] - cb[0]);
      const double d1 = std::hypot(a[i] - ca[1], b[i] - cb[1]);
      const int l = d1 < d0 ? 1 : 0;
      if (l != out.label[i]) changed = true;
      out.label[i] = l;
    }
    for (int c = 0; c < 2; ++c) {
      double sa = 0.0;
      double sb = 0.0;
      int cnt = 0;
      for (std::size_t i = 0; i < n; ++i) {
        if (out.label[i] == c) {
          sa += a[i];
          sb += b[i];
          ++cnt;
        }
      }
      if (cnt > 0) {
        ca[static_cast<std::size_t>(c)] = sa / cnt;
        cb[static_cast<std::size_t>(c)] = sb / cnt;
      }
    }
    if (!changed && it > 0) break;
  }
  const auto count1 = std::count(out.label.begin(), out.label.end(), 1);
  if (count1 == 0 || count1 == static_cast<long>(n)) return out;

  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    std::array<double, 2> sum{0.0, 0.0};
    std::array<int, 2> cnt{0, 0};
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      sum[static_cast<std::size_t>(out.label[j])] += dist(i, j);
      ++cnt[static_cast<std::size_t>(out.label[j])];
    }
    const auto own = static_cast<std::size_t>(out.label[i]);
    const std::size_t other = 1 - own;
    if (cnt[own] == 0) continue;  // singleton cluster: silhouette 0
    const double ai = sum[own] / cnt[own];
    const double bi = sum[other] / cnt[other];
    const double m = std::max(ai, bi);
    total += m > 0.0 ? (bi - ai) / m : 0.0;
  }
  out.silhouette = total / static_cast<double>(n);
  return out;
}

}  // namespace

StdShortcut fit_std_shortcut(std::span<const double> predictions, std::span<const double> stds,
                             const ShortcutOptions& options) {
  if (predictions.size() != stds.size()) throw ArgumentError("fit_std_shortcut: length mismatch");
  if (predictions.size() < 10) throw ArgumentError("fit_std_shortcut: need at least 10 pairs");
  for (std::size_t i = 0; i < stds.size(); ++i) {
    if (!std::isfinite(predictions[i]) || !std::isfinite(stds[i]) || stds[i] < 0.0) {
      throw ArgumentError("fit_std_shortcut: predictions must be finite and stds non-negative");
    }
  }
  const double mp = numeric::mean(predictions);
  const double ms = numeric::mean(stds);
  const double sp = numeric::stddev(predictions);
  const double ss = numeric::stddev(stds);
  if (!(sp > 0.0)) throw ArgumentError("fit_std_shortcut: predictions are all equal");

  StdShortcut out;
  out.floor = options.floor;
  double sxy = 0.0;
  double sxx = 0.0;
  for (std::size_t i = 0; i < stds.size(); ++i) {
    sxy += (predictions[i] - mp) * (stds[i] - ms);
    sxx += (predictions[i] - mp) * (predictions[i] - mp);
  }
  out.slope = sxy / sxx;
  out.intercept = ms - out.slope * mp;

  // Cluster in standardised coordinates so both axes count equally.
  std::vector<double> za(predictions.size());
  std::vector<double> zb(stds.size());
  for (std::size_t i = 0; i < za.size(); ++i) {
    za[i] = (predictions[i] - mp) / sp;
    zb[i] = ss > 0.0 ? (stds[i] - ms) / ss : 0.0;
  }
  const TwoMeans km = two_means(za, zb);
  out.silhouette = km.silhouette;
  if (km.silhouette > options.silhouette_threshold) {
    for (int c = 0; c < 2; ++c) {
      double pa = 0.0;
      double pb = 0.0;
      int cnt = 0;
      for (std::size_t i = 0; i < za.size(); ++i) {
        if (km.label[i] == c) {
          pa += predictions[i];
          pb += stds[i];
          ++cnt;
        }
      }
      out.centroids[static_cast<std::size_t>(c)] = {pa / cnt, pb / cnt};
    }
    if (out.centroids[0].prediction != out.centroids[1].prediction ||
        out.centroids[0].std != out.centroids[1].std) {
      out.mode = StdShortcut::Mode::TwoCluster;
    }
  }
  return out;
}

}  // namespace iuq
