#pragma once

// Minimal SVG line charts: polylines, shaded bands, axes with ticks.

#include <string>
#include <vector>

namespace iuq::svg {

struct Series {
  std::vector<double> x;
  std::vector<double> y;
  std::string color = "#1f77b4";
  std::string label;
  double width = 1.5;
};

struct Band {
  std::vector<double> x;
  std::vector<double> lower;
  std::vector<double> upper;
  std::string color = "#1f77b4";
  double opacity = 0.25;
  std::string label;
};

class Chart {
 public:
  Chart(std::string title, std::string x_label, std::string y_label, int width = 720,
        int height = 420);

  void add(Series series);
  void add(Band band);
  /// Deterministic output for identical inputs.
  std::string render() const;

 private:
  std::string title_, x_label_, y_label_;
  int width_, height_;
  std::vector<Series> series_;
  std::vector<Band> bands_;
};

/// "Nice" tick positions covering [lo, hi].
std::vector<double> ticks(double lo, double hi, int target_count = 6);

}  // namespace iuq::svg
