#pragma once
#include <functional>
#include <string>
#include <utility>
#include <vector>

namespace liflab {

// Uniform finite-volume mesh on [0, 1].  n*h must be an integer so the +h
// jump is an exact shift by m_jump cells — the discrete transfer then
// commutes exactly with the continuous one and introduces no smearing.
struct GridLayout {
  int n = 0;       // number of cells
  double dv = 0;   // 1/n
  double h = 0;    // jump size
  double v_r = 0;  // reset potential
  int m_jump = 0;  // h/dv (exact)
  int i_reset = 0; // cell containing v_r
  double left(int i) const { return i * dv; }
  double center(int i) const { return (i + 0.5) * dv; }
  bool same_as(const GridLayout& o) const {
    return n == o.n && h == o.h && v_r == o.v_r;
  }
};

GridLayout make_layout(int n, double h, double v_r);  // throws ValidationError

// Cell averages of a (sub-)probability density.
struct GridDensity {
  GridLayout layout;
  std::vector<double> p;
};

GridDensity zeros(const GridLayout& L);

// Project a pointwise density: per-cell Simpson average, then (optionally)
// rescale total mass to 1.
GridDensity from_function(const GridLayout& L, const std::function<double(double)>& f,
                          bool normalize = true);

// Deposit point masses: (position in [0,1), weight).  Weights are used as
// given; pass weights summing to 1 for a probability measure.
GridDensity from_atoms(const GridLayout& L,
                       const std::vector<std::pair<double, double>>& atoms);

double mass(const GridDensity& d);       // integral over [0,1]
double tail_mass(const GridDensity& d);  // integral over [1-h, 1] (exact cell span)

// Total-variation distance in the measure normalization: ∫ |a - b| dv,
// so two disjoint unit atoms are at distance 2.  Layouts must agree.
double tv_distance(const GridDensity& a, const GridDensity& b);

// CSV "v_center,density", one row per cell, 17-significant-digit values.
void write_density_csv(const std::string& path, const GridDensity& d);
GridDensity read_density_csv(const std::string& path, double h, double v_r);

}  // namespace liflab
