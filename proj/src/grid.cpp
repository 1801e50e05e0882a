#include "liflab/grid.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "liflab/errors.hpp"
#include "liflab/io.hpp"

namespace liflab {

GridLayout make_layout(int n, double h, double v_r) {
  if (n < 4) throw ValidationError("grid needs at least 4 cells");
  if (!(h > 0 && h < 1) || !(v_r > 0 && v_r < 1))
    throw ValidationError("grid layout requires h, v_r in (0,1)");
  GridLayout L;
  L.n = n;
  L.dv = 1.0 / n;
  L.h = h;
  L.v_r = v_r;
  const double m = n * h;
  L.m_jump = static_cast<int>(std::round(m));
  if (std::abs(m - L.m_jump) > 1e-9 * n || L.m_jump < 1)
    throw ValidationError("n*h must be a positive integer so the jump is an exact cell shift "
                          "(n = " + std::to_string(n) + ", h = " + std::to_string(h) + ")");
  L.i_reset = static_cast<int>(std::floor(v_r * n));
  if (L.i_reset >= n) L.i_reset = n - 1;
  return L;
}

GridDensity zeros(const GridLayout& L) {
  GridDensity d;
  d.layout = L;
  d.p.assign(L.n, 0.0);
  return d;
}

GridDensity from_function(const GridLayout& L, const std::function<double(double)>& f,
                          bool normalize) {
  GridDensity d = zeros(L);
  for (int i = 0; i < L.n; ++i) {
    const double a = L.left(i), b = a + L.dv;
    d.p[i] = (f(a) + 4.0 * f(0.5 * (a + b)) + f(b)) / 6.0;
  }
  if (normalize) {
    const double m = mass(d);
    if (!(m > 0)) throw ValidationError("cannot normalize a density with non-positive mass");
    for (double& x : d.p) x /= m;
  }
  return d;
}

GridDensity from_atoms(const GridLayout& L,
                       const std::vector<std::pair<double, double>>& atoms) {
  GridDensity d = zeros(L);
  for (const auto& [v, w] : atoms) {
    if (!(v >= 0.0) || v >= 1.0)
      throw ValidationError("atom position must lie in [0,1), got " + std::to_string(v));
    int i = static_cast<int>(std::floor(v * L.n));
    if (i >= L.n) i = L.n - 1;
    d.p[i] += w / L.dv;
  }
  return d;
}

double mass(const GridDensity& d) {
  double s = 0;
  for (double x : d.p) s += x;
  return s * d.layout.dv;
}

double tail_mass(const GridDensity& d) {
  double s = 0;
  for (int i = d.layout.n - d.layout.m_jump; i < d.layout.n; ++i) s += d.p[i];
  return s * d.layout.dv;
}

double tv_distance(const GridDensity& a, const GridDensity& b) {
  if (!a.layout.same_as(b.layout))
    throw ValidationError("tv_distance: grids differ (n/h/v_r must match)");
  double s = 0;
  for (int i = 0; i < a.layout.n; ++i) s += std::abs(a.p[i] - b.p[i]);
  return s * a.layout.dv;
}

void write_density_csv(const std::string& path, const GridDensity& d) {
  std::string out = "v_center,density\n";
  for (int i = 0; i < d.layout.n; ++i) {
    out += io::fmt17(d.layout.center(i));
    out += ',';
    out += io::fmt17(d.p[i]);
    out += '\n';
  }
  io::write_file(path, out);
}

GridDensity read_density_csv(const std::string& path, double h, double v_r) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open: " + path);
  std::string line;
  if (!std::getline(in, line) || line.rfind("v_center,", 0) != 0)
    throw ValidationError(path + ": expected header 'v_center,density'");
  std::vector<double> vals;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto cells = io::split_csv_line(line);
    if (cells.size() != 2) throw ValidationError(path + ": expected 2 columns");
    vals.push_back(io::parse_double(cells[1]));
  }
  GridDensity d;
  d.layout = make_layout(static_cast<int>(vals.size()), h, v_r);
  d.p = std::move(vals);
  return d;
}

}  // namespace liflab
