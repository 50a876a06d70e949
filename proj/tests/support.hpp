#pragma once

// Small builders shared by the test suites.

#include <cmath>
#include <functional>
#include <memory>
#include <numbers>

#include "blowup_lab/blowup_lab.hpp"

namespace blowup::testing {

inline constexpr double kPi = std::numbers::pi;

inline GridPtr line(int nodes, double lo = 0.0, double hi = 1.0) {
  DomainSpec s;
  s.dimension = 1;
  s.extents[0] = {lo, hi};
  s.nodes = nodes;
  return make_grid(s);
}

inline GridPtr square(int nodes) {
  DomainSpec s;
  s.dimension = 2;
  s.extents = {Interval{0.0, 1.0}, Interval{0.0, 1.0}};
  s.nodes = nodes;
  return make_grid(s);
}

inline std::shared_ptr<const DiscreteOperator> laplacian(const GridPtr& g, double scale = 1.0) {
  auto a = make_diffusion(*g, DiffusionPreset::constant, {scale, 0.0, scale});
  return std::make_shared<const DiscreteOperator>(assemble(g, a, make_boundary(*g, 0.0)));
}

inline Region interval(double lo, double hi) {
  Region r;
  r.box[0] = {lo, hi};
  return r;
}

inline Region rect(double x0, double x1, double y0, double y1) {
  Region r;
  r.box = {Interval{x0, x1}, Interval{y0, y1}};
  return r;
}

inline WeightField sign_pattern(const Grid& g, const Region& plus, double pv = 1.0, double mv = -1.0) {
  WeightSpec s;
  s.preset = WeightPreset::sign_pattern;
  s.plus_region = plus;
  s.plus_value = pv;
  s.minus_value = mv;
  return build_weight(g, s);
}

inline WeightField constant_weight(const Grid& g, double c) {
  WeightSpec s;
  s.preset = WeightPreset::constant;
  s.constant = c;
  return build_weight(g, s);
}

inline WeightField table_weight(const Grid& g, std::vector<double> values) {
  WeightSpec s;
  s.preset = WeightPreset::tabulated;
  s.table = std::move(values);
  return build_weight(g, s);
}

inline ProblemInstance problem(std::shared_ptr<const DiscreteOperator> op, WeightField w, double r, double lambda) {
  ProblemInstance p;
  p.op = std::move(op);
  p.weight = std::make_shared<const WeightField>(std::move(w));
  p.r = r;
  p.lambda = lambda;
  return p;
}

inline Vector nodal(const Grid& g, const std::function<double(const Point&)>& f) {
  Vector v(static_cast<Index>(g.size()));
  for (std::size_t i = 0; i < g.size(); ++i) v[static_cast<Index>(i)] = f(g.coord(i));
  return v;
}

/// Zero on boundary nodes, f elsewhere.
inline Vector nodal_dirichlet(const Grid& g, const std::function<double(const Point&)>& f) {
  Vector v = nodal(g, f);
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (g.is_boundary(i)) v[static_cast<Index>(i)] = 0.0;
  }
  return v;
}

inline double slope(double h1, double e1, double h2, double e2) { return std::log(e1 / e2) / std::log(h1 / h2); }

inline Vector sine(const Grid& g) {
  return nodal_dirichlet(g, [&](const Point& p) {
    return g.dimension() == 1 ? std::sin(kPi * p[0]) : std::sin(kPi * p[0]) * std::sin(kPi * p[1]);
  });
}

}  // namespace blowup::testing
