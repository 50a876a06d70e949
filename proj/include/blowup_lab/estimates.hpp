#pragma once

// Checkers for the quantitative estimates: weak Harnack ratios, blow-up rate
// fits, rescaling flatness, sublevel decay, collar inclusion, the eigenvalue
// identity, critical exponents and bounds transfer.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "blowup_lab/continuation.hpp"
#include "blowup_lab/eigen.hpp"
#include "blowup_lab/error.hpp"
#include "blowup_lab/geometry.hpp"
#include "blowup_lab/linalg.hpp"
#include "blowup_lab/operator.hpp"
#include "blowup_lab/solve.hpp"

namespace blowup {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

/// Upper end of the admissible integrability range [1, N/(N-1)).
inline double harnack_q_limit(int dimension) {
  return dimension <= 1 ? kInf : static_cast<double>(dimension) / (dimension - 1);
}

/// q = 1 for N = 1; otherwise alpha N/(N-1) with alpha the midpoint of
/// ((r-1)(N-1)/2, 1).
inline double default_q(int dimension, double r) {
  if (dimension <= 1) return 1.0;
  const double alpha = 0.5 * (1.0 + 0.5 * (r - 1.0) * (dimension - 1));
  return alpha * dimension / (dimension - 1);
}

inline void require_admissible_q(double q, int dimension) {
  if (!(q >= 1.0) || !(q < harnack_q_limit(dimension))) {
    throw HypothesisViolation("1 <= q < N/(N-1)",
                              "q = " + std::to_string(q) + " with N = " + std::to_string(dimension));
  }
}

struct EstimateConfig {
  double q = 1.0;
  double L = 10.0;
  double R = 1.0;
  double flatness_eps = 0.5;
  double stability_tol = 10.0;
  double sublevel_factor = 0.2;
};

/// Verdict tolerance: 1e-10 times the scale of the compared quantity.
inline bool decisively_negative(double v, double scale) { return v < -1e-10 * std::abs(scale); }
inline bool at_least(double lhs, double rhs, double scale) { return lhs >= rhs - 1e-10 * std::abs(scale); }

// ---------------------------------------------------------------------------
// Weak Harnack

template <class Vec>
double lq_norm(const Grid& grid, const Vec& u, const Mask& mask, double q) {
  if (!(q >= 1.0)) throw InvalidArgument("lq_norm: q must be >= 1");
  double s = 0.0;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (mask[i]) s += std::pow(std::abs(static_cast<double>(u[static_cast<Index>(i)])), q);
  }
  return std::pow(grid.cell_volume() * s, 1.0 / q);
}

/// |u|_{L^q(mask)} / min over interior mask nodes of u_i / d_i, with d the
/// distance to the discrete boundary of the mask region.
inline double harnack_ratio(const DiscreteOperator& op, const Vector& u, const Mask& mask, double q,
                            const DistanceField* dist = nullptr) {
  const Grid& grid = op.grid();
  if (static_cast<std::size_t>(u.size()) != grid.size()) throw InvalidArgument("harnack_ratio: length mismatch");
  double peak = 0.0;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (!mask[i]) continue;
    const double v = u[static_cast<Index>(i)];
    if (v < 0.0) throw PreconditionViolation("harnack_ratio: u is negative at node " + std::to_string(i));
    peak = std::max(peak, v);
  }
  if (peak == 0.0) throw NumericError("harnack_ratio: u vanishes identically, ratio undefined");

  const Mask inner = region_interior(grid, mask);
  const Vector lu = apply(op, u);
  std::size_t worst = grid.size();
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (inner[i] && lu[static_cast<Index>(i)] < -1e-8 && (worst == grid.size() || lu[static_cast<Index>(i)] < lu[static_cast<Index>(worst)])) {
      worst = i;
    }
  }
  if (worst != grid.size()) {
    throw PreconditionViolation("harnack_ratio: not a supersolution, worst node " + std::to_string(worst) +
                                " with (L u) = " + std::to_string(lu[static_cast<Index>(worst)]));
  }

  std::optional<DistanceField> own;
  if (dist == nullptr) {
    own = distance_field(grid, mask);
    dist = &*own;
  }
  double inf = kInf;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (inner[i] && dist->values[i] > 0.0) inf = std::min(inf, u[static_cast<Index>(i)] / dist->values[i]);
  }
  if (!(inf > 0.0) || !std::isfinite(inf)) throw NumericError("harnack_ratio: inf of u/d is not positive");
  return lq_norm(grid, u, mask, q) / inf;
}

struct HarnackLadderPoint {
  double q = 0.0;
  double C = 0.0;
};

struct HarnackReport {
  double q = 1.0;
  std::vector<double> ratios;
  double C = 0.0;
  bool pass = false;
  std::vector<HarnackLadderPoint> ladder;
};

/// C = max ratio over the family. The optional ladder evaluates C(q) for a
/// second (boundary-concentrating) family over increasing q.
inline HarnackReport check_weak_harnack(const DiscreteOperator& op, const std::vector<Vector>& family, const Mask& mask,
                                        double q, const std::vector<double>& q_ladder = {},
                                        const std::vector<Vector>& ladder_family = {}) {
  if (family.empty()) throw InvalidArgument("check_weak_harnack: empty family");
  require_admissible_q(q, op.grid().dimension());
  const DistanceField d = distance_field(op.grid(), mask);
  HarnackReport rep;
  rep.q = q;
  for (const Vector& u : family) rep.ratios.push_back(harnack_ratio(op, u, mask, q, &d));
  rep.C = *std::max_element(rep.ratios.begin(), rep.ratios.end());
  rep.pass = std::isfinite(rep.C) && rep.C > 0.0;
  if (!q_ladder.empty()) {
    const auto& fam = ladder_family.empty() ? family : ladder_family;
    for (double qq : q_ladder) {
      require_admissible_q(qq, op.grid().dimension());
      double c = 0.0;
      for (const Vector& u : fam) c = std::max(c, harnack_ratio(op, u, mask, qq, &d));
      rep.ladder.push_back({qq, c});
    }
  }
  return rep;
}

/// d^(1/k) for each k, d the distance to the boundary of the mask region.
inline std::vector<Vector> boundary_concentrating_family(const Grid& grid, const Mask& mask,
                                                         const std::vector<int>& ks) {
  const DistanceField d = distance_field(grid, mask);
  std::vector<Vector> out;
  for (int k : ks) {
    if (k < 1) throw InvalidArgument("boundary_concentrating_family: k must be >= 1");
    Vector u(static_cast<Index>(grid.size()));
    for (std::size_t i = 0; i < grid.size(); ++i) {
      u[static_cast<Index>(i)] = std::pow(d.values[i], 1.0 / k);
    }
    out.push_back(std::move(u));
  }
  return out;
}

struct SupersolutionSpec {
  double c0 = 0.5;
  struct Bump {
    Point center{};
    double width = 0.1;
    double amplitude = 1.0;
  };
  std::vector<Bump> bumps;
};

/// Draws `count` specs: c0 ~ U[0.05, 1], one to four Gaussian source bumps
/// with centers in the middle 80% of the bounding box.
inline std::vector<SupersolutionSpec> draw_supersolutions(const Grid& grid, std::size_t count, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  const auto& spec = grid.spec();
  std::vector<SupersolutionSpec> out;
  for (std::size_t m = 0; m < count; ++m) {
    SupersolutionSpec s;
    s.c0 = 0.05 + 0.95 * u01(rng);
    const int bumps = 1 + static_cast<int>(u01(rng) * 4.0) % 4;
    for (int b = 0; b < bumps; ++b) {
      SupersolutionSpec::Bump bump;
      for (int k = 0; k < grid.dimension(); ++k) {
        const auto c = static_cast<std::size_t>(k);
        const Interval e = spec.shape == Shape::disk ? Interval{spec.center[c] - spec.radius, spec.center[c] + spec.radius}
                                                     : spec.extents[c];
        bump.center[c] = e.lo + (0.1 + 0.8 * u01(rng)) * e.length();
      }
      bump.width = 0.05 + 0.15 * u01(rng);
      bump.amplitude = 50.0 * u01(rng);
      s.bumps.push_back(bump);
    }
    out.push_back(std::move(s));
  }
  return out;
}

/// u = c0 + w with L w = f (sum of the Gaussian bumps) in the interior and
/// w = 0 on the boundary rows. One factorization serves the whole family.
inline std::vector<Vector> realize_supersolutions(const DiscreteOperator& op,
                                                  const std::vector<SupersolutionSpec>& specs) {
  const Grid& grid = op.grid();
  const LuSolver lu(CscMatrix(op.matrix()));
  std::vector<Vector> out;
  for (const auto& s : specs) {
    Vector f = Vector::Zero(static_cast<Index>(grid.size()));
    for (std::size_t i = 0; i < grid.size(); ++i) {
      if (op.row_kind(i) != RowKind::interior) continue;
      double v = 0.0;
      for (const auto& b : s.bumps) {
        const double r = distance(grid.coord(i), b.center);
        v += b.amplitude * std::exp(-0.5 * r * r / (b.width * b.width));
      }
      f[static_cast<Index>(i)] = v;
    }
    Vector u = lu.solve(f);
    u.array() += s.c0;
    out.push_back(std::move(u));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Blow-up rate

/// theta = 1 + (1 - r) N / (2 q). Generic so that exact rational types work.
template <class T>
T blowup_exponent(const T& r, const T& n, const T& q) {
  return T(1) + (T(1) - r) * n / (T(2) * q);
}

struct BlowupRow {
  std::size_t member = 0;
  double M = 0.0;
  double C = 0.0;
  bool rejected = false;
  std::string reason;
};

struct BlowupReport {
  double theta = 0.0;
  double q = 1.0;
  double r = 2.0;
  std::vector<BlowupRow> rows;
  double stability = kInf;  // max C / min C over the final members
  double C_fit = 0.0;       // min C over accepted members
  std::size_t window = 3;
  bool pass = false;
  std::vector<std::size_t> rejected;
};

/// C_n = min over interior plus nodes of u / (M^theta d_plus). The fit is
/// judged on the last `window` accepted members (the final two decades).
inline BlowupReport check_blowup_estimate(const BlowupSequence& seq, double q, const Grid& grid, const Mask& plus,
                                          double r, double stability_tol = 10.0, std::size_t window = 3) {
  require_admissible_q(q, grid.dimension());
  if (seq.members.empty()) throw PreconditionViolation("check_blowup_estimate: empty blow-up sequence");
  BlowupReport rep;
  rep.q = q;
  rep.r = r;
  rep.theta = blowup_exponent<double>(r, grid.dimension(), q);
  rep.window = window;
  const DistanceField d = distance_field(grid, plus);
  const Mask inner = region_interior(grid, plus);
  std::vector<double> accepted;
  for (std::size_t n = 0; n < seq.members.size(); ++n) {
    const auto& m = seq.members[n];
    BlowupRow row;
    row.member = n;
    row.M = m.M;
    if (m.solution.classification != Classification::positive) {
      row.rejected = true;
      row.reason = std::string("classification ") + to_string(m.solution.classification);
      rep.rejected.push_back(n);
      rep.rows.push_back(row);
      continue;
    }
    const double scale = std::pow(m.M, rep.theta);
    double c = kInf;
    for (std::size_t i = 0; i < grid.size(); ++i) {
      if (inner[i] && d.values[i] > 0.0) c = std::min(c, m.solution.u[static_cast<Index>(i)] / (scale * d.values[i]));
    }
    row.C = c;
    accepted.push_back(c);
    rep.rows.push_back(row);
  }
  if (!accepted.empty()) {
    rep.C_fit = *std::min_element(accepted.begin(), accepted.end());
    const std::size_t k = std::min(window, accepted.size());
    const auto first = accepted.end() - static_cast<std::ptrdiff_t>(k);
    const double lo = *std::min_element(first, accepted.end());
    const double hi = *std::max_element(first, accepted.end());
    rep.stability = lo > 0.0 ? hi / lo : kInf;
    rep.pass = accepted.size() >= 2 && rep.stability <= stability_tol;
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Rescaling

struct RescaledField {
  double nu = 0.0;
  double R = 0.0;
  std::vector<Point> samples;          // y on the R/32 lattice inside the closed ball
  std::vector<double> values;          // NaN where x + nu y leaves the domain
  std::size_t missing = 0;
};

/// Multilinear interpolation of nodal values at p; nullopt outside the
/// closed domain or next to a missing lattice node.
inline std::optional<double> interpolate(const Grid& grid, const Vector& u, const Point& p) {
  if (!grid.contains_closed(p)) return std::nullopt;
  const auto shape = grid.lattice_shape();
  const Point o = grid.origin();
  const double h = grid.spacing();
  std::array<int, 2> cell{0, 0};
  std::array<double, 2> t{0.0, 0.0};
  for (int k = 0; k < grid.dimension(); ++k) {
    const int last = shape[static_cast<std::size_t>(k)] - 1;
    int c = static_cast<int>(std::floor((p[static_cast<std::size_t>(k)] - o[static_cast<std::size_t>(k)]) / h));
    c = std::clamp(c, 0, last - 1);
    cell[static_cast<std::size_t>(k)] = c;
  }
  const std::size_t base = grid.node_at(cell[0], cell[1]);
  const std::size_t nx = grid.node_at(cell[0] + 1, cell[1]);
  if (base == Grid::npos || nx == Grid::npos) return std::nullopt;
  t[0] = (p[0] - grid.coord(base)[0]) / (grid.coord(nx)[0] - grid.coord(base)[0]);
  if (grid.dimension() == 1) {
    return (1.0 - t[0]) * u[static_cast<Index>(base)] + t[0] * u[static_cast<Index>(nx)];
  }
  const std::size_t ny = grid.node_at(cell[0], cell[1] + 1);
  const std::size_t nxy = grid.node_at(cell[0] + 1, cell[1] + 1);
  if (ny == Grid::npos || nxy == Grid::npos) return std::nullopt;
  t[1] = (p[1] - grid.coord(base)[1]) / (grid.coord(ny)[1] - grid.coord(base)[1]);
  const auto at = [&](std::size_t i) { return u[static_cast<Index>(i)]; };
  return (1.0 - t[0]) * (1.0 - t[1]) * at(base) + t[0] * (1.0 - t[1]) * at(nx) + (1.0 - t[0]) * t[1] * at(ny) +
         t[0] * t[1] * at(nxy);
}

/// v(y) = nu^(2/(r-1)) u(x_n + nu y), nu = M^((1-r)/2), so nu^(2/(r-1)) = 1/M
/// and v(0) = u(x_n)/M.
inline RescaledField rescale(const Grid& grid, const Vector& u, double M, std::size_t xn, double r, double R) {
  if (!(M > 0.0)) throw PreconditionViolation("rescale: sup-norm must be positive");
  if (!(r > 1.0)) throw HypothesisViolation("r > 1", "exponent r = " + std::to_string(r));
  if (!(R > 0.0)) throw InvalidArgument("rescale: R must be positive");
  RescaledField f;
  f.nu = std::pow(M, 0.5 * (1.0 - r));
  f.R = R;
  const Point x = grid.coord(xn);
  constexpr int k = 32;
  const double step = R / k;
  const int reach = grid.dimension() == 2 ? k : 0;
  for (int i = -k; i <= k; ++i) {
    for (int j = -reach; j <= reach; ++j) {
      const Point y{i * step, j * step};
      if (std::hypot(y[0], y[1]) > R * (1.0 + 1e-12)) continue;
      f.samples.push_back(y);
      if (i == 0 && j == 0) {
        f.values.push_back(u[static_cast<Index>(xn)] / M);
        continue;
      }
      const auto v = interpolate(grid, u, {x[0] + f.nu * y[0], x[1] + f.nu * y[1]});
      if (v) {
        f.values.push_back(*v / M);
      } else {
        f.values.push_back(std::numeric_limits<double>::quiet_NaN());
        ++f.missing;
      }
    }
  }
  return f;
}

struct Flatness {
  double value = 0.0;  // max |v - 1| over available samples
  std::size_t available = 0;
  std::size_t missing = 0;
};

inline Flatness flatness(const RescaledField& v) {
  Flatness out;
  out.missing = v.missing;
  for (double x : v.values) {
    if (std::isnan(x)) continue;
    ++out.available;
    out.value = std::max(out.value, std::abs(x - 1.0));
  }
  if (out.available == 0) throw NumericError("flatness: every sample left the domain");
  return out;
}

// ---------------------------------------------------------------------------
// Sublevel sets

struct SublevelReport {
  double L = 0.0;
  std::vector<double> series;
  bool strictly_decreasing = false;
  bool pass = false;  // final <= factor * initial
};

inline SublevelReport sublevel_decay(const BlowupSequence& seq, double L, const Grid& grid, const Mask& plus,
                                     double factor = 0.2) {
  if (!(L > 0.0)) throw InvalidArgument("sublevel_decay: L must be positive");
  SublevelReport rep;
  rep.L = L;
  for (const auto& m : seq.members) rep.series.push_back(sublevel_measure(grid, m.solution.u, L, plus));
  if (!rep.series.empty()) {
    rep.strictly_decreasing = true;
    for (std::size_t k = 1; k < rep.series.size(); ++k) {
      rep.strictly_decreasing = rep.strictly_decreasing && rep.series[k] < rep.series[k - 1];
    }
    rep.pass = rep.series.size() >= 2 && rep.series.back() <= factor * rep.series.front();
  }
  return rep;
}

struct CollarRow {
  std::size_t member = 0;
  double radius = 0.0;  // L C^-1 M^(N(r-1)/(2q) - 1)
  std::size_t sublevel_nodes = 0;
  std::size_t violations = 0;
};

struct CollarReport {
  std::vector<CollarRow> rows;
  std::size_t violations = 0;
};

/// Plus nodes with u <= L must lie within `radius` of the plus boundary.
inline CollarReport collar_inclusion(const BlowupSequence& seq, double L, double q, double C_fit, const Grid& grid,
                                     const Mask& plus, double r) {
  if (!(C_fit > 0.0)) throw PreconditionViolation("collar_inclusion: C_fit must be positive");
  const DistanceField d = distance_field(grid, plus);
  const double expo = grid.dimension() * (r - 1.0) / (2.0 * q) - 1.0;
  CollarReport rep;
  for (std::size_t n = 0; n < seq.members.size(); ++n) {
    const auto& m = seq.members[n];
    CollarRow row;
    row.member = n;
    row.radius = L / C_fit * std::pow(m.M, expo);
    for (std::size_t i = 0; i < grid.size(); ++i) {
      if (!plus[i] || m.solution.u[static_cast<Index>(i)] > L) continue;
      ++row.sublevel_nodes;
      if (d.values[i] > row.radius * (1.0 + 1e-12)) ++row.violations;
    }
    rep.violations += row.violations;
    rep.rows.push_back(row);
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Eigenvalue identity

struct EigenIdentityRow {
  double lambda = 0.0;
  double M = 0.0;
  double I1 = 0.0;
  double I2 = 0.0;
  double flux = 0.0;            // boundary integral of <A n, grad phi> u
  double defect = 0.0;          // Green-identity defect for (u, phi)
  double I1_lower = 0.0;        // L eps int_{u > L} a phi
  double I2_lower = 0.0;        // -sigma L int_{u <= L} a phi
  bool flux_negative = false;
  bool sum_negative = false;
  bool I1_bound = false;
  bool I2_bound = false;
  bool consistent = false;      // |I1 + I2 - flux| <= 10 defect
};

struct EigenIdentityReport {
  double sigma = 0.0;
  double L = 0.0;
  double eps = 0.0;
  std::vector<EigenIdentityRow> rows;
};

/// L with L^(r-1) = 2 sigma, so that eps = sigma.
inline double auto_identity_level(double sigma, double r) { return std::pow(2.0 * sigma, 1.0 / (r - 1.0)); }

inline EigenIdentityRow eigen_identity_row(const ProblemInstance& p, const Solution& s, const EigenPair& pair, double L,
                                           double eps) {
  const Grid& grid = p.grid();
  const Mask& plus = p.weight->plus;
  const double hn = grid.cell_volume();
  EigenIdentityRow row;
  row.lambda = s.lambda;
  row.M = s.sup_plus;
  double above = 0.0, below = 0.0;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (!plus[i]) continue;
    const auto k = static_cast<Index>(i);
    const double u = s.u[k];
    const double a = p.weight->values[i];
    const double phi = pair.phi[k];
    const double term = ((s.lambda * u + a * std::pow(positive_part(u), p.r)) - pair.sigma * a * u) * phi * hn;
    if (u > L) {
      row.I1 += term;
      above += a * phi * hn;
    } else {
      row.I2 += term;
      below += a * phi * hn;
    }
  }
  row.I1_lower = L * eps * above;
  row.I2_lower = -pair.sigma * L * below;
  const BoundaryFlux bf = boundary_flux(*p.op, pair.phi, plus);
  row.flux = flux_integral(bf, s.u);
  row.defect = green_identity_defect(*p.op, s.u, pair.phi, plus);
  const double scale = std::abs(row.I1) + std::abs(row.I2) + std::abs(row.flux);
  row.flux_negative = decisively_negative(row.flux, scale);
  row.sum_negative = decisively_negative(row.I1 + row.I2, scale);
  row.I1_bound = at_least(row.I1, row.I1_lower, scale);
  row.I2_bound = at_least(row.I2, row.I2_lower, scale);
  row.consistent = std::abs(row.I1 + row.I2 - row.flux) <= 10.0 * row.defect + 1e-10 * scale;
  return row;
}

/// `L` <= 0 selects auto_identity_level.
inline EigenIdentityReport eigen_identity(const ProblemInstance& p, const std::vector<Solution>& members,
                                          const EigenPair& pair, double L) {
  EigenIdentityReport rep;
  rep.sigma = pair.sigma;
  rep.L = L > 0.0 ? L : auto_identity_level(pair.sigma, p.r);
  rep.eps = std::pow(rep.L, p.r - 1.0) - pair.sigma;
  if (!(rep.eps > 0.0)) {
    throw InvalidArgument("eigen_identity: L^(r-1) - sigma_1(a) = " + std::to_string(rep.eps) +
                          " is not positive for L = " + std::to_string(rep.L));
  }
  for (const auto& s : members) rep.rows.push_back(eigen_identity_row(p, s, pair, rep.L, rep.eps));
  return rep;
}

// ---------------------------------------------------------------------------
// Critical exponents and bounds transfer

struct CriticalExponents {
  double p_BT = kInf;
  double p_GS = kInf;
  std::optional<double> alg_bound;
};

inline CriticalExponents critical_exponents(int n, std::optional<double> gamma = std::nullopt) {
  if (n < 1) throw InvalidArgument("critical_exponents: N must be a positive integer");
  if (gamma && !(*gamma >= 0.0)) throw InvalidArgument("critical_exponents: gamma must be >= 0");
  CriticalExponents c;
  if (n >= 2) c.p_BT = static_cast<double>(n + 1) / (n - 1);
  if (n >= 3) c.p_GS = static_cast<double>(n + 2) / (n - 2);
  if (gamma) c.alg_bound = n >= 2 ? std::min((n + 1 + *gamma) / (n - 1), c.p_GS) : kInf;
  return c;
}

struct BoundsTransfer {
  double ratio = std::numeric_limits<double>::quiet_NaN();  // sup over the domain / sup over the plus region
  bool degenerate = false;
};

inline BoundsTransfer bounds_transfer(const Solution& s) {
  if (s.classification != Classification::positive) throw PreconditionViolation("bounds_transfer: solution not positive");
  BoundsTransfer b;
  if (!(s.sup_plus > 0.0)) {
    b.degenerate = true;
    return b;
  }
  b.ratio = s.sup_omega / s.sup_plus;
  return b;
}

/// Number of k with series[k] > series[k-1].
inline std::size_t increases(const std::vector<double>& series) {
  std::size_t n = 0;
  for (std::size_t k = 1; k < series.size(); ++k) n += series[k] > series[k - 1] ? 1 : 0;
  return n;
}

}  // namespace blowup
