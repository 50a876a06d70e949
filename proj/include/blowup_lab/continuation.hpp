#pragma once

// Pseudo-arclength continuation of positive solutions in lambda and
// extraction of blowing-up sequences.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "blowup_lab/eigen.hpp"
#include "blowup_lab/error.hpp"
#include "blowup_lab/geometry.hpp"
#include "blowup_lab/linalg.hpp"
#include "blowup_lab/operator.hpp"
#include "blowup_lab/solve.hpp"

namespace blowup {

struct StepControl {
  double initial = 0.02;
  double min = 1e-8;
  double max = 0.5;
  double growth = 1.5;
  int max_steps = 5000;       // attempted steps, accepted or not
  double jump_ratio = 0.5;    // |M_new - M_old| <= jump_ratio * M_old
  int corrector_iterations = 12;
  double tol = 1e-10;
};

struct StopCriteria {
  double sup_ceiling = 1e4;  // on the plus-region sup-norm
  double lambda_min = 0.0;
  double lambda_max = std::numeric_limits<double>::infinity();
};

enum class TerminationReason { sup_ceiling, lambda_range, solver_failure };

inline const char* to_string(TerminationReason r) {
  switch (r) {
    case TerminationReason::sup_ceiling: return "sup-norm ceiling reached";
    case TerminationReason::lambda_range: return "lambda range exhausted";
    case TerminationReason::solver_failure: return "solver failure";
  }
  return "unknown";
}

struct Fold {
  std::size_t index = 0;  // branch point where d lambda / ds changes sign
  double lambda = 0.0;    // vertex of the parabola through the neighbouring points
};

struct Branch {
  std::vector<Solution> points;
  std::vector<double> arclength;
  std::vector<double> steps;  // step size used to reach points[k], k >= 1
  std::vector<Fold> folds;
  TerminationReason reason = TerminationReason::solver_failure;
  std::string detail;
};

namespace detail {

/// Squared-norm weights: |du|^2 / (n s^2) + dlambda^2 with s the current
/// sup-norm of u.
struct ArcMetric {
  double wu = 1.0;

  ArcMetric(const Vector& u) {
    const double s = std::max(sup_norm(u), 1e-300);
    wu = 1.0 / (static_cast<double>(u.size()) * s * s);
  }

  double dot(const Vector& au, double al, const Vector& bu, double bl) const { return wu * au.dot(bu) + al * bl; }
  double norm(const Vector& du, double dl) const { return std::sqrt(dot(du, dl, du, dl)); }
};

inline Vector lambda_column(const DiscreteOperator& op, const Vector& u) {
  Vector c = Vector::Zero(u.size());
  for (std::size_t i = 0; i < op.size(); ++i) {
    if (op.row_kind(i) == RowKind::interior) c[static_cast<Index>(i)] = -u[static_cast<Index>(i)];
  }
  return c;
}

/// [J  F_lambda; cu^T  cl] as an (n+1) x (n+1) sparse matrix.
inline CscMatrix bordered(const ProblemInstance& p, const Vector& u, double lambda, const Vector& cu, double cl) {
  const CscMatrix j = jacobian(p.with_lambda(lambda), u);
  const Vector fl = lambda_column(*p.op, u);
  const auto n = static_cast<Index>(p.size());
  std::vector<Triplet> t;
  t.reserve(static_cast<std::size_t>(j.nonZeros() + 2 * n + 1));
  for (Index c = 0; c < j.outerSize(); ++c) {
    for (CscMatrix::InnerIterator it(j, c); it; ++it) t.emplace_back(it.row(), it.col(), it.value());
  }
  for (Index i = 0; i < n; ++i) {
    if (fl[i] != 0.0) t.emplace_back(i, n, fl[i]);
    if (cu[i] != 0.0) t.emplace_back(n, i, cu[i]);
  }
  t.emplace_back(n, n, cl);
  CscMatrix m(n + 1, n + 1);
  m.setFromTriplets(t.begin(), t.end());
  m.makeCompressed();
  return m;
}

struct Corrected {
  bool ok = false;
  Vector u;
  double lambda = 0.0;
  double residual = 0.0;
  int iterations = 0;
  std::string failure;
};

/// Newton on F(u, lambda) = 0, cu.u + cl lambda = target.
inline Corrected correct(const ProblemInstance& p, Vector u, double lambda, const Vector& cu, double cl, double target,
                         double tol, int max_iter) {
  Corrected out;
  const auto n = static_cast<Index>(p.size());
  const Vector* forcing = p.forcing ? &*p.forcing : nullptr;
  for (int it = 0;; ++it) {
    if (!u.allFinite() || !std::isfinite(lambda)) {
      out.failure = "non-finite corrector iterate";
      return out;
    }
    const Vector f = residual(*p.op, u, lambda, *p.weight, p.r, forcing);
    const double g = cu.dot(u) + cl * lambda - target;
    const double norm = sup_norm(f);
    if (norm <= residual_tolerance(*p.op, p.weight->values, u, lambda, p.r, tol) && std::abs(g) <= 1e-12 * (1.0 + std::abs(target))) {
      out.ok = true;
      out.u = std::move(u);
      out.lambda = lambda;
      out.residual = norm;
      out.iterations = it;
      return out;
    }
    if (it == max_iter) {
      out.failure = "corrector did not converge (residual " + std::to_string(norm) + ")";
      return out;
    }
    Vector rhs(n + 1);
    rhs.head(n) = -f;
    rhs[n] = -g;
    Vector d;
    try {
      const LuSolver lu(bordered(p, u, lambda, cu, cl));
      d = lu.solve(rhs);
    } catch (const SingularMatrix& e) {
      out.failure = e.what();
      return out;
    }
    u += d.head(n);
    lambda += d[n];
  }
}

/// Tangent of the solution curve at (u, lambda): the kernel direction of
/// [J F_lambda], oriented along `guess` and normalized in the arc metric.
inline std::pair<Vector, double> tangent(const ProblemInstance& p, const Vector& u, double lambda, const Vector& guess_u,
                                         double guess_l) {
  const ArcMetric m(u);
  const auto n = static_cast<Index>(p.size());
  const LuSolver lu(bordered(p, u, lambda, m.wu * guess_u, guess_l));
  Vector rhs = Vector::Zero(n + 1);
  rhs[n] = 1.0;
  const Vector d = lu.solve(rhs);
  Vector tu = d.head(n);
  double tl = d[n];
  const double len = m.norm(tu, tl);
  return {tu / len, tl / len};
}

}  // namespace detail

/// Positive solution near the bifurcation from zero: pins <phi, u>_h to
/// amplitude * <phi, phi>_h, with (sigma, phi) the principal eigenpair of L.
inline Solution start_near_bifurcation(const ProblemInstance& p, double amplitude, const StepControl& ctl = {}) {
  if (!(amplitude > 0.0)) throw InvalidArgument("start amplitude must be positive");
  const EigenPair pair = principal_operator(*p.op);
  const Vector cu = pair.phi * p.grid().cell_volume();
  const double target = amplitude * cu.dot(pair.phi);
  auto c = detail::correct(p, amplitude * pair.phi, pair.sigma, cu, 0.0, target, ctl.tol, 4 * ctl.corrector_iterations);
  if (!c.ok) {
    throw ConvergenceFailure("start near bifurcation: " + c.failure, c.residual, c.iterations);
  }
  return make_solution(p.with_lambda(c.lambda), std::move(c.u), c.residual, c.iterations, ctl.tol);
}

inline std::vector<Fold> detect_turning(const Branch& b) {
  std::vector<Fold> folds;
  const auto& pts = b.points;
  if (pts.size() < 3) return folds;
  double prev = 0.0;
  for (std::size_t k = 1; k < pts.size(); ++k) {
    const double d = pts[k].lambda - pts[k - 1].lambda;
    if (d == 0.0) continue;
    if (prev != 0.0 && (d > 0.0) != (prev > 0.0)) {
      const std::size_t i = k - 1;
      Fold f{i, pts[i].lambda};
      if (i >= 1 && i + 1 < pts.size() && b.arclength.size() == pts.size()) {
        // Vertex of the parabola lambda(s) through points i-1, i, i+1.
        const double s0 = b.arclength[i - 1], s1 = b.arclength[i], s2 = b.arclength[i + 1];
        const double l0 = pts[i - 1].lambda, l1 = pts[i].lambda, l2 = pts[i + 1].lambda;
        const double d01 = (l1 - l0) / (s1 - s0);
        const double d12 = (l2 - l1) / (s2 - s1);
        const double a = (d12 - d01) / (s2 - s0);
        if (a != 0.0) {
          const double b1 = d01 - a * (s0 + s1);
          const double sv = -b1 / (2.0 * a);
          if (sv >= s0 && sv <= s2) f.lambda = l0 + (sv - s0) * (d01 + a * (sv - s1));
        }
      }
      folds.push_back(f);
    }
    prev = d;
  }
  return folds;
}

/// Traces the branch through `start` in the direction of growing sup-norm.
inline Branch trace(const ProblemInstance& p, const Solution& start, const StepControl& ctl = {},
                    const StopCriteria& stop = {}) {
  p.validate();
  if (!(start.residual <= residual_tolerance(p.with_lambda(start.lambda), start.u, ctl.tol))) throw PreconditionViolation("trace: start does not satisfy the solver tolerance");
  if (!(ctl.initial > 0.0) || !(ctl.min > 0.0) || !(ctl.max >= ctl.initial)) {
    throw InvalidArgument("trace: invalid step control");
  }
  Branch b;
  b.points.push_back(start);
  b.arclength.push_back(0.0);

  auto [tu, tl] = detail::tangent(p, start.u, start.lambda, start.u, 0.0);
  if (tu.dot(start.u) < 0.0) {
    tu = -tu;
    tl = -tl;
  }

  double ds = ctl.initial;
  int attempts = 0;
  for (;;) {
    const Solution& cur = b.points.back();
    if (b.points.size() >= 2) {
      const Solution& prev = b.points[b.points.size() - 2];
      const detail::ArcMetric m(cur.u);
      tu = cur.u - prev.u;
      tl = cur.lambda - prev.lambda;
      const double len = m.norm(tu, tl);
      tu /= len;
      tl /= len;
    }
    if (attempts++ >= ctl.max_steps) {
      b.reason = TerminationReason::solver_failure;
      b.detail = "step budget exhausted";
      break;
    }
    const detail::ArcMetric m(cur.u);
    const Vector pu = cur.u + ds * tu;
    const double pl = cur.lambda + ds * tl;
    const Vector cu = m.wu * tu;
    auto c = detail::correct(p, pu, pl, cu, tl, cu.dot(pu) + tl * pl, ctl.tol, ctl.corrector_iterations);

    std::string reject;
    std::optional<Solution> next;
    if (!c.ok) {
      reject = c.failure;
    } else {
      next = make_solution(p.with_lambda(c.lambda), std::move(c.u), c.residual, c.iterations, ctl.tol);
      if (next->classification != Classification::positive) {
        reject = "left the positive cone";
      } else if (std::abs(next->sup_omega - cur.sup_omega) > ctl.jump_ratio * cur.sup_omega) {
        reject = "sup-norm jump";
      }
    }
    if (!reject.empty()) {
      ds *= 0.5;
      if (ds < ctl.min) {
        b.reason = TerminationReason::solver_failure;
        b.detail = "corrector failed at minimal step: " + reject;
        break;
      }
      continue;
    }

    if (next->lambda < stop.lambda_min || next->lambda > stop.lambda_max) {
      const double bound = next->lambda < stop.lambda_min ? stop.lambda_min : stop.lambda_max;
      const double t = (bound - cur.lambda) / (next->lambda - cur.lambda);
      const Vector guess = cur.u + t * (next->u - cur.u);
      b.reason = TerminationReason::lambda_range;
      try {
        Solution edge = newton(p.with_lambda(bound), guess, {ctl.tol, 50, 30});
        if (edge.classification == Classification::positive) {
          const detail::ArcMetric mm(cur.u);
          b.arclength.push_back(b.arclength.back() + mm.norm(edge.u - cur.u, edge.lambda - cur.lambda));
          b.steps.push_back(ds * t);
          b.points.push_back(std::move(edge));
          b.detail = "stopped at lambda = " + std::to_string(bound);
        } else {
          b.detail = "solution at the lambda bound is not positive";
        }
      } catch (const Error& e) {
        b.detail = std::string("solve at the lambda bound failed: ") + e.what();
      }
      break;
    }

    b.arclength.push_back(b.arclength.back() + m.norm(next->u - cur.u, next->lambda - cur.lambda));
    b.steps.push_back(ds);
    b.points.push_back(std::move(*next));
    if (b.points.back().sup_plus >= stop.sup_ceiling) {
      b.reason = TerminationReason::sup_ceiling;
      b.detail = "sup over the plus region reached " + std::to_string(b.points.back().sup_plus);
      break;
    }
    ds = std::min(ds * ctl.growth, ctl.max);
  }
  b.folds = detect_turning(b);
  return b;
}

struct BlowupMember {
  std::size_t branch_index = 0;
  double threshold = 0.0;
  Solution solution;
  double M = 0.0;  // sup over the plus region
  std::size_t argmax = 0;
  Point x{};
  double dist_plus = 0.0;  // distance of x to the boundary of the plus region
};

struct BlowupSequence {
  std::vector<BlowupMember> members;
  std::vector<std::string> warnings;
  double lambda_lo = 0.0;  // lambda range of the branch the members come from
  double lambda_hi = 0.0;
};

/// For each threshold, the first branch point whose plus-region sup-norm
/// exceeds it. Unattained thresholds and repeats are reported as warnings.
inline BlowupSequence blowup_sequence(const Branch& b, const std::vector<double>& thresholds, const Grid& grid,
                                      const Mask& plus) {
  if (!std::is_sorted(thresholds.begin(), thresholds.end()) ||
      std::adjacent_find(thresholds.begin(), thresholds.end()) != thresholds.end()) {
    throw InvalidArgument("blowup thresholds must be strictly increasing");
  }
  BlowupSequence seq;
  if (!b.points.empty()) {
    const auto [lo, hi] = std::minmax_element(b.points.begin(), b.points.end(),
                                              [](const Solution& x, const Solution& y) { return x.lambda < y.lambda; });
    seq.lambda_lo = lo->lambda;
    seq.lambda_hi = hi->lambda;
  }
  const DistanceField d = distance_field(grid, plus);
  std::optional<std::size_t> last;
  for (double t : thresholds) {
    std::optional<std::size_t> hit;
    for (std::size_t k = 0; k < b.points.size(); ++k) {
      if (b.points[k].sup_plus > t) {
        hit = k;
        break;
      }
    }
    if (!hit) {
      seq.warnings.push_back("threshold " + std::to_string(t) + " not attained");
      continue;
    }
    if (last && *hit == *last) {
      seq.warnings.push_back("threshold " + std::to_string(t) + " selects the same branch point as the previous one");
      continue;
    }
    last = hit;
    BlowupMember m;
    m.branch_index = *hit;
    m.threshold = t;
    m.solution = b.points[*hit];
    m.M = m.solution.sup_plus;
    m.argmax = m.solution.argmax_plus;
    m.x = grid.coord(m.argmax);
    m.dist_plus = d.values[m.argmax];
    seq.members.push_back(std::move(m));
  }
  return seq;
}

}  // namespace blowup
