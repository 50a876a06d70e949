#pragma once

// Damped Newton iteration for F(u; lambda) = L u - lambda u - a pos(u)^r - f = 0.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "blowup_lab/eigen.hpp"
#include "blowup_lab/error.hpp"
#include "blowup_lab/geometry.hpp"
#include "blowup_lab/linalg.hpp"
#include "blowup_lab/operator.hpp"

namespace blowup {

struct ProblemInstance {
  std::shared_ptr<const DiscreteOperator> op;
  std::shared_ptr<const WeightField> weight;
  double r = 2.0;
  double lambda = 0.0;
  std::optional<Vector> forcing;

  const Grid& grid() const { return op->grid(); }
  std::size_t size() const { return op->size(); }

  void validate() const {
    if (!op || !weight) throw InvalidArgument("problem instance needs an operator and a weight");
    if (weight->values.size() != op->size()) throw InvalidArgument("weight length does not match operator");
    if (!(r > 1.0)) throw HypothesisViolation("r > 1", "exponent r = " + std::to_string(r));
    if (!(lambda >= 0.0)) throw HypothesisViolation("lambda >= 0", "lambda = " + std::to_string(lambda));
    if (forcing && static_cast<std::size_t>(forcing->size()) != op->size()) {
      throw InvalidArgument("forcing length does not match operator");
    }
  }

  ProblemInstance with_lambda(double l) const {
    ProblemInstance p = *this;
    p.lambda = l;
    return p;
  }
};

inline Vector residual(const ProblemInstance& p, const Vector& u) {
  return residual(*p.op, u, p.lambda, *p.weight, p.r, p.forcing ? &*p.forcing : nullptr);
}

enum class Classification { trivial, positive, nonpositive };

inline const char* to_string(Classification c) {
  switch (c) {
    case Classification::trivial: return "trivial";
    case Classification::positive: return "positive";
    case Classification::nonpositive: return "nonpositive";
  }
  return "unknown";
}

struct Solution {
  Vector u;
  double lambda = 0.0;
  double residual = 0.0;  // sup-norm of F
  int iterations = 0;
  Classification classification = Classification::trivial;
  double sup_omega = 0.0;
  double sup_plus = 0.0;
  std::size_t argmax_plus = 0;  // lowest index attaining sup_plus
};

/// Node i counts as positive when u_i > 1e-12 * |u|_inf. Only rows carrying
/// the equation (interior and Robin) are inspected; Dirichlet rows are zero.
inline Classification classify(const DiscreteOperator& op, const Vector& u, double trivial_level) {
  const double sup = sup_norm(u);
  if (sup <= trivial_level) return Classification::trivial;
  const double cut = 1e-12 * sup;
  for (std::size_t i = 0; i < op.size(); ++i) {
    if (op.row_kind(i) == RowKind::dirichlet) continue;
    if (!(u[static_cast<Index>(i)] > cut)) return Classification::nonpositive;
  }
  return Classification::positive;
}

inline Solution make_solution(const ProblemInstance& p, Vector u, double res, int iterations, double tol) {
  Solution s;
  s.lambda = p.lambda;
  s.residual = res;
  s.iterations = iterations;
  s.classification = classify(*p.op, u, tol);
  s.sup_omega = sup_norm(u);
  s.sup_plus = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (!p.weight->plus[i]) continue;
    const double v = u[static_cast<Index>(i)];
    if (v > s.sup_plus) {
      s.sup_plus = v;
      s.argmax_plus = i;
    }
  }
  s.u = std::move(u);
  return s;
}

/// Residual level accepted as converged: tol times the size of the terms of
/// F, floored at tol. An absolute bound alone falls below round-off once the
/// nonlinear term is large.
inline double residual_tolerance(const DiscreteOperator& op, std::span<const double> weight, const Vector& u,
                                 double lambda, double r, double tol) {
  double scale = 1.0;
  for (std::size_t i = 0; i < op.size(); ++i) {
    if (op.row_kind(i) != RowKind::interior) continue;
    const double v = std::abs(u[static_cast<Index>(i)]);
    scale = std::max({scale, v, std::abs(lambda) * v, std::abs(weight[i]) * std::pow(positive_part(u[static_cast<Index>(i)]), r)});
  }
  return tol * scale;
}

inline double residual_tolerance(const ProblemInstance& p, const Vector& u, double tol) {
  return residual_tolerance(*p.op, p.weight->values, u, p.lambda, p.r, tol);
}

/// L - lambda I - r a pos(u)^(r-1) on interior rows; boundary rows as in L.
inline CscMatrix jacobian(const ProblemInstance& p, const Vector& u) {
  CscMatrix j = p.op->matrix();
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p.op->row_kind(i) != RowKind::interior) continue;
    const auto k = static_cast<Index>(i);
    j.coeffRef(k, k) -= p.lambda + p.r * p.weight->values[i] * std::pow(positive_part(u[k]), p.r - 1.0);
  }
  return j;
}

struct NewtonOptions {
  double tol = 1e-10;
  int max_iter = 50;
  int max_halvings = 30;
};

inline Solution newton(const ProblemInstance& p, const Vector& u0, const NewtonOptions& opt = {}) {
  p.validate();
  if (!(opt.tol > 0.0)) throw InvalidArgument("newton: tolerance must be positive");
  if (static_cast<std::size_t>(u0.size()) != p.size()) throw InvalidArgument("newton: initial guess length mismatch");
  if (!all_finite(u0)) throw NumericError("newton: non-finite initial guess");

  Vector u = u0;
  Vector f = residual(p, u);
  double norm = sup_norm(f);
  int it = 0;
  while (norm > residual_tolerance(p, u, opt.tol)) {
    if (it == opt.max_iter) {
      throw ConvergenceFailure("Newton iteration did not converge", norm, it, to_std(u));
    }
    ++it;
    std::optional<LuSolver> lu;
    try {
      lu.emplace(jacobian(p, u));
    } catch (const SingularMatrix& e) {
      throw SingularMatrix(std::string("singular Jacobian (fold proximity) at lambda = ") +
                           std::to_string(p.lambda) + ": " + e.what());
    }
    const Vector du = lu->solve(-f);
    double t = 1.0;
    bool decreased = false;
    for (int k = 0; k <= opt.max_halvings; ++k, t *= 0.5) {
      Vector trial = u + t * du;
      Vector ft = residual(p, trial);
      const double nt = sup_norm(ft);
      if (nt < norm) {
        u = std::move(trial);
        f = std::move(ft);
        norm = nt;
        decreased = true;
        break;
      }
    }
    if (!decreased) {
      throw ConvergenceFailure("Newton line search found no residual decrease", norm, it, to_std(u));
    }
  }
  return make_solution(p, std::move(u), norm, it, opt.tol);
}

/// c * phi with phi the principal Dirichlet eigenfunction of L on the domain
/// and c minimizing the residual over c in {1e-3, ..., 1e3} (10 per decade).
inline Vector sub_super_init(const ProblemInstance& p) {
  p.validate();
  const EigenPair pair = principal_dirichlet(*p.op, p.grid().all_nodes());
  double best_c = 0.0;
  double best = std::numeric_limits<double>::infinity();
  for (int k = -30; k <= 30; ++k) {
    const double c = std::pow(10.0, k / 10.0);
    const double r = sup_norm(residual(p, Vector(c * pair.phi)));
    if (r < best) {
      best = r;
      best_c = c;
    }
  }
  return best_c * pair.phi;
}

}  // namespace blowup
