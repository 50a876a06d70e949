#pragma once

// Principal eigenpairs of the Dirichlet problem on a region, unweighted and
// with a positive weight, by inverse power iteration.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "blowup_lab/error.hpp"
#include "blowup_lab/geometry.hpp"
#include "blowup_lab/linalg.hpp"
#include "blowup_lab/operator.hpp"

namespace blowup {

struct EigenOptions {
  double tolerance = 1e-10;  // relative eigen-residual
  int max_iterations = 500;
  Index direct_limit = SpdSolver::kDefaultDirectLimit;
};

struct EigenPair {
  double sigma = 0.0;
  Vector phi;          // nodal, zero outside the region interior, max = 1
  double sup_norm = 1.0;
  double residual = 0.0;
  int iterations = 0;
  bool weighted = false;
  Mask region;
};

namespace detail {

struct Restriction {
  std::vector<std::size_t> nodes;  // region interior nodes, ascending
  CscMatrix block;                 // operator restricted to those rows/cols
};

inline Restriction restrict_to_region(const DiscreteOperator& op, const Mask& mask) {
  const Grid& grid = op.grid();
  if (mask.size() != grid.size()) throw InvalidArgument("region mask length mismatch");
  const Mask inner = region_interior(grid, mask);
  Restriction r;
  std::vector<Index> local(grid.size(), -1);
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (inner[i]) {
      local[i] = static_cast<Index>(r.nodes.size());
      r.nodes.push_back(i);
    }
  }
  if (r.nodes.empty()) throw PreconditionViolation("region has no interior nodes");

  std::vector<Triplet> entries;
  const CsrMatrix& m = op.matrix();
  for (std::size_t li = 0; li < r.nodes.size(); ++li) {
    for (CsrMatrix::InnerIterator it(m, static_cast<Index>(r.nodes[li])); it; ++it) {
      const Index lj = local[static_cast<std::size_t>(it.col())];
      if (lj >= 0) entries.emplace_back(static_cast<Index>(li), lj, it.value());
    }
  }
  const auto n = static_cast<Index>(r.nodes.size());
  r.block.resize(n, n);
  r.block.setFromTriplets(entries.begin(), entries.end());
  r.block.makeCompressed();
  return r;
}

/// Inverse iteration for K x = sigma W x with W = diag(weight) (identity when
/// `weight` is empty). Starts from the all-ones vector.
inline EigenPair inverse_iteration(const Restriction& r, const Vector& weight, const EigenOptions& opt,
                                   std::size_t total_nodes) {
  std::unique_ptr<SpdSolver> solver;
  try {
    solver = std::make_unique<SpdSolver>(r.block, opt.direct_limit);
  } catch (const SingularMatrix& e) {
    throw PreconditionViolation(std::string("principal Dirichlet eigenvalue of the region is not positive: ") +
                                e.what());
  }
  const bool weighted = weight.size() > 0;
  const auto n = static_cast<Index>(r.nodes.size());
  Vector x = Vector::Ones(n);
  double sigma = 0.0;
  double res = std::numeric_limits<double>::infinity();
  int it = 0;
  while (it < opt.max_iterations) {
    ++it;
    Vector y = solver->solve(weighted ? Vector(weight.cwiseProduct(x)) : x);
    const double peak = y.cwiseAbs().maxCoeff();
    if (!(peak > 0.0) || !std::isfinite(peak)) throw NumericError("inverse iteration collapsed");
    x = y / (y.sum() < 0.0 ? -peak : peak);
    const Vector kx = r.block * x;
    const Vector wx = weighted ? Vector(weight.cwiseProduct(x)) : x;
    sigma = x.dot(kx) / x.dot(wx);
    res = (kx - sigma * wx).norm() / kx.norm();
    if (res <= opt.tolerance) break;
  }
  if (!(res <= opt.tolerance)) {
    std::vector<double> last(total_nodes, 0.0);
    for (Index k = 0; k < n; ++k) last[r.nodes[static_cast<std::size_t>(k)]] = x[k];
    throw ConvergenceFailure("inverse power iteration did not converge", res, it, std::move(last));
  }

  EigenPair pair;
  pair.sigma = sigma;
  pair.phi = Vector::Zero(static_cast<Index>(total_nodes));
  const double peak = x.maxCoeff();
  for (Index k = 0; k < n; ++k) pair.phi[static_cast<Index>(r.nodes[static_cast<std::size_t>(k)])] = x[k] / peak;
  pair.sup_norm = 1.0;
  pair.residual = res;
  pair.iterations = it;
  pair.weighted = weighted;
  return pair;
}

}  // namespace detail

/// Smallest eigenvalue of L on the region with homogeneous Dirichlet data on
/// its discrete boundary, with positive sup-normalized eigenfunction.
inline EigenPair principal_dirichlet(const DiscreteOperator& op, const Mask& mask, const EigenOptions& opt = {}) {
  const auto r = detail::restrict_to_region(op, mask);
  EigenPair pair = detail::inverse_iteration(r, Vector(), opt, op.size());
  pair.region = mask;
  return pair;
}

/// Principal eigenpair of L phi = sigma a phi on the region, phi = 0 on its
/// discrete boundary. The weight must be positive on the region interior.
inline EigenPair principal_weighted(const DiscreteOperator& op, const WeightField& weight, const Mask& mask,
                                    const EigenOptions& opt = {}) {
  const auto r = detail::restrict_to_region(op, mask);
  Vector w(static_cast<Index>(r.nodes.size()));
  for (std::size_t k = 0; k < r.nodes.size(); ++k) {
    const double a = weight.values[r.nodes[k]];
    if (!(a > kZeroBand)) {
      throw PreconditionViolation("weighted eigenproblem is ill-posed: weight is not positive at interior node " +
                                  std::to_string(r.nodes[k]));
    }
    w[static_cast<Index>(k)] = a;
  }
  EigenPair pair = detail::inverse_iteration(r, w, opt, op.size());
  pair.region = mask;
  return pair;
}

/// Principal eigenpair of L u = sigma u with the operator's own boundary rows
/// (Dirichlet and Robin) as constraints. The bifurcation point of positive
/// solutions from the trivial branch.
inline EigenPair principal_operator(const DiscreteOperator& op, const EigenOptions& opt = {}) {
  const auto n = static_cast<Index>(op.size());
  Vector b = Vector::Zero(n);
  for (std::size_t i = 0; i < op.size(); ++i) {
    if (op.row_kind(i) == RowKind::interior) b[static_cast<Index>(i)] = 1.0;
  }
  const CscMatrix k = op.matrix();
  std::optional<LuSolver> lu;
  try {
    lu.emplace(k);
  } catch (const SingularMatrix&) {
    throw PreconditionViolation("operator is singular: zero is an eigenvalue");
  }
  Vector x = b;
  double sigma = 0.0;
  double res = std::numeric_limits<double>::infinity();
  int it = 0;
  while (it < opt.max_iterations) {
    ++it;
    const Vector y = lu->solve(b.cwiseProduct(x));
    const double peak = y.cwiseAbs().maxCoeff();
    if (!(peak > 0.0) || !std::isfinite(peak)) throw NumericError("inverse iteration collapsed");
    x = y / (y.sum() < 0.0 ? -peak : peak);
    const Vector kx = k * x;
    const Vector bx = b.cwiseProduct(x);
    sigma = bx.dot(kx) / bx.dot(bx);
    res = (kx - sigma * bx).norm() / kx.norm();
    if (res <= opt.tolerance) break;
  }
  if (!(res <= opt.tolerance)) {
    throw ConvergenceFailure("inverse power iteration did not converge", res, it, to_std(x));
  }
  EigenPair pair;
  pair.sigma = sigma;
  pair.phi = x / x.maxCoeff();
  pair.residual = res;
  pair.iterations = it;
  pair.region = op.grid().all_nodes();
  return pair;
}

/// Conormal derivative of phi at every boundary node of a region, averaged
/// over the node's boundary edges; `weight` is the surface measure attached
/// to the node (edges times h^(N-1)).
struct BoundaryFlux {
  std::vector<std::size_t> nodes;
  std::vector<double> flux;
  std::vector<double> weight;
};

inline BoundaryFlux boundary_flux(const DiscreteOperator& op, const Vector& phi, const Mask& mask) {
  const Grid& grid = op.grid();
  const Mask closure = region_closure(grid, mask);
  const double ds = grid.dimension() == 2 ? grid.spacing() : 1.0;
  std::map<std::size_t, std::pair<double, int>> acc;
  for (const auto& e : region_edges(grid, mask)) {
    auto& slot = acc[e.node];
    slot.first += edge_conormal_derivative(op, phi, closure, e);
    slot.second += 1;
  }
  BoundaryFlux out;
  for (const auto& [node, v] : acc) {
    out.nodes.push_back(node);
    out.flux.push_back(v.first / v.second);
    out.weight.push_back(v.second * ds);
  }
  return out;
}

inline bool all_negative(const BoundaryFlux& f) {
  return !f.flux.empty() && std::all_of(f.flux.begin(), f.flux.end(), [](double v) { return v < 0.0; });
}

/// Surface integral of <A n, grad phi> u over the region boundary.
inline double flux_integral(const BoundaryFlux& f, const Vector& u) {
  double s = 0.0;
  for (std::size_t k = 0; k < f.nodes.size(); ++k) s += f.flux[k] * u[static_cast<Index>(f.nodes[k])] * f.weight[k];
  return s;
}

}  // namespace blowup
