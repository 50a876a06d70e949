#pragma once

// Conservative finite-difference realization of L = -div(A grad .) with the
// mixed Dirichlet / Robin boundary operator, plus residual and Green-identity
// utilities.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "blowup_lab/error.hpp"
#include "blowup_lab/geometry.hpp"
#include "blowup_lab/linalg.hpp"

namespace blowup {

struct SymMatrix2 {
  double xx = 1.0;
  double xy = 0.0;
  double yy = 1.0;

  double min_eigenvalue(int dimension) const {
    if (dimension == 1) return xx;
    const double mean = 0.5 * (xx + yy);
    const double half_gap = std::hypot(0.5 * (xx - yy), xy);
    return mean - half_gap;
  }

  Point apply(const Point& v) const { return {xx * v[0] + xy * v[1], xy * v[0] + yy * v[1]}; }

  double entry(int row, int col) const {
    if (row == 0 && col == 0) return xx;
    if (row == 1 && col == 1) return yy;
    return xy;
  }
};

enum class DiffusionPreset : std::uint8_t { identity, constant, smooth };

/// Nodal diffusion matrices A(x_i) and the declared ellipticity constant mu.
struct DiffusionTensor {
  DiffusionPreset preset = DiffusionPreset::identity;
  int dimension = 1;
  std::vector<SymMatrix2> values;
  double mu = 1.0;
};

/// Smallest nodal eigenvalue of A. Rejects tensors that are not positive.
inline double ellipticity_constant(const DiffusionTensor& a) {
  double mu = std::numeric_limits<double>::infinity();
  for (const auto& m : a.values) mu = std::min(mu, m.min_eigenvalue(a.dimension));
  if (!(mu > 0.0)) {
    throw HypothesisViolation("uniform ellipticity", "smallest nodal eigenvalue of A is " + std::to_string(mu));
  }
  return mu;
}

/// `smooth` is A(x, y) = diag(1 + x^2, 1 + y^2) (A = 1 + x^2 in 1D).
/// A declared `mu` <= 0 means "use the computed ellipticity constant".
inline DiffusionTensor make_diffusion(const Grid& grid, DiffusionPreset preset, SymMatrix2 constant = {},
                                      double mu = 0.0) {
  DiffusionTensor a;
  a.preset = preset;
  a.dimension = grid.dimension();
  a.values.resize(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const Point& p = grid.coord(i);
    switch (preset) {
      case DiffusionPreset::identity:
        a.values[i] = {};
        break;
      case DiffusionPreset::constant:
        a.values[i] = constant;
        break;
      case DiffusionPreset::smooth:
        a.values[i] = {1.0 + p[0] * p[0], 0.0, 1.0 + p[1] * p[1]};
        break;
    }
    if (grid.dimension() == 1) a.values[i].xy = 0.0;
  }
  a.mu = mu > 0.0 ? mu : ellipticity_constant(a);
  return a;
}

/// Robin coefficients beta_i >= 0, meaningful on Gamma_1 nodes.
struct BoundarySpec {
  std::vector<double> beta;
};

inline BoundarySpec make_boundary(const Grid& grid, double beta) {
  if (beta < 0.0) throw HypothesisViolation("beta >= 0", "Robin coefficient is negative");
  BoundarySpec bc;
  bc.beta.assign(grid.size(), 0.0);
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (grid.tag(i) == BoundaryTag::robin) bc.beta[i] = beta;
  }
  return bc;
}

enum class RowKind : std::uint8_t { interior, dirichlet, robin };

class DiscreteOperator {
 public:
  const Grid& grid() const { return *grid_; }
  const GridPtr& grid_ptr() const { return grid_; }
  const DiffusionTensor& diffusion() const { return diffusion_; }
  const BoundarySpec& boundary() const { return boundary_; }
  const CsrMatrix& matrix() const { return matrix_; }
  RowKind row_kind(std::size_t i) const { return kinds_[i]; }
  std::size_t size() const { return kinds_.size(); }

  std::span<const CsrMatrix::StorageIndex> row_offsets() const {
    return {matrix_.outerIndexPtr(), static_cast<std::size_t>(matrix_.outerSize()) + 1};
  }
  std::span<const CsrMatrix::StorageIndex> column_indices() const {
    return {matrix_.innerIndexPtr(), static_cast<std::size_t>(matrix_.nonZeros())};
  }
  std::span<const double> values() const { return {matrix_.valuePtr(), static_cast<std::size_t>(matrix_.nonZeros())}; }

 private:
  friend DiscreteOperator assemble(GridPtr grid, DiffusionTensor a, BoundarySpec bc);

  GridPtr grid_;
  DiffusionTensor diffusion_;
  BoundarySpec boundary_;
  CsrMatrix matrix_;
  std::vector<RowKind> kinds_;
};

inline DiscreteOperator assemble(GridPtr grid_ptr, DiffusionTensor a, BoundarySpec bc) {
  const Grid& grid = *grid_ptr;
  const std::size_t n = grid.size();
  if (a.values.size() != n) throw InvalidArgument("diffusion tensor length does not match grid");
  if (bc.beta.size() != n) throw InvalidArgument("boundary spec length does not match grid");
  for (std::size_t i = 0; i < n; ++i) {
    const double ev = a.values[i].min_eigenvalue(grid.dimension());
    if (ev < a.mu * (1.0 - 1e-12)) {
      throw HypothesisViolation("uniform ellipticity", "A has eigenvalue " + std::to_string(ev) + " below mu at node " +
                                                           std::to_string(i));
    }
    if (grid.tag(i) == BoundaryTag::robin && bc.beta[i] < 0.0) {
      throw HypothesisViolation("beta >= 0", "negative Robin coefficient at node " + std::to_string(i));
    }
  }

  const int dim = grid.dimension();
  const double h = grid.spacing();
  const double h2 = h * h;
  std::vector<Triplet> entries;
  entries.reserve(n * (dim == 2 ? 9 : 3));
  std::vector<RowKind> kinds(n, RowKind::interior);

  for (std::size_t i = 0; i < n; ++i) {
    const auto row = static_cast<Index>(i);
    if (grid.is_boundary(i)) {
      if (grid.tag(i) == BoundaryTag::dirichlet) {
        kinds[i] = RowKind::dirichlet;
        entries.emplace_back(row, row, 1.0);
        continue;
      }
      kinds[i] = RowKind::robin;
      const Point normal = grid.outward_normal(i);
      const Point conormal = a.values[i].apply(normal);
      if (conormal[0] * normal[0] + conormal[1] * normal[1] < a.mu * (1.0 - 1e-12)) {
        throw HypothesisViolation("outward conormal", "<A n, n> < mu at node " + std::to_string(i));
      }
      double diag = bc.beta[i];
      for (int k = 0; k < dim; ++k) {
        if (conormal[k] == 0.0) continue;
        const std::size_t lo = grid.neighbor(i, k, -1);
        const std::size_t hi = grid.neighbor(i, k, +1);
        // d_k u by a one-sided difference pointing into the domain; central
        // when both neighbors exist along a tangential axis.
        if (normal[k] == 0.0 && lo != Grid::npos && hi != Grid::npos) {
          entries.emplace_back(row, static_cast<Index>(hi), conormal[k] / (2.0 * h));
          entries.emplace_back(row, static_cast<Index>(lo), -conormal[k] / (2.0 * h));
        } else if ((normal[k] > 0.0 && lo != Grid::npos) || hi == Grid::npos) {
          if (lo == Grid::npos) continue;
          diag += conormal[k] / h;
          entries.emplace_back(row, static_cast<Index>(lo), -conormal[k] / h);
        } else {
          diag -= conormal[k] / h;
          entries.emplace_back(row, static_cast<Index>(hi), conormal[k] / h);
        }
      }
      entries.emplace_back(row, row, diag);
      continue;
    }

    double diag = 0.0;
    for (int k = 0; k < dim; ++k) {
      for (int s : {-1, 1}) {
        const std::size_t j = grid.neighbor(i, k, s);
        const double face = 0.5 * (a.values[i].entry(k, k) + a.values[j].entry(k, k)) / h2;
        diag += face;
        entries.emplace_back(row, static_cast<Index>(j), -face);
      }
    }
    entries.emplace_back(row, row, diag);

    if (dim == 2) {
      const auto idx = grid.lattice_index(i);
      const auto xy = [&](int dx, int dy) {
        const std::size_t j = grid.node_at(idx[0] + dx, idx[1] + dy);
        return a.values[j].xy;
      };
      const bool mixed = xy(0, 0) != 0.0 || xy(1, 0) != 0.0 || xy(-1, 0) != 0.0 || xy(0, 1) != 0.0 ||
                         xy(0, -1) != 0.0;
      if (mixed) {
        const double q = 1.0 / (4.0 * h2);
        const std::array<std::array<int, 2>, 4> corners{{{1, 1}, {1, -1}, {-1, 1}, {-1, -1}}};
        for (const auto& c : corners) {
          const std::size_t j = grid.node_at(idx[0] + c[0], idx[1] + c[1]);
          if (j == Grid::npos) {
            throw InvalidArgument("mixed diffusion terms need all diagonal neighbors at node " + std::to_string(i));
          }
          const double sign = (c[0] == c[1]) ? -1.0 : 1.0;
          entries.emplace_back(row, static_cast<Index>(j), sign * (xy(c[0], 0) + xy(0, c[1])) * q);
        }
      }
    }
  }

  DiscreteOperator op;
  op.matrix_.resize(static_cast<Index>(n), static_cast<Index>(n));
  op.matrix_.setFromTriplets(entries.begin(), entries.end());
  op.matrix_.makeCompressed();
  op.grid_ = std::move(grid_ptr);
  op.diffusion_ = std::move(a);
  op.boundary_ = std::move(bc);
  op.kinds_ = std::move(kinds);
  return op;
}

inline Vector apply(const DiscreteOperator& op, const Vector& u) {
  if (static_cast<std::size_t>(u.size()) != op.size()) {
    throw InvalidArgument("apply: vector length " + std::to_string(u.size()) + " does not match operator size " +
                          std::to_string(op.size()));
  }
  return op.matrix() * u;
}

inline double positive_part(double v) { return v > 0.0 ? v : 0.0; }

/// F(u) = L u - lambda u - a pos(u)^r - f on interior rows; boundary rows
/// carry the boundary operator applied to u.
inline Vector residual(const DiscreteOperator& op, const Vector& u, double lambda, std::span<const double> weight,
                       double r, const Vector* forcing = nullptr) {
  if (!all_finite(u)) throw NumericError("residual: non-finite input vector");
  if (!(r > 1.0)) throw HypothesisViolation("r > 1", "exponent r = " + std::to_string(r));
  if (weight.size() != op.size()) throw InvalidArgument("residual: weight length mismatch");
  Vector f = apply(op, u);
  for (std::size_t i = 0; i < op.size(); ++i) {
    if (op.row_kind(i) != RowKind::interior) continue;
    const auto k = static_cast<Index>(i);
    f[k] -= lambda * u[k] + weight[i] * std::pow(positive_part(u[k]), r);
    if (forcing != nullptr) f[k] -= (*forcing)[k];
  }
  return f;
}

inline Vector residual(const DiscreteOperator& op, const Vector& u, double lambda, const WeightField& weight, double r,
                       const Vector* forcing = nullptr) {
  return residual(op, u, lambda, std::span<const double>(weight.values), r, forcing);
}

// ---------------------------------------------------------------------------
// Boundary fluxes and the Green identity

/// Conormal derivative <A n, grad phi> across one boundary edge of a region,
/// evaluated at the frontier node with one-sided differences along the edge
/// (second order when the region is at least two cells deep there).
inline double edge_conormal_derivative(const DiscreteOperator& op, const Vector& phi, const Mask& closure,
                                       const RegionEdge& e) {
  const Grid& grid = op.grid();
  const double h = grid.spacing();
  const std::size_t b = e.node;
  const std::size_t b1 = grid.neighbor(b, e.axis, e.step);
  const std::size_t b2 = grid.neighbor(b1, e.axis, e.step);
  const auto at = [&](std::size_t i) { return phi[static_cast<Index>(i)]; };

  double inward;
  if (b2 != Grid::npos && closure[b2]) {
    inward = (-3.0 * at(b) + 4.0 * at(b1) - at(b2)) / (2.0 * h);
  } else {
    inward = (at(b1) - at(b)) / h;
  }
  const SymMatrix2& a = op.diffusion().values[b];
  // Outward normal is -step along `axis`; d_axis phi = step * inward.
  double flux = -a.entry(e.axis, e.axis) * inward;
  if (grid.dimension() == 2) {
    const int t = 1 - e.axis;
    const std::size_t lo = grid.neighbor(b, t, -1);
    const std::size_t hi = grid.neighbor(b, t, +1);
    if (lo != Grid::npos && hi != Grid::npos && a.xy != 0.0) {
      flux -= e.step * a.xy * (at(hi) - at(lo)) / (2.0 * h);
    }
  }
  return flux;
}

struct GreenIdentity {
  double volume = 0.0;    // h^N sum over the region of (phi L u - u L phi)
  double boundary = 0.0;  // sum over boundary edges of <A n, grad phi> u h^(N-1)
  double defect = 0.0;    // |volume - boundary|
};

inline GreenIdentity green_identity(const DiscreteOperator& op, const Vector& u, const Vector& phi, const Mask& mask) {
  const Grid& grid = op.grid();
  if (static_cast<std::size_t>(u.size()) != grid.size() || static_cast<std::size_t>(phi.size()) != grid.size()) {
    throw InvalidArgument("green_identity: vector length mismatch");
  }
  const Mask frontier = region_frontier(grid, mask);
  const double scale = std::max(sup_norm(phi), std::numeric_limits<double>::min());
  for (std::size_t b = 0; b < grid.size(); ++b) {
    if (frontier[b] && std::abs(phi[static_cast<Index>(b)]) > 1e-12 * scale) {
      throw PreconditionViolation("green_identity: phi does not vanish on the region boundary at node " +
                                  std::to_string(b));
    }
  }
  const Vector lu = apply(op, u);
  const Vector lphi = apply(op, phi);
  const Mask inner = region_interior(grid, mask);

  GreenIdentity g;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (!inner[i]) continue;
    const auto k = static_cast<Index>(i);
    g.volume += phi[k] * lu[k] - u[k] * lphi[k];
  }
  g.volume *= grid.cell_volume();

  const Mask closure = region_closure(grid, mask);
  const double ds = grid.dimension() == 2 ? grid.spacing() : 1.0;
  for (const auto& e : region_edges(grid, mask)) {
    g.boundary += edge_conormal_derivative(op, phi, closure, e) * u[static_cast<Index>(e.node)] * ds;
  }
  g.defect = std::abs(g.volume - g.boundary);
  return g;
}

inline double green_identity_defect(const DiscreteOperator& op, const Vector& u, const Vector& phi, const Mask& mask) {
  return green_identity(op, u, phi, mask).defect;
}

}  // namespace blowup
