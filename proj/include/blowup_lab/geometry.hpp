#pragma once

// Structured grids, weight fields with their sign partition, distance fields
// and the measure-theoretic helpers used by the estimate checkers.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <memory>
#include <random>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "blowup_lab/error.hpp"

namespace blowup {

using Point = std::array<double, 2>;
using Mask = std::vector<std::uint8_t>;

inline double distance(const Point& a, const Point& b) {
  return std::hypot(a[0] - b[0], a[1] - b[1]);
}

inline std::size_t count(const Mask& m) {
  return static_cast<std::size_t>(std::count(m.begin(), m.end(), std::uint8_t{1}));
}

enum class NodeClass : std::uint8_t { interior, boundary };

// `dirichlet` is the Gamma_0 part of the boundary, `robin` the Gamma_1 part.
enum class BoundaryTag : std::uint8_t { none, dirichlet, robin };

enum class Face : std::uint8_t { left, right, bottom, top };

enum class Shape : std::uint8_t { box, disk };

struct Interval {
  double lo = 0.0;
  double hi = 1.0;
  double length() const { return hi - lo; }
};

/// Boundary tagging rule. Faces listed in `robin_faces` belong to Gamma_1;
/// every other boundary node is Dirichlet. A node shared by two faces is
/// Gamma_1 only if all faces it lies on are Gamma_1. For disks the whole
/// staircase frontier follows `robin_curved`.
struct BoundaryTagging {
  std::set<Face> robin_faces;
  bool robin_curved = false;
};

struct DomainSpec {
  int dimension = 1;
  Shape shape = Shape::box;
  std::array<Interval, 2> extents{};  // box extents; ignored for disks
  Point center{0.0, 0.0};             // disk only
  double radius = 1.0;                // disk only
  int nodes = 33;                     // nodes along the first axis
  BoundaryTagging tagging;
};

/// A region used for weight presets: an open box (interval in 1D) or open disk.
struct Region {
  Shape shape = Shape::box;
  std::array<Interval, 2> box{};
  Point center{0.0, 0.0};
  double radius = 0.0;

  bool contains(const Point& p, int dimension) const {
    if (shape == Shape::disk) return distance(p, center) < radius;
    for (int k = 0; k < dimension; ++k) {
      if (!(p[k] > box[k].lo && p[k] < box[k].hi)) return false;
    }
    return true;
  }
};

/// Uniform tensor grid, optionally masked to a disk. Nodes are ordered
/// lexicographically by coordinates (x first, then y).
class Grid {
 public:
  static constexpr std::size_t npos = std::numeric_limits<std::size_t>::max();

  int dimension() const { return spec_.dimension; }
  double spacing() const { return h_; }
  double cell_volume() const { return dimension() == 1 ? h_ : h_ * h_; }
  std::size_t size() const { return coords_.size(); }
  const DomainSpec& spec() const { return spec_; }

  const Point& coord(std::size_t i) const { return coords_[i]; }
  std::span<const Point> coords() const { return coords_; }
  NodeClass node_class(std::size_t i) const { return classes_[i]; }
  bool is_boundary(std::size_t i) const { return classes_[i] == NodeClass::boundary; }
  BoundaryTag tag(std::size_t i) const { return tags_[i]; }

  std::array<int, 2> lattice_shape() const { return shape_; }
  std::array<int, 2> lattice_index(std::size_t i) const { return lattice_[i]; }
  Point origin() const { return origin_; }

  /// Node at lattice position (ix, iy), or npos when outside or inactive.
  std::size_t node_at(int ix, int iy) const {
    if (ix < 0 || iy < 0 || ix >= shape_[0] || iy >= shape_[1]) return npos;
    return lookup_[static_cast<std::size_t>(ix) * static_cast<std::size_t>(shape_[1]) +
                   static_cast<std::size_t>(iy)];
  }

  /// Neighbor of node i one lattice step along `axis` in direction `step` (+1/-1).
  std::size_t neighbor(std::size_t i, int axis, int step) const {
    auto idx = lattice_[i];
    idx[static_cast<std::size_t>(axis)] += step;
    return node_at(idx[0], idx[1]);
  }

  /// Outward unit normal of the continuous domain at a boundary node.
  Point outward_normal(std::size_t i) const {
    const Point& p = coords_[i];
    if (spec_.shape == Shape::disk) {
      const double r = distance(p, spec_.center);
      if (r == 0.0) return {0.0, 0.0};
      return {(p[0] - spec_.center[0]) / r, (p[1] - spec_.center[1]) / r};
    }
    Point n{0.0, 0.0};
    const auto& idx = lattice_[i];
    for (int k = 0; k < dimension(); ++k) {
      if (idx[k] == 0) n[k] -= 1.0;
      if (idx[k] == shape_[k] - 1) n[k] += 1.0;
    }
    const double len = std::hypot(n[0], n[1]);
    if (len > 0.0) {
      n[0] /= len;
      n[1] /= len;
    }
    return n;
  }

  /// Membership in the open continuous domain.
  bool contains(const Point& p) const {
    if (spec_.shape == Shape::disk) return distance(p, spec_.center) < spec_.radius;
    for (int k = 0; k < dimension(); ++k) {
      if (!(p[k] > spec_.extents[k].lo && p[k] < spec_.extents[k].hi)) return false;
    }
    return true;
  }

  /// Membership in the closed continuous domain.
  bool contains_closed(const Point& p) const {
    const double slack = 1e-12 * (1.0 + h_);
    if (spec_.shape == Shape::disk) return distance(p, spec_.center) <= spec_.radius + slack;
    for (int k = 0; k < dimension(); ++k) {
      if (p[k] < spec_.extents[k].lo - slack || p[k] > spec_.extents[k].hi + slack) return false;
    }
    return true;
  }

  Mask all_nodes() const { return Mask(size(), 1); }

  Mask interior_nodes() const {
    Mask m(size(), 0);
    for (std::size_t i = 0; i < size(); ++i) m[i] = is_boundary(i) ? 0 : 1;
    return m;
  }

 private:
  friend Grid build_grid(const DomainSpec& spec);

  DomainSpec spec_;
  double h_ = 0.0;
  Point origin_{0.0, 0.0};
  std::array<int, 2> shape_{1, 1};
  std::vector<Point> coords_;
  std::vector<std::array<int, 2>> lattice_;
  std::vector<std::size_t> lookup_;
  std::vector<NodeClass> classes_;
  std::vector<BoundaryTag> tags_;
};

using GridPtr = std::shared_ptr<const Grid>;

inline Grid build_grid(const DomainSpec& spec) {
  if (spec.dimension != 1 && spec.dimension != 2) {
    throw InvalidDomain("dimension must be 1 or 2, got " + std::to_string(spec.dimension));
  }
  if (spec.nodes < 3) throw InvalidDomain("resolution must be at least 3 nodes per axis");

  Grid g;
  g.spec_ = spec;
  std::array<Interval, 2> box = spec.extents;
  if (spec.shape == Shape::disk) {
    if (spec.dimension != 2) throw InvalidDomain("disk domains require dimension 2");
    if (!(spec.radius > 0.0)) throw InvalidDomain("disk radius must be positive");
    box[0] = {spec.center[0] - spec.radius, spec.center[0] + spec.radius};
    box[1] = {spec.center[1] - spec.radius, spec.center[1] + spec.radius};
    g.spec_.extents = box;
  }
  for (int k = 0; k < spec.dimension; ++k) {
    if (!(box[k].length() > 0.0) || !std::isfinite(box[k].length())) {
      throw InvalidDomain("degenerate extent along axis " + std::to_string(k));
    }
  }

  const double h = box[0].length() / (spec.nodes - 1);
  g.h_ = h;
  g.origin_ = {box[0].lo, spec.dimension == 2 ? box[1].lo : 0.0};
  g.shape_ = {spec.nodes, 1};
  if (spec.dimension == 2) {
    const double cells = box[1].length() / h;
    const double rounded = std::round(cells);
    if (std::abs(cells - rounded) > 1e-9 * std::max(1.0, cells) || rounded < 2.0) {
      throw InvalidDomain("extents are not commensurate with a uniform spacing");
    }
    g.shape_[1] = static_cast<int>(rounded) + 1;
  }

  auto lattice_point = [&](int ix, int iy) -> Point {
    // Pin the last lattice line to the upper extent so coordinates agree with
    // the extents to machine precision.
    const double x = ix == g.shape_[0] - 1 ? box[0].hi : box[0].lo + ix * h;
    double y = 0.0;
    if (spec.dimension == 2) y = iy == g.shape_[1] - 1 ? box[1].hi : box[1].lo + iy * h;
    return {x, y};
  };

  const std::size_t total = static_cast<std::size_t>(g.shape_[0]) * static_cast<std::size_t>(g.shape_[1]);
  g.lookup_.assign(total, Grid::npos);
  for (int ix = 0; ix < g.shape_[0]; ++ix) {
    for (int iy = 0; iy < g.shape_[1]; ++iy) {
      const Point p = lattice_point(ix, iy);
      if (spec.shape == Shape::disk &&
          distance(p, spec.center) > spec.radius * (1.0 + 1e-12)) {
        continue;
      }
      g.lookup_[static_cast<std::size_t>(ix) * static_cast<std::size_t>(g.shape_[1]) +
                static_cast<std::size_t>(iy)] = g.coords_.size();
      g.coords_.push_back(p);
      g.lattice_.push_back({ix, iy});
    }
  }

  const std::size_t n = g.coords_.size();
  g.classes_.assign(n, NodeClass::interior);
  g.tags_.assign(n, BoundaryTag::none);
  for (std::size_t i = 0; i < n; ++i) {
    bool boundary = false;
    for (int k = 0; k < spec.dimension && !boundary; ++k) {
      for (int s : {-1, 1}) {
        if (g.neighbor(i, k, s) == Grid::npos) boundary = true;
      }
    }
    if (!boundary) continue;
    g.classes_[i] = NodeClass::boundary;

    bool robin = true;
    if (spec.shape == Shape::disk) {
      robin = spec.tagging.robin_curved;
    } else {
      const auto& idx = g.lattice_[i];
      const auto on = [&](Face f) { return spec.tagging.robin_faces.count(f) > 0; };
      if (idx[0] == 0) robin = robin && on(Face::left);
      if (idx[0] == g.shape_[0] - 1) robin = robin && on(Face::right);
      if (spec.dimension == 2) {
        if (idx[1] == 0) robin = robin && on(Face::bottom);
        if (idx[1] == g.shape_[1] - 1) robin = robin && on(Face::top);
      }
    }
    g.tags_[i] = robin ? BoundaryTag::robin : BoundaryTag::dirichlet;
  }
  return g;
}

inline GridPtr make_grid(const DomainSpec& spec) {
  return std::make_shared<const Grid>(build_grid(spec));
}

// ---------------------------------------------------------------------------
// Discrete regions

/// Discrete boundary of a region: nodes outside the mask with a lattice
/// neighbor inside it, together with mask nodes lying on the grid boundary.
inline Mask region_frontier(const Grid& grid, const Mask& mask) {
  Mask frontier(grid.size(), 0);
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (mask[i]) {
      frontier[i] = grid.is_boundary(i) ? 1 : 0;
      continue;
    }
    for (int k = 0; k < grid.dimension() && !frontier[i]; ++k) {
      for (int s : {-1, 1}) {
        const std::size_t j = grid.neighbor(i, k, s);
        if (j != Grid::npos && mask[j]) frontier[i] = 1;
      }
    }
  }
  return frontier;
}

/// Region nodes strictly inside its discrete boundary. These are the unknowns
/// of a Dirichlet problem posed on the region.
inline Mask region_interior(const Grid& grid, const Mask& mask) {
  Mask inner(grid.size(), 0);
  for (std::size_t i = 0; i < grid.size(); ++i) inner[i] = (mask[i] && !grid.is_boundary(i)) ? 1 : 0;
  return inner;
}

/// Closure of a region: the mask together with its discrete boundary.
inline Mask region_closure(const Grid& grid, const Mask& mask) {
  Mask closure = region_frontier(grid, mask);
  for (std::size_t i = 0; i < grid.size(); ++i) closure[i] = (closure[i] || mask[i]) ? 1 : 0;
  return closure;
}

/// A boundary edge of a region: frontier node `node` and the lattice step
/// (`axis`, `step`) that leads from it into the region interior.
struct RegionEdge {
  std::size_t node;
  int axis;
  int step;
};

inline std::vector<RegionEdge> region_edges(const Grid& grid, const Mask& mask) {
  const Mask frontier = region_frontier(grid, mask);
  const Mask inner = region_interior(grid, mask);
  std::vector<RegionEdge> edges;
  for (std::size_t b = 0; b < grid.size(); ++b) {
    if (!frontier[b]) continue;
    for (int k = 0; k < grid.dimension(); ++k) {
      for (int s : {-1, 1}) {
        const std::size_t j = grid.neighbor(b, k, s);
        if (j != Grid::npos && inner[j] && !frontier[j]) edges.push_back({b, k, s});
      }
    }
  }
  return edges;
}

// ---------------------------------------------------------------------------
// Distance fields

struct DistanceField {
  Mask region;
  std::vector<double> values;
};

/// Exact Euclidean distance from every node to the nearest node of the
/// region's discrete boundary.
inline DistanceField distance_field(const Grid& grid, const Mask& region) {
  if (region.size() != grid.size()) throw InvalidArgument("region mask length mismatch");
  if (count(region) == 0) throw PreconditionViolation("distance_field: region mask is empty");

  const Mask frontier = region_frontier(grid, region);
  std::vector<Point> sources;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (frontier[i]) sources.push_back(grid.coord(i));
  }

  DistanceField field{region, std::vector<double>(grid.size(), 0.0)};
  if (sources.empty()) throw PreconditionViolation("distance_field: region has no discrete boundary");
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (frontier[i]) continue;
    const Point& p = grid.coord(i);
    double best = std::numeric_limits<double>::infinity();
    for (const Point& s : sources) {
      const double dx = p[0] - s[0];
      const double dy = p[1] - s[1];
      best = std::min(best, dx * dx + dy * dy);
    }
    field.values[i] = std::sqrt(best);
  }
  return field;
}

// ---------------------------------------------------------------------------
// Weight fields

enum class WeightPreset : std::uint8_t { sign_pattern, decay, constant, tabulated };

/// Named amplitude profiles for the decay presets: constant c, or c(1 + x).
enum class AmplitudeProfile : std::uint8_t { constant, linear };

inline double amplitude(AmplitudeProfile profile, double c, const Point& p) {
  return profile == AmplitudeProfile::linear ? c * (1.0 + p[0]) : c;
}

struct WeightSpec {
  WeightPreset preset = WeightPreset::sign_pattern;
  Region plus_region;

  // sign_pattern
  double plus_value = 1.0;
  double minus_value = -1.0;

  // decay: a = alpha d^gamma on the plus side, -alpha1 d^gamma1 elsewhere,
  // with d the distance to the discrete boundary of the plus region.
  double gamma = 0.0;
  double gamma1 = 0.0;
  double alpha = 1.0;
  double alpha1 = 1.0;
  AmplitudeProfile alpha_profile = AmplitudeProfile::constant;
  AmplitudeProfile alpha1_profile = AmplitudeProfile::constant;

  // constant
  double constant = 1.0;

  // tabulated: one value per grid node
  std::vector<double> table;

  bool require_interior_closure = false;
};

/// Values |a_i| <= this are treated as exact zeros.
inline constexpr double kZeroBand = 1e-14;

struct WeightField {
  std::vector<double> values;
  Mask plus;
  Mask minus;
  Mask zero;
  WeightSpec spec;
  bool interior_closure = false;

  double operator[](std::size_t i) const { return values[i]; }
};

/// Classifies nodal values into the plus/minus/zero partition and computes
/// the interior-closure flag. Rejects an empty plus region.
inline WeightField make_weight_field(const Grid& grid, std::vector<double> values, WeightSpec spec) {
  if (values.size() != grid.size()) throw InvalidArgument("weight table length does not match grid");
  WeightField w;
  w.values = std::move(values);
  w.spec = std::move(spec);
  w.plus.assign(grid.size(), 0);
  w.minus.assign(grid.size(), 0);
  w.zero.assign(grid.size(), 0);
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const double a = w.values[i];
    if (!std::isfinite(a)) throw NumericError("non-finite weight value at node " + std::to_string(i));
    if (a > kZeroBand) {
      w.plus[i] = 1;
    } else if (a < -kZeroBand) {
      w.minus[i] = 1;
    } else {
      w.zero[i] = 1;
    }
  }
  if (count(w.plus) == 0) {
    throw HypothesisViolation("Omega+ nonempty", "the weight is positive at no grid node");
  }
  const Mask closure = region_closure(grid, w.plus);
  w.interior_closure = true;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (closure[i] && grid.is_boundary(i)) {
      w.interior_closure = false;
      break;
    }
  }
  if (w.spec.require_interior_closure && !w.interior_closure) {
    throw HypothesisViolation("closure(Omega+) inside Omega",
                              "the plus region touches the boundary of the domain");
  }
  return w;
}

inline WeightField build_weight(const Grid& grid, const WeightSpec& spec) {
  const int dim = grid.dimension();
  std::vector<double> a(grid.size(), 0.0);
  switch (spec.preset) {
    case WeightPreset::sign_pattern:
      for (std::size_t i = 0; i < grid.size(); ++i) {
        a[i] = spec.plus_region.contains(grid.coord(i), dim) ? spec.plus_value : spec.minus_value;
      }
      break;
    case WeightPreset::decay: {
      if (spec.gamma < 0.0 || spec.gamma1 < 0.0) throw InvalidArgument("decay exponents must be >= 0");
      Mask region(grid.size(), 0);
      for (std::size_t i = 0; i < grid.size(); ++i) {
        region[i] = spec.plus_region.contains(grid.coord(i), dim) ? 1 : 0;
      }
      if (count(region) == 0) {
        throw HypothesisViolation("Omega+ nonempty", "the plus region contains no grid node");
      }
      const DistanceField d = distance_field(grid, region);
      for (std::size_t i = 0; i < grid.size(); ++i) {
        const Point& p = grid.coord(i);
        if (region[i]) {
          a[i] = amplitude(spec.alpha_profile, spec.alpha, p) * std::pow(d.values[i], spec.gamma);
        } else {
          a[i] = -amplitude(spec.alpha1_profile, spec.alpha1, p) * std::pow(d.values[i], spec.gamma1);
        }
      }
      break;
    }
    case WeightPreset::constant:
      std::fill(a.begin(), a.end(), spec.constant);
      break;
    case WeightPreset::tabulated:
      a = spec.table;
      break;
  }
  return make_weight_field(grid, std::move(a), spec);
}

// ---------------------------------------------------------------------------
// Measures

/// h^N times the number of mask nodes with u_i <= level.
template <class Vec>
double sublevel_measure(const Grid& grid, const Vec& u, double level, const Mask& mask) {
  if (!(level > 0.0)) throw InvalidArgument("sublevel_measure: level must be positive");
  std::size_t n = 0;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (mask[i] && u[static_cast<decltype(u.size())>(i)] <= level) ++n;
  }
  return static_cast<double>(n) * grid.cell_volume();
}

/// h^N times the number of grid nodes within Euclidean distance `radius` of x.
inline double measure_density(const Grid& grid, const Point& x, double radius) {
  if (!(radius > 0.0)) throw InvalidArgument("measure_density: radius must be positive");
  if (radius > 1.0) throw InvalidArgument("measure_density: radius must be at most 1");
  if (!grid.contains_closed(x)) throw InvalidArgument("measure_density: point outside the closed domain");
  std::size_t n = 0;
  const double tol = radius * (1.0 + 1e-12);
  for (const Point& p : grid.coords()) {
    if (distance(p, x) <= tol) ++n;
  }
  return static_cast<double>(n) * grid.cell_volume();
}

struct DensitySample {
  Point x;
  double radius;
  double measure;
  double ratio;  // measure / radius^N
};

struct DensityFit {
  std::vector<DensitySample> samples;
  double constant = 0.0;  // min ratio
};

/// Fits c = min measure / r^N over seeded samples x in the closed domain and
/// r in [2h, 1]. Balls smaller than the grid spacing are not resolvable by
/// nodal counting, hence the lower radius bound.
inline DensityFit fit_density_constant(const Grid& grid, std::size_t samples, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const auto& ext = grid.spec().extents;
  std::uniform_real_distribution<double> ux(ext[0].lo, ext[0].hi);
  std::uniform_real_distribution<double> uy(ext[1].lo, ext[1].hi);
  const double r_lo = std::min(1.0, 2.0 * grid.spacing());
  std::uniform_real_distribution<double> ur(r_lo, 1.0);

  DensityFit fit;
  fit.constant = std::numeric_limits<double>::infinity();
  while (fit.samples.size() < samples) {
    Point x{ux(rng), grid.dimension() == 2 ? uy(rng) : 0.0};
    const double r = ur(rng);
    if (!grid.contains_closed(x)) continue;
    const double m = measure_density(grid, x, r);
    const double ratio = m / std::pow(r, grid.dimension());
    fit.samples.push_back({x, r, m, ratio});
    fit.constant = std::min(fit.constant, ratio);
  }
  if (!(fit.constant > 0.0)) throw NumericError("measure density constant is not positive");
  return fit;
}

/// Whether B_R(0) lies inside mu (z + Omega), tested on a lattice of spacing
/// R/32 inside the ball (plus the sphere for N = 2). Uses
/// y in mu(z + Omega) <=> y/mu - z in Omega.
inline bool rescaled_domain_contains_ball(const Point& z, double mu, const Grid& grid, double R) {
  if (!(mu > 0.0)) throw InvalidArgument("rescaled_domain_contains_ball: mu must be positive");
  if (!(R > 0.0)) throw InvalidArgument("rescaled_domain_contains_ball: R must be positive");
  const double rin = R * (1.0 - 1e-9);
  const auto inside = [&](double y0, double y1) {
    return grid.contains({y0 / mu - z[0], grid.dimension() == 2 ? y1 / mu - z[1] : 0.0});
  };
  constexpr int k = 32;
  const double step = R / k;
  if (grid.dimension() == 1) {
    for (int i = -k; i <= k; ++i) {
      const double y = std::clamp(i * step, -rin, rin);
      if (!inside(y, 0.0)) return false;
    }
    return true;
  }
  for (int i = -k; i <= k; ++i) {
    for (int j = -k; j <= k; ++j) {
      const double y0 = i * step;
      const double y1 = j * step;
      if (std::hypot(y0, y1) >= rin) continue;
      if (!inside(y0, y1)) return false;
    }
  }
  constexpr int ring = 256;
  for (int i = 0; i < ring; ++i) {
    const double t = 2.0 * M_PI * i / ring;
    if (!inside(rin * std::cos(t), rin * std::sin(t))) return false;
  }
  return true;
}

// ---------------------------------------------------------------------------
// Boundary-component condition

struct BoundaryComponent {
  std::vector<std::size_t> nodes;
  bool meets_plus = false;
  bool meets_minus = false;
  bool inside_plus = false;
  bool inside_minus = false;
};

struct BoundaryValidation {
  bool passed = true;
  std::vector<BoundaryComponent> components;  // all Gamma_1 components
  std::vector<std::size_t> offending;         // indices into components
};

/// Every connected component of Gamma_1 that meets the closure of the plus
/// (resp. minus) region must lie entirely inside that closure.
inline BoundaryValidation validate_boundary_components(const Grid& grid, const WeightField& weight) {
  BoundaryValidation out;
  const Mask plus_closure = region_closure(grid, weight.plus);
  const Mask minus_closure = region_closure(grid, weight.minus);

  std::vector<std::uint8_t> seen(grid.size(), 0);
  for (std::size_t start = 0; start < grid.size(); ++start) {
    if (seen[start] || grid.tag(start) != BoundaryTag::robin) continue;
    BoundaryComponent comp;
    std::vector<std::size_t> stack{start};
    seen[start] = 1;
    while (!stack.empty()) {
      const std::size_t i = stack.back();
      stack.pop_back();
      comp.nodes.push_back(i);
      const auto idx = grid.lattice_index(i);
      const int reach = grid.dimension() == 2 ? 1 : 0;
      for (int dx = -1; dx <= 1; ++dx) {
        for (int dy = -reach; dy <= reach; ++dy) {
          const std::size_t j = grid.node_at(idx[0] + dx, idx[1] + dy);
          if (j == Grid::npos || seen[j] || grid.tag(j) != BoundaryTag::robin) continue;
          seen[j] = 1;
          stack.push_back(j);
        }
      }
    }
    std::sort(comp.nodes.begin(), comp.nodes.end());
    comp.inside_plus = comp.inside_minus = true;
    for (std::size_t i : comp.nodes) {
      comp.meets_plus = comp.meets_plus || plus_closure[i];
      comp.meets_minus = comp.meets_minus || minus_closure[i];
      comp.inside_plus = comp.inside_plus && plus_closure[i];
      comp.inside_minus = comp.inside_minus && minus_closure[i];
    }
    const bool ok = (!comp.meets_plus || comp.inside_plus) && (!comp.meets_minus || comp.inside_minus);
    if (!ok) out.offending.push_back(out.components.size());
    out.components.push_back(std::move(comp));
  }
  out.passed = out.offending.empty();
  return out;
}

}  // namespace blowup
