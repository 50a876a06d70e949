#pragma once

// Experiment orchestration: one pipeline per subcommand, each writing its
// outputs plus a manifest_<subcommand>.json into the output directory.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "blowup_lab/config.hpp"
#include "blowup_lab/continuation.hpp"
#include "blowup_lab/eigen.hpp"
#include "blowup_lab/error.hpp"
#include "blowup_lab/estimates.hpp"
#include "blowup_lab/geometry.hpp"
#include "blowup_lab/io.hpp"
#include "blowup_lab/operator.hpp"
#include "blowup_lab/solve.hpp"

namespace blowup {

namespace exit_code {
inline constexpr int ok = 0;
inline constexpr int other = 1;
inline constexpr int config = 2;
inline constexpr int solver = 3;
inline constexpr int estimate = 4;
}  // namespace exit_code

inline const std::vector<std::string>& subcommands() {
  static const std::vector<std::string> names{"solve", "branch", "eigen", "harnack", "blowup", "exponents", "report"};
  return names;
}

struct StageTiming {
  std::string stage;
  double seconds = 0.0;
};

struct RunManifest {
  std::string subcommand;
  std::uint64_t seed = 0;
  std::string status = "ok";  // ok | estimate-failure | failure
  int exit_code = exit_code::ok;
  Json failure;  // stage, kind, message when status is failure
  std::vector<FileRecord> files;
  std::vector<StageTiming> timings;
  std::map<std::string, std::string> config;
};

inline Json to_json(const RunManifest& m) {
  Json files = Json::array();
  for (const auto& f : m.files) files.push_back({{"path", f.path}, {"sha256", f.sha256}, {"bytes", f.bytes}});
  Json timings = Json::array();
  for (const auto& t : m.timings) timings.push_back({{"stage", t.stage}, {"seconds", t.seconds}});
  Json j{{"schema_version", kSchemaVersion},
         {"artifact_version", kArtifactVersion},
         {"subcommand", m.subcommand},
         {"seed", m.seed},
         {"status", m.status},
         {"exit_code", m.exit_code},
         {"config", m.config},
         {"files", files},
         {"timings", timings}};
  if (!m.failure.is_null()) j["failure"] = m.failure;
  return j;
}

/// Grid, operator, weight and problem built from a configuration.
struct Setup {
  GridPtr grid;
  std::shared_ptr<const DiscreteOperator> op;
  std::shared_ptr<const WeightField> weight;
  ProblemInstance problem;
  std::optional<Vector> exact;  // manufactured solution when configured
};

/// u* = sin(pi x) (1D) or sin(pi x) sin(pi y) (2D) on the unit interval or
/// square with identity diffusion; f = L u* - lambda u* - a u*^r.
inline std::pair<Vector, Vector> manufactured(const Grid& grid, const WeightField& w, double lambda, double r) {
  const auto& spec = grid.spec();
  bool unit = spec.shape == Shape::box;
  for (int k = 0; k < grid.dimension(); ++k) {
    unit = unit && spec.extents[static_cast<std::size_t>(k)].lo == 0.0 && spec.extents[static_cast<std::size_t>(k)].hi == 1.0;
  }
  if (!unit) throw InvalidArgument("manufactured forcing needs the unit interval or unit square");
  const double pi = std::numbers::pi;
  const double sigma = grid.dimension() * pi * pi;
  Vector exact(static_cast<Index>(grid.size()));
  Vector f(static_cast<Index>(grid.size()));
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const Point& p = grid.coord(i);
    double u = std::sin(pi * p[0]);
    if (grid.dimension() == 2) u *= std::sin(pi * p[1]);
    if (grid.is_boundary(i)) u = 0.0;
    exact[static_cast<Index>(i)] = u;
    f[static_cast<Index>(i)] = sigma * u - lambda * u - w.values[i] * std::pow(u, r);
  }
  return {exact, f};
}

inline Setup make_setup(const ExperimentConfig& c) {
  Setup s;
  s.grid = make_grid(c.domain);
  auto diffusion = make_diffusion(*s.grid, c.diffusion, c.diffusion_constant);
  s.op = std::make_shared<const DiscreteOperator>(assemble(s.grid, diffusion, make_boundary(*s.grid, c.beta)));
  s.weight = std::make_shared<const WeightField>(build_weight(*s.grid, c.weight));
  s.problem.op = s.op;
  s.problem.weight = s.weight;
  s.problem.r = c.r;
  s.problem.lambda = c.lambda;
  if (c.forcing == Forcing::manufactured) {
    if (c.diffusion != DiffusionPreset::identity || s.grid->tag(0) == BoundaryTag::robin) {
      throw InvalidArgument("manufactured forcing needs identity diffusion and Dirichlet boundary");
    }
    auto [exact, f] = manufactured(*s.grid, *s.weight, c.lambda, c.r);
    s.exact = std::move(exact);
    s.problem.forcing = std::move(f);
  }
  s.problem.validate();
  return s;
}

// ---------------------------------------------------------------------------
// JSON renderings

inline Json point_json(const Grid& g, std::size_t i) {
  Json p = Json::array({g.coord(i)[0]});
  if (g.dimension() == 2) p.push_back(g.coord(i)[1]);
  return p;
}

inline Json to_json(const Grid& g, const Solution& s) {
  return {{"lambda", s.lambda},
          {"residual", s.residual},
          {"iterations", s.iterations},
          {"classification", to_string(s.classification)},
          {"sup_omega", s.sup_omega},
          {"sup_plus", json_number(s.sup_plus)},
          {"argmax_node", s.argmax_plus},
          {"argmax_x", point_json(g, s.argmax_plus)}};
}

inline Json to_json(const EigenPair& e) {
  return {{"sigma", e.sigma}, {"residual", e.residual}, {"iterations", e.iterations}, {"weighted", e.weighted}};
}

inline Json to_json(const BlowupReport& r) {
  Json rows = Json::array();
  for (const auto& row : r.rows) {
    rows.push_back({{"member", row.member}, {"M", row.M}, {"C", json_number(row.C)}, {"rejected", row.rejected},
                    {"reason", row.reason}});
  }
  return {{"theta", r.theta}, {"q", r.q}, {"r", r.r}, {"rows", rows}, {"stability", json_number(r.stability)},
          {"C_fit", r.C_fit}, {"window", r.window}, {"pass", r.pass}};
}

inline Json to_json(const EigenIdentityRow& r) {
  return {{"lambda", r.lambda},   {"M", r.M},
          {"I1", r.I1},           {"I2", r.I2},
          {"flux", r.flux},       {"defect", r.defect},
          {"I1_lower", r.I1_lower}, {"I2_lower", r.I2_lower},
          {"flux_negative", r.flux_negative}, {"sum_negative", r.sum_negative},
          {"I1_bound", r.I1_bound}, {"I2_bound", r.I2_bound},
          {"consistent", r.consistent}};
}

// ---------------------------------------------------------------------------
// Runner

namespace detail {

class Run {
 public:
  Run(const std::string& sub, const ExperimentConfig& c, const std::filesystem::path& dir)
      : out(dir), config(c) {
    manifest.subcommand = sub;
    manifest.seed = c.seed;
    manifest.config = c.echo;
  }

  template <class F>
  auto stage(const std::string& name, int failure_code, F&& f) {
    current_ = name;
    code_ = failure_code;
    const auto t0 = std::chrono::steady_clock::now();
    if constexpr (std::is_void_v<decltype(f())>) {
      f();
      finish(name, t0);
    } else {
      auto v = f();
      finish(name, t0);
      return v;
    }
  }

  void estimate_failed(const std::string& what) {
    if (manifest.exit_code == exit_code::ok) {
      manifest.status = "estimate-failure";
      manifest.exit_code = exit_code::estimate;
    }
    failed_checks.push_back(what);
  }

  void solver_failed(const std::string& stage, const std::string& message) {
    manifest.status = "failure";
    manifest.exit_code = exit_code::solver;
    manifest.failure = {{"stage", stage}, {"kind", "solver"}, {"message", message}};
  }

  void fail(const std::exception& e) {
    int code = code_;
    std::string kind = "error";
    if (dynamic_cast<const ConvergenceFailure*>(&e) || dynamic_cast<const SingularMatrix*>(&e)) {
      code = exit_code::solver;
      kind = "solver";
    } else if (dynamic_cast<const HypothesisViolation*>(&e) || dynamic_cast<const ParseError*>(&e)) {
      kind = "hypothesis";
    } else if (dynamic_cast<const PreconditionViolation*>(&e)) {
      kind = "precondition";
    }
    manifest.status = "failure";
    manifest.exit_code = code;
    manifest.failure = {{"stage", current_}, {"kind", kind}, {"message", e.what()}};
  }

  RunManifest finalize() {
    manifest.files = out.files();
    const std::string name = "manifest_" + manifest.subcommand + ".json";
    const auto path = out.dir() / name;
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    f << to_json(manifest).dump(2) << "\n";
    return manifest;
  }

  OutputSet out;
  const ExperimentConfig& config;
  RunManifest manifest;
  std::vector<std::string> failed_checks;

 private:
  void finish(const std::string& name, std::chrono::steady_clock::time_point t0) {
    const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    manifest.timings.push_back({name, s});
  }

  std::string current_ = "setup";
  int code_ = exit_code::other;
};

inline Json header(const std::string& kind, const ExperimentConfig& c) {
  return {{"schema_version", kSchemaVersion}, {"kind", kind}, {"seed", c.seed}};
}

inline Vector initial_guess(const ExperimentConfig& c, const Setup& s) {
  switch (c.initial) {
    case InitialGuess::zero: return Vector::Zero(static_cast<Index>(s.grid->size()));
    case InitialGuess::half_manufactured:
      if (!s.exact) throw InvalidArgument("initial = half_manufactured needs forcing = manufactured");
      return 0.5 * *s.exact;
    case InitialGuess::sub_super: break;
  }
  return sub_super_init(s.problem);
}

inline StopCriteria stop_criteria(const ExperimentConfig& c) {
  return {c.continuation.sup_ceiling, c.continuation.lambda_min, c.continuation.lambda_max};
}

inline Branch trace_branch(const Setup& s, const ExperimentConfig& c) {
  const Solution start = start_near_bifurcation(s.problem, c.continuation.start_amplitude, c.continuation.step);
  return trace(s.problem, start, c.continuation.step, stop_criteria(c));
}

inline std::string branch_csv(const Grid& g, const Branch& b, const Mask& plus) {
  const DistanceField d = distance_field(g, plus);
  std::vector<std::string> header{"arclength", "lambda", "sup_omega", "sup_plus", "argmax_x"};
  if (g.dimension() == 2) header.push_back("argmax_y");
  for (const char* h : {"dist_plus", "fold", "step", "residual"}) header.emplace_back(h);
  CsvWriter w(header);
  std::vector<std::uint8_t> fold(b.points.size(), 0);
  for (const auto& f : b.folds) fold[f.index] = 1;
  for (std::size_t k = 0; k < b.points.size(); ++k) {
    const Solution& s = b.points[k];
    w.cell(b.arclength[k]).cell(s.lambda).cell(s.sup_omega).cell(s.sup_plus).cell(g.coord(s.argmax_plus)[0]);
    if (g.dimension() == 2) w.cell(g.coord(s.argmax_plus)[1]);
    w.cell(d.values[s.argmax_plus]).cell(int(fold[k])).cell(k == 0 ? 0.0 : b.steps[k - 1]).cell(s.residual);
    w.end_row();
  }
  return w.str();
}

inline Json branch_json(const Grid& g, const Branch& b) {
  Json folds = Json::array();
  for (const auto& f : b.folds) folds.push_back({{"index", f.index}, {"lambda", f.lambda}});
  double max_ratio = 0.0;
  for (const auto& s : b.points) {
    const auto t = bounds_transfer(s);
    if (!t.degenerate) max_ratio = std::max(max_ratio, t.ratio);
  }
  return {{"points", b.points.size()},
          {"termination", to_string(b.reason)},
          {"detail", b.detail},
          {"folds", folds},
          {"first", to_json(g, b.points.front())},
          {"last", to_json(g, b.points.back())},
          {"max_bounds_ratio", max_ratio}};
}

// ---------------------------------------------------------------------------
// Pipelines

inline void run_solve(Run& run) {
  const auto& c = run.config;
  const Setup s = run.stage("setup", exit_code::config, [&] { return make_setup(c); });
  const Vector u0 = run.stage("initial_guess", exit_code::solver, [&] { return initial_guess(c, s); });
  const Solution sol = run.stage("newton", exit_code::solver, [&] { return newton(s.problem, u0, c.newton); });
  run.stage("write", exit_code::other, [&] {
    Json j = header("solve", c);
    j["solution"] = to_json(*s.grid, sol);
    j["r"] = c.r;
    j["tol"] = c.newton.tol;
    if (s.exact) {
      const Vector err = sol.u - *s.exact;
      j["max_error"] = sup_norm(err);
      run.out.write("solution.csv", nodal_csv(*s.grid, {{"u", &sol.u}, {"exact", &*s.exact}}));
    } else {
      run.out.write("solution.csv", nodal_csv(*s.grid, {{"u", &sol.u}}));
    }
    run.out.write_json("solve.json", j);
  });
}

inline void run_branch(Run& run) {
  const auto& c = run.config;
  const Setup s = run.stage("setup", exit_code::config, [&] { return make_setup(c); });
  const Branch b = run.stage("trace", exit_code::solver, [&] { return trace_branch(s, c); });
  run.stage("write", exit_code::other, [&] {
    run.out.write("branch.csv", branch_csv(*s.grid, b, s.weight->plus));
    Json j = header("branch", c);
    j["branch"] = branch_json(*s.grid, b);
    run.out.write_json("branch.json", j);
  });
  if (b.reason == TerminationReason::solver_failure) run.solver_failed("trace", b.detail);
}

inline void run_eigen(Run& run) {
  const auto& c = run.config;
  const Setup s = run.stage("setup", exit_code::config, [&] { return make_setup(c); });
  const Mask& plus = s.weight->plus;
  const EigenPair whole = run.stage("dirichlet_domain", exit_code::solver, [&] {
    return principal_dirichlet(*s.op, s.grid->all_nodes());
  });
  const EigenPair unweighted = run.stage("dirichlet_plus", exit_code::solver, [&] {
    return principal_dirichlet(*s.op, plus);
  });
  const EigenPair weighted = run.stage("weighted_plus", exit_code::solver, [&] {
    return principal_weighted(*s.op, *s.weight, plus);
  });
  run.stage("write", exit_code::other, [&] {
    const BoundaryFlux flux = boundary_flux(*s.op, weighted.phi, plus);
    Json j = header("eigen", c);
    j["dirichlet_domain"] = to_json(whole);
    j["dirichlet_plus"] = to_json(unweighted);
    j["weighted_plus"] = to_json(weighted);
    j["weighted_flux_all_negative"] = all_negative(flux);
    j["weighted_flux_max"] = flux.flux.empty() ? Json(nullptr) : Json(*std::max_element(flux.flux.begin(), flux.flux.end()));
    run.out.write("eigen_dirichlet.csv", nodal_csv(*s.grid, {{"phi", &whole.phi}}));
    run.out.write("eigen_plus.csv", nodal_csv(*s.grid, {{"phi", &unweighted.phi}}));
    run.out.write("eigen_weighted.csv", nodal_csv(*s.grid, {{"phi", &weighted.phi}}));
    run.out.write_json("eigen.json", j);
  });
}

inline double harnack_q(const ExperimentConfig& c) {
  if (c.harnack.q) return *c.harnack.q;
  const int n = c.domain.dimension;
  const double q = c.estimate_q();
  return q < harnack_q_limit(n) ? q : 0.5 * (1.0 + harnack_q_limit(n));
}

inline void run_harnack(Run& run) {
  const auto& c = run.config;
  const Setup s = run.stage("setup", exit_code::config, [&] { return make_setup(c); });
  const Mask mask = s.grid->all_nodes();
  const double q = harnack_q(c);
  const auto specs = draw_supersolutions(*s.grid, c.harnack.count, c.seed);
  const auto family = run.stage("family", exit_code::solver, [&] { return realize_supersolutions(*s.op, specs); });
  const auto ladder_family = boundary_concentrating_family(*s.grid, mask, c.harnack.ks);
  std::vector<double> ladder;
  for (double qq : c.harnack.ladder) {
    if (qq < harnack_q_limit(s.grid->dimension())) ladder.push_back(qq);
  }
  const HarnackReport rep = run.stage("check", exit_code::estimate, [&] {
    return check_weak_harnack(*s.op, family, mask, q, ladder, ladder_family);
  });
  run.stage("write", exit_code::other, [&] {
    CsvWriter w({"member", "c0", "bumps", "ratio"});
    for (std::size_t m = 0; m < specs.size(); ++m) {
      w.cell(m).cell(specs[m].c0).cell(specs[m].bumps.size()).cell(rep.ratios[m]);
      w.end_row();
    }
    run.out.write("harnack.csv", w.str());
    Json j = header("harnack", c);
    Json lad = Json::array();
    for (const auto& p : rep.ladder) lad.push_back({{"q", p.q}, {"C", p.C}});
    j["report"] = {{"q", rep.q}, {"C", rep.C}, {"ratios", rep.ratios}, {"pass", rep.pass}, {"ladder", lad},
                   {"ladder_ks", c.harnack.ks}};
    run.out.write_json("harnack.json", j);
  });
  if (!rep.pass) run.estimate_failed("weak Harnack constant not finite");
}

inline void run_blowup(Run& run) {
  const auto& c = run.config;
  const Setup s = run.stage("setup", exit_code::config, [&] { return make_setup(c); });
  const Grid& g = *s.grid;
  const Mask& plus = s.weight->plus;
  const Branch b = run.stage("trace", exit_code::solver, [&] { return trace_branch(s, c); });
  const BlowupSequence seq = blowup_sequence(b, c.continuation.thresholds, g, plus);
  const double q = c.estimate_q();

  Json reports;
  Json rows = Json::array();
  run.stage("estimates", exit_code::estimate, [&] {
    // 1. blow-up rate
    std::optional<BlowupReport> rate;
    if (seq.members.empty()) {
      reports["blowup_estimate"] = {{"pass", false}, {"note", "empty blow-up sequence"}};
    } else {
      rate = check_blowup_estimate(seq, q, g, plus, c.r, c.stability_tol);
      reports["blowup_estimate"] = to_json(*rate);
    }
    if (!rate || !rate->pass) run.estimate_failed("blowup_estimate");

    // 2. rescaling flatness and argmax drift
    std::vector<double> flat, drift;
    Json frows = Json::array();
    for (const auto& m : seq.members) {
      const RescaledField v = rescale(g, m.solution.u, m.M, m.argmax, c.r, c.R);
      const Flatness f = flatness(v);
      flat.push_back(f.value);
      drift.push_back(m.dist_plus);
      frows.push_back({{"M", m.M}, {"nu", v.nu}, {"v0", v.values[v.values.size() / 2]}, {"flatness", f.value},
                       {"available", f.available}, {"missing", f.missing}, {"dist_plus", m.dist_plus}});
    }
    const bool flat_ok = flat.size() >= 2 && increases(flat) == 0 && flat.back() < flat.front();
    const bool drift_ok = drift.size() >= 2 && increases(drift) == 0;
    reports["rescaling"] = {{"R", c.R}, {"rows", frows}, {"flatness_decreasing", flat_ok},
                            {"argmax_drift_nonincreasing", drift_ok}, {"pass", flat_ok && drift_ok}};
    if (!(flat_ok && drift_ok)) run.estimate_failed("rescaling");

    // 3. sublevel decay
    const SublevelReport sub = sublevel_decay(seq, c.L, g, plus, c.sublevel_factor);
    reports["sublevel_decay"] = {{"L", c.L}, {"series", sub.series}, {"strictly_decreasing", sub.strictly_decreasing},
                                 {"pass", sub.pass && sub.strictly_decreasing}};
    if (!(sub.pass && sub.strictly_decreasing)) run.estimate_failed("sublevel_decay");

    // 4. collar inclusion
    if (rate && rate->C_fit > 0.0) {
      const CollarReport col = collar_inclusion(seq, c.L, q, rate->C_fit, g, plus, c.r);
      Json crow = Json::array();
      for (const auto& r : col.rows) {
        crow.push_back({{"member", r.member}, {"radius", r.radius}, {"sublevel_nodes", r.sublevel_nodes},
                        {"violations", r.violations}});
      }
      reports["collar_inclusion"] = {{"C_fit", rate->C_fit}, {"rows", crow}, {"violations", col.violations},
                                     {"pass", col.violations == 0}};
      if (col.violations != 0) run.estimate_failed("collar_inclusion");
    } else {
      reports["collar_inclusion"] = {{"pass", false}, {"note", "no positive C_fit available"}};
      run.estimate_failed("collar_inclusion");
    }

    // 5. eigenvalue identity
    const EigenPair pair = principal_weighted(*s.op, *s.weight, plus);
    std::vector<Solution> members;
    for (const auto& m : seq.members) members.push_back(m.solution);
    const EigenIdentityReport id = eigen_identity(s.problem, members, pair, c.identity_L.value_or(0.0));
    Json irows = Json::array();
    bool id_ok = !id.rows.empty();
    for (const auto& r : id.rows) {
      irows.push_back(to_json(r));
      id_ok = id_ok && r.flux_negative && r.sum_negative && r.I1_bound && r.I2_bound && r.consistent;
    }
    Json diag = Json::array();
    for (std::size_t k = b.points.size() >= 5 ? b.points.size() - 5 : 0; k < b.points.size(); ++k) {
      diag.push_back(to_json(eigen_identity_row(s.problem, b.points[k], pair, id.L, id.eps)));
    }
    reports["eigen_identity"] = {{"sigma", id.sigma}, {"L", id.L}, {"eps", id.eps}, {"rows", irows},
                                 {"branch_tail", diag}, {"pass", id_ok}};
    if (!id_ok) run.estimate_failed("eigen_identity");

    // 6. bounds transfer along the branch
    std::vector<double> ratios;
    for (const auto& p : b.points) {
      const auto t = bounds_transfer(p);
      if (!t.degenerate) ratios.push_back(t.ratio);
    }
    const double max_ratio = ratios.empty() ? kInf : *std::max_element(ratios.begin(), ratios.end());
    reports["bounds_transfer"] = {{"max_ratio", json_number(max_ratio)}, {"points", ratios.size()},
                                  {"pass", std::isfinite(max_ratio)}};
    if (!std::isfinite(max_ratio)) run.estimate_failed("bounds_transfer");

    for (std::size_t n = 0; n < seq.members.size(); ++n) {
      rows.push_back({{"n", n},
                      {"M", seq.members[n].M},
                      {"C", rate ? json_number(rate->rows[n].C) : Json(nullptr)},
                      {"flatness", flat[n]},
                      {"sublevel", sub.series[n]},
                      {"I1", id.rows[n].I1},
                      {"I2", id.rows[n].I2},
                      {"flux", id.rows[n].flux}});
    }
  });

  run.stage("write", exit_code::other, [&] {
    run.out.write("blowup_branch.csv", branch_csv(g, b, plus));
    CsvWriter w({"n", "M", "C", "flatness", "sublevel", "I1", "I2", "flux"});
    for (const auto& r : rows) {
      w.cell(r["n"].get<std::size_t>()).cell(r["M"].get<double>());
      w.cell(r["C"].is_number() ? r["C"].get<double>() : std::nan(""));
      for (const char* k : {"flatness", "sublevel", "I1", "I2", "flux"}) w.cell(r[k].get<double>());
      w.end_row();
    }
    run.out.write("blowup_rows.csv", w.str());
    for (std::size_t n = 0; n < seq.members.size(); ++n) {
      run.out.write("member_" + std::to_string(n) + ".csv", nodal_csv(g, {{"u", &seq.members[n].solution.u}}));
    }
    Json j = header("blowup", c);
    j["q"] = q;
    j["r"] = c.r;
    j["thresholds"] = c.continuation.thresholds;
    j["branch"] = branch_json(g, b);
    Json members = Json::array();
    for (const auto& m : seq.members) {
      members.push_back({{"threshold", m.threshold}, {"branch_index", m.branch_index}, {"M", m.M},
                         {"lambda", m.solution.lambda}, {"argmax_x", point_json(g, m.argmax)},
                         {"dist_plus", m.dist_plus}});
    }
    j["members"] = members;
    j["warnings"] = seq.warnings;
    j["reports"] = reports;
    j["rows"] = rows;
    j["failed_checks"] = run.failed_checks;
    run.out.write_json("blowup.json", j);
  });
  if (b.reason == TerminationReason::solver_failure) run.solver_failed("trace", b.detail);
}

inline void run_exponents(Run& run) {
  const auto& c = run.config;
  const CriticalExponents e = run.stage("calculate", exit_code::config, [&] {
    return critical_exponents(c.exponents.N, c.exponents.gamma);
  });
  run.stage("write", exit_code::other, [&] {
    Json j = header("exponents", c);
    j["N"] = c.exponents.N;
    j["gamma"] = c.exponents.gamma ? Json(*c.exponents.gamma) : Json(nullptr);
    j["p_BT"] = json_number(e.p_BT);
    j["p_GS"] = json_number(e.p_GS);
    j["alg_bound"] = e.alg_bound ? json_number(*e.alg_bound) : Json(nullptr);
    run.out.write_json("exponents.json", j);
  });
}

/// Re-renders existing JSON reports in the output directory as CSV.
inline void run_report(Run& run) {
  const auto& dir = run.out.dir();
  std::size_t rendered = 0;
  const auto cell = [](CsvWriter& w, const Json& v) {
    if (v.is_number()) {
      w.cell(v.get<double>());
    } else if (v.is_boolean()) {
      w.cell(v.get<bool>() ? 1 : 0);
    } else if (v.is_null()) {
      w.cell("nan");
    } else {
      w.cell(v.is_string() ? v.get<std::string>() : v.dump());
    }
  };
  const auto table = [&](const std::string& name, const Json& rows) {
    if (!rows.is_array() || rows.empty()) return;
    std::vector<std::string> cols;
    for (const auto& [k, v] : rows.front().items()) cols.push_back(k);
    CsvWriter w(cols);
    for (const auto& r : rows) {
      for (const auto& k : cols) cell(w, r.contains(k) ? r[k] : Json(nullptr));
      w.end_row();
    }
    run.out.write(name, w.str());
    ++rendered;
  };
  run.stage("render", exit_code::other, [&] {
    if (std::filesystem::exists(dir / "blowup.json")) {
      const Json j = Json::parse(read_file(dir / "blowup.json"));
      table("report_blowup_rows.csv", j["rows"]);
      table("report_blowup_members.csv", j["members"]);
      if (j["reports"].contains("eigen_identity")) table("report_eigen_identity.csv", j["reports"]["eigen_identity"]["branch_tail"]);
      Json verdicts = Json::array();
      for (const auto& [k, v] : j["reports"].items()) verdicts.push_back({{"report", k}, {"pass", v["pass"]}});
      table("report_blowup_verdicts.csv", verdicts);
    }
    if (std::filesystem::exists(dir / "harnack.json")) {
      const Json j = Json::parse(read_file(dir / "harnack.json"));
      table("report_harnack_ladder.csv", j["report"]["ladder"]);
    }
    for (const char* name : {"eigen.json", "solve.json", "exponents.json"}) {
      if (!std::filesystem::exists(dir / name)) continue;
      const Json j = Json::parse(read_file(dir / name));
      Json flat = Json::array();
      const Json leaves = j.flatten();
      for (const auto& [k, v] : leaves.items()) flat.push_back({{"key", k}, {"value", v}});
      table(std::string("report_") + std::string(name).substr(0, std::string(name).find('.')) + ".csv", flat);
    }
    if (rendered == 0) throw Error("report: no JSON reports found in " + dir.string());
  });
}

}  // namespace detail

/// Executes one subcommand and writes its manifest. Never throws for stage
/// failures; they are recorded in the manifest and its exit code.
inline RunManifest run(const std::string& subcommand, const ExperimentConfig& config,
                       const std::filesystem::path& out_dir) {
  const auto& names = subcommands();
  if (std::find(names.begin(), names.end(), subcommand) == names.end()) {
    throw InvalidArgument("unknown subcommand '" + subcommand + "'");
  }
  detail::Run r(subcommand, config, out_dir);
  try {
    if (subcommand == "solve") detail::run_solve(r);
    if (subcommand == "branch") detail::run_branch(r);
    if (subcommand == "eigen") detail::run_eigen(r);
    if (subcommand == "harnack") detail::run_harnack(r);
    if (subcommand == "blowup") detail::run_blowup(r);
    if (subcommand == "exponents") detail::run_exponents(r);
    if (subcommand == "report") detail::run_report(r);
  } catch (const std::exception& e) {
    r.fail(e);
  }
  return r.finalize();
}

}  // namespace blowup
