// Acceptance run: one PASS/FAIL line per criterion, tolerances pinned below.

#include <boost/rational.hpp>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <random>
#include <string>

#include "blowup_lab/blowup_lab.hpp"
#include "blowup_lab/config.hpp"
#include "blowup_lab/io.hpp"
#include "blowup_lab/pipeline.hpp"
#include "support.hpp"

using namespace blowup;
using namespace blowup::testing;

namespace {

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

struct Verdict {
  bool pass = true;
  void require(bool ok, const char* what, const std::string& detail) {
    std::printf("    %-58s %s  %s\n", what, ok ? "ok  " : "FAIL", detail.c_str());
    pass = pass && ok;
  }
};

std::string fmt(const char* f, double a, double b = 0.0, double c = 0.0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c);
  return buf;
}

int failures = 0;

void report(int n, const Verdict& v, double secs) {
  std::printf("criterion %d: %s (%.2f s)\n", n, v.pass ? "PASS" : "FAIL", secs);
  std::fflush(stdout);
  failures += v.pass ? 0 : 1;
}

void criterion1(Verdict& v) {
  auto t0 = std::chrono::steady_clock::now();
  {
    auto g = line(257);
    const double s = principal_dirichlet(*laplacian(g), g->all_nodes()).sigma;
    v.require(std::abs(s - kPi * kPi) <= 5e-3, "1D Dirichlet |sigma - pi^2| <= 5e-3", fmt("sigma = %.8f", s));
  }
  v.require(seconds_since(t0) <= 10.0, "1D runtime <= 10 s", fmt("%.2f s", seconds_since(t0)));
  t0 = std::chrono::steady_clock::now();
  {
    auto g = square(65);
    const double s = principal_dirichlet(*laplacian(g), g->all_nodes()).sigma;
    v.require(std::abs(s - 2.0 * kPi * kPi) <= 5e-2, "2D Dirichlet |sigma - 2 pi^2| <= 5e-2", fmt("sigma = %.8f", s));
  }
  v.require(seconds_since(t0) <= 10.0, "2D runtime <= 10 s", fmt("%.2f s", seconds_since(t0)));
  t0 = std::chrono::steady_clock::now();
  {
    auto g = line(257);
    auto op = laplacian(g);
    const WeightField w = sign_pattern(*g, interval(0.3, 0.7), 2.0);
    const double s1 = principal_dirichlet(*op, w.plus).sigma;
    const double s2 = principal_weighted(*op, w, w.plus).sigma;
    const double rel = std::abs(s2 - 0.5 * s1) / (0.5 * s1);
    v.require(rel <= 1e-8, "weighted |sigma(a=2) - sigma/2| <= 1e-8 rel", fmt("rel = %.3e", rel));
  }
  v.require(seconds_since(t0) <= 10.0, "weighted runtime <= 10 s", fmt("%.2f s", seconds_since(t0)));
}

void criterion2(Verdict& v) {
  std::vector<double> err, hs;
  for (int nodes : {65, 129, 257}) {
    auto g = line(nodes);
    ProblemInstance p = problem(laplacian(g), constant_weight(*g, 1.0), 2.0, 0.0);
    p.forcing = nodal_dirichlet(*g, [](const Point& x) {
      const double s = std::sin(kPi * x[0]);
      return kPi * kPi * s - s * s;
    });
    const Vector exact = nodal(*g, [](const Point& x) { return std::sin(kPi * x[0]); });
    const Solution s = newton(p, Vector(0.5 * exact));
    v.require(s.iterations <= 10, "Newton iterations <= 10", fmt("h = 1/%.0f: %.0f iterations", nodes - 1.0, s.iterations));
    err.push_back((s.u - exact).cwiseAbs().maxCoeff());
    hs.push_back(g->spacing());
  }
  for (int k = 0; k < 2; ++k) {
    const double m = slope(hs[k], err[k], hs[k + 1], err[k + 1]);
    v.require(m >= 1.8 && m <= 2.2, "sup-error slope in [1.8, 2.2]", fmt("slope = %.4f", m));
  }
}

void criterion3(Verdict& v) {
  std::mt19937_64 rng(20240611);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  double worst = 0.0;
  for (int prob = 0; prob < 3; ++prob) {
    auto g = square(17 + 8 * prob);
    const double x0 = 0.1 + 0.3 * u01(rng), y0 = 0.1 + 0.3 * u01(rng);
    const WeightField w = sign_pattern(*g, rect(x0, x0 + 0.4, y0, y0 + 0.4), 0.5 + u01(rng), -0.5 - u01(rng));
    const DiffusionPreset preset = prob == 1 ? DiffusionPreset::smooth : DiffusionPreset::constant;
    const SymMatrix2 a{1.0 + u01(rng), 0.3 * (u01(rng) - 0.5), 1.0 + u01(rng)};
    ProblemInstance p;
    p.op = std::make_shared<const DiscreteOperator>(assemble(g, make_diffusion(*g, preset, a), make_boundary(*g, 0.0)));
    p.weight = std::make_shared<const WeightField>(w);
    p.r = 1.5 + 2.0 * u01(rng);
    p.lambda = 20.0 * u01(rng);
    for (int point = 0; point < 20; ++point) {
      Vector u(static_cast<Index>(p.size())), d(static_cast<Index>(p.size()));
      for (Index i = 0; i < u.size(); ++i) {
        u[i] = 0.1 + 3.0 * u01(rng);
        d[i] = u01(rng) - 0.5;
      }
      const double eps = 1e-7 * (1.0 + u.norm()) / d.norm();
      const Vector fd = (residual(*p.op, Vector(u + eps * d), p.lambda, *p.weight, p.r) -
                         residual(*p.op, Vector(u - eps * d), p.lambda, *p.weight, p.r)) /
                        (2.0 * eps);
      const Vector jv = jacobian(p, u) * d;
      worst = std::max(worst, (fd - jv).norm() / jv.norm());
    }
  }
  v.require(worst <= 1e-6, "max relative FD mismatch <= 1e-6 (60 points)", fmt("%.3e", worst));
}

double family_constant(int nodes, std::size_t count, std::uint64_t seed, double q) {
  auto g = square(nodes);
  auto op = laplacian(g);
  const auto fam = realize_supersolutions(*op, draw_supersolutions(*g, count, seed));
  const HarnackReport rep = check_weak_harnack(*op, fam, g->all_nodes(), q);
  for (double r : rep.ratios) {
    if (!std::isfinite(r)) return kInf;
  }
  return rep.C;
}

void criterion4(Verdict& v) {
  {
    auto g = line(257);
    auto op = laplacian(g);
    const DistanceField d = distance_field(*g, g->all_nodes());
    const std::vector<Vector> fam{nodal(*g, [](const Point& x) { return x[0]; }),
                                  Vector::Ones(static_cast<Index>(g->size())),
                                  Eigen::Map<const Vector>(d.values.data(), static_cast<Index>(g->size()))};
    const double expect[] = {0.5, 0.5, 0.25};
    const HarnackReport rep = check_weak_harnack(*op, fam, g->all_nodes(), 1.0);
    for (int k = 0; k < 3; ++k) {
      const double rel = std::abs(rep.ratios[k] - expect[k]) / expect[k];
      v.require(rel <= 0.02, "analytic ratio within 2%", fmt("ratio %.6f vs %.2f", rep.ratios[k], expect[k]));
    }
  }
  {
    const double c1 = family_constant(65, 50, 7, 1.2);
    const double c2 = family_constant(129, 50, 7, 1.2);
    v.require(std::isfinite(c1) && std::isfinite(c2), "50 random supersolutions: ratios finite",
              fmt("C(1/64) = %.6f, C(1/128) = %.6f", c1, c2));
    const double rel = std::abs(c1 - c2) / c2;
    v.require(rel <= 0.05, "fitted C stable within 5% under h-halving", fmt("rel change %.4f", rel));
  }
  {
    auto g = square(129);
    auto op = laplacian(g);
    const auto fam = boundary_concentrating_family(*g, g->all_nodes(), {1, 2, 4, 8});
    const HarnackReport rep = check_weak_harnack(*op, fam, g->all_nodes(), 1.1, {1.1, 1.5, 1.9});
    const double ratio = rep.ladder[2].C / rep.ladder[0].C;
    v.require(ratio >= 3.0, "C(q=1.9) >= 3 C(q=1.1) on d^(1/k)",
              fmt("C(1.1) = %.5f, C(1.9) = %.5f, ratio %.4f", rep.ladder[0].C, rep.ladder[2].C, ratio));
  }
}

// criteria 5 to 7 share one run of the reference configuration
struct ReferenceRun {
  ExperimentConfig config;
  Setup setup;
  Branch branch;
  BlowupSequence seq;
  double seconds = 0.0;
  std::optional<BlowupReport> rate;
};

ReferenceRun reference() {
  ReferenceRun run;
  const auto t0 = std::chrono::steady_clock::now();
  run.config = parse_config(std::string(BLOWUP_CONFIGS) + "/reference_1d.ini");
  run.setup = make_setup(run.config);
  run.branch = detail::trace_branch(run.setup, run.config);
  run.seq = blowup_sequence(run.branch, {10.0, 100.0, 1000.0}, *run.setup.grid, run.setup.weight->plus);
  run.seconds = seconds_since(t0);

  double top = 0.0, at = 0.0;
  for (const auto& s : run.branch.points) {
    if (s.sup_plus > top) {
      top = s.sup_plus;
      at = s.lambda;
    }
  }
  std::printf("  reference branch: %zu points, %zu folds, stop: %s\n", run.branch.points.size(),
              run.branch.folds.size(), to_string(run.branch.reason));
  std::printf("  largest sup over plus region %.4f at lambda = %.4f; %zu of 3 decades reached\n", top, at,
              run.seq.members.size());
  for (const auto& w : run.seq.warnings) std::printf("  warning: %s\n", w.c_str());
  return run;
}

void criterion5(Verdict& v, ReferenceRun& run) {
  const Grid& g = *run.setup.grid;
  const Mask& plus = run.setup.weight->plus;
  v.require(run.seq.members.size() == 3, "decades 10, 100, 1000 reached",
            fmt("%.0f members", static_cast<double>(run.seq.members.size())));
  if (!run.seq.members.empty()) {
    run.rate = check_blowup_estimate(run.seq, 1.0, g, plus, 3.0, 10.0, 2);
    v.require(run.rate->theta == 0.0, "theta = 0", fmt("theta = %g", run.rate->theta));
    v.require(run.rate->stability <= 10.0, "C_n stability over last two decades <= 10",
              fmt("ratio %.4f", run.rate->stability));
    std::vector<double> flat, drift;
    for (const auto& m : run.seq.members) {
      flat.push_back(flatness(rescale(g, m.solution.u, m.M, m.argmax, 3.0, 1.0)).value);
      drift.push_back(m.dist_plus);
    }
    v.require(flat.size() >= 2 && increases(flat) == 0 && flat.back() < flat.front(), "flatness on B_1 decreasing",
              flat.empty() ? "" : fmt("first %.4f last %.4f", flat.front(), flat.back()));
    v.require(increases(drift) == 0, "argmax distance to plus boundary nonincreasing",
              drift.empty() ? "" : fmt("first %.4f last %.4f", drift.front(), drift.back()));
  }
  v.require(run.seconds <= 60.0, "runtime <= 60 s", fmt("%.2f s", run.seconds));
}

void criterion6(Verdict& v, const ReferenceRun& run) {
  const Grid& g = *run.setup.grid;
  const Mask& plus = run.setup.weight->plus;
  v.require(!run.seq.members.empty(), "blow-up sequence available", fmt("%.0f members", static_cast<double>(run.seq.members.size())));
  if (!run.seq.members.empty()) {
    const SublevelReport sub = sublevel_decay(run.seq, 10.0, g, plus, 0.2);
    v.require(sub.strictly_decreasing, "m([u_n <= 10]) strictly decreasing", "");
    v.require(sub.pass, "final <= 0.2 initial", fmt("first %.5f last %.5f", sub.series.front(), sub.series.back()));
    if (run.rate && run.rate->C_fit > 0.0) {
      const CollarReport col = collar_inclusion(run.seq, 10.0, 1.0, run.rate->C_fit, g, plus, 3.0);
      v.require(col.violations == 0, "collar inclusion: zero violations", fmt("%.0f violations", static_cast<double>(col.violations)));
    } else {
      v.require(false, "collar inclusion: positive C_fit available", "");
    }
  }
}

void criterion7(Verdict& v, const ReferenceRun& run) {
  const ProblemInstance& p = run.setup.problem;
  const EigenPair pair = principal_weighted(*p.op, *p.weight, p.weight->plus);
  const double L = auto_identity_level(pair.sigma, p.r);
  const double eps = std::pow(L, p.r - 1.0) - pair.sigma;
  v.require(!run.seq.members.empty(), "blow-up sequence available", fmt("%.0f members", static_cast<double>(run.seq.members.size())));
  for (std::size_t n = 0; n < run.seq.members.size(); ++n) {
    const EigenIdentityRow row = eigen_identity_row(p, run.seq.members[n].solution, pair, L, eps);
    v.require(row.flux_negative && row.sum_negative && row.consistent, "member: flux < 0, I1 + I2 < 0, consistency",
              fmt("flux %.4e, I1+I2 %.4e, defect %.3e", row.flux, row.I1 + row.I2, row.defect));
  }
  if (run.seq.members.empty()) {
    // diagnostics only: the same identity on the last branch points
    const std::size_t n = run.branch.points.size();
    for (std::size_t k = n >= 3 ? n - 3 : 0; k < n; ++k) {
      const EigenIdentityRow row = eigen_identity_row(p, run.branch.points[k], pair, L, eps);
      std::printf("    info: branch point %zu (M = %.3f): flux %.4e, I1+I2 %.4e, defect %.3e\n", k, row.M, row.flux,
                  row.I1 + row.I2, row.defect);
    }
  }
  std::vector<double> d, hs;
  for (int nodes : {65, 129, 257}) {
    auto g = line(nodes);
    auto op = laplacian(g);
    const WeightField w = sign_pattern(*g, interval(0.3, 0.7));
    const EigenPair e = principal_dirichlet(*op, w.plus);
    const Vector u = nodal(*g, [](const Point& x) { return std::exp(x[0]) + std::cos(3.0 * x[0]); });
    d.push_back(green_identity_defect(*op, u, e.phi, w.plus));
    hs.push_back(g->spacing());
  }
  const double order = slope(hs[1], d[1], hs[2], d[2]);
  v.require(order >= 1.0, "Green defect refinement order >= 1", fmt("order %.4f", order));
}

void criterion8(Verdict& v) {
  auto g = square(257);
  const double m = measure_density(*g, {0.0, 0.0}, 1.0);
  const double rel = std::abs(m - kPi / 4.0) / (kPi / 4.0);
  v.require(rel <= 0.02, "corner ball measure within 2% of pi/4", fmt("measure %.6f, rel %.4f", m, rel));
  const DensityFit fit = fit_density_constant(*g, 100, 8);
  v.require(fit.samples.size() == 100 && fit.constant > 0.0, "fitted density constant c > 0 (100 samples)",
            fmt("c = %.5f", fit.constant));
}

void criterion9(Verdict& v) {
  const CriticalExponents c3 = critical_exponents(3);
  v.require(c3.p_BT == 2.0 && c3.p_GS == 5.0, "N = 3: (p_BT, p_GS) = (2, 5)", fmt("(%g, %g)", c3.p_BT, c3.p_GS));
  const double alg = *critical_exponents(3, 2.0).alg_bound;
  v.require(alg == 3.0, "N = 3, gamma = 2: alg_bound = 3", fmt("%g", alg));
  const CriticalExponents c1 = critical_exponents(1);
  v.require(std::isinf(c1.p_BT) && std::isinf(c1.p_GS), "N = 1: both infinite", "");
  using Q = boost::rational<long long>;
  std::mt19937_64 rng(99);
  std::uniform_int_distribution<long long> num(1, 500), den(1, 50), dim(1, 8);
  int ok = 0;
  for (int k = 0; k < 1000; ++k) {
    const Q r = Q(1) + Q(num(rng), den(rng));
    const Q n(dim(rng));
    const Q q = Q(1) + Q(num(rng) % 50, den(rng));
    ok += blowup_exponent(r, n, q) * Q(2) * q == Q(2) * q + (Q(1) - r) * n ? 1 : 0;
  }
  v.require(ok == 1000, "exact rational identity on 1000 triples", fmt("%.0f / 1000", ok));
}

void criterion10(Verdict& v) {
  const ExperimentConfig c = parse_config(std::string(BLOWUP_CONFIGS) + "/reference_1d.ini");
  const auto base = std::filesystem::temp_directory_path() / "blowup_lab_acceptance";
  std::filesystem::remove_all(base);
  const RunManifest a = run("blowup", c, base / "a");
  const RunManifest b = run("blowup", c, base / "b");
  bool same = a.files.size() == b.files.size() && !a.files.empty();
  for (std::size_t k = 0; same && k < a.files.size(); ++k) {
    same = a.files[k].path == b.files[k].path && a.files[k].sha256 == b.files[k].sha256;
  }
  v.require(same, "two blowup runs: byte-identical hashed outputs",
            fmt("%.0f files, exit codes %.0f / %.0f", static_cast<double>(a.files.size()), a.exit_code, b.exit_code));
}

template <class F>
void timed(int n, F&& f, double extra = 0.0) {
  const auto t0 = std::chrono::steady_clock::now();
  Verdict v;
  try {
    f(v);
  } catch (const std::exception& e) {
    v.require(false, "exception", e.what());
  }
  report(n, v, extra + seconds_since(t0));
}

}  // namespace

int main() {
  timed(1, criterion1);
  timed(2, criterion2);
  timed(3, criterion3);
  timed(4, criterion4);
  std::optional<ReferenceRun> ref;
  std::string trace_error;
  try {
    ref = reference();
  } catch (const std::exception& e) {
    trace_error = e.what();
  }
  const auto with_ref = [&](auto&& f) {
    return [&, f](Verdict& v) {
      if (!ref) throw Error("reference run failed: " + trace_error);
      f(v, *ref);
    };
  };
  timed(5, with_ref([](Verdict& v, ReferenceRun& r) { criterion5(v, r); }), ref ? ref->seconds : 0.0);
  timed(6, with_ref([](Verdict& v, ReferenceRun& r) { criterion6(v, r); }));
  timed(7, with_ref([](Verdict& v, ReferenceRun& r) { criterion7(v, r); }));
  timed(8, criterion8);
  timed(9, criterion9);
  timed(10, criterion10);
  std::printf("%d of 10 criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
