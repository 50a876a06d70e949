#pragma once

// Experiment configuration: sectioned key = value files (INI dialect).
// Every key is documented in README.md.

#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "blowup_lab/error.hpp"
#include "blowup_lab/estimates.hpp"
#include "blowup_lab/geometry.hpp"
#include "blowup_lab/operator.hpp"

namespace blowup {

enum class Forcing { none, manufactured };
enum class InitialGuess { sub_super, half_manufactured, zero };

struct ContinuationConfig {
  double lambda_min = 0.0;
  double lambda_max = std::numeric_limits<double>::infinity();
  double sup_ceiling = 1e4;
  std::vector<double> thresholds{10.0, 100.0, 1000.0, 10000.0};
  double start_amplitude = 1e-2;
  StepControl step;
};

struct HarnackConfig {
  std::size_t count = 50;
  std::optional<double> q;  // defaults to default_q(N, r)
  std::vector<double> ladder{1.1, 1.5, 1.9};
  std::vector<int> ks{1, 2, 4, 8};
};

struct ExponentsConfig {
  int N = 3;
  std::optional<double> gamma;
};

struct ExperimentConfig {
  DomainSpec domain;
  DiffusionPreset diffusion = DiffusionPreset::identity;
  SymMatrix2 diffusion_constant{1.0, 0.0, 1.0};
  double beta = 0.0;
  WeightSpec weight;
  double r = 3.0;
  double lambda = 0.0;
  Forcing forcing = Forcing::none;
  InitialGuess initial = InitialGuess::sub_super;
  NewtonOptions newton;
  ContinuationConfig continuation;
  std::optional<double> q;           // estimates; defaults to default_q(N, r)
  double L = 10.0;                   // sublevel threshold
  std::optional<double> identity_L;  // eigen identity level; auto when unset
  double R = 1.0;
  double flatness_eps = 0.5;
  double stability_tol = 10.0;
  double sublevel_factor = 0.2;
  HarnackConfig harnack;
  ExponentsConfig exponents;
  std::uint64_t seed = 0;
  std::string output = "out";

  std::map<std::string, std::string> echo;  // section.key -> raw value, as read

  double estimate_q() const { return q ? *q : default_q(domain.dimension, r); }
};

namespace detail {

inline std::size_t line_of(const std::string& text, const std::string& section, const std::string& key) {
  std::istringstream in(text);
  std::string line, current;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    const auto first = line.find_first_not_of(" \t");
    if (first == std::string::npos) continue;
    if (line[first] == '[') {
      const auto close = line.find(']', first);
      current = line.substr(first + 1, close - first - 1);
      continue;
    }
    if (current != section) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    std::string k = line.substr(first, eq - first);
    k.erase(k.find_last_not_of(" \t") + 1);
    if (k == key) return n;
  }
  return 0;
}

inline std::size_t section_line(const std::string& text, const std::string& section) {
  std::istringstream in(text);
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (line.find("[" + section + "]") != std::string::npos) return n;
  }
  return 0;
}

inline std::string trim(std::string s) {
  const auto a = s.find_first_not_of(" \t");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t");
  return s.substr(a, b - a + 1);
}

/// Typed access to one section, reporting the source line on bad values and
/// rejecting keys that are never read.
class Section {
 public:
  Section(const boost::property_tree::ptree* tree, std::string name, const std::string& text,
          std::map<std::string, std::string>& echo)
      : tree_(tree), name_(std::move(name)), text_(text) {
    if (tree_ == nullptr) return;
    for (const auto& [k, v] : *tree_) {
      echo[name_ + "." + k] = trim(v.data());
      unread_.insert(k);
    }
  }

  bool present() const { return tree_ != nullptr; }

  std::optional<std::string> raw(const std::string& key) {
    unread_.erase(key);
    if (tree_ == nullptr) return std::nullopt;
    const auto v = tree_->get_optional<std::string>(key);
    if (!v) return std::nullopt;
    return trim(*v);
  }

  [[noreturn]] void fail(const std::string& key, const std::string& what) const {
    throw ParseError("[" + name_ + "] " + key + ": " + what, line_of(text_, name_, key));
  }

  double number(const std::string& key, double fallback) {
    const auto v = raw(key);
    return v ? to_number(key, *v) : fallback;
  }

  std::optional<double> optional_number(const std::string& key) {
    const auto v = raw(key);
    if (!v || *v == "auto") return std::nullopt;
    return to_number(key, *v);
  }

  int integer(const std::string& key, int fallback) {
    const double d = number(key, fallback);
    if (d != std::floor(d) || std::abs(d) > 1e9) fail(key, "expected an integer");
    return static_cast<int>(d);
  }

  bool boolean(const std::string& key, bool fallback) {
    const auto v = raw(key);
    if (!v) return fallback;
    if (*v == "true" || *v == "yes" || *v == "1") return true;
    if (*v == "false" || *v == "no" || *v == "0") return false;
    fail(key, "expected true or false, got '" + *v + "'");
  }

  std::string word(const std::string& key, const std::string& fallback, const std::set<std::string>& allowed) {
    const auto v = raw(key);
    if (!v) return fallback;
    if (!allowed.count(*v)) {
      std::string list;
      for (const auto& a : allowed) list += (list.empty() ? "" : ", ") + a;
      fail(key, "unknown value '" + *v + "' (expected one of: " + list + ")");
    }
    return *v;
  }

  std::vector<double> numbers(const std::string& key, std::vector<double> fallback) {
    const auto v = raw(key);
    if (!v) return fallback;
    std::vector<double> out;
    std::stringstream ss(*v);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(to_number(key, trim(item)));
    return out;
  }

  std::vector<std::string> words(const std::string& key) {
    const auto v = raw(key);
    std::vector<std::string> out;
    if (!v) return out;
    std::stringstream ss(*v);
    std::string item;
    while (std::getline(ss, item, ',')) {
      item = trim(item);
      if (!item.empty()) out.push_back(item);
    }
    return out;
  }

  Interval interval(const std::string& key, Interval fallback) {
    const auto v = numbers(key, {fallback.lo, fallback.hi});
    if (v.size() != 2) fail(key, "expected two numbers 'lo, hi'");
    return {v[0], v[1]};
  }

  Point point(const std::string& key, Point fallback) {
    const auto v = numbers(key, {fallback[0], fallback[1]});
    if (v.size() != 2) fail(key, "expected two numbers 'x, y'");
    return {v[0], v[1]};
  }

  void finish() const {
    if (!unread_.empty()) fail(*unread_.begin(), "unknown key");
  }

 private:
  double to_number(const std::string& key, const std::string& s) const {
    if (s == "inf" || s == "+inf") return std::numeric_limits<double>::infinity();
    try {
      std::size_t used = 0;
      const double d = std::stod(s, &used);
      if (used != s.size()) fail(key, "trailing characters in number '" + s + "'");
      return d;
    } catch (const std::logic_error&) {
      fail(key, "expected a number, got '" + s + "'");
    }
  }

  const boost::property_tree::ptree* tree_;
  std::string name_;
  const std::string& text_;
  std::set<std::string> unread_;
};

inline Region parse_region(Section& s, const std::string& prefix, int dimension) {
  Region reg;
  reg.shape = s.word(prefix + "shape", "box", {"box", "disk"}) == "disk" ? Shape::disk : Shape::box;
  reg.box[0] = s.interval(prefix + "x", {0.35, 0.65});
  reg.box[1] = s.interval(prefix + "y", dimension == 2 ? Interval{0.35, 0.65} : Interval{0.0, 0.0});
  reg.center = s.point(prefix + "center", {0.5, 0.5});
  reg.radius = s.number(prefix + "radius", 0.25);
  return reg;
}

inline AmplitudeProfile parse_profile(Section& s, const std::string& key) {
  return s.word(key, "constant", {"constant", "linear"}) == "linear" ? AmplitudeProfile::linear
                                                                     : AmplitudeProfile::constant;
}

}  // namespace detail

/// Parses a configuration held in memory. Syntax only; see validate_config.
inline ExperimentConfig parse_config_text(const std::string& text) {
  boost::property_tree::ptree tree;
  try {
    std::istringstream in(text);
    boost::property_tree::ini_parser::read_ini(in, tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw ParseError(e.message(), e.line());
  }

  ExperimentConfig c;
  static const std::set<std::string> known{"domain",       "diffusion", "boundary", "weight",    "problem",
                                           "continuation", "estimates", "harnack",  "exponents", "run"};
  for (const auto& [name, sub] : tree) {
    if (!known.count(name)) {
      throw ParseError("unknown section [" + name + "]", detail::section_line(text, name));
    }
    if (sub.empty() && !sub.data().empty()) {
      throw ParseError("key '" + name + "' outside of any section", detail::line_of(text, "", name));
    }
  }
  const auto section = [&](const std::string& name) {
    const auto child = tree.get_child_optional(name);
    return detail::Section(child ? &*child : nullptr, name, text, c.echo);
  };

  {
    auto s = section("domain");
    c.domain.dimension = s.integer("dimension", 1);
    if (c.domain.dimension != 1 && c.domain.dimension != 2) s.fail("dimension", "must be 1 or 2");
    c.domain.shape = s.word("shape", "box", {"box", "disk"}) == "disk" ? Shape::disk : Shape::box;
    c.domain.extents[0] = s.interval("x", {0.0, 1.0});
    c.domain.extents[1] = s.interval("y", c.domain.dimension == 2 ? Interval{0.0, 1.0} : Interval{0.0, 0.0});
    c.domain.center = s.point("center", {0.5, 0.5});
    c.domain.radius = s.number("radius", 0.5);
    c.domain.nodes = s.integer("nodes", 257);
    for (const auto& f : s.words("robin_faces")) {
      static const std::map<std::string, Face> faces{
          {"left", Face::left}, {"right", Face::right}, {"bottom", Face::bottom}, {"top", Face::top}};
      const auto it = faces.find(f);
      if (it == faces.end()) s.fail("robin_faces", "unknown face '" + f + "'");
      c.domain.tagging.robin_faces.insert(it->second);
    }
    c.domain.tagging.robin_curved = s.boolean("robin_curved", false);
    s.finish();
  }
  {
    auto s = section("diffusion");
    const auto p = s.word("preset", "identity", {"identity", "constant", "smooth"});
    c.diffusion = p == "constant" ? DiffusionPreset::constant
                  : p == "smooth" ? DiffusionPreset::smooth
                                  : DiffusionPreset::identity;
    c.diffusion_constant.xx = s.number("xx", 1.0);
    c.diffusion_constant.xy = s.number("xy", 0.0);
    c.diffusion_constant.yy = s.number("yy", 1.0);
    s.finish();
  }
  {
    auto s = section("boundary");
    c.beta = s.number("beta", 0.0);
    s.finish();
  }
  {
    auto s = section("weight");
    const auto p = s.word("preset", "sign_pattern", {"sign_pattern", "decay", "constant"});
    c.weight.preset = p == "decay" ? WeightPreset::decay
                      : p == "constant" ? WeightPreset::constant
                                        : WeightPreset::sign_pattern;
    c.weight.plus_region = detail::parse_region(s, "plus_", c.domain.dimension);
    c.weight.plus_value = s.number("plus_value", 1.0);
    c.weight.minus_value = s.number("minus_value", -1.0);
    c.weight.gamma = s.number("gamma", 0.0);
    c.weight.gamma1 = s.number("gamma1", 0.0);
    c.weight.alpha = s.number("alpha", 1.0);
    c.weight.alpha1 = s.number("alpha1", 1.0);
    c.weight.alpha_profile = detail::parse_profile(s, "alpha_profile");
    c.weight.alpha1_profile = detail::parse_profile(s, "alpha1_profile");
    c.weight.constant = s.number("constant", 1.0);
    c.weight.require_interior_closure = s.boolean("interior_closure", false);
    s.finish();
  }
  {
    auto s = section("problem");
    c.r = s.number("r", 3.0);
    c.lambda = s.number("lambda", 0.0);
    c.forcing = s.word("forcing", "none", {"none", "manufactured"}) == "manufactured" ? Forcing::manufactured
                                                                                     : Forcing::none;
    const auto init = s.word("initial", "sub_super", {"sub_super", "half_manufactured", "zero"});
    c.initial = init == "half_manufactured" ? InitialGuess::half_manufactured
                : init == "zero"            ? InitialGuess::zero
                                            : InitialGuess::sub_super;
    c.newton.tol = s.number("tol", 1e-10);
    c.newton.max_iter = s.integer("max_iter", 50);
    c.newton.max_halvings = s.integer("max_halvings", 30);
    s.finish();
  }
  {
    auto s = section("continuation");
    auto& k = c.continuation;
    k.lambda_min = s.number("lambda_min", 0.0);
    k.lambda_max = s.number("lambda_max", std::numeric_limits<double>::infinity());
    k.sup_ceiling = s.number("sup_ceiling", 1e4);
    k.thresholds = s.numbers("thresholds", k.thresholds);
    k.start_amplitude = s.number("start_amplitude", 1e-2);
    k.step.initial = s.number("ds_initial", k.step.initial);
    k.step.min = s.number("ds_min", k.step.min);
    k.step.max = s.number("ds_max", k.step.max);
    k.step.growth = s.number("growth", k.step.growth);
    k.step.max_steps = s.integer("max_steps", k.step.max_steps);
    k.step.jump_ratio = s.number("jump_ratio", k.step.jump_ratio);
    k.step.tol = c.newton.tol;
    s.finish();
  }
  {
    auto s = section("estimates");
    c.q = s.optional_number("q");
    c.L = s.number("L", 10.0);
    c.identity_L = s.optional_number("identity_L");
    c.R = s.number("R", 1.0);
    c.flatness_eps = s.number("flatness_eps", 0.5);
    c.stability_tol = s.number("stability_tol", 10.0);
    c.sublevel_factor = s.number("sublevel_factor", 0.2);
    s.finish();
  }
  {
    auto s = section("harnack");
    const int n = s.integer("count", 50);
    if (n < 1) s.fail("count", "must be positive");
    c.harnack.count = static_cast<std::size_t>(n);
    c.harnack.q = s.optional_number("q");
    c.harnack.ladder = s.numbers("ladder", c.harnack.ladder);
    std::vector<int> ks;
    for (double k : s.numbers("ks", {1, 2, 4, 8})) {
      if (k < 1 || k != std::floor(k)) s.fail("ks", "entries must be positive integers");
      ks.push_back(static_cast<int>(k));
    }
    c.harnack.ks = ks;
    s.finish();
  }
  {
    auto s = section("exponents");
    c.exponents.N = s.integer("N", 3);
    if (c.exponents.N < 1) s.fail("N", "must be a positive integer");
    c.exponents.gamma = s.optional_number("gamma");
    s.finish();
  }
  {
    auto s = section("run");
    const double seed = s.number("seed", 0.0);
    if (seed < 0 || seed != std::floor(seed) || seed > 9.007199254740992e15) s.fail("seed", "expected a non-negative integer");
    c.seed = static_cast<std::uint64_t>(seed);
    const auto out = s.raw("output");
    if (out) c.output = *out;
    s.finish();
  }
  return c;
}

/// Hypothesis checks that need the discrete objects: r > 1, lambda >= 0,
/// beta >= 0, nonempty plus region, interior closure when demanded, the
/// boundary-component condition, and an admissible q.
inline void validate_config(const ExperimentConfig& c) {
  if (!(c.r > 1.0)) throw HypothesisViolation("r > 1", "configured r = " + std::to_string(c.r));
  if (!(c.lambda >= 0.0)) throw HypothesisViolation("lambda >= 0", "configured lambda = " + std::to_string(c.lambda));
  if (!(c.continuation.lambda_min >= 0.0) || !(c.continuation.lambda_max > c.continuation.lambda_min)) {
    throw HypothesisViolation("lambda >= 0", "lambda range must be a nonempty subset of [0, inf)");
  }
  if (!(c.beta >= 0.0)) throw HypothesisViolation("beta >= 0", "configured beta = " + std::to_string(c.beta));
  if (!(c.L > 0.0)) throw InvalidArgument("estimates.L must be positive");
  if (!(c.R > 0.0)) throw InvalidArgument("estimates.R must be positive");
  if (!(c.flatness_eps > 0.0 && c.flatness_eps < 1.0)) throw InvalidArgument("estimates.flatness_eps must lie in (0, 1)");
  if (!std::is_sorted(c.continuation.thresholds.begin(), c.continuation.thresholds.end())) {
    throw InvalidArgument("continuation.thresholds must be increasing");
  }
  if (c.q) require_admissible_q(*c.q, c.domain.dimension);
  const Grid grid = build_grid(c.domain);
  const WeightField w = build_weight(grid, c.weight);
  const BoundaryValidation v = validate_boundary_components(grid, w);
  if (!v.passed) {
    std::string nodes;
    for (std::size_t i : v.components[v.offending.front()].nodes) nodes += (nodes.empty() ? "" : " ") + std::to_string(i);
    throw HypothesisViolation("Gamma_1 components inside the closure of Omega+ or Omega-",
                              "offending Gamma_1 component with nodes " + nodes);
  }
}

inline ExperimentConfig parse_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open configuration file '" + path + "'", 0);
  std::stringstream buf;
  buf << in.rdbuf();
  ExperimentConfig c = parse_config_text(buf.str());
  validate_config(c);
  return c;
}

}  // namespace blowup
