#include <gtest/gtest.h>
#include <sys/wait.h>

#include <charconv>
#include <cstdlib>
#include <filesystem>
#include <random>

#include "blowup_lab/config.hpp"
#include "blowup_lab/io.hpp"
#include "blowup_lab/pipeline.hpp"

namespace blowup {
namespace {

namespace fs = std::filesystem;

fs::path scratch(const std::string& tag) {
  const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
  fs::path p = fs::temp_directory_path() / "blowup_lab_tests" / (std::string(info->name()) + "_" + tag);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string configs(const std::string& name) { return std::string(BLOWUP_CONFIGS) + "/" + name; }

const char* kSmallReference = R"(
[domain]
dimension = 1
nodes = 65

[weight]
preset = sign_pattern
plus_x = 0.35, 0.65
interior_closure = true

[problem]
r = 3

[continuation]
thresholds = 1, 2, 4

[estimates]
q = 1

[run]
seed = 3
)";

TEST(Config, Defaults) {
  const ExperimentConfig c = parse_config_text("[problem]\nr = 2.5\n");
  EXPECT_EQ(c.domain.dimension, 1);
  EXPECT_EQ(c.domain.nodes, 257);
  EXPECT_DOUBLE_EQ(c.r, 2.5);
  EXPECT_DOUBLE_EQ(c.newton.tol, 1e-10);
  EXPECT_EQ(c.newton.max_iter, 50);
  EXPECT_DOUBLE_EQ(c.L, 10.0);
  EXPECT_DOUBLE_EQ(c.stability_tol, 10.0);
  EXPECT_EQ(c.seed, 0u);
  EXPECT_DOUBLE_EQ(c.estimate_q(), 1.0);
  EXPECT_EQ(c.echo.at("problem.r"), "2.5");
}

TEST(Config, ShippedConfigsValidate) {
  for (const char* name : {"reference_1d.ini", "manufactured_1d.ini", "square_2d.ini", "exponents_n3.ini"}) {
    EXPECT_NO_THROW(parse_config(configs(name))) << name;
  }
  const ExperimentConfig ref = parse_config(configs("reference_1d.ini"));
  EXPECT_EQ(ref.domain.nodes, 257);
  EXPECT_EQ(ref.continuation.thresholds, (std::vector<double>{10, 100, 1000}));
  EXPECT_FALSE(ref.identity_L);
  EXPECT_EQ(ref.seed, 7u);
}

TEST(Config, SublinearExponentRejected) {
  ExperimentConfig c = parse_config_text("[problem]\nr = 0.5\n");
  try {
    validate_config(c);
    FAIL();
  } catch (const HypothesisViolation& e) {
    EXPECT_EQ(e.hypothesis(), "r > 1");
  }
}

TEST(Config, PlusRegionTouchingBoundaryRejected) {
  const ExperimentConfig c = parse_config_text(
      "[domain]\nnodes = 33\n[weight]\npreset = sign_pattern\nplus_x = 0, 0.5\ninterior_closure = true\n");
  try {
    validate_config(c);
    FAIL();
  } catch (const HypothesisViolation& e) {
    EXPECT_EQ(e.hypothesis(), "closure(Omega+) inside Omega");
  }
}

TEST(Config, EmptyPlusRejected) {
  const ExperimentConfig c = parse_config_text("[weight]\npreset = constant\nconstant = -1\n");
  try {
    validate_config(c);
    FAIL();
  } catch (const HypothesisViolation& e) {
    EXPECT_EQ(e.hypothesis(), "Omega+ nonempty");
  }
}

TEST(Config, UnknownKeysReportLine) {
  try {
    parse_config_text("[domain]\nnodes = 33\n\n[problem]\nr = 3\nlambada = 2\n");
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 6u);
    EXPECT_NE(std::string(e.what()).find("lambada"), std::string::npos);
  }
  try {
    parse_config_text("[problm]\nr = 3\n");
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 1u);
  }
  EXPECT_THROW(parse_config_text("[problem]\nr = three\n"), ParseError);
  EXPECT_THROW(parse_config("/nonexistent/x.ini"), ParseError);
}

TEST(Output, FormatDoubleRoundTrips) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(-1e6, 1e6);
  for (int k = 0; k < 1000; ++k) {
    const double v = u(rng) * std::pow(10.0, k % 40 - 20);
    const std::string s = format_double(v);
    double back = 0.0;
    std::from_chars(s.data(), s.data() + s.size(), back);
    EXPECT_EQ(back, v);
  }
  EXPECT_EQ(format_double(0.1), "0.1");
  EXPECT_EQ(format_double(kInf), "inf");
  EXPECT_EQ(format_double(-kInf), "-inf");
}

TEST(Output, JsonInfinity) {
  EXPECT_EQ(json_number(kInf).dump(), "\"inf\"");
  EXPECT_EQ(json_number(std::nan("")).dump(), "null");
  EXPECT_EQ(json_number(2.0).dump(), "2.0");
}

TEST(Output, Sha256KnownVectors) {
  EXPECT_EQ(sha256_hex(""), "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
  EXPECT_EQ(sha256_hex("abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST(Output, CsvWriter) {
  CsvWriter w({"a", "b"});
  w.cell(1).cell(0.5);
  w.end_row();
  w.cell("x").cell(std::size_t{3});
  w.end_row();
  EXPECT_EQ(w.str(), "a,b\n1,0.5\nx,3\n");
  w.cell(1.0);
  EXPECT_THROW(w.end_row(), InvalidArgument);
}

TEST(Output, CoordinateList) {
  DomainSpec s;
  s.nodes = 3;
  auto g = make_grid(s);
  const DiscreteOperator op = assemble(g, make_diffusion(*g, DiffusionPreset::identity), make_boundary(*g, 0.0));
  EXPECT_EQ(coordinate_list(op), "0 0 1\n1 0 -4\n1 1 8\n1 2 -4\n2 2 1\n");
}

TEST(Pipeline, Exponents) {
  const fs::path dir = scratch("out");
  const RunManifest m = run("exponents", parse_config(configs("exponents_n3.ini")), dir);
  EXPECT_EQ(m.exit_code, exit_code::ok);
  const Json j = Json::parse(read_file(dir / "exponents.json"));
  EXPECT_EQ(j["p_BT"].get<double>(), 2.0);
  EXPECT_EQ(j["p_GS"].get<double>(), 5.0);
  EXPECT_EQ(j["alg_bound"].get<double>(), 3.0);

  ExperimentConfig one = parse_config_text("[exponents]\nN = 1\n");
  run("exponents", one, dir);
  const Json k = Json::parse(read_file(dir / "exponents.json"));
  EXPECT_EQ(k["p_BT"], "inf");
  EXPECT_EQ(k["p_GS"], "inf");
}

TEST(Pipeline, SolveManufactured) {
  const fs::path dir = scratch("out");
  const RunManifest m = run("solve", parse_config(configs("manufactured_1d.ini")), dir);
  ASSERT_EQ(m.exit_code, exit_code::ok) << m.failure.dump();
  const Json j = Json::parse(read_file(dir / "solve.json"));
  EXPECT_EQ(j["solution"]["classification"], "positive");
  EXPECT_LE(j["solution"]["iterations"].get<int>(), 10);
  EXPECT_LT(j["max_error"].get<double>(), 1e-3);
  EXPECT_TRUE(fs::exists(dir / "solution.csv"));
  EXPECT_TRUE(fs::exists(dir / "manifest_solve.json"));
}

TEST(Pipeline, BlowupWritesAllReports) {
  const fs::path dir = scratch("out");
  const RunManifest m = run("blowup", parse_config_text(kSmallReference), dir);
  EXPECT_NE(m.exit_code, exit_code::other) << m.failure.dump();
  EXPECT_NE(m.exit_code, exit_code::config);
  const Json j = Json::parse(read_file(dir / "blowup.json"));
  for (const char* k : {"blowup_estimate", "rescaling", "sublevel_decay", "collar_inclusion", "eigen_identity",
                        "bounds_transfer"}) {
    EXPECT_TRUE(j["reports"].contains(k)) << k;
    EXPECT_TRUE(j["reports"][k]["pass"].is_boolean()) << k;
  }
  EXPECT_EQ(j["members"].size(), 3u);
  EXPECT_EQ(j["seed"], 3);
}

TEST(Pipeline, ManifestHashesMatchFiles) {
  const fs::path dir = scratch("out");
  const RunManifest m = run("eigen", parse_config_text(kSmallReference), dir);
  ASSERT_EQ(m.exit_code, exit_code::ok) << m.failure.dump();
  ASSERT_FALSE(m.files.empty());
  for (const auto& f : m.files) {
    const std::string content = read_file(dir / f.path);
    EXPECT_EQ(sha256_hex(content), f.sha256) << f.path;
    EXPECT_EQ(content.size(), f.bytes);
  }
  const Json man = Json::parse(read_file(dir / "manifest_eigen.json"));
  EXPECT_EQ(man["files"].size(), m.files.size());
  EXPECT_EQ(man["config"]["domain.nodes"], "65");
}

TEST(Pipeline, BlowupIsDeterministic) {
  const ExperimentConfig c = parse_config_text(kSmallReference);
  const RunManifest a = run("blowup", c, scratch("a"));
  const RunManifest b = run("blowup", c, scratch("b"));
  ASSERT_EQ(a.files.size(), b.files.size());
  for (std::size_t k = 0; k < a.files.size(); ++k) {
    EXPECT_EQ(a.files[k].path, b.files[k].path);
    EXPECT_EQ(a.files[k].sha256, b.files[k].sha256) << a.files[k].path;
  }
}

TEST(Pipeline, ReportRendersCsv) {
  const fs::path dir = scratch("out");
  const ExperimentConfig c = parse_config_text(kSmallReference);
  EXPECT_EQ(run("report", c, dir).exit_code, exit_code::other);
  run("blowup", c, dir);
  EXPECT_EQ(run("report", c, dir).exit_code, exit_code::ok);
  EXPECT_TRUE(fs::exists(dir / "report_blowup_verdicts.csv"));
  EXPECT_THROW(run("plot", c, dir), InvalidArgument);
}

int cli(const std::string& args) {
  const std::string cmd = std::string(BLOWUP_CLI) + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

TEST(Cli, ExitCodes) {
  const fs::path dir = scratch("out");
  EXPECT_EQ(cli("exponents --config " + configs("exponents_n3.ini") + " --out " + dir.string()), 0);
  EXPECT_TRUE(fs::exists(dir / "exponents.json"));

  const fs::path bad = dir / "bad.ini";
  {
    std::ofstream f(bad);
    f << "[problem]\nr = 0.5\n";
  }
  EXPECT_EQ(cli("solve --config " + bad.string() + " --out " + dir.string()), exit_code::config);
  EXPECT_EQ(cli("solve --config /nonexistent.ini"), exit_code::config);

  const fs::path hard = dir / "hard.ini";
  {
    std::ofstream f(hard);
    f << "[weight]\npreset = constant\nconstant = 1\n[problem]\nr = 2\nforcing = manufactured\n"
         "initial = half_manufactured\nmax_iter = 1\n";
  }
  EXPECT_EQ(cli("solve --config " + hard.string() + " --out " + dir.string()), exit_code::solver);
  const Json man = Json::parse(read_file(dir / "manifest_solve.json"));
  EXPECT_EQ(man["failure"]["stage"], "newton");
  EXPECT_NE(cli("bogus"), 0);
}

}  // namespace
}  // namespace blowup
