#include <unistd.h>
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "cli_io.hpp"

using namespace debias_cli;
namespace fs = std::filesystem;
using doctest::Approx;

namespace {
fs::path scratch() {
  static const fs::path dir = [] {
    auto d = fs::temp_directory_path() / ("debias_cli_test_" + std::to_string(::getpid()));
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

std::string write_file(const std::string& name, const std::string& text) {
  const auto p = scratch() / name;
  std::ofstream(p) << text;
  return p.string();
}

std::string density_csv(size_t n) {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> z;
  std::ostringstream os;
  os << "x\n";
  for (size_t i = 0; i < n; ++i) os << z(rng) << "\n";
  return os.str();
}

int code_of(std::vector<const char*> args) {
  args.insert(args.begin(), "debias-cli");
  try {
    parse_args(static_cast<int>(args.size()), args.data());
  } catch (const CliError& e) {
    return e.code();
  }
  return -1;
}

RunConfig parse(std::vector<const char*> args) {
  args.insert(args.begin(), "debias-cli");
  return parse_args(static_cast<int>(args.size()), args.data());
}

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}
}  // namespace

TEST_CASE("parse_args defaults and flags") {
  const auto c = parse({"density-band", "--input", "d.csv", "--alpha", "0.05", "--boot", "500", "--seed", "7",
                        "--output", "b.json"});
  CHECK(c.command == "density-band");
  CHECK(c.input == "d.csv");
  CHECK(c.alpha == 0.05);
  CHECK(c.boot == 500);
  CHECK(c.seed == 7);
  CHECK(c.output == "b.json");
  CHECK(c.bandwidth.empty());
  CHECK(c.tau == 1.0);
  CHECK(c.band_kind == "fixed");
  CHECK(c.grid == 0);

  const auto s = parse({"simulate-coverage", "--scenario", "density_1d", "--n", "2000", "--trials", "200",
                        "--nominal", "0.80:0.99:0.01"});
  REQUIRE(s.nominal.size() == 20);
  CHECK(s.nominal.front() == 0.8);
  CHECK(s.nominal[5] == 0.85);
  CHECK(s.nominal.back() == 0.99);
  CHECK(s.n == 2000);
  const auto lv = parse({"levelset-set", "--input", "a.csv", "--level", "0.25"});
  CHECK(*lv.level == 0.25);
  const auto rg = parse({"regression-band", "--input", "a.csv", "--bandwidth", "0.1"});
  CHECK(rg.bandwidth == "0.1");
}

TEST_CASE("parse_args usage errors exit 2") {
  CHECK(code_of({"density-band", "--input", "d.csv", "--alpha", "1.5"}) == kExitUsage);
  CHECK(code_of({"density-band"}) == kExitUsage);
  CHECK(code_of({"density-band", "--input", "d.csv", "--wat"}) == kExitUsage);
  CHECK(code_of({"frobnicate"}) == kExitUsage);
  CHECK(code_of({"levelset-set", "--input", "d.csv"}) == kExitUsage);
  CHECK(code_of({"density-band", "--input", "d.csv", "--bandwidth", "-1"}) == kExitUsage);
  CHECK(code_of({"regression-band", "--input", "d.csv", "--bandwidth", "rot"}) == kExitUsage);
  CHECK(code_of({"density-band", "--input", "d.csv", "--band-kind", "wide"}) == kExitUsage);
  CHECK(code_of({"simulate-coverage", "--scenario", "regression_sine", "--bandwidth-rule", "rot"}) == kExitUsage);
  CHECK(code_of({"simulate-coverage", "--scenario", "density_1d", "--bandwidth-rule", "fixed"}) == kExitUsage);
  CHECK(code_of({"simulate-coverage", "--scenario", "density_1d", "--nominal", "0.9,0.8"}) == kExitUsage);
  CHECK(code_of({"density-band", "--input", "d.csv", "--format", "csv"}) == kExitUsage);
  CHECK(code_of({"density-band", "--help"}) == kExitOk);
  try {
    parse({"density-band", "--input", "d.csv", "--alpha", "1.5"});
  } catch (const CliError& e) {
    CHECK(std::string(e.what()).find("--alpha") != std::string::npos);
  }
}

TEST_CASE("parse_levels") {
  CHECK(parse_levels("0.9,0.95") == std::vector<double>{0.9, 0.95});
  CHECK(parse_levels("0.5:0.9:0.2") == std::vector<double>{0.5, 0.7, 0.9});
  CHECK_THROWS_AS(parse_levels("0.5:0.9"), CliError);
  CHECK_THROWS_AS(parse_levels("abc"), CliError);
  CHECK_THROWS_AS(parse_levels("0.9:0.5:0.1"), CliError);
}

TEST_CASE("read_csv") {
  const auto ok = write_file("ok.csv", density_csv(100));
  const auto t = read_csv(ok, {"x"});
  CHECK(t.rows == 100);
  CHECK(t.columns.size() == 1);
  const auto paired = write_file("xy.csv", "x,y\n1,2\n3,4\n");
  const auto p = read_csv(paired, {"x", "y"});
  CHECK(p.rows == 2);
  CHECK(p.columns[1][1] == 4.0);

  auto code = [](const std::string& path, std::vector<std::string> cols) {
    try {
      read_csv(path, cols);
    } catch (const CliError& e) {
      return e.code();
    }
    return -1;
  };
  CHECK(code((scratch() / "missing.csv").string(), {"x"}) == kExitMissingFile);
  const auto bad = write_file("bad.csv", "x,y\nabc,1\n2,3\n");
  CHECK(code(bad, {"x", "y"}) == kExitMalformed);
  try {
    read_csv(bad, {"x", "y"});
  } catch (const CliError& e) {
    CHECK(std::string(e.what()).find("line(s) 2") != std::string::npos);
  }
  std::string many = "x\n";
  for (int i = 0; i < 15; ++i) many += "oops\n";
  try {
    read_csv(write_file("many.csv", many), {"x"});
    FAIL("expected an error");
  } catch (const CliError& e) {
    const std::string msg = e.what();
    CHECK(msg.find(" 11") != std::string::npos);
    CHECK(msg.find(" 12") == std::string::npos);
  }
  CHECK(code(write_file("nohead.csv", "y\n1\n"), {"x"}) == kExitMalformed);
  CHECK(code(write_file("ragged.csv", "x,y\n1\n"), {"x", "y"}) == kExitMalformed);
  CHECK(code(write_file("empty.csv", ""), {"x"}) == kExitMalformed);
}

TEST_CASE("density-band document and canonical serialization") {
  const auto in = write_file("d.csv", density_csv(200));
  const auto out = (scratch() / "band.json").string();
  const auto c = parse({"density-band", "--input", in.c_str(), "--boot", "40", "--grid", "64", "--output",
                        out.c_str(), "--format", "csv", "--threads", "1"});
  const auto doc = run(c);
  write_result(doc, c);
  const auto text = slurp(out);
  const auto reparsed = nlohmann::json::parse(text);
  CHECK(serialize(reparsed) == text);
  CHECK(reparsed["schema_version"] == 1);
  CHECK(reparsed["config"]["bandwidth"]["method"] == "rot");
  CHECK(reparsed["config"]["bandwidth"]["h"].get<double>() > 0);
  const auto& p = reparsed["payload"];
  CHECK(p["grid"].size() == 64);
  CHECK(p["center"].size() == 64);
  CHECK(p["lower"].size() == 64);
  CHECK(p["upper"].size() == 64);
  CHECK(fs::exists(scratch() / "band.csv"));
  std::istringstream csv(slurp((scratch() / "band.csv").string()));
  std::string line;
  std::getline(csv, line);
  CHECK(line == "x,center,lower,upper");
  size_t rows = 0;
  while (std::getline(csv, line)) ++rows;
  CHECK(rows == 64);

  // Doubles survive a text round trip exactly.
  const double t = p["t_hat"].get<double>();
  CHECK(t == doc["payload"]["t_hat"].get<double>());
}

TEST_CASE("coverage document has one row per level") {
  const auto c = parse({"simulate-coverage", "--scenario", "density_1d", "--n", "100", "--trials", "2", "--boot",
                        "20", "--grid", "64", "--nominal", "0.8,0.9,0.95"});
  const auto doc = run(c);
  CHECK(doc["payload"]["rows"].size() == 3);
  CHECK(doc["config"]["nominal"].size() == 3);
  CHECK(doc["drops"]["replicates_total"] == 40);
}

TEST_CASE("variable bands, level sets and inverse regression documents") {
  const auto in = write_file("v.csv", density_csv(200));
  auto c = parse({"density-band", "--input", in.c_str(), "--boot", "30", "--grid", "64", "--band-kind", "variable"});
  auto doc = run(c);
  CHECK(doc["payload"]["kind"] == "variable");
  CHECK(doc["payload"]["scale"].size() == 64);

  c = parse({"levelset-set", "--input", in.c_str(), "--boot", "30", "--grid", "64", "--level", "0.2"});
  doc = run(c);
  CHECK(doc["payload"]["center_points"].size() == 2);
  CHECK(doc["payload"]["radius"].get<double>() >= 0);

  std::ostringstream os;
  os << "x,y\n";
  os.precision(17);
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::normal_distribution<double> e(0.0, 0.1);
  for (int i = 0; i < 500; ++i) {
    const double x = u(rng);
    os << x << "," << 1 - std::exp(-x) + e(rng) << "\n";
  }
  const auto reg = write_file("inv.csv", os.str());
  c = parse({"invreg-set", "--input", reg.c_str(), "--boot", "30", "--grid", "64", "--r0", "0.5"});
  doc = run(c);
  CHECK(doc["payload"]["center_root"].get<double>() == Approx(std::log(2.0)).epsilon(0.05));
  CHECK(doc["config"]["bandwidth"]["method"] == "kfold_cv");
  CHECK(doc["payload"]["normal_ci"].size() == 2);
}

TEST_CASE("main_entry exit codes") {
  auto run_main = [](std::vector<const char*> args) {
    args.insert(args.begin(), "debias-cli");
    return main_entry(static_cast<int>(args.size()), args.data());
  };
  const auto missing = (scratch() / "nope.csv").string();
  CHECK(run_main({"density-band", "--input", missing.c_str()}) == kExitMissingFile);
  const auto in = write_file("io.csv", density_csv(50));
  CHECK(run_main({"density-band", "--input", in.c_str(), "--boot", "5", "--output", "/nonexistent-dir/x.json"}) ==
        kExitIo);
  const auto bad = write_file("m.csv", "x\n1\nzz\n");
  CHECK(run_main({"density-band", "--input", bad.c_str()}) == kExitMalformed);
  CHECK(run_main({"density-band", "--alpha", "2"}) == kExitUsage);
  CHECK(run_main({"levelset-set", "--input", in.c_str(), "--level", "9", "--boot", "5"}) == kExitCompute);
}
