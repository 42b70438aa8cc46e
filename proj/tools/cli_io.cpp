#include "cli_io.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>
#include <thread>

#include <CLI11.hpp>

#include "debias.h"

namespace debias_cli {
namespace {

using nlohmann::json;

constexpr int kSchemaVersion = 1;
// Keeps the fold shuffles of cross-validation off the bootstrap streams.
constexpr std::uint64_t kCvSeedOffset = 0x9e3779b97f4a7c15ULL;

template <class T, void (*Free)(T*)>
struct Deleter {
  void operator()(T* p) const { Free(p); }
};
using SampleHandle = std::unique_ptr<dbs_sample, Deleter<dbs_sample, dbs_sample_free>>;
using PairedHandle = std::unique_ptr<dbs_paired, Deleter<dbs_paired, dbs_paired_free>>;
using GridHandle = std::unique_ptr<dbs_grid, Deleter<dbs_grid, dbs_grid_free>>;
using BandHandle = std::unique_ptr<dbs_band, Deleter<dbs_band, dbs_band_free>>;
using RegionHandle = std::unique_ptr<dbs_region, Deleter<dbs_region, dbs_region_free>>;
using ReportHandle = std::unique_ptr<dbs_report, Deleter<dbs_report, dbs_report_free>>;

void check(dbs_status st) {
  if (st != DBS_OK) throw CliError(kExitCompute, dbs_last_error());
}

bool scenario_is_density(const std::string& s) { return s == "density_1d" || s == "levelset_2d"; }

dbs_kernel kernel_of(const RunConfig& c) {
  return c.kernel == "biweight" ? DBS_KERNEL_BIWEIGHT : DBS_KERNEL_GAUSSIAN;
}

dbs_estimator estimator_of(const RunConfig& c) {
  return c.estimator == "plain" ? DBS_ESTIMATOR_PLAIN : DBS_ESTIMATOR_DEBIASED;
}

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream in(line);
  while (std::getline(in, field, ',')) out.push_back(trim(field));
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

bool parse_number(const std::string& s, double& out) {
  if (s.empty()) return false;
  char* end = nullptr;
  out = std::strtod(s.c_str(), &end);
  return end == s.c_str() + s.size() && std::isfinite(out);
}

unsigned resolve_threads(const RunConfig& c) {
  if (c.threads != 0) return c.threads;
  if (const char* env = std::getenv("DEBIAS_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && v > 0) return static_cast<unsigned>(v);
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

std::vector<double> grid_coords(const dbs_grid* g, json& out) {
  const size_t G = dbs_grid_size(g);
  std::vector<double> flat;
  json pts = json::array();
  for (size_t i = 0; i < G; ++i) {
    double p[2];
    check(dbs_grid_point(g, i, p));
    if (dbs_grid_dim(g) == 1) {
      pts.push_back(p[0]);
      flat.push_back(p[0]);
    } else {
      pts.push_back({p[0], p[1]});
      flat.push_back(p[0]);
      flat.push_back(p[1]);
    }
  }
  out = std::move(pts);
  return flat;
}

json base_config(const RunConfig& c) {
  json j;
  j["alpha"] = c.alpha;
  j["boot"] = c.boot;
  j["seed"] = c.seed;
  j["tau"] = c.tau;
  j["kernel"] = c.kernel;
  j["estimator"] = c.estimator;
  return j;
}

// Loads a density sample: columns x1,x2 when present, otherwise x.
SampleHandle load_sample(const RunConfig& c, json& cfg) {
  std::ifstream probe(c.input);
  if (!probe) throw CliError(kExitMissingFile, "cannot open input file '" + c.input + "'");
  std::string header;
  std::getline(probe, header);
  const auto names = split(header);
  const bool two_d = std::find(names.begin(), names.end(), "x1") != names.end() &&
                     std::find(names.begin(), names.end(), "x2") != names.end();
  const auto table = read_csv(c.input, two_d ? std::vector<std::string>{"x1", "x2"}
                                             : std::vector<std::string>{"x"});
  std::vector<double> coords;
  if (two_d) {
    coords.resize(2 * table.rows);
    for (size_t i = 0; i < table.rows; ++i) {
      coords[2 * i] = table.columns[0][i];
      coords[2 * i + 1] = table.columns[1][i];
    }
  } else {
    coords = table.columns[0];
  }
  dbs_sample* s = nullptr;
  check(dbs_sample_create(coords.data(), table.rows, two_d ? 2 : 1, &s));
  cfg["n"] = table.rows;
  cfg["dim"] = two_d ? 2 : 1;
  return SampleHandle(s);
}

PairedHandle load_paired(const RunConfig& c, json& cfg) {
  const auto table = read_csv(c.input, {"x", "y"});
  dbs_paired* p = nullptr;
  check(dbs_paired_create(table.columns[0].data(), table.columns[1].data(), table.rows, &p));
  cfg["n"] = table.rows;
  return PairedHandle(p);
}

// Resolves --bandwidth for a density sample; records the method and h.
double density_bandwidth(const RunConfig& c, const dbs_sample* s, unsigned threads, json& cfg) {
  const std::string spec = c.bandwidth.empty() ? "rot" : c.bandwidth;
  double h = 0.0;
  if (spec == "rot") {
    check(dbs_bandwidth_rot(s, &h));
  } else if (spec == "lscv" || spec == "cv") {
    check(dbs_bandwidth_lscv(s, nullptr, 0, kernel_of(c), threads, &h));
  } else {
    parse_number(spec, h);
  }
  cfg["bandwidth"] = {{"method", spec == "cv" ? "lscv" : (spec == "rot" || spec == "lscv" ? spec : "fixed")},
                      {"h", h}};
  return h;
}

double regression_bandwidth(const RunConfig& c, const dbs_paired* p, unsigned threads, json& cfg) {
  const std::string spec = c.bandwidth.empty() ? "cv" : c.bandwidth;
  double h = 0.0;
  json bw;
  if (spec == "cv") {
    const std::uint64_t cv_seed = c.seed + kCvSeedOffset;
    check(dbs_bandwidth_cv(p, c.cv_folds, c.cv_repeats, nullptr, 0, cv_seed, kernel_of(c), threads, &h));
    bw["method"] = "kfold_cv";
    bw["folds"] = c.cv_folds;
    bw["repeats"] = c.cv_repeats;
    bw["cv_seed"] = cv_seed;
  } else {
    parse_number(spec, h);
    bw["method"] = "fixed";
  }
  bw["h"] = h;
  cfg["bandwidth"] = bw;
  return h;
}

dbs_bootstrap_config boot_config(const RunConfig& c, dbs_metric metric, unsigned threads) {
  dbs_bootstrap_config b;
  dbs_bootstrap_config_default(&b);
  b.replicates = c.boot;
  b.alpha = c.alpha;
  b.seed = c.seed;
  b.metric = metric;
  b.threads = threads;
  return b;
}

std::vector<double> read_array(size_t n, auto&& fill) {
  std::vector<double> v(n);
  if (n) fill(v.data());
  return v;
}

json band_payload(const dbs_band* b, json& drops) {
  json p;
  const size_t G = dbs_band_size(b);
  grid_coords(dbs_band_grid(b), p["grid"]);
  std::vector<double> center(G), lower(G), upper(G);
  dbs_band_arrays(b, center.data(), lower.data(), upper.data());
  p["center"] = center;
  p["lower"] = lower;
  p["upper"] = upper;
  p["t_hat"] = dbs_band_t_hat(b);
  p["kind"] = dbs_band_is_variable(b) ? "variable" : "fixed";
  if (dbs_band_is_variable(b)) {
    std::vector<double> scale(G);
    check(dbs_band_scale(b, scale.data()));
    p["scale"] = scale;
  }
  size_t nx = 0, ny = 0;
  dbs_grid_shape(dbs_band_grid(b), &nx, &ny);
  p["grid_shape"] = dbs_grid_dim(dbs_band_grid(b)) == 1 ? json::array({nx}) : json::array({nx, ny});
  drops["replicates_dropped"] = dbs_band_dropped(b);
  return p;
}

json region_payload(const dbs_region* r, json& drops) {
  json p;
  const int dim = dbs_region_dim(r);
  const size_t n = dbs_region_size(r);
  std::vector<double> pts(n * static_cast<size_t>(dim));
  dbs_region_points(r, pts.data());
  json arr = json::array();
  for (size_t i = 0; i < n; ++i) {
    if (dim == 1)
      arr.push_back(pts[i]);
    else
      arr.push_back({pts[2 * i], pts[2 * i + 1]});
  }
  p["dim"] = dim;
  p["center_points"] = std::move(arr);
  p["radius"] = dbs_region_radius(r);
  drops["replicates_dropped"] = dbs_region_dropped(r);
  return p;
}

json run_density_band(const RunConfig& c, unsigned threads, json& cfg, json& drops) {
  auto s = load_sample(c, cfg);
  const double h = density_bandwidth(c, s.get(), threads, cfg);
  dbs_grid* g = nullptr;
  check(dbs_grid_default_density(s.get(), h, c.grid, &g));
  GridHandle grid(g);
  cfg["band_kind"] = c.band_kind;
  const auto metric = c.band_kind == "variable" ? DBS_METRIC_WEIGHTED_SUP : DBS_METRIC_SUP;
  const auto bc = boot_config(c, metric, threads);
  dbs_band* b = nullptr;
  check(dbs_density_band(s.get(), h, c.tau, kernel_of(c), grid.get(), &bc, estimator_of(c), &b));
  BandHandle band(b);
  return band_payload(band.get(), drops);
}

json run_regression_band(const RunConfig& c, unsigned threads, json& cfg, json& drops) {
  auto p = load_paired(c, cfg);
  const double h = regression_bandwidth(c, p.get(), threads, cfg);
  dbs_grid* g = nullptr;
  check(dbs_grid_default_regression(p.get(), c.grid, &g));
  GridHandle grid(g);
  const auto bc = boot_config(c, DBS_METRIC_SUP, threads);
  dbs_band* b = nullptr;
  check(dbs_regression_band(p.get(), h, c.tau, kernel_of(c), grid.get(), &bc, estimator_of(c), &b));
  BandHandle band(b);
  return band_payload(band.get(), drops);
}

json run_levelset_set(const RunConfig& c, unsigned threads, json& cfg, json& drops) {
  auto s = load_sample(c, cfg);
  const double h = density_bandwidth(c, s.get(), threads, cfg);
  dbs_grid* g = nullptr;
  check(dbs_grid_default_density(s.get(), h, c.grid, &g));
  GridHandle grid(g);
  cfg["level"] = *c.level;
  const auto bc = boot_config(c, DBS_METRIC_HAUSDORFF, threads);
  dbs_region* r = nullptr;
  check(dbs_levelset_set(s.get(), *c.level, h, c.tau, kernel_of(c), grid.get(), &bc, estimator_of(c), &r));
  RegionHandle region(r);
  return region_payload(region.get(), drops);
}

json run_invreg_set(const RunConfig& c, unsigned threads, json& cfg, json& drops) {
  auto p = load_paired(c, cfg);
  const double h = regression_bandwidth(c, p.get(), threads, cfg);
  dbs_grid* g = nullptr;
  check(dbs_grid_default_regression(p.get(), c.grid, &g));
  GridHandle grid(g);
  cfg["r0"] = *c.r0;
  const auto bc = boot_config(c, DBS_METRIC_HAUSDORFF, threads);
  dbs_region* r = nullptr;
  check(dbs_invreg_set(p.get(), *c.r0, h, c.tau, kernel_of(c), grid.get(), &bc, estimator_of(c), &r));
  RegionHandle region(r);
  json payload = region_payload(region.get(), drops);
  double root = 0.0, frac = 0.0;
  check(dbs_region_center_root(region.get(), &root));
  check(dbs_region_non_singleton_fraction(region.get(), &frac));
  payload["center_root"] = root;
  payload["non_singleton_fraction"] = frac;
  const auto roots = read_array(dbs_region_root_count(region.get()),
                                [&](double* out) { dbs_region_roots(region.get(), out); });
  double lo = 0.0, hi = 0.0;
  if (dbs_invreg_normal_ci(root, roots.data(), roots.size(), c.alpha, &lo, &hi) == DBS_OK)
    payload["normal_ci"] = {lo, hi};
  else
    payload["normal_ci"] = nullptr;
  return payload;
}

json run_simulate(const RunConfig& c, unsigned threads, json& cfg, json& drops) {
  static const std::pair<const char*, dbs_scenario_kind> kinds[] = {
      {"density_1d", DBS_SCENARIO_DENSITY_1D},
      {"levelset_2d", DBS_SCENARIO_LEVELSET_2D},
      {"regression_sine", DBS_SCENARIO_REGRESSION_SINE},
      {"invreg_exp", DBS_SCENARIO_INVREG_EXP}};
  static const std::pair<const char*, dbs_bandwidth_rule> rules[] = {
      {"rot", DBS_RULE_ROT}, {"rot_x2", DBS_RULE_ROT_X2}, {"rot_half", DBS_RULE_ROT_HALF},
      {"cv", DBS_RULE_CV},   {"cv_x2", DBS_RULE_CV_X2},   {"cv_half", DBS_RULE_CV_HALF},
      {"fixed", DBS_RULE_FIXED}};
  dbs_scenario_kind kind = DBS_SCENARIO_DENSITY_1D;
  for (const auto& [name, k] : kinds)
    if (c.scenario == name) kind = k;
  dbs_scenario sc;
  dbs_scenario_default(kind, &sc);
  const bool density = scenario_is_density(c.scenario);
  const std::string rule = c.bandwidth_rule.empty() ? (density ? "rot" : "cv") : c.bandwidth_rule;
  for (const auto& [name, r] : rules)
    if (rule == name) sc.rule = r;
  static const std::pair<const char*, size_t> default_n[] = {
      {"density_1d", 2000}, {"levelset_2d", 1000}, {"regression_sine", 1000}, {"invreg_exp", 500}};
  size_t n = c.n;
  for (const auto& [name, dn] : default_n)
    if (n == 0 && c.scenario == name) n = dn;
  sc.n = n;
  sc.fixed_h = c.fixed_h;
  sc.tau = c.tau;
  sc.replicates = c.boot;
  sc.trials = c.trials;
  sc.seed = c.seed;
  sc.estimator = estimator_of(c);
  sc.kernel = kernel_of(c);
  sc.grid_size = c.grid;
  sc.level = c.scenario == "invreg_exp" ? c.r0.value_or(0.0) : c.level.value_or(0.0);
  sc.cv_folds = c.cv_folds;
  sc.cv_repeats = c.cv_repeats;
  sc.threads = threads;

  cfg.erase("alpha");
  cfg["scenario"] = c.scenario;
  cfg["n"] = n;
  cfg["trials"] = c.trials;
  cfg["bandwidth_rule"] = rule;
  if (rule == "fixed") cfg["fixed_h"] = c.fixed_h;
  cfg["nominal"] = c.nominal;
  cfg["grid"] = c.grid != 0 ? c.grid : (c.scenario == "levelset_2d" ? 128 : 512);
  if (c.scenario == "levelset_2d") cfg["level"] = c.level.value_or(0.25);
  if (c.scenario == "invreg_exp") cfg["r0"] = c.r0.value_or(0.5);
  if (!density) {
    cfg["cv_folds"] = c.cv_folds;
    cfg["cv_repeats"] = c.cv_repeats;
  }

  dbs_report* r = nullptr;
  check(dbs_simulate(&sc, c.nominal.data(), c.nominal.size(), &r));
  ReportHandle report(r);
  auto rows = [&](int normal) {
    json out = json::array();
    for (size_t i = 0; i < dbs_report_rows(report.get()); ++i) {
      double nominal = 0, cov = 0, se = 0;
      size_t hits = 0, evaluated = 0;
      check(dbs_report_row(report.get(), i, normal, &nominal, &hits, &evaluated, &cov, &se));
      out.push_back({{"nominal", nominal}, {"hits", hits}, {"evaluated", evaluated}, {"coverage", cov}, {"se", se}});
    }
    return out;
  };
  json p;
  p["rows"] = rows(0);
  if (dbs_report_has_normal_rows(report.get())) p["normal_rows"] = rows(1);
  p["failed_trials"] = dbs_report_failed_trials(report.get());
  p["mean_h"] = dbs_report_mean_h(report.get());
  p["bandwidths"] = read_array(c.trials, [&](double* out) { dbs_report_bandwidths(report.get(), out); });
  drops["replicates_dropped"] = dbs_report_dropped_replicates(report.get());
  drops["replicates_total"] = dbs_report_total_replicates(report.get());
  drops["failed_trials"] = dbs_report_failed_trials(report.get());
  return p;
}

std::string csv_number(double v) {
  if (std::isnan(v)) return "nan";
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

std::string csv_table(const json& doc) {
  std::ostringstream os;
  const json& p = doc.at("payload");
  const std::string cmd = doc.at("command");
  auto num = [](const json& v) { return v.is_null() ? std::string("nan") : csv_number(v.get<double>()); };
  if (cmd == "density-band" || cmd == "regression-band") {
    const bool two_d = !p.at("grid").empty() && p.at("grid")[0].is_array();
    os << (two_d ? "x1,x2" : "x") << ",center,lower,upper\n";
    for (size_t i = 0; i < p.at("center").size(); ++i) {
      const json& g = p.at("grid")[i];
      if (two_d)
        os << num(g[0]) << ',' << num(g[1]);
      else
        os << num(g);
      os << ',' << num(p["center"][i]) << ',' << num(p["lower"][i]) << ',' << num(p["upper"][i]) << '\n';
    }
  } else if (cmd == "simulate-coverage") {
    os << "nominal,coverage,se,hits,evaluated\n";
    for (const json& r : p.at("rows"))
      os << num(r["nominal"]) << ',' << num(r["coverage"]) << ',' << num(r["se"]) << ','
         << r["hits"].get<size_t>() << ',' << r["evaluated"].get<size_t>() << '\n';
  } else {
    const bool two_d = p.at("dim") == 2;
    os << (two_d ? "x1,x2" : "x") << ",radius\n";
    for (const json& pt : p.at("center_points")) {
      if (two_d)
        os << num(pt[0]) << ',' << num(pt[1]);
      else
        os << num(pt);
      os << ',' << num(p["radius"]) << '\n';
    }
  }
  return os.str();
}

void add_common(CLI::App* sub, RunConfig& c) {
  static const auto open_unit = CLI::Validator(
      [](std::string& s) -> std::string {
        double v = 0;
        if (!parse_number(s, v) || !(v > 0.0 && v < 1.0)) return "value " + s + " must lie in (0, 1)";
        return "";
      },
      "(0,1)");
  sub->add_option("--alpha", c.alpha, "Significance level")->check(open_unit);
  sub->add_option("--boot", c.boot, "Bootstrap replicates")->check(CLI::PositiveNumber);
  sub->add_option("--seed", c.seed, "Random seed");
  sub->add_option("--output", c.output, "Output JSON path (default stdout)");
  sub->add_option("--threads", c.threads, "Worker threads (0: all cores)")->check(CLI::NonNegativeNumber);
  sub->add_option("--tau", c.tau, "Bandwidth ratio h / b")->check(CLI::PositiveNumber);
  sub->add_option("--grid", c.grid, "Grid points (per axis in 2-d)")
      ->check(CLI::Validator(
          [](std::string& s) -> std::string {
            double v = 0;
            if (!parse_number(s, v) || v < 2 || v != std::floor(v)) return "grid size must be an integer >= 2";
            return "";
          },
          ">=2"));
  sub->add_option("--format", c.format, "json or csv")->check(CLI::IsMember({"json", "csv"}));
  sub->add_option("--kernel", c.kernel, "gaussian or biweight")->check(CLI::IsMember({"gaussian", "biweight"}));
  sub->add_option("--estimator", c.estimator, "debiased or plain")->check(CLI::IsMember({"debiased", "plain"}));
}

void add_data(CLI::App* sub, RunConfig& c, bool regression) {
  sub->add_option("--input", c.input, "CSV input with a header row")->required();
  sub->add_option("--bandwidth", c.bandwidth,
                  regression ? "cv or a positive number" : "rot, lscv, cv (lscv) or a positive number");
  if (regression) {
    sub->add_option("--cv-folds", c.cv_folds, "Cross-validation folds")->check(CLI::Range(2, 1000));
    sub->add_option("--cv-repeats", c.cv_repeats, "Cross-validation repeats")->check(CLI::PositiveNumber);
  }
}

}  // namespace

std::vector<double> parse_levels(const std::string& spec) {
  std::vector<double> out;
  auto fail = [&] { throw CliError(kExitUsage, "--nominal: cannot parse '" + spec + "'"); };
  if (spec.find(':') != std::string::npos) {
    std::vector<std::string> parts;
    std::string part;
    std::istringstream in(spec);
    while (std::getline(in, part, ':')) parts.push_back(trim(part));
    double a = 0, b = 0, step = 0;
    if (parts.size() != 3 || !parse_number(parts[0], a) || !parse_number(parts[1], b) ||
        !parse_number(parts[2], step) || !(step > 0.0) || b < a)
      fail();
    const auto count = static_cast<size_t>(std::floor((b - a) / step + 1e-9)) + 1;
    for (size_t k = 0; k < count; ++k) {
      // Rounding to 12 decimals keeps 0.80 + 5 * 0.01 printing as 0.85.
      const double v = a + static_cast<double>(k) * step;
      out.push_back(std::round(v * 1e12) / 1e12);
    }
  } else {
    for (const auto& f : split(spec)) {
      double v = 0;
      if (!parse_number(f, v)) fail();
      out.push_back(v);
    }
  }
  if (out.empty()) fail();
  for (size_t i = 0; i < out.size(); ++i) {
    if (!(out[i] > 0.0 && out[i] < 1.0)) throw CliError(kExitUsage, "--nominal: levels must lie in (0, 1)");
    if (i > 0 && !(out[i] > out[i - 1]))
      throw CliError(kExitUsage, "--nominal: levels must be strictly increasing");
  }
  return out;
}

RunConfig parse_args(int argc, const char* const* argv) {
  RunConfig c;
  CLI::App app{"Debiased confidence bands and sets"};
  app.name("debias-cli");
  app.set_help_flag("--help", "Print this help message and exit");
  app.require_subcommand(1, 1);

  auto* density = app.add_subcommand("density-band", "Confidence band for a density");
  add_common(density, c);
  add_data(density, c, false);
  density->add_option("--band-kind", c.band_kind, "fixed or variable")->check(CLI::IsMember({"fixed", "variable"}));

  auto* regression = app.add_subcommand("regression-band", "Confidence band for a regression function");
  add_common(regression, c);
  add_data(regression, c, true);

  auto* levelset = app.add_subcommand("levelset-set", "Confidence set for a density level set");
  add_common(levelset, c);
  add_data(levelset, c, false);
  double level = 0.0;
  levelset->add_option("--level", level, "Density level lambda")->required();

  auto* invreg = app.add_subcommand("invreg-set", "Confidence set for an inverse regression");
  add_common(invreg, c);
  add_data(invreg, c, true);
  double r0 = 0.0;
  invreg->add_option("--r0", r0, "Regression level r0")->required();

  auto* sim = app.add_subcommand("simulate-coverage", "Monte-Carlo coverage study");
  add_common(sim, c);
  sim->add_option("--scenario", c.scenario, "density_1d, levelset_2d, regression_sine, invreg_exp")
      ->required()
      ->check(CLI::IsMember({"density_1d", "levelset_2d", "regression_sine", "invreg_exp"}));
  sim->add_option("--n", c.n, "Sample size per trial")->check(CLI::Range(std::size_t{20}, std::size_t{100000000}));
  sim->add_option("--trials", c.trials, "Monte-Carlo trials")->check(CLI::PositiveNumber);
  std::string nominal;
  sim->add_option("--nominal", nominal, "Levels as a:b:step or a comma list");
  sim->add_option("--bandwidth-rule", c.bandwidth_rule, "rot, rot_x2, rot_half, cv, cv_x2, cv_half, fixed")
      ->check(CLI::IsMember({"rot", "rot_x2", "rot_half", "cv", "cv_x2", "cv_half", "fixed"}));
  sim->add_option("--h", c.fixed_h, "Bandwidth for the fixed rule")->check(CLI::PositiveNumber);
  double sim_level = 0.0, sim_r0 = 0.0;
  sim->add_option("--level", sim_level, "Level for levelset_2d");
  sim->add_option("--r0", sim_r0, "Level for invreg_exp");
  sim->add_option("--cv-folds", c.cv_folds, "Cross-validation folds")->check(CLI::Range(2, 1000));
  sim->add_option("--cv-repeats", c.cv_repeats, "Cross-validation repeats")->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    throw CliError(kExitOk, app.help());
  } catch (const CLI::CallForAllHelp&) {
    throw CliError(kExitOk, app.help("", CLI::AppFormatMode::All));
  } catch (const CLI::ParseError& e) {
    throw CliError(kExitUsage, e.what());
  }

  const CLI::App* sub = app.get_subcommands().front();
  c.command = sub->get_name();
  if (c.command == "levelset-set") c.level = level;
  if (c.command == "invreg-set") c.r0 = r0;
  if (c.command == "simulate-coverage") {
    if (sub->count("--level")) c.level = sim_level;
    if (sub->count("--r0")) c.r0 = sim_r0;
    if (!nominal.empty()) c.nominal = parse_levels(nominal);
    const bool density_sc = scenario_is_density(c.scenario);
    const std::string rule = c.bandwidth_rule.empty() ? (density_sc ? "rot" : "cv") : c.bandwidth_rule;
    if (!density_sc && rule.rfind("rot", 0) == 0)
      throw CliError(kExitUsage, "--bandwidth-rule: regression scenarios need cv or fixed");
    if (rule == "fixed" && !(c.fixed_h > 0.0))
      throw CliError(kExitUsage, "--h: the fixed rule needs a positive bandwidth");
  }
  if (!c.bandwidth.empty()) {
    double h = 0;
    const bool regression = c.command == "regression-band" || c.command == "invreg-set";
    const bool named = regression ? c.bandwidth == "cv"
                                  : (c.bandwidth == "rot" || c.bandwidth == "lscv" || c.bandwidth == "cv");
    if (!named && !(parse_number(c.bandwidth, h) && h > 0.0))
      throw CliError(kExitUsage, "--bandwidth: '" + c.bandwidth + "' is not " +
                                     (regression ? "cv or a positive number" : "rot, lscv, cv or a positive number"));
  }
  if (c.format == "csv" && c.output.empty())
    throw CliError(kExitUsage, "--format: csv export needs --output");
  return c;
}

CsvTable read_csv(const std::string& path, const std::vector<std::string>& required) {
  std::ifstream in(path);
  if (!in) throw CliError(kExitMissingFile, "cannot open input file '" + path + "'");
  CsvTable t;
  std::string line;
  size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (lineno == 1 && line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
    if (!trim(line).empty()) break;
  }
  if (trim(line).empty()) throw CliError(kExitMalformed, path + ": missing header row");
  t.header = split(line);
  std::vector<size_t> pick;
  for (const auto& name : required) {
    auto it = std::find(t.header.begin(), t.header.end(), name);
    if (it == t.header.end()) throw CliError(kExitMalformed, path + ": header lacks column '" + name + "'");
    pick.push_back(static_cast<size_t>(it - t.header.begin()));
  }
  t.columns.assign(required.size(), {});
  std::vector<size_t> bad;
  size_t bad_total = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    const auto fields = split(line);
    bool ok = fields.size() == t.header.size();
    std::vector<double> vals(pick.size());
    for (size_t k = 0; ok && k < pick.size(); ++k) ok = parse_number(fields[pick[k]], vals[k]);
    if (!ok) {
      ++bad_total;
      if (bad.size() < 10) bad.push_back(lineno);
      continue;
    }
    for (size_t k = 0; k < pick.size(); ++k) t.columns[k].push_back(vals[k]);
    ++t.rows;
  }
  if (bad_total > 0) {
    std::ostringstream msg;
    msg << path << ": " << bad_total << " malformed row(s) at line(s)";
    for (size_t l : bad) msg << ' ' << l;
    if (bad_total > bad.size()) msg << " ...";
    throw CliError(kExitMalformed, msg.str());
  }
  if (t.rows == 0) throw CliError(kExitMalformed, path + ": no data rows");
  return t;
}

nlohmann::json run(const RunConfig& c) {
  const auto start = std::chrono::steady_clock::now();
  const unsigned threads = resolve_threads(c);
  json cfg = base_config(c);
  if (!c.input.empty()) cfg["input"] = std::filesystem::path(c.input).filename().string();
  cfg["grid"] = c.grid;
  json drops{{"replicates_total", c.boot}};
  json payload;
  if (c.command == "density-band")
    payload = run_density_band(c, threads, cfg, drops);
  else if (c.command == "regression-band")
    payload = run_regression_band(c, threads, cfg, drops);
  else if (c.command == "levelset-set")
    payload = run_levelset_set(c, threads, cfg, drops);
  else if (c.command == "invreg-set")
    payload = run_invreg_set(c, threads, cfg, drops);
  else
    payload = run_simulate(c, threads, cfg, drops);
  if (cfg["grid"] == 0 && c.command != "simulate-coverage") {
    const bool two_d = cfg.contains("dim") && cfg["dim"] == 2;
    cfg["grid"] = two_d ? 128 : 512;
  }
  json doc;
  doc["schema_version"] = kSchemaVersion;
  doc["command"] = c.command;
  doc["config"] = std::move(cfg);
  doc["payload"] = std::move(payload);
  doc["drops"] = std::move(drops);
  doc["timing"] = {{"seconds", std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count()},
                   {"threads", threads}};
  return doc;
}

std::string serialize(const nlohmann::json& doc) { return doc.dump(2) + "\n"; }

void write_result(const nlohmann::json& doc, const RunConfig& c) {
  const std::string text = serialize(doc);
  if (c.output.empty()) {
    std::cout << text;
    if (!std::cout) throw CliError(kExitIo, "failed to write to stdout");
  } else {
    std::ofstream out(c.output, std::ios::binary);
    if (!out) throw CliError(kExitIo, "cannot open '" + c.output + "' for writing");
    out << text;
    out.close();
    if (!out) throw CliError(kExitIo, "failed to write '" + c.output + "'");
  }
  if (c.format == "csv") {
    const auto csv_path = std::filesystem::path(c.output).replace_extension(".csv");
    std::ofstream out(csv_path, std::ios::binary);
    if (!out) throw CliError(kExitIo, "cannot open '" + csv_path.string() + "' for writing");
    out << csv_table(doc);
    out.close();
    if (!out) throw CliError(kExitIo, "failed to write '" + csv_path.string() + "'");
  }
}

int main_entry(int argc, const char* const* argv) {
  try {
    const RunConfig cfg = parse_args(argc, argv);
    write_result(run(cfg), cfg);
    return kExitOk;
  } catch (const CliError& e) {
    if (e.code() == kExitOk) {
      std::cout << e.what();
      return kExitOk;
    }
    std::cerr << "debias-cli: " << e.what() << "\n";
    return e.code();
  } catch (const std::exception& e) {
    std::cerr << "debias-cli: " << e.what() << "\n";
    return kExitCompute;
  }
}

}  // namespace debias_cli
