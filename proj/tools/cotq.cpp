// Command-line front end: fit, simulate, validate, contours.

#include <CLI11.hpp>

#include <cstdio>
#include <iostream>
#include <new>

#include "cotq/io.hpp"
#include "cotq/regression.hpp"
#include "cotq/simdata.hpp"
#include "cotq/validate.hpp"

namespace {

using namespace cotq;

int exit_code(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::InvalidSpec:
    case ErrorKind::InvalidOrder:
    case ErrorKind::Unsupported: return 1;
    case ErrorKind::InvalidInput:
    case ErrorKind::Data:
    case ErrorKind::Io:
    case ErrorKind::OutOfDomain: return 2;
    default: return 3;
  }
}

std::vector<double> parse_list(const std::string& text, const char* what) {
  std::vector<double> out;
  std::string flat = text;
  std::replace(flat.begin(), flat.end(), ';', ',');
  for (const auto& cell : detail::split_names(flat)) {
    const auto v = detail::parse_number(cell);
    if (!v) fail(ErrorKind::InvalidSpec, std::string(what) + " value '" + cell + "' is not a number");
    out.push_back(*v);
  }
  return out;
}

/// "n_r,n_s,n_0"; the dimension comes from the data.
GridSpec parse_grid(const std::string& text) {
  const auto v = parse_list(text, "grid");
  if (v.size() != 3) fail(ErrorKind::InvalidSpec, "grid must be given as n_r,n_s,n_0");
  for (double x : v)
    if (x != std::floor(x)) fail(ErrorKind::InvalidSpec, "grid counts must be integers");
  GridSpec g;
  g.n_r = static_cast<int>(v[0]);
  g.n_s = static_cast<int>(v[1]);
  g.n_0 = static_cast<int>(v[2]);
  return g;
}

/// Flags shared by `fit` and `contours`; set ones override the config file.
struct FitFlags {
  std::string config, data, x, y, weights, grid, taus, queries, out;
  double k = 0, h = 0, smoothing = 0;
  std::uint64_t seed = 0;
  int threads = 1;
  long long max_cost_entries = 0;
  CLI::Option *k_opt, *h_opt, *smoothing_opt, *seed_opt, *threads_opt, *cap_opt;

  void add(CLI::App* app, bool with_queries) {
    app->add_option("--config", config, "JSON run configuration");
    app->add_option("--data", data, "CSV dataset");
    app->add_option("--x", x, "covariate columns, comma separated");
    app->add_option("--y", y, "response columns, comma separated");
    app->add_option("--weights", weights, "gaussian | epanechnikov | uniform | knn | co_knn");
    k_opt = app->add_option("--k", k, "neighbor count");
    h_opt = app->add_option("--bandwidth", h, "kernel bandwidth h");
    app->add_option("--grid", grid, "response grid n_r,n_s,n_0");
    app->add_option("--taus", taus, "quantile orders, comma separated");
    if (with_queries) app->add_option("--queries", queries, "auto:K or a list of covariate values");
    smoothing_opt = app->add_option("--smoothing", smoothing, "Moreau smoothing epsilon");
    seed_opt = app->add_option("--seed", seed, "seed for grid directions");
    threads_opt = app->add_option("--threads", threads, "worker threads (0 = all cores)");
    cap_opt = app->add_option("--max-cost-entries", max_cost_entries, "raise the dense transport size cap (N x k)");
  }

  RunConfig resolve() const {
    RunConfig c = config.empty() ? RunConfig{} : load_config(config);
    if (!data.empty()) c.dataset = data;
    if (!x.empty()) c.x_columns = detail::split_names(x);
    if (!y.empty()) c.y_columns = detail::split_names(y);
    if (!weights.empty()) c.weights.scheme = parse_weight_scheme(weights);
    if (k_opt->count()) {
      if (k != std::floor(k)) fail(ErrorKind::InvalidSpec, "k must be an integer");
      c.weights.k = static_cast<int>(k);
    }
    if (h_opt->count()) c.weights.h = h;
    if (!grid.empty()) c.grid = parse_grid(grid);
    if (!taus.empty()) c.taus = parse_list(taus, "tau");
    if (!queries.empty()) c.queries = queries;
    if (smoothing_opt->count()) c.smoothing = smoothing;
    if (seed_opt->count()) c.seed = seed;
    if (threads_opt->count()) c.threads = threads;
    if (cap_opt->count()) c.max_cost_entries = max_cost_entries;
    if (!out.empty()) c.output_dir = out;
    for (double t : c.taus) check_order(t);
    if (c.dataset.empty()) fail(ErrorKind::InvalidSpec, "no dataset given (--data or config 'dataset')");
    return c;
  }
};

Dataset load(RunConfig& c) {
  Dataset ds = load_csv(c.dataset, c.x_columns, c.y_columns);
  if (ds.dropped > 0) std::cerr << "note: dropped " << ds.dropped << " rows with missing values\n";
  if (c.grid) c.grid->d = static_cast<int>(ds.Y.cols());
  return ds;
}

void add_in_sample_mass(std::vector<ContourRecord>& records, const std::vector<ConditionalQuantileMap>& maps,
                        const Dataset& ds, const RegressionConfig& rc) {
  std::size_t r = 0;
  for (const auto& m : maps) {
    const auto mass = in_sample_mass(m, ds.X, ds.Y, rc.weights, rc.taus);
    for (double v : mass) records[r++].in_sample_mass = v;
  }
}

int run_fit(const FitFlags& flags) {
  RunConfig c = flags.resolve();
  const Dataset ds = load(c);
  const RegressionConfig rc = regression_config(c, ds.X);
  const RegressionResult res = fit_queries(ds.X, ds.Y, rc);
  for (const auto& w : res.warnings) std::cerr << "warning: " << w << '\n';
  std::vector<ContourRecord> records = make_records(res.maps, rc.taus);
  add_in_sample_mass(records, res.maps, ds, rc);
  const auto dir = output_dir(c.output_dir);
  const WrittenFiles files = write_contours(records, dir, ds.x_names, ds.y_names, to_json(c));
  std::cout << "wrote " << files.contours.size() << " contour files, " << files.medians.string() << ", "
            << files.json.string() << (files.svg ? ", " + files.svg->string() : "") << '\n';
  return 0;
}

int run_contours(const FitFlags& flags, const std::string& at) {
  RunConfig c = flags.resolve();
  if (at.empty()) fail(ErrorKind::InvalidSpec, "--at is required");
  const Dataset ds = load(c);
  const std::vector<double> x = parse_list(at, "--at");
  if (static_cast<Eigen::Index>(x.size()) != ds.X.cols())
    fail(ErrorKind::InvalidSpec, "--at needs " + std::to_string(ds.X.cols()) + " coordinates");
  c.queries = at;
  RegressionConfig rc = regression_config(c, ds.X);
  rc.queries = {Eigen::Map<const Vector>(x.data(), static_cast<Eigen::Index>(x.size()))};
  const RegressionResult res = fit_queries(ds.X, ds.Y, rc);
  for (const auto& w : res.warnings) std::cerr << "warning: " << w << '\n';
  std::vector<ContourRecord> records = make_records(res.maps, rc.taus);
  add_in_sample_mass(records, res.maps, ds, rc);
  std::cout << results_document(records, to_json(c)).dump(2) << '\n';
  return 0;
}

int run_simulate(const std::string& model_name, long long n, std::uint64_t seed, const std::string& out) {
  const Model model = parse_model(model_name);
  const SimSample s = generate(model, n, seed);
  std::filesystem::path path = out;
  if (path.empty()) {
    const auto dir = prepare_dir(output_dir());
    path = dir / ("simulate_" + std::string(to_string(model)) + "_n" + std::to_string(n) + "_seed" +
                  std::to_string(seed) + ".csv");
  } else if (path.has_parent_path()) {
    prepare_dir(path.parent_path());
  }
  write_dataset(path, Dataset{s.X, s.Y, {"x"}, {"y1", "y2"}, 0});
  std::cout << "wrote " << path.string() << '\n';
  return 0;
}

struct ValidateFlags {
  std::string suite = "coverage", model = "spherical", grid, taus, queries, levels, out;
  long long n = 10000, mc = 10000;
  int k = 1000, replicates = 10, threads = 1;
  double x = 0.0;
  std::uint64_t seed = 1;
};

/// "n:k:n_r,n_s,n_0" entries separated by ';'.
std::vector<ConsistencyLevel> parse_levels(const std::string& text) {
  std::vector<ConsistencyLevel> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ';')) {
    item = detail::trim(item);
    if (item.empty()) continue;
    const auto a = item.find(':'), b = item.find(':', a == std::string::npos ? a : a + 1);
    if (a == std::string::npos || b == std::string::npos) fail(ErrorKind::InvalidSpec, "level '" + item + "' is not n:k:n_r,n_s,n_0");
    ConsistencyLevel l;
    const auto n = detail::parse_number(item.substr(0, a));
    const auto k = detail::parse_number(item.substr(a + 1, b - a - 1));
    if (!n || !k) fail(ErrorKind::InvalidSpec, "level '" + item + "' is not n:k:n_r,n_s,n_0");
    l.n = static_cast<long long>(*n);
    l.k = static_cast<int>(*k);
    l.grid = parse_grid(item.substr(b + 1));
    out.push_back(l);
  }
  return out;
}

int run_validate(const ValidateFlags& f) {
  const Model model = parse_model(f.model);
  const auto dir = prepare_dir(output_dir(f.out));
  const std::vector<double> taus = f.taus.empty() ? std::vector<double>{0.2, 0.4, 0.8} : parse_list(f.taus, "tau");
  for (double t : taus) check_order(t);
  Json doc{{"schema", kSchema}, {"suite", f.suite}, {"model", to_string(model)}, {"seed", f.seed}};

  if (f.suite == "coverage") {
    CoverageConfig cfg;
    cfg.model = model;
    cfg.n = f.n;
    cfg.mc = f.mc;
    cfg.seed = f.seed;
    cfg.regression.weights.scheme = WeightScheme::Knn;
    cfg.regression.weights.k = f.k;
    if (!f.grid.empty()) cfg.regression.grid = parse_grid(f.grid);
    cfg.regression.taus = taus;
    const auto xs = parse_list(f.queries.empty() ? "-2,-1,0,1,2" : f.queries, "query");
    for (double x : xs) cfg.regression.queries.push_back(Vector::Constant(1, x));
    cfg.regression.threads = f.threads;
    const CoverageReport rep = coverage_suite(cfg);
    doc["n"] = f.n;
    doc["k"] = f.k;
    doc["mc"] = f.mc;
    doc["entries"] = Json::array();
    Matrix table(static_cast<Eigen::Index>(rep.entries.size()), 5);
    for (std::size_t i = 0; i < rep.entries.size(); ++i) {
      const auto& e = rep.entries[i];
      table.row(static_cast<Eigen::Index>(i)) << e.x, e.tau, e.coverage, static_cast<double>(e.mc), e.abs_error;
      doc["entries"].push_back({{"x", e.x}, {"tau", e.tau}, {"coverage", e.coverage}, {"mc", e.mc}, {"abs_error", e.abs_error}});
      std::printf("x=%-5g tau=%-4g coverage=%.4f |error|=%.4f\n", e.x, e.tau, e.coverage, e.abs_error);
    }
    write_csv(dir / "coverage.csv", {"x", "tau", "coverage", "mc", "abs_error"}, {&table});
  } else if (f.suite == "consistency") {
    const auto levels = parse_levels(f.levels.empty() ? "3601:401:10,40,1;10000:1000:20,50,0" : f.levels);
    const HausdorffReport rep = consistency_curve(model, levels, f.x, taus, f.replicates, f.seed, f.threads);
    doc["x"] = f.x;
    doc["replicates"] = f.replicates;
    doc["median_error"] = rep.median_error;
    doc["decreasing"] = rep.decreasing;
    doc["entries"] = Json::array();
    Matrix table(static_cast<Eigen::Index>(rep.entries.size()), 5);
    for (std::size_t i = 0; i < rep.entries.size(); ++i) {
      const auto& e = rep.entries[i];
      table.row(static_cast<Eigen::Index>(i)) << static_cast<double>(e.n), e.replicate, e.x, e.tau, e.error;
      doc["entries"].push_back({{"n", e.n}, {"replicate", e.replicate}, {"x", e.x}, {"tau", e.tau}, {"hausdorff", e.error}});
    }
    for (std::size_t l = 0; l < levels.size(); ++l)
      std::printf("n=%-6lld median hausdorff=%.4f\n", levels[l].n, rep.median_error[l]);
    std::printf("decreasing: %s\n", rep.decreasing ? "yes" : "no");
    write_csv(dir / "consistency.csv", {"n", "replicate", "x", "tau", "hausdorff"}, {&table});
  } else {
    fail(ErrorKind::InvalidSpec, "unknown suite '" + f.suite + "' (coverage | consistency)");
  }
  const auto json_path = dir / (f.suite + ".json");
  std::ofstream js = detail::open_output(json_path);
  js << doc.dump(2) << '\n';
  detail::finish(js, json_path);
  std::cout << "wrote " << (dir / (f.suite + ".csv")).string() << ", " << json_path.string() << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Conditional center-outward quantile regression"};
  app.require_subcommand(1);

  FitFlags fit_flags;
  auto* fit = app.add_subcommand("fit", "fit quantile contours at query covariates and write CSV/JSON/SVG");
  fit_flags.add(fit, true);
  fit->add_option("--out", fit_flags.out, "output directory (default $COTQ_OUTPUT_DIR or ./cotq_out)");

  FitFlags contour_flags;
  std::string at;
  auto* contours = app.add_subcommand("contours", "fit at one covariate value and print JSON to stdout");
  contour_flags.add(contours, false);
  contours->add_option("--at", at, "covariate value(s), comma separated")->required();

  std::string model;
  long long n = 0;
  std::uint64_t seed = 0;
  std::string sim_out;
  auto* simulate = app.add_subcommand("simulate", "draw a sample from a simulation model and write CSV");
  simulate->add_option("model", model, "spherical | banana | eyelid")->required();
  simulate->add_option("--n", n, "sample size")->required();
  simulate->add_option("--seed", seed, "random seed");
  simulate->add_option("--out", sim_out, "output CSV path");

  ValidateFlags vf;
  auto* validate = app.add_subcommand("validate", "run a statistical validation suite and write a report");
  validate->add_option("--suite", vf.suite, "coverage | consistency");
  validate->add_option("--model", vf.model, "simulation model");
  validate->add_option("--n", vf.n, "training sample size (coverage)");
  validate->add_option("--k", vf.k, "neighbor count (coverage)");
  validate->add_option("--grid", vf.grid, "response grid n_r,n_s,n_0 (coverage)");
  validate->add_option("--taus", vf.taus, "quantile orders");
  validate->add_option("--queries", vf.queries, "covariate values (coverage)");
  validate->add_option("--mc", vf.mc, "Monte Carlo draws per query (coverage)");
  validate->add_option("--levels", vf.levels, "n:k:n_r,n_s,n_0 entries separated by ';' (consistency)");
  validate->add_option("--replicates", vf.replicates, "replicates per level (consistency)");
  validate->add_option("--x", vf.x, "covariate value (consistency)");
  validate->add_option("--seed", vf.seed, "master seed");
  validate->add_option("--threads", vf.threads, "worker threads (0 = all cores)");
  validate->add_option("--out", vf.out, "output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }

  try {
    if (*fit) return run_fit(fit_flags);
    if (*contours) return run_contours(contour_flags, at);
    if (*simulate) return run_simulate(model, n, seed, sim_out);
    if (*validate) return run_validate(vf);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_code(e.kind());
  } catch (const std::bad_alloc&) {
    std::cerr << "error: out of memory\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: internal: " << e.what() << '\n';
    return 3;
  }
  return 1;
}
