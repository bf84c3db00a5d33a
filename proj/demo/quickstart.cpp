// Fit conditional quantile contours of the banana model and print a summary.
// Usage: quickstart [output_dir]

#include <cstdio>

#include "cotq/io.hpp"
#include "cotq/regression.hpp"
#include "cotq/simdata.hpp"

int main(int argc, char** argv) {
  using namespace cotq;
  const SimSample sample = generate(Model::Banana, 3601, 1);

  RegressionConfig cfg;
  cfg.weights.scheme = WeightScheme::Knn;
  cfg.weights.k = 401;
  cfg.grid = GridSpec{2, 10, 40, 1, 0};  // N = 401 = k
  cfg.taus = {0.2, 0.4, 0.8};
  cfg.queries = linspace_queries(-2, 2, 9);

  try {
    const RegressionResult fit = fit_queries(sample.X, sample.Y, cfg);
    for (const auto& w : fit.warnings) std::fprintf(stderr, "warning: %s\n", w.c_str());

    std::printf("%6s %10s %10s %14s\n", "x", "median y1", "median y2", "crossings");
    for (const auto& map : fit.maps) {
      const Vector med = median_region(map).point;
      std::printf("%6.2f %10.3f %10.3f %14lld\n", map.query_x(0), med(0), med(1), count_crossings(map));
    }

    // Rank of a new response at x = 0: the order of the smallest region containing it.
    const Vector y = (Vector(2) << 0.5, 1.0).finished();
    std::printf("rank of (0.5, 1.0) at x = 0: %.3f\n", rank(fit.maps[4], y));

    const auto dir = output_dir(argc > 1 ? argv[1] : "");
    const WrittenFiles files = write_contours(make_records(fit.maps, cfg.taus), dir, {"x"}, {"y1", "y2"});
    std::printf("wrote %zu contour CSVs and %s\n", files.contours.size(), files.svg->string().c_str());
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
