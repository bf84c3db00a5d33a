#include <gtest/gtest.h>

#include <boost/property_tree/ptree.hpp>
#include <boost/property_tree/xml_parser.hpp>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "cotq/io.hpp"
#include "cotq/simdata.hpp"

namespace cotq {
namespace {

namespace fs = std::filesystem;

class TempDir {
 public:
  TempDir() {
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    path_ = fs::temp_directory_path() / (std::string("cotq_io_") + info->test_suite_name() + "_" + info->name());
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  const fs::path& path() const { return path_; }
  fs::path write(const std::string& name, const std::string& text) const {
    std::ofstream(path_ / name, std::ios::binary) << text;
    return path_ / name;
  }

 private:
  fs::path path_;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

ErrorKind kind_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  ADD_FAILURE() << "no error thrown";
  return ErrorKind::Internal;
}

TEST(LoadCsv, CleanFile) {
  TempDir t;
  const auto p = t.write("a.csv", "x,y1,y2\n0,1,2\n0.5,-1,3e2\n1,2.5,4\n");
  const Dataset ds = load_csv(p.string(), {"x"}, {"y1", "y2"});
  EXPECT_EQ(ds.X.rows(), 3);
  EXPECT_EQ(ds.Y.cols(), 2);
  EXPECT_EQ(ds.dropped, 0);
  EXPECT_EQ(ds.Y(1, 1), 300.0);
  EXPECT_EQ(ds.X(1, 0), 0.5);
}

TEST(LoadCsv, DropsRowsWithMissingCells) {
  TempDir t;
  const auto p = t.write("a.csv", "x,y1,y2\n0,1,2\n0.5,,3\n1,2,4\n");
  const Dataset ds = load_csv(p.string(), {"x"}, {"y1", "y2"});
  EXPECT_EQ(ds.X.rows(), 2);
  EXPECT_EQ(ds.dropped, 1);
  EXPECT_EQ(ds.X(1, 0), 1.0);
}

TEST(LoadCsv, NaCellsAndUnusedColumns) {
  TempDir t;
  const auto p = t.write("a.csv", "id,\"x\",y1,y2,note\r\n1,0,1,2,ok\r\n2,NA,1,2,\r\n3,1,2,3,\"a,b\"\r\n");
  const Dataset ds = load_csv(p.string(), {"x"}, {"y2", "y1"});
  EXPECT_EQ(ds.X.rows(), 2);
  EXPECT_EQ(ds.dropped, 1);
  EXPECT_EQ(ds.Y(1, 0), 3.0);
  EXPECT_EQ(ds.Y(1, 1), 2.0);
}

TEST(LoadCsv, UnknownColumnIsNamed) {
  TempDir t;
  const auto p = t.write("a.csv", "x,y1\n0,1\n");
  try {
    load_csv(p.string(), {"x"}, {"weight"});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::Data);
    EXPECT_NE(std::string(e.what()).find("'weight'"), std::string::npos);
  }
}

TEST(LoadCsv, ParseErrorNamesRow) {
  TempDir t;
  const auto p = t.write("a.csv", "x,y1\n0,1\n1,abc\n");
  try {
    load_csv(p.string(), {"x"}, {"y1"});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::Data);
    EXPECT_NE(std::string(e.what()).find("row 3"), std::string::npos);
  }
}

TEST(LoadCsv, MissingFileAndEmptyFile) {
  TempDir t;
  EXPECT_EQ(kind_of([&] { load_csv((t.path() / "none.csv").string(), {"x"}, {"y"}); }), ErrorKind::Io);
  const auto p = t.write("e.csv", "");
  EXPECT_EQ(kind_of([&] { load_csv(p.string(), {"x"}, {"y"}); }), ErrorKind::Data);
  const auto q = t.write("h.csv", "x,y\n,1\n");
  EXPECT_EQ(kind_of([&] { load_csv(q.string(), {"x"}, {"y"}); }), ErrorKind::Data);
}

TEST(LoadCsv, RoundTripIsLossless) {
  TempDir t;
  const SimSample s = gen_banana(200, 11);
  Dataset ds{s.X, s.Y, {"x"}, {"y1", "y2"}, 0};
  write_dataset(t.path() / "d.csv", ds);
  const Dataset back = load_csv((t.path() / "d.csv").string(), {"x"}, {"y1", "y2"});
  EXPECT_LE((back.X - ds.X).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_LE((back.Y - ds.Y).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_EQ(back.Y, ds.Y);
}

TEST(FormatDouble, RoundTrips) {
  for (double v : {0.1, -2.0 / 3.0, 1e-300, 123456789.125, 0.0})
    EXPECT_EQ(std::stod(format_double(v)), v);
}

TEST(Queries, AutoAndExplicit) {
  Matrix X(3, 1);
  X << -1, 0, 3;
  const auto a = resolve_queries("auto:5", X);
  ASSERT_EQ(a.size(), 5u);
  EXPECT_EQ(a.front()(0), -1.0);
  EXPECT_EQ(a.back()(0), 3.0);
  const auto e = resolve_queries("-2, 0.5,2", X);
  ASSERT_EQ(e.size(), 3u);
  EXPECT_EQ(e[1](0), 0.5);
  EXPECT_EQ(kind_of([&] { resolve_queries("auto:0", X); }), ErrorKind::InvalidSpec);
  EXPECT_EQ(kind_of([&] { resolve_queries("1,b", X); }), ErrorKind::InvalidSpec);
  Matrix X2(2, 2);
  X2.setZero();
  const auto m = resolve_queries("1,2; 3,4", X2);
  ASSERT_EQ(m.size(), 2u);
  EXPECT_EQ(m[1](1), 4.0);
  EXPECT_EQ(kind_of([&] { resolve_queries("auto:3", X2); }), ErrorKind::Unsupported);
  EXPECT_EQ(kind_of([&] { resolve_queries("1,2,3", X2); }), ErrorKind::InvalidSpec);
}

TEST(Config, JsonMergeAndDefaults) {
  RunConfig c;
  merge_config(Json::parse(R"({"dataset":"d.csv","x_columns":["x"],"y_columns":["a","b"],
      "weights":{"scheme":"gaussian","h":0.3},"grid":{"n_r":4,"n_s":8},"taus":[0.1,0.5],
      "queries":[0,1.5],"seed":9})"),
               c);
  EXPECT_EQ(c.dataset, "d.csv");
  EXPECT_EQ(c.weights.scheme, WeightScheme::Gaussian);
  EXPECT_EQ(c.weights.h, 0.3);
  ASSERT_TRUE(c.grid);
  EXPECT_EQ(c.grid->n_r, 4);
  EXPECT_EQ(c.grid->n_0, 0);
  EXPECT_EQ(c.queries, "0;1.5");
  EXPECT_EQ(c.seed, 9u);
  EXPECT_EQ(c.threads, 1);
  EXPECT_EQ(kind_of([&] { merge_config(Json::parse(R"({"taus":"x"})"), c); }), ErrorKind::InvalidSpec);
  EXPECT_EQ(kind_of([&] { merge_config(Json::parse(R"({"weights":{"scheme":"tricube"}})"), c); }), ErrorKind::InvalidSpec);
}

TEST(Config, ListedQueriesResolveForOneCovariate) {
  RunConfig c;
  merge_config(Json::parse(R"({"queries":[0,1.5]})"), c);
  const auto q = resolve_queries(c.queries, Matrix::Zero(2, 1));
  ASSERT_EQ(q.size(), 2u);
  EXPECT_EQ(q[1](0), 1.5);
}

ContourRecord square_record() {
  ContourRecord r;
  r.query = {0.25};
  r.tau = 0.5;
  r.vertices = {{1, 0}, {0, 1}, {-1, 0}, {0, -1}, {1, 0}};
  r.median = {0.0, 0.0};
  return r;
}

TEST(WriteContours, SquareContourHasFiveRows) {
  TempDir t;
  ContourSet c;
  c.tau = 0.5;
  c.vertices.resize(4, 2);
  c.vertices << 1, 0, 0, 1, -1, 0, 0, -1;
  c.closed = true;
  ContourRecord r = square_record();
  r.vertices = to_std(closed_vertices(c));
  const WrittenFiles f = write_contours({r}, t.path(), {"x"}, {"y1", "y2"});
  ASSERT_EQ(f.contours.size(), 1u);
  EXPECT_EQ(f.contours[0].filename(), "contour_q000_tau0.5.csv");
  EXPECT_EQ(slurp(f.contours[0]), "y1,y2\n1,0\n0,1\n-1,0\n0,-1\n1,0\n");
  EXPECT_EQ(slurp(f.medians), "x,median_y1,median_y2\n0.25,0,0\n");
}

TEST(WriteContours, JsonRoundTrips) {
  TempDir t;
  ContourRecord a = square_record(), b = square_record();
  b.tau = 0.8;
  b.vertices = {{0.1 + 0.2, 1.0 / 3.0}, {-7e-300, 2.5}};
  b.coverage = 0.7934;
  a.in_sample_mass = 0.5;
  const std::vector<ContourRecord> recs{a, b};
  const WrittenFiles f = write_contours(recs, t.path(), {"x"}, {"y1", "y2"});
  const std::string text = slurp(f.json);
  EXPECT_NE(text.find("\"schema\": \"cotq/1\""), std::string::npos);
  EXPECT_EQ(parse_results(text), recs);
  EXPECT_EQ(kind_of([] { parse_results(R"({"results":[]})"); }), ErrorKind::Data);
}

TEST(WriteContours, SvgIsWellFormed) {
  TempDir t;
  ContourRecord a = square_record(), b = square_record();
  b.query = {1.0};
  b.tau = 0.8;
  const WrittenFiles f = write_contours({a, b}, t.path(), {"x<&>"}, {"y1", "y2"});
  ASSERT_TRUE(f.svg);
  boost::property_tree::ptree tree;
  ASSERT_NO_THROW(boost::property_tree::read_xml(f.svg->string(), tree));
  EXPECT_EQ(tree.count("svg"), 1u);
}

TEST(WriteContours, NoSvgBeyondThePlane) {
  TempDir t;
  ContourRecord r;
  r.query = {0.0};
  r.tau = 0.5;
  r.vertices = {{1, 2, 3}};
  r.median = {1, 2, 3};
  const WrittenFiles f = write_contours({r}, t.path(), {"x"}, {"a", "b", "c"});
  EXPECT_FALSE(f.svg);
}

TEST(WriteContours, UnwritableDirectory) {
  TempDir t;
  const auto file = t.write("blocker", "x");
  EXPECT_EQ(kind_of([&] { write_contours({square_record()}, file / "sub", {"x"}, {"y1", "y2"}); }), ErrorKind::Io);
}

TEST(OutputDir, EnvironmentDefault) {
  ::setenv("COTQ_OUTPUT_DIR", "/tmp/cotq_env_dir", 1);
  EXPECT_EQ(output_dir(), fs::path("/tmp/cotq_env_dir"));
  EXPECT_EQ(output_dir("here"), fs::path("here"));
  ::unsetenv("COTQ_OUTPUT_DIR");
  EXPECT_EQ(output_dir(), fs::path("cotq_out"));
}

TEST(Records, FromFittedMaps) {
  const SimSample s = gen_spherical(300, 12);
  RegressionConfig cfg;
  cfg.weights.k = 100;
  cfg.taus = {0.3, 0.6};
  cfg.queries = linspace_queries(-1, 1, 2);
  const auto maps = fit_queries(s.X, s.Y, cfg).maps;
  const auto recs = make_records(maps, cfg.taus);
  ASSERT_EQ(recs.size(), 4u);
  EXPECT_EQ(recs[1].query, std::vector<double>{-1.0});
  EXPECT_EQ(recs[1].tau, 0.6);
  EXPECT_EQ(recs[0].vertices.front(), recs[0].vertices.back());
  const auto mass = in_sample_mass(maps[0], s.X, s.Y, cfg.weights, cfg.taus);
  EXPECT_LE(mass[0], mass[1]);
  EXPECT_GE(mass[0], 0.0);
  EXPECT_LE(mass[1], 1.0 + 1e-12);
}

}  // namespace
}  // namespace cotq
