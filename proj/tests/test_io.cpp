#include <doctest.h>

#include <cstring>
#include <filesystem>
#include <random>
#include <sstream>
#include <string>

#include "pnmm/errors.hpp"
#include "pnmm/io.hpp"
#include "support.hpp"

using namespace pnmm;
using namespace pnmm::test;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& tag) {
    path = fs::temp_directory_path() / ("pnmm_io_" + tag + "_" + std::to_string(std::random_device{}()));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

json minimal_config() { return {{"phantom", {{"grid_dims", {16, 16, 16}}}}}; }

}  // namespace

TEST_SUITE("io") {

TEST_CASE("container round trip rounds to float32") {
  TempDir tmp("container");
  std::mt19937_64 rng(1);
  const Matrix data = random_matrix(rng, 5, 24, -100, 100);
  VolumeHeader h;
  h.grid = GridDims{4, 3, 2};
  h.mid_times = Vector::LinSpaced(5, 0.5, 4.5);
  h.durations = Vector::Ones(5);
  h.config_hash = "0123456789abcdef";
  h.seed = 42;
  h.extra = {{"note", "x"}};
  write_container(tmp.path / "vol", h, data);

  const Container c = read_container(tmp.path / "vol");
  CHECK(c.header.kind == ContentKind::dynamic_image);
  CHECK(c.header.rows == 5);
  CHECK(c.header.cols == 24);
  REQUIRE(c.header.grid);
  CHECK(c.header.grid->nx == 4);
  CHECK(c.header.grid->nz == 2);
  CHECK(c.header.mid_times == h.mid_times);
  CHECK(c.header.config_hash == h.config_hash);
  CHECK(c.header.seed == 42);
  CHECK(c.header.extra.at("note") == "x");
  for (Index r = 0; r < 5; ++r)
    for (Index n = 0; n < 24; ++n) CHECK(c.data(r, n) == double(float(data(r, n))));

  // row-major little-endian payload
  const std::string raw = read_file(tmp.path / "vol.raw");
  REQUIRE(raw.size() == 5 * 24 * 4);
  float second;
  std::memcpy(&second, raw.data() + 4, 4);
  CHECK(double(second) == double(float(data(0, 1))));

  for (const auto& e : fs::directory_iterator(tmp.path))
    CHECK(e.path().filename().string().find(".tmp") == std::string::npos);

  VolumeHeader bad = h;
  bad.grid = GridDims{5, 5, 5};
  CHECK_THROWS_AS(write_container(tmp.path / "bad", bad, data), DomainError);
}

TEST_CASE("truncated payload and bad headers are rejected") {
  TempDir tmp("bad");
  write_container(tmp.path / "v", VolumeHeader{}, Matrix::Ones(2, 3));
  atomic_write(tmp.path / "v.raw", std::string(10, '\0'));
  CHECK_THROWS_AS(read_container(tmp.path / "v"), ConfigError);
  atomic_write(tmp.path / "v.json", "{not json");
  CHECK_THROWS_AS(read_container(tmp.path / "v"), ConfigError);
  atomic_write(tmp.path / "v.json", "{\"format\": \"other\"}");
  CHECK_THROWS_AS(read_container(tmp.path / "v"), ConfigError);
}

TEST_CASE("content kinds") {
  for (auto k : {ContentKind::dynamic_image, ContentKind::factor_matrix, ContentKind::proportion_maps,
                 ContentKind::coeff_maps, ContentKind::bp_map, ContentKind::mask})
    CHECK(parse_kind(to_string(k)) == k);
  CHECK(std::string(to_string(ContentKind::coeff_maps)) == "coeff-maps");
  CHECK_THROWS_AS(parse_kind("volume"), ConfigError);
}

TEST_CASE("solver state round trip") {
  TempDir tmp("vars");
  const Instance in = random_instance(3, 6, {4, 2, 1}, 3, 2);
  VolumeHeader base;
  base.grid = in.dims;
  base.mid_times = in.timeline.mid_times;
  base.durations = in.timeline.durations;
  write_variables(tmp.path / "state", in.v, base);
  for (const char* f : {"M", "A", "B", "bp", "r1"}) CHECK(fs::exists(tmp.path / "state" / (std::string(f) + ".raw")));
  const Variables back = read_variables(tmp.path / "state");
  CHECK((back.M - in.v.M).cwiseAbs().maxCoeff() <= 1e-6 * in.v.M.cwiseAbs().maxCoeff());
  CHECK((back.A - in.v.A).cwiseAbs().maxCoeff() <= 1e-7);
  REQUIRE(back.B.size() == 3);
  for (std::size_t i = 0; i < 3; ++i) CHECK((back.B[i] - in.v.B[i]).cwiseAbs().maxCoeff() <= 1e-7);
  // alpha lives in JSON at full precision
  CHECK(back.alpha == in.v.alpha);
  CHECK(read_container(tmp.path / "state" / "M").header.kind == ContentKind::factor_matrix);
  CHECK(read_container(tmp.path / "state" / "bp").header.rows == 2);
}

TEST_CASE("config defaults and strictness") {
  const RunConfig d = parse_config(minimal_config());
  CHECK(d.phantom.grid.nx == 16);
  CHECK(d.solver.eta == SolverConfig{}.eta);
  CHECK(d.solver.max_iters == SolverConfig{}.max_iters);
  CHECK(d.realizations == 20);

  json j = minimal_config();
  j["solver"]["lamda"] = 1.0;
  try {
    parse_config(j);
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("solver.lamda") != std::string::npos);
  }

  j = minimal_config();
  j["solver"]["gamma"] = "fast";
  CHECK_THROWS_AS(parse_config(j), ConfigError);
  j = minimal_config();
  j["solver"]["gamma"] = 2.0;
  CHECK_THROWS_AS(parse_config(j), ConfigError);
  CHECK_THROWS_AS(parse_config(json{{"solver", {{"eta", 1.0}}}}), ConfigError);

  j = minimal_config();
  j["phantom"]["snr_db"] = nullptr;
  CHECK(std::isinf(parse_config(j).phantom.snr_db));
}

TEST_CASE("truth solver inherits regularization") {
  json j = minimal_config();
  j["solver"]["lambda"] = 0.25;
  j["phantom"]["truth_solver"]["max_iters"] = 7;
  const RunConfig c = parse_config(j);
  CHECK(c.phantom.truth_solver.lambda == 0.25);
  CHECK(c.phantom.truth_solver.max_iters == 7);
}

TEST_CASE("config serialization round trip and hash") {
  json j = minimal_config();
  j["solver"]["eta"] = 0.3;
  j["depict"]["n_basis"] = 12;
  const RunConfig c = parse_config(j);
  const json canon = config_to_json(c);
  const RunConfig back = parse_config(canon);
  CHECK(config_to_json(back) == canon);
  CHECK(config_hash(canon) == config_hash(config_to_json(back)));
  CHECK(config_hash(canon).size() == 16);

  json threads = canon;
  threads["solver"]["threads"] = 7;
  CHECK(config_hash(threads) == config_hash(canon));
  json other = canon;
  other["solver"]["eta"] = 0.31;
  CHECK(config_hash(other) != config_hash(canon));
  // FNV-1a 64 of the empty object dump "{}"
  CHECK(config_hash(json::object()).size() == 16);
}

TEST_CASE("config file loading") {
  TempDir tmp("cfg");
  atomic_write(tmp.path / "c.json", minimal_config().dump());
  CHECK(load_config(tmp.path / "c.json").phantom.grid.nz == 16);
  atomic_write(tmp.path / "broken.json", "{");
  CHECK_THROWS_AS(load_config(tmp.path / "broken.json"), ConfigError);
  CHECK_THROWS_AS(load_config(tmp.path / "missing.json"), ConfigError);
}

TEST_CASE("slice orientation") {
  const GridDims dims{4, 3, 2};
  Matrix vol(2, dims.voxels());
  for (int z = 0; z < 2; ++z)
    for (int y = 0; y < 3; ++y)
      for (int x = 0; x < 4; ++x) {
        vol(0, dims.index(x, y, z)) = 100 * x + 10 * y + z;
        vol(1, dims.index(x, y, z)) = -1.0;
      }
  const Matrix sz = extract_slice(vol, dims, 2, 1, 0);
  REQUIRE(sz.rows() == 3);
  REQUIRE(sz.cols() == 4);
  CHECK(sz(2, 3) == 321.0);
  const Matrix sx = extract_slice(vol, dims, 0, 2, 0);
  REQUIRE(sx.rows() == 2);
  REQUIRE(sx.cols() == 3);
  CHECK(sx(1, 2) == 221.0);
  const Matrix sy = extract_slice(vol, dims, 1, 0, 0);
  REQUIRE(sy.rows() == 2);
  REQUIRE(sy.cols() == 4);
  CHECK(sy(1, 3) == 301.0);
  CHECK(extract_slice(vol, dims, 2, 0, 1).isConstant(-1.0));
  CHECK_THROWS_AS(extract_slice(vol, dims, 3, 0, 0), DomainError);
  CHECK_THROWS_AS(extract_slice(vol, dims, 2, 2, 0), DomainError);
  CHECK_THROWS_AS(extract_slice(vol, dims, 2, 0, 2), DomainError);
}

TEST_CASE("gray mapping and PGM encoding") {
  Matrix img(2, 3);
  img << 0, 1, 2, 3, 4, 5;
  const auto g = to_gray8(img);
  CHECK(g(0, 0) == 0);
  CHECK(g(1, 2) == 255);
  CHECK(g(0, 1) == 51);
  const auto clipped = to_gray8(img, std::array<double, 2>{1.0, 3.0});
  CHECK(clipped(0, 0) == 0);
  CHECK(clipped(0, 2) == 128);
  CHECK(clipped(1, 2) == 255);
  CHECK(to_gray8(Matrix::Constant(2, 2, 7.0)).isZero());
  CHECK_THROWS_AS(to_gray8(img, std::array<double, 2>{1.0, 1.0}), DomainError);

  const std::string pgm = encode_pgm(g);
  const std::string header = "P5\n3 2\n255\n";
  REQUIRE(pgm.size() == header.size() + 6);
  CHECK(pgm.substr(0, header.size()) == header);
  CHECK(std::uint8_t(pgm[header.size() + 5]) == 255);
}

TEST_CASE("report outputs") {
  ExperimentReport r;
  r.realizations = 2;
  r.seeds = {1, 2};
  r.raw.resize(2);
  for (std::size_t m = 0; m < 2; ++m)
    for (std::size_t v = 0; v < 5; ++v) r.raw[m][v] = {0.1 * double(m + 1), 0.3 * double(m + 1)};
  r.iterations = {10, 12};
  r.config_hash = "abc";

  std::ostringstream table;
  write_report_table(table, r);
  const std::string t = table.str();
  for (const char* label : {"A", "M", "R1", "alpha", "BP.fT", "Initial", "PNMM"})
    CHECK(t.find(label) != std::string::npos);
  CHECK(t.find("2.000e-01") != std::string::npos);
  CHECK(t.find("config hash: abc") != std::string::npos);

  std::ostringstream csv;
  write_report_csv(csv, r);
  std::istringstream lines(csv.str());
  std::string line;
  int count = 0;
  while (std::getline(lines, line)) ++count;
  CHECK(count == 1 + 2 * 5);
  CHECK(csv.str().find("PNMM,BP.fT,0.4,") != std::string::npos);

  const json j = report_to_json(r);
  CHECK(j.at("methods").at("Initial").at("R1").at("mean").get<double>() == doctest::Approx(0.2));
  CHECK(j.at("variables").size() == 5);
}

}  // TEST_SUITE
