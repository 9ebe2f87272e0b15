#pragma once

// On-disk formats: a JSON sidecar header (<stem>.json) next to a raw
// float32 little-endian payload (<stem>.raw) holding a rows x cols matrix in
// row-major order (rows = frames / factors / coefficients, cols = voxels with
// x fastest). Plus the JSON run configuration, PGM slices and report tables.

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>

#include <json.hpp>

#include "pnmm/depict.hpp"
#include "pnmm/metrics.hpp"
#include "pnmm/objective.hpp"
#include "pnmm/phantom.hpp"

namespace pnmm {

enum class ContentKind { dynamic_image, factor_matrix, proportion_maps, coeff_maps, bp_map, mask };

const char* to_string(ContentKind k);
ContentKind parse_kind(const std::string& s);

struct VolumeHeader {
  ContentKind kind = ContentKind::dynamic_image;
  Index rows = 0;
  Index cols = 0;
  std::optional<GridDims> grid;  // spatial kinds; cols == grid->voxels()
  std::array<double, 3> voxel_size_mm{2.0, 2.0, 2.0};
  Vector mid_times;  // empty when not applicable
  Vector durations;
  std::string config_hash;
  std::uint64_t seed = 0;
  nlohmann::json extra = nlohmann::json::object();  // kind-specific metadata (labels, rates)

  nlohmann::json to_json() const;
  static VolumeHeader from_json(const nlohmann::json& j);
};

struct Container {
  VolumeHeader header;
  Matrix data;  // float32-rounded values
};

// Writes <stem>.json and <stem>.raw, each through a temp file and rename.
void write_container(const std::filesystem::path& stem, VolumeHeader header, const Matrix& data);
Container read_container(const std::filesystem::path& stem);

std::string serialize_header(const VolumeHeader& h);
void atomic_write(const std::filesystem::path& path, const std::string& bytes);
std::string read_file(const std::filesystem::path& path);

// A solver state as a directory of containers: M (factor-matrix), A
// (proportion-maps), B (coeff-maps, blocks B_0..B_V stacked by rows, alpha in
// the header), plus derived bp and r1 maps. `base` supplies grid, timeline,
// hash and seed.
void write_variables(const std::filesystem::path& dir, const Variables& v, const VolumeHeader& base);
Variables read_variables(const std::filesystem::path& dir);

// Every tunable of the library in one tree.
struct RunConfig {
  PhantomConfig phantom;
  SolverConfig solver;
  DepictConfig depict;
  int realizations = 20;
  bool optimal_matching = false;

  ExperimentConfig experiment() const;
};

// Parses a config tree. Missing keys keep their defaults except phantom.grid_dims,
// which a config file must state. Unknown keys are rejected.
RunConfig parse_config(const nlohmann::json& j);
RunConfig load_config(const std::filesystem::path& path);
nlohmann::json config_to_json(const RunConfig& cfg);

// FNV-1a 64 of the compact canonical dump, as 16 hex digits.
std::string config_hash(const nlohmann::json& canonical);

// Slice of frame `frame` of a rows x N volume. axis 0 = x (image is z by y),
// 1 = y (z by x), 2 = z (y by x). Rows of the result are image rows.
Matrix extract_slice(const Matrix& volume, GridDims dims, int axis, int index, Index frame);

// Maps to 0..255. Without a range, uses the slice min and max.
Eigen::Matrix<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic> to_gray8(const Matrix& image,
                                                                     std::optional<std::array<double, 2>> range = {});
std::string encode_pgm(const Eigen::Matrix<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic>& image);

void write_report_csv(std::ostream& os, const ExperimentReport& report);
// Rows A, M, R1, alpha, BP.fT; one column per method with mean +- std.
void write_report_table(std::ostream& os, const ExperimentReport& report);
nlohmann::json report_to_json(const ExperimentReport& report);

}  // namespace pnmm
