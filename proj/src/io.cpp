#include "pnmm/io.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <limits>
#include <set>
#include <sstream>

#include "pnmm/errors.hpp"

namespace pnmm {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

constexpr std::array<std::pair<ContentKind, const char*>, 6> kKinds{{
    {ContentKind::dynamic_image, "dynamic-image"},
    {ContentKind::factor_matrix, "factor-matrix"},
    {ContentKind::proportion_maps, "proportion-maps"},
    {ContentKind::coeff_maps, "coeff-maps"},
    {ContentKind::bp_map, "bp-map"},
    {ContentKind::mask, "mask"},
}};

json vec_to_json(const Vector& v) { return json(std::vector<double>(v.data(), v.data() + v.size())); }

Vector json_to_vec(const json& j) {
  const auto v = j.get<std::vector<double>>();
  return Eigen::Map<const Vector>(v.data(), Index(v.size()));
}

fs::path with_ext(const fs::path& stem, const char* ext) {
  fs::path p = stem;
  p += ext;
  return p;
}

// Strict reader for one object of the config tree.
class Section {
 public:
  Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError("config: " + path_ + " must be an object");
  }

  bool has(const char* key) const { return j_.contains(key); }
  bool is_null(const char* key) {
    seen_.insert(key);
    return j_.contains(key) && j_.at(key).is_null();
  }

  template <class T>
  void get(const char* key, T& out) {
    seen_.insert(key);
    if (!j_.contains(key)) return;
    try {
      out = j_.at(key).get<T>();
    } catch (const json::exception& e) {
      throw ConfigError("config: field " + name(key) + " has the wrong type (" + e.what() + ")");
    }
  }

  void get_interval(const char* key, Interval& out) {
    seen_.insert(key);
    if (!j_.contains(key)) return;
    out = parse_interval(j_.at(key), name(key));
  }

  void get_intervals(const char* key, std::vector<Interval>& out) {
    seen_.insert(key);
    if (!j_.contains(key)) return;
    const json& a = j_.at(key);
    if (!a.is_array()) throw ConfigError("config: field " + name(key) + " must be a list of [lo, hi] pairs");
    out.clear();
    for (std::size_t i = 0; i < a.size(); ++i) out.push_back(parse_interval(a[i], name(key) + "[" + std::to_string(i) + "]"));
  }

  Section child(const char* key) {
    seen_.insert(key);
    static const json empty = json::object();
    return Section(j_.contains(key) ? j_.at(key) : empty, name(key));
  }

  void finish() const {
    for (const auto& [k, v] : j_.items())
      if (!seen_.count(k)) throw ConfigError("config: unknown field " + name(k.c_str()));
  }

  std::string name(const char* key) const { return path_.empty() ? key : path_ + "." + key; }

 private:
  static Interval parse_interval(const json& j, const std::string& field) {
    if (!j.is_array() || j.size() != 2 || !j[0].is_number() || !j[1].is_number())
      throw ConfigError("config: field " + field + " must be [lo, hi]");
    return {j[0].get<double>(), j[1].get<double>()};
  }

  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

json interval_json(const Interval& i) { return json::array({i.lo, i.hi}); }

json intervals_json(const std::vector<Interval>& v) {
  json a = json::array();
  for (const auto& i : v) a.push_back(interval_json(i));
  return a;
}

}  // namespace

const char* to_string(ContentKind k) {
  for (const auto& [kind, name] : kKinds)
    if (kind == k) return name;
  return "unknown";
}

ContentKind parse_kind(const std::string& s) {
  for (const auto& [kind, name] : kKinds)
    if (s == name) return kind;
  throw ConfigError("container: unknown kind '" + s + "'");
}

json VolumeHeader::to_json() const {
  json j;
  j["format"] = "pnmm-volume";
  j["version"] = 1;
  j["kind"] = to_string(kind);
  j["shape"] = {rows, cols};
  j["grid"] = grid ? json{grid->nx, grid->ny, grid->nz} : json(nullptr);
  j["voxel_size_mm"] = voxel_size_mm;
  j["frame_mid_times"] = vec_to_json(mid_times);
  j["frame_durations"] = vec_to_json(durations);
  j["dtype"] = "float32";
  j["byte_order"] = "little-endian";
  j["layout"] = "row-major rows x cols, voxel index x + nx*(y + ny*z)";
  j["config_hash"] = config_hash;
  j["seed"] = seed;
  j["extra"] = extra;
  return j;
}

VolumeHeader VolumeHeader::from_json(const json& j) {
  try {
    if (j.at("format") != "pnmm-volume") throw ConfigError("container: not a pnmm-volume header");
    if (j.at("dtype") != "float32" || j.at("byte_order") != "little-endian")
      throw ConfigError("container: only float32 little-endian payloads are supported");
    VolumeHeader h;
    h.kind = parse_kind(j.at("kind").get<std::string>());
    h.rows = j.at("shape").at(0).get<Index>();
    h.cols = j.at("shape").at(1).get<Index>();
    if (!j.at("grid").is_null()) {
      const auto g = j.at("grid").get<std::array<int, 3>>();
      h.grid = GridDims{g[0], g[1], g[2]};
      if (h.grid->voxels() != h.cols) throw ConfigError("container: grid size does not match column count");
    }
    h.voxel_size_mm = j.at("voxel_size_mm").get<std::array<double, 3>>();
    h.mid_times = json_to_vec(j.at("frame_mid_times"));
    h.durations = json_to_vec(j.at("frame_durations"));
    h.config_hash = j.at("config_hash").get<std::string>();
    h.seed = j.at("seed").get<std::uint64_t>();
    h.extra = j.value("extra", json::object());
    if (h.rows < 0 || h.cols < 0) throw ConfigError("container: negative shape");
    return h;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("container: malformed header (") + e.what() + ")");
  }
}

std::string serialize_header(const VolumeHeader& h) { return h.to_json().dump(2) + "\n"; }

void atomic_write(const fs::path& path, const std::string& bytes) {
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) throw std::runtime_error("cannot open " + tmp.string() + " for writing");
    os.write(bytes.data(), std::streamsize(bytes.size()));
    if (!os) throw std::runtime_error("write failed for " + tmp.string());
  }
  fs::rename(tmp, path);
}

std::string read_file(const fs::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open " + path.string());
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

void write_container(const fs::path& stem, VolumeHeader header, const Matrix& data) {
  header.rows = data.rows();
  header.cols = data.cols();
  if (header.grid && header.grid->voxels() != data.cols())
    throw DomainError("write_container: grid size does not match column count");

  std::string payload(std::size_t(data.size()) * 4, '\0');
  std::size_t off = 0;
  for (Index r = 0; r < data.rows(); ++r)
    for (Index c = 0; c < data.cols(); ++c) {
      auto bits = std::bit_cast<std::uint32_t>(static_cast<float>(data(r, c)));
      if constexpr (std::endian::native == std::endian::big) bits = __builtin_bswap32(bits);
      std::memcpy(payload.data() + off, &bits, 4);
      off += 4;
    }
  header.extra["payload"] = stem.filename().string() + ".raw";
  atomic_write(with_ext(stem, ".raw"), payload);
  atomic_write(with_ext(stem, ".json"), serialize_header(header));
}

Container read_container(const fs::path& stem) {
  Container c;
  json j;
  try {
    j = json::parse(read_file(with_ext(stem, ".json")));
  } catch (const json::parse_error& e) {
    throw ConfigError("container: cannot parse " + with_ext(stem, ".json").string() + " (" + e.what() + ")");
  }
  c.header = VolumeHeader::from_json(j);
  const std::string payload = read_file(with_ext(stem, ".raw"));
  const std::size_t expect = std::size_t(c.header.rows) * std::size_t(c.header.cols) * 4;
  if (payload.size() != expect)
    throw ConfigError("container: payload of " + stem.string() + " has " + std::to_string(payload.size()) +
                      " bytes, expected " + std::to_string(expect));
  c.data.resize(c.header.rows, c.header.cols);
  std::size_t off = 0;
  for (Index r = 0; r < c.header.rows; ++r)
    for (Index col = 0; col < c.header.cols; ++col) {
      std::uint32_t bits;
      std::memcpy(&bits, payload.data() + off, 4);
      off += 4;
      if constexpr (std::endian::native == std::endian::big) bits = __builtin_bswap32(bits);
      c.data(r, col) = double(std::bit_cast<float>(bits));
    }
  return c;
}

void write_variables(const fs::path& dir, const Variables& v, const VolumeHeader& base) {
  fs::create_directories(dir);
  const Index T = v.tissues();
  const Index V = v.rates();

  VolumeHeader h = base;
  h.kind = ContentKind::factor_matrix;
  h.grid.reset();
  h.extra = {{"factors", json::array({"gray", "white", "blood"})}};
  if (v.factors() != 3) h.extra.erase("factors");
  write_container(dir / "M", h, v.M);

  h = base;
  h.kind = ContentKind::proportion_maps;
  h.mid_times.resize(0);
  h.durations.resize(0);
  write_container(dir / "A", h, v.A);

  Matrix B((V + 1) * T, v.A.cols());
  for (Index i = 0; i <= V; ++i) B.middleRows(i * T, T) = v.B[std::size_t(i)];
  json alpha = json::array();
  for (Index k = 0; k < T; ++k) {
    json row = json::array();
    for (Index i = 0; i < V; ++i) row.push_back(v.alpha(k, i));
    alpha.push_back(row);
  }
  VolumeHeader hb = h;
  hb.kind = ContentKind::coeff_maps;
  hb.extra = {{"tissues", T}, {"rates", V}, {"alpha", alpha}};
  write_container(dir / "B", hb, B);

  hb.kind = ContentKind::bp_map;
  hb.extra = {{"tissues", T}};
  write_container(dir / "bp", hb, binding_potential_map(v.B, v.alpha));
  write_container(dir / "r1", hb, delivery_ratio_map(v.B));
}

Variables read_variables(const fs::path& dir) {
  Variables v;
  v.M = read_container(dir / "M").data;
  v.A = read_container(dir / "A").data;
  const Container b = read_container(dir / "B");
  try {
    const Index T = b.header.extra.at("tissues").get<Index>();
    const Index V = b.header.extra.at("rates").get<Index>();
    if (b.data.rows() != (V + 1) * T) throw ConfigError("B container: row count != (rates + 1) * tissues");
    for (Index i = 0; i <= V; ++i) v.B.push_back(b.data.middleRows(i * T, T));
    v.alpha.resize(T, V);
    const json& a = b.header.extra.at("alpha");
    for (Index k = 0; k < T; ++k)
      for (Index i = 0; i < V; ++i) v.alpha(k, i) = a.at(std::size_t(k)).at(std::size_t(i)).get<double>();
  } catch (const json::exception& e) {
    throw ConfigError("B container in " + dir.string() + ": missing tissues/rates/alpha (" + e.what() + ")");
  }
  if (v.M.cols() != v.A.rows() || v.A.rows() != v.alpha.rows() + 1 || v.B[0].cols() != v.A.cols())
    throw ConfigError("variables in " + dir.string() + " have inconsistent shapes");
  return v;
}

ExperimentConfig RunConfig::experiment() const {
  ExperimentConfig e;
  e.phantom = phantom;
  e.solver = solver;
  e.realizations = realizations;
  e.optimal_matching = optimal_matching;
  return e;
}

RunConfig parse_config(const json& j) {
  RunConfig cfg;
  Section root(j, "");

  {
    Section p = root.child("phantom");
    if (!p.has("grid_dims")) throw ConfigError("config: missing required field phantom.grid_dims");
    std::array<int, 3> g{};
    p.get("grid_dims", g);
    cfg.phantom.grid = {g[0], g[1], g[2]};
    p.get("voxel_size_mm", cfg.phantom.voxel_size_mm);
    p.get("frame_durations", cfg.phantom.frame_durations);
    p.get("psf_fwhm_mm", cfg.phantom.psf_fwhm_mm);
    // null disables noise
    if (p.is_null("snr_db"))
      cfg.phantom.snr_db = std::numeric_limits<double>::infinity();
    else
      p.get("snr_db", cfg.phantom.snr_db);
    p.get("seed", cfg.phantom.seed);
    p.get("lesion_radius_vox", cfg.phantom.lesion_radius_vox);
    {
      Section b = p.child("blood");
      auto& in = cfg.phantom.blood;
      b.get("A1", in.A1);
      b.get("A2", in.A2);
      b.get("A3", in.A3);
      b.get("lambda1", in.l1);
      b.get("lambda2", in.l2);
      b.get("lambda3", in.l3);
      b.finish();
    }
    for (auto [key, t] : {std::pair{"gray_tissue", &cfg.phantom.gray_tissue}, std::pair{"white_tissue", &cfg.phantom.white_tissue}}) {
      Section s = p.child(key);
      s.get("K1", t->K1);
      s.get("k2", t->k2);
      s.finish();
    }
    for (auto [key, k] :
         {std::pair{"gray_binding", &cfg.phantom.gray_binding}, std::pair{"white_binding", &cfg.phantom.white_binding}}) {
      Section s = p.child(key);
      s.get("k2", k->k2);
      s.get("k3", k->k3);
      s.get("k4", k->k4);
      s.get("r1_levels", k->r1_levels);
      s.finish();
    }
    {
      Section t = p.child("truth_solver");
      t.get("epsilon", cfg.phantom.truth_solver.epsilon);
      t.get("max_iters", cfg.phantom.truth_solver.max_iters);
      t.finish();
    }
    p.finish();
  }

  {
    Section s = root.child("solver");
    auto& c = cfg.solver;
    s.get("eta", c.eta);
    s.get("beta", c.beta);
    s.get("lambda", c.lambda);
    s.get("gamma", c.gamma);
    s.get("epsilon", c.epsilon);
    s.get("max_iters", c.max_iters);
    s.get("warmup_fixed_M_iters", c.warmup_fixed_M_iters);
    s.get_intervals("b_bounds", c.b_bounds);
    s.get_intervals("alpha_bounds", c.alpha_bounds);
    s.get("alpha_init", c.alpha_init);
    s.get("alpha_trust_fraction", c.alpha_trust_fraction);
    s.get("per_voxel_steps", c.per_voxel_steps);
    s.get("threads", c.threads);
    s.finish();
  }
  // The restricted truth pass shares the regularization of the main solver.
  {
    auto& t = cfg.phantom.truth_solver;
    t.eta = cfg.solver.eta;
    t.beta = cfg.solver.beta;
    t.lambda = cfg.solver.lambda;
    t.gamma = cfg.solver.gamma;
    t.b_bounds = cfg.solver.b_bounds;
    t.alpha_bounds = cfg.solver.alpha_bounds;
    t.alpha_init = cfg.solver.alpha_init;
    t.alpha_trust_fraction = cfg.solver.alpha_trust_fraction;
    t.per_voxel_steps = cfg.solver.per_voxel_steps;
    t.threads = cfg.solver.threads;
  }

  {
    Section s = root.child("depict");
    auto& d = cfg.depict;
    s.get("rate_min", d.rate_min);
    s.get("rate_max", d.rate_max);
    s.get("n_basis", d.n_basis);
    s.get("lambda_rel", d.lambda_rel);
    s.get("lambda_abs", d.lambda_abs);
    s.get_interval("b0_bounds", d.b0_bounds);
    s.get_interval("coeff_bounds", d.coeff_bounds);
    s.get("tolerance", d.tolerance);
    s.get("max_iters", d.max_iters);
    s.finish();
    d.threads = cfg.solver.threads;
  }

  {
    Section s = root.child("experiment");
    s.get("realizations", cfg.realizations);
    s.get("optimal_matching", cfg.optimal_matching);
    s.finish();
  }
  root.finish();

  try {
    cfg.phantom.validate();
    cfg.solver.validate();
    cfg.depict.validate();
  } catch (const DomainError& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  if (cfg.realizations < 1) throw ConfigError("config: experiment.realizations must be >= 1");
  return cfg;
}

RunConfig load_config(const fs::path& path) {
  json j;
  try {
    j = json::parse(read_file(path));
  } catch (const json::parse_error& e) {
    throw ConfigError("config: cannot parse " + path.string() + " (" + e.what() + ")");
  } catch (const std::runtime_error& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  return parse_config(j);
}

json config_to_json(const RunConfig& cfg) {
  const auto& p = cfg.phantom;
  json j;
  j["phantom"] = {
      {"grid_dims", {p.grid.nx, p.grid.ny, p.grid.nz}},
      {"voxel_size_mm", p.voxel_size_mm},
      {"frame_durations", p.frame_durations},
      {"psf_fwhm_mm", p.psf_fwhm_mm},
      {"snr_db", std::isinf(p.snr_db) ? json(nullptr) : json(p.snr_db)},
      {"seed", p.seed},
      {"lesion_radius_vox", p.lesion_radius_vox},
      {"blood",
       {{"A1", p.blood.A1}, {"A2", p.blood.A2}, {"A3", p.blood.A3}, {"lambda1", p.blood.l1}, {"lambda2", p.blood.l2},
        {"lambda3", p.blood.l3}}},
      {"gray_tissue", {{"K1", p.gray_tissue.K1}, {"k2", p.gray_tissue.k2}}},
      {"white_tissue", {{"K1", p.white_tissue.K1}, {"k2", p.white_tissue.k2}}},
      {"gray_binding",
       {{"k2", p.gray_binding.k2}, {"k3", p.gray_binding.k3}, {"k4", p.gray_binding.k4}, {"r1_levels", p.gray_binding.r1_levels}}},
      {"white_binding",
       {{"k2", p.white_binding.k2}, {"k3", p.white_binding.k3}, {"k4", p.white_binding.k4}, {"r1_levels", p.white_binding.r1_levels}}},
      {"truth_solver", {{"epsilon", p.truth_solver.epsilon}, {"max_iters", p.truth_solver.max_iters}}},
  };
  const auto& s = cfg.solver;
  j["solver"] = {
      {"eta", s.eta},
      {"beta", s.beta},
      {"lambda", s.lambda},
      {"gamma", s.gamma},
      {"epsilon", s.epsilon},
      {"max_iters", s.max_iters},
      {"warmup_fixed_M_iters", s.warmup_fixed_M_iters},
      {"b_bounds", intervals_json(s.b_bounds)},
      {"alpha_bounds", intervals_json(s.alpha_bounds)},
      {"alpha_init", s.alpha_init},
      {"alpha_trust_fraction", s.alpha_trust_fraction},
      {"per_voxel_steps", s.per_voxel_steps},
      {"threads", s.threads},
  };
  const auto& d = cfg.depict;
  j["depict"] = {
      {"rate_min", d.rate_min},
      {"rate_max", d.rate_max},
      {"n_basis", d.n_basis},
      {"lambda_rel", d.lambda_rel},
      {"lambda_abs", d.lambda_abs},
      {"b0_bounds", interval_json(d.b0_bounds)},
      {"coeff_bounds", interval_json(d.coeff_bounds)},
      {"tolerance", d.tolerance},
      {"max_iters", d.max_iters},
  };
  j["experiment"] = {{"realizations", cfg.realizations}, {"optimal_matching", cfg.optimal_matching}};
  return j;
}

std::string config_hash(const json& canonical) {
  json copy = canonical;
  // Thread count does not change results beyond rounding.
  if (copy.contains("solver")) copy["solver"].erase("threads");
  const std::string s = copy.dump();
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << h;
  return os.str();
}

Matrix extract_slice(const Matrix& volume, GridDims dims, int axis, int index, Index frame) {
  if (volume.cols() != dims.voxels()) throw DomainError("extract_slice: voxel count != grid size");
  if (frame < 0 || frame >= volume.rows())
    throw DomainError("extract_slice: frame " + std::to_string(frame) + " out of range [0, " +
                      std::to_string(volume.rows()) + ")");
  const std::array<int, 3> n{dims.nx, dims.ny, dims.nz};
  if (axis < 0 || axis > 2) throw DomainError("extract_slice: axis must be 0 (x), 1 (y) or 2 (z)");
  if (index < 0 || index >= n[std::size_t(axis)])
    throw DomainError("extract_slice: index " + std::to_string(index) + " out of range [0, " +
                      std::to_string(n[std::size_t(axis)]) + ")");
  switch (axis) {
    case 0: {
      Matrix s(dims.nz, dims.ny);
      for (int z = 0; z < dims.nz; ++z)
        for (int y = 0; y < dims.ny; ++y) s(z, y) = volume(frame, dims.index(index, y, z));
      return s;
    }
    case 1: {
      Matrix s(dims.nz, dims.nx);
      for (int z = 0; z < dims.nz; ++z)
        for (int x = 0; x < dims.nx; ++x) s(z, x) = volume(frame, dims.index(x, index, z));
      return s;
    }
    default: {
      Matrix s(dims.ny, dims.nx);
      for (int y = 0; y < dims.ny; ++y)
        for (int x = 0; x < dims.nx; ++x) s(y, x) = volume(frame, dims.index(x, y, index));
      return s;
    }
  }
}

Eigen::Matrix<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic> to_gray8(const Matrix& image,
                                                                     std::optional<std::array<double, 2>> range) {
  double lo, hi;
  if (range) {
    lo = (*range)[0];
    hi = (*range)[1];
    if (!(hi > lo)) throw DomainError("to_gray8: range must satisfy lo < hi");
  } else {
    lo = image.minCoeff();
    hi = image.maxCoeff();
  }
  Eigen::Matrix<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic> out(image.rows(), image.cols());
  for (Index r = 0; r < image.rows(); ++r)
    for (Index c = 0; c < image.cols(); ++c) {
      const double v = image(r, c);
      double u = hi > lo ? (v - lo) / (hi - lo) : 0.0;
      if (!std::isfinite(u)) u = 0.0;
      u = std::clamp(u, 0.0, 1.0);
      out(r, c) = std::uint8_t(std::lround(255.0 * u));
    }
  return out;
}

std::string encode_pgm(const Eigen::Matrix<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic>& image) {
  std::string s = "P5\n" + std::to_string(image.cols()) + " " + std::to_string(image.rows()) + "\n255\n";
  for (Index r = 0; r < image.rows(); ++r)
    for (Index c = 0; c < image.cols(); ++c) s.push_back(char(image(r, c)));
  return s;
}

void write_report_csv(std::ostream& os, const ExperimentReport& report) {
  os << "method,variable,mean,std,min,max,count\n";
  os << std::setprecision(10);
  for (std::size_t m = 0; m < report.methods.size(); ++m)
    for (std::size_t v = 0; v < kScoredVariables.size(); ++v) {
      const Summary s = report.summary(m, v);
      os << report.methods[m] << ',' << kScoredVariables[v] << ',' << s.mean << ',' << s.std << ',' << s.min << ','
         << s.max << ',' << report.raw[m][v].size() << '\n';
    }
}

void write_report_table(std::ostream& os, const ExperimentReport& report) {
  os << "NMSE over " << report.realizations << " realization(s), mean +- sample std\n";
  os << std::left << std::setw(8) << "";
  for (const auto& m : report.methods) os << std::setw(26) << m;
  os << '\n';
  for (std::size_t v = 0; v < kScoredVariables.size(); ++v) {
    os << std::setw(8) << kScoredVariables[v];
    for (std::size_t m = 0; m < report.methods.size(); ++m) {
      const Summary s = report.summary(m, v);
      std::ostringstream cell;
      cell << std::scientific << std::setprecision(3) << s.mean << " +- " << s.std;
      os << std::setw(26) << cell.str();
    }
    os << '\n';
  }
  if (!report.failures.empty()) {
    os << "failed realizations:\n";
    for (const auto& f : report.failures) os << "  " << f << '\n';
  }
  if (!report.config_hash.empty()) os << "config hash: " << report.config_hash << '\n';
}

json report_to_json(const ExperimentReport& report) {
  json j;
  j["realizations"] = report.realizations;
  j["seeds"] = report.seeds;
  j["iterations"] = report.iterations;
  j["failures"] = report.failures;
  j["config_hash"] = report.config_hash;
  j["variables"] = std::vector<std::string>(kScoredVariables.begin(), kScoredVariables.end());
  json methods = json::object();
  for (std::size_t m = 0; m < report.methods.size(); ++m) {
    json vars = json::object();
    for (std::size_t v = 0; v < kScoredVariables.size(); ++v) {
      const Summary s = report.summary(m, v);
      vars[kScoredVariables[v]] = {{"values", report.raw[m][v]}, {"mean", s.mean}, {"std", s.std},
                                   {"min", s.min},                {"max", s.max}};
    }
    methods[report.methods[m]] = vars;
  }
  j["methods"] = methods;
  return j;
}

}  // namespace pnmm
