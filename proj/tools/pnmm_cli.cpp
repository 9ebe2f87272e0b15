// pnmm: phantom generation, unmixing, evaluation, slice export and
// multi-realization experiments.
//
// Exit codes: 0 success, 1 usage or configuration error, 2 runtime or
// numerical error. Log level from PNMM_LOG_LEVEL (trace..off, default info).

#include <unistd.h>

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <map>
#include <sstream>

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "pnmm/depict.hpp"
#include "pnmm/errors.hpp"
#include "pnmm/io.hpp"
#include "pnmm/metrics.hpp"
#include "pnmm/palm.hpp"
#include "pnmm/phantom.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace pnmm;

namespace {

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

RunConfig config_from(const std::string& path) { return path.empty() ? RunConfig{} : load_config(path); }

json manifest_base(const std::string& command, const RunConfig& cfg) {
  const json canonical = config_to_json(cfg);
  return {{"tool", "pnmm"},
          {"version", PNMM_VERSION},
          {"command", command},
          {"config", canonical},
          {"config_hash", config_hash(canonical)}};
}

VolumeHeader base_header(const GridDims& grid, double voxel_mm, const AcquisitionTimeline& tl, const std::string& hash,
                         std::uint64_t seed) {
  VolumeHeader h;
  h.grid = grid;
  h.voxel_size_mm = {voxel_mm, voxel_mm, voxel_mm};
  h.mid_times = tl.mid_times;
  h.durations = tl.durations;
  h.config_hash = hash;
  h.seed = seed;
  return h;
}

// Output goes to a sibling staging directory that replaces files in `out`
// only when the command succeeds.
class Staging {
 public:
  explicit Staging(fs::path out) : out_(std::move(out)) {
    dir_ = out_;
    dir_ += ".partial-" + std::to_string(::getpid());
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  ~Staging() {
    std::error_code ec;
    fs::remove_all(dir_, ec);
  }
  const fs::path& dir() const { return dir_; }

  void commit() {
    fs::create_directories(out_);
    for (const auto& e : fs::recursive_directory_iterator(dir_)) {
      const fs::path rel = fs::relative(e.path(), dir_);
      if (e.is_directory()) {
        fs::create_directories(out_ / rel);
      } else {
        fs::rename(e.path(), out_ / rel);
      }
    }
  }

 private:
  fs::path out_;
  fs::path dir_;
};

void write_json(const fs::path& path, const json& j) { atomic_write(path, j.dump(2) + "\n"); }

AcquisitionTimeline timeline_of(const VolumeHeader& h) {
  if (h.mid_times.size() == 0) throw ConfigError("container has no frame times");
  return AcquisitionTimeline(h.mid_times, h.durations);
}

int cmd_phantom(const std::string& config, const fs::path& out, std::optional<std::uint64_t> seed) {
  RunConfig cfg = config_from(config);
  if (seed) cfg.phantom.seed = *seed;
  json manifest = manifest_base("phantom", cfg);
  const std::string hash = manifest["config_hash"];

  const PhantomGroundTruth t = assemble_phantom(cfg.phantom);
  const AcquisitionTimeline tl = cfg.phantom.timeline();
  const VolumeHeader base = base_header(cfg.phantom.grid, cfg.phantom.voxel_size_mm, tl, hash, cfg.phantom.seed);

  Staging stage(out);
  const fs::path& d = stage.dir();
  VolumeHeader h = base;
  h.kind = ContentKind::dynamic_image;
  write_container(d / "noisy", h, t.noise.noisy);
  write_container(d / "clean", h, t.clean);

  Variables truth{t.M, t.A, t.B, t.alpha};
  write_variables(d / "truth", truth, base);
  h.kind = ContentKind::mask;
  h.mid_times.resize(0);
  h.durations.resize(0);
  h.extra = {{"rows", {"gray", "white", "blood", "lesion_gray", "lesion_white"}}};
  Matrix masks(5, cfg.phantom.grid.voxels());
  const std::vector<std::uint8_t>* rows[5] = {&t.masks.gray, &t.masks.white, &t.masks.blood, &t.masks.lesion_gray,
                                              &t.masks.lesion_white};
  for (int r = 0; r < 5; ++r)
    for (Index n = 0; n < masks.cols(); ++n) masks(r, n) = (*rows[r])[std::size_t(n)];
  write_container(d / "truth" / "masks", h, masks);

  manifest["seed"] = cfg.phantom.seed;
  manifest["noise_sigma"] = t.noise.sigma;
  manifest["realized_snr_db"] = std::isinf(t.noise.realized_snr_db) ? json(nullptr) : json(t.noise.realized_snr_db);
  manifest["truth_iterations"] = t.truth_iterations;
  manifest["files"] = {"noisy", "clean", "truth/M", "truth/A", "truth/B", "truth/bp", "truth/r1", "truth/masks"};
  write_json(d / "manifest.json", manifest);
  stage.commit();
  spdlog::info("phantom written to {}", out.string());
  return 0;
}

int cmd_unmix(const fs::path& input, const std::string& method, const std::string& config, const fs::path& out,
              const std::string& masks_path, const std::string& reference, int reference_column,
              std::optional<int> max_iters) {
  RunConfig cfg = config_from(config);
  if (max_iters) {
    if (*max_iters < 1) throw UsageError("--max-iters must be >= 1");
    cfg.solver.max_iters = *max_iters;
    cfg.depict.max_iters = *max_iters;
  }
  json manifest = manifest_base("unmix", cfg);
  manifest["method"] = method;
  manifest["input"] = input.string();
  const std::string hash = manifest["config_hash"];

  const Container img = read_container(input);
  if (img.header.kind != ContentKind::dynamic_image || !img.header.grid)
    throw ConfigError("unmix: input must be a dynamic-image container");
  const AcquisitionTimeline tl = timeline_of(img.header);
  const GridDims grid = *img.header.grid;
  VolumeHeader base = img.header;
  base.config_hash = hash;
  base.extra = json::object();

  Staging stage(out);
  const fs::path& d = stage.dir();
  if (method == "pnmm") {
    if (masks_path.empty()) throw UsageError("unmix --method pnmm needs --masks");
    const Container mk = read_container(masks_path);
    if (mk.data.cols() != img.data.cols() || mk.data.rows() < 3)
      throw ConfigError("unmix: masks must have at least 3 rows (gray, white, blood) over the image voxels");
    std::vector<std::vector<Index>> classes(3);
    for (int k = 0; k < 3; ++k)
      for (Index n = 0; n < mk.data.cols(); ++n)
        if (mk.data(k, n) > 0.5) classes[std::size_t(k)].push_back(n);

    const UnmixResult r = unmix_from_masks(img.data, grid, tl, classes, cfg.solver);
    write_variables(d, r.final.vars, base);
    write_variables(d / "init", r.init, base);
    std::ostringstream csv;
    write_objective_csv(csv, r.final);
    atomic_write(d / "objective.csv", csv.str());
    manifest["masks"] = masks_path;
    manifest["iterations"] = r.final.iterations;
    manifest["stop"] = to_string(r.final.stop);
    manifest["prepass_iterations"] = r.prepass.iterations;
  } else if (method == "depict") {
    if (reference.empty()) throw UsageError("unmix --method depict needs --reference");
    const Container ref = read_container(reference);
    Vector m_R;
    if (ref.data.rows() == tl.frames()) {
      if (reference_column < 0 || reference_column >= ref.data.cols())
        throw UsageError("--reference-column out of range");
      m_R = ref.data.col(reference_column);
    } else if (ref.data.cols() == tl.frames() && ref.data.rows() == 1) {
      m_R = ref.data.row(0).transpose();
    } else {
      throw ConfigError("unmix: reference TAC length does not match the image frame count");
    }
    DynamicImage image{img.data, grid, img.header.voxel_size_mm, tl};
    const DepictMaps maps = depict_bp_map(image, m_R, cfg.depict);
    VolumeHeader h = base;
    h.kind = ContentKind::bp_map;
    h.mid_times.resize(0);
    h.durations.resize(0);
    write_container(d / "bp", h, maps.bp.transpose());
    write_container(d / "r1", h, maps.r1.transpose());
    manifest["reference"] = reference;
    manifest["reference_column"] = reference_column;
    manifest["failed_voxels"] = maps.failures;
  } else {
    throw UsageError("unknown --method '" + method + "' (pnmm or depict)");
  }
  write_json(d / "manifest.json", manifest);
  stage.commit();
  spdlog::info("{} results written to {}", method, out.string());
  return 0;
}

int cmd_eval(const std::vector<std::string>& estimates, const fs::path& truth_dir, const fs::path& out) {
  PhantomGroundTruth truth;
  {
    const Variables t = read_variables(truth_dir);
    truth.M = t.M;
    truth.A = t.A;
    truth.B = t.B;
    truth.alpha = t.alpha;
  }
  ExperimentReport report;
  report.methods.clear();
  report.realizations = 1;
  for (const auto& spec : estimates) {
    std::string label = spec, dir = spec;
    if (const auto eq = spec.find('='); eq != std::string::npos) {
      label = spec.substr(0, eq);
      dir = spec.substr(eq + 1);
    } else {
      label = fs::path(spec).filename().string();
    }
    const Variables v = read_variables(dir);
    auto check = [&](const char* name, const Matrix& a, const Matrix& b) {
      if (a.rows() != b.rows() || a.cols() != b.cols())
        throw ConfigError("eval: shape mismatch for " + std::string(name) + " in " + dir + " (" +
                          std::to_string(a.rows()) + "x" + std::to_string(a.cols()) + " vs " +
                          std::to_string(b.rows()) + "x" + std::to_string(b.cols()) + ")");
    };
    check("M", v.M, truth.M);
    check("A", v.A, truth.A);
    check("alpha", v.alpha, truth.alpha);
    if (v.B.size() != truth.B.size()) throw ConfigError("eval: shape mismatch for B in " + dir);
    for (std::size_t i = 0; i < v.B.size(); ++i) check("B", v.B[i], truth.B[i]);

    const Score s = score_estimate(v, truth);
    report.methods.push_back(label);
    std::array<std::vector<double>, 5> raw;
    for (std::size_t k = 0; k < 5; ++k) raw[k].push_back(s.nmse[k]);
    report.raw.push_back(raw);
  }
  fs::create_directories(out.parent_path().empty() ? fs::path(".") : out.parent_path());
  std::ostringstream csv, txt;
  write_report_csv(csv, report);
  write_report_table(txt, report);
  fs::path p = out;
  atomic_write(p.replace_extension(".csv"), csv.str());
  atomic_write(p.replace_extension(".txt"), txt.str());
  write_json(p.replace_extension(".json"), report_to_json(report));
  std::cout << txt.str();
  return 0;
}

int cmd_slices(const fs::path& volume, const std::string& axis, int index, Index frame, const fs::path& out,
               const std::vector<double>& range) {
  const Container c = read_container(volume);
  if (!c.header.grid) throw ConfigError("slices: container has no spatial grid");
  static const std::map<std::string, int> axes{{"x", 0}, {"y", 1}, {"z", 2}};
  const auto it = axes.find(axis);
  if (it == axes.end()) throw UsageError("--axis must be x, y or z");
  std::optional<std::array<double, 2>> r;
  if (!range.empty()) r = std::array<double, 2>{range[0], range[1]};
  const Matrix slice = extract_slice(c.data, *c.header.grid, it->second, index, frame);
  atomic_write(out, encode_pgm(to_gray8(slice, r)));
  return 0;
}

int cmd_experiment(const std::string& config, const fs::path& out, std::optional<int> realizations,
                   std::optional<std::uint64_t> seed) {
  RunConfig cfg = config_from(config);
  if (realizations) cfg.realizations = *realizations;
  if (seed) cfg.phantom.seed = *seed;
  if (cfg.realizations < 1) throw UsageError("--realizations must be >= 1");
  json manifest = manifest_base("experiment", cfg);

  ExperimentReport report = run_experiment(cfg.experiment());
  report.config_hash = manifest["config_hash"];

  Staging stage(out);
  std::ostringstream csv, txt;
  write_report_csv(csv, report);
  write_report_table(txt, report);
  atomic_write(stage.dir() / "report.csv", csv.str());
  atomic_write(stage.dir() / "report.txt", txt.str());
  write_json(stage.dir() / "report.json", report_to_json(report));
  write_json(stage.dir() / "manifest.json", manifest);
  write_json(stage.dir() / "timing.json", {{"runtime_seconds", report.runtime_seconds}});
  stage.commit();
  std::cout << txt.str();
  return report.failures.empty() ? 0 : 2;
}

}  // namespace

int main(int argc, char** argv) {
  spdlog::set_default_logger(spdlog::stderr_color_mt("pnmm"));
  spdlog::set_level(spdlog::level::info);
  if (const char* lvl = std::getenv("PNMM_LOG_LEVEL")) spdlog::set_level(spdlog::level::from_str(lvl));

  CLI::App app{"Parametric nonlinear mixing model unmixing for dynamic PET"};
  app.set_version_flag("--version", std::string("pnmm ") + PNMM_VERSION);
  app.require_subcommand(1);

  std::string config, method = "pnmm", masks, reference, axis = "z", input, truth;
  fs::path out;
  std::uint64_t seed_v = 0;
  int realizations_v = 0, max_iters_v = 0, reference_column = 0, index = 0;
  Index frame = 0;
  std::vector<std::string> estimates;
  std::vector<double> range;

  auto* phantom = app.add_subcommand("phantom", "Generate a synthetic phantom with ground truth");
  phantom->add_option("--config", config, "JSON config file")->check(CLI::ExistingFile);
  phantom->add_option("--out", out, "Output directory")->required();
  auto* phantom_seed = phantom->add_option("--seed", seed_v, "Random seed (overrides config)");

  auto* unmix = app.add_subcommand("unmix", "Estimate factors, proportions and kinetics");
  unmix->add_option("--input", input, "dynamic-image container stem")->required();
  unmix->add_option("--method", method, "pnmm or depict")->check(CLI::IsMember({"pnmm", "depict"}));
  unmix->add_option("--config", config, "JSON config file")->check(CLI::ExistingFile);
  unmix->add_option("--out", out, "Output directory")->required();
  unmix->add_option("--masks", masks, "mask container stem (rows gray, white, blood)");
  unmix->add_option("--reference", reference, "reference TAC container stem (depict)");
  unmix->add_option("--reference-column", reference_column, "column of a factor-matrix reference");
  auto* unmix_iters = unmix->add_option("--max-iters", max_iters_v, "Outer iteration limit");

  auto* eval = app.add_subcommand("eval", "Score estimates against a ground truth");
  eval->add_option("--estimates", estimates, "estimate directories, optionally LABEL=DIR")->required();
  eval->add_option("--truth", truth, "ground-truth directory")->required();
  eval->add_option("--out", out, "report path stem (.csv, .txt, .json)")->required();

  auto* slices = app.add_subcommand("slices", "Export a 2-D slice as PGM");
  slices->add_option("--volume", input, "container stem")->required();
  slices->add_option("--axis", axis, "x, y or z");
  slices->add_option("--index", index, "slice index along the axis")->required();
  slices->add_option("--frame", frame, "row of the container (frame, factor, ...)");
  slices->add_option("--range", range, "fixed display range LO HI")->expected(2);
  slices->add_option("--out", out, "output .pgm")->required();

  auto* experiment = app.add_subcommand("experiment", "Multi-realization NMSE experiment");
  experiment->add_option("--config", config, "JSON config file")->check(CLI::ExistingFile);
  experiment->add_option("--out", out, "Output directory")->required();
  auto* exp_real = experiment->add_option("--realizations", realizations_v, "Noise realizations");
  auto* exp_seed = experiment->add_option("--seed", seed_v, "Base seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  }

  auto opt_seed = [&](CLI::Option* o) { return o->count() ? std::optional<std::uint64_t>(seed_v) : std::nullopt; };
  try {
    if (*phantom) return cmd_phantom(config, out, opt_seed(phantom_seed));
    if (*unmix)
      return cmd_unmix(input, method, config, out, masks, reference, reference_column,
                       unmix_iters->count() ? std::optional<int>(max_iters_v) : std::nullopt);
    if (*eval) return cmd_eval(estimates, truth, out);
    if (*slices) return cmd_slices(input, axis, index, frame, out, range);
    if (*experiment)
      return cmd_experiment(config, out, exp_real->count() ? std::optional<int>(realizations_v) : std::nullopt,
                            opt_seed(exp_seed));
  } catch (const UsageError& e) {
    spdlog::error("{}", e.what());
    return 1;
  } catch (const ConfigError& e) {
    spdlog::error("{}", e.what());
    return 1;
  } catch (const DomainError& e) {
    spdlog::error("{}", e.what());
    return 1;
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return 2;
  }
  return 1;
}
