#include "pnmm/phantom.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include <spdlog/spdlog.h>

#include "pnmm/errors.hpp"
#include "pnmm/palm.hpp"

namespace pnmm {

GunnCoefficients frtm_to_gunn(double R1, double k2, double k3, double k4) {
  if (!(R1 > 0.0 && k2 > 0.0 && k4 > 0.0 && k3 >= 0.0))
    throw DomainError("frtm_to_gunn: need R1, k2, k4 > 0 and k3 >= 0");
  const double s = k2 + k3 + k4;
  const double disc = s * s - 4.0 * k2 * k4;
  if (!(disc > 0.0)) throw DomainError("frtm_to_gunn: rates are not distinct (discriminant <= 0)");

  GunnCoefficients g;
  g.alpha_fast = 0.5 * (s + std::sqrt(disc));
  g.alpha_slow = k2 * k4 / g.alpha_fast;
  g.b0 = R1 - 1.0;
  auto residue = [&](double a, double other) { return R1 * (k2 / R1 - a) * (k3 + k4 - a) / (other - a); };
  g.b_fast = residue(g.alpha_fast, g.alpha_slow);
  g.b_slow = residue(g.alpha_slow, g.alpha_fast);
  return g;
}

double BloodInput::operator()(double t) const {
  if (t < 0.0) return 0.0;
  return (A1 * t - A2 - A3) * std::exp(-l1 * t) + A2 * std::exp(-l2 * t) + A3 * std::exp(-l3 * t);
}

namespace {

// (e^{-k t} conv e^{-l t})(t)
double conv_exp(double k, double l, double t) {
  const double d = l - k;
  if (std::abs(d) < 1e-12) return t * std::exp(-k * t);
  return -std::exp(-k * t) * std::expm1(-d * t) / d;
}

// (e^{-k t} conv t e^{-l t})(t)
double conv_texp(double k, double l, double t) {
  const double d = l - k;
  if (std::abs(d * t) < 1e-6) return 0.5 * t * t * std::exp(-k * t);
  return std::exp(-k * t) * (1.0 - std::exp(-d * t) * (1.0 + d * t)) / (d * d);
}

double one_tissue(const OneTissue& p, const BloodInput& b, double t) {
  const double v = b.A1 * conv_texp(p.k2, b.l1, t) - (b.A2 + b.A3) * conv_exp(p.k2, b.l1, t) +
                   b.A2 * conv_exp(p.k2, b.l2, t) + b.A3 * conv_exp(p.k2, b.l3, t);
  return p.K1 * v;
}

void check_binding(const BindingKinetics& k, const char* name) {
  if (k.r1_levels.empty()) throw ConfigError(std::string(name) + ": r1_levels must not be empty");
  for (double r : k.r1_levels)
    if (!(r > 0.0)) throw ConfigError(std::string(name) + ": r1_levels must be positive");
  frtm_to_gunn(1.0, k.k2, k.k3, k.k4);
}

}  // namespace

SolverConfig PhantomConfig::default_truth_solver() {
  SolverConfig c;
  c.update_M = false;
  c.update_alpha = false;
  c.warmup_fixed_M_iters = 0;
  c.epsilon = 1e-6;
  c.max_iters = 1000;
  return c;
}

void PhantomConfig::validate() const {
  if (grid.nx < 16 || grid.ny < 16 || grid.nz < 16)
    throw ConfigError("phantom: grid_dims must be at least 16 along every axis");
  if (!(voxel_size_mm > 0.0)) throw ConfigError("phantom: voxel_size_mm must be positive");
  if (frame_durations.empty()) throw ConfigError("phantom: frame_durations must not be empty");
  for (double d : frame_durations)
    if (!(d > 0.0)) throw ConfigError("phantom: frame_durations must be positive");
  if (!(psf_fwhm_mm >= 0.0)) throw ConfigError("phantom: psf_fwhm_mm must be >= 0");
  if (std::isnan(snr_db)) throw ConfigError("phantom: snr_db is NaN");
  if (!(lesion_radius_vox > 0.0)) throw ConfigError("phantom: lesion_radius_vox must be positive");
  if (!(gray_tissue.K1 > 0.0 && gray_tissue.k2 > 0.0 && white_tissue.K1 > 0.0 && white_tissue.k2 > 0.0))
    throw ConfigError("phantom: tissue K1 and k2 must be positive");
  check_binding(gray_binding, "phantom.gray_binding");
  check_binding(white_binding, "phantom.white_binding");
  truth_solver.validate();
}

std::vector<std::vector<Index>> PhantomMasks::class_indices() const {
  std::vector<std::vector<Index>> out(3);
  for (std::size_t n = 0; n < gray.size(); ++n) {
    if (gray[n]) out[0].push_back(Index(n));
    if (white[n]) out[1].push_back(Index(n));
    if (blood[n]) out[2].push_back(Index(n));
  }
  return out;
}

Matrix PhantomMasks::hard_proportions() const {
  Matrix A = Matrix::Zero(3, Index(gray.size()));
  for (std::size_t n = 0; n < gray.size(); ++n) {
    if (gray[n]) A(0, Index(n)) = 1.0;
    if (white[n]) A(1, Index(n)) = 1.0;
    if (blood[n]) A(2, Index(n)) = 1.0;
  }
  return A;
}

PhantomMasks generate_geometry(const PhantomConfig& cfg) {
  const GridDims g = cfg.grid;
  if (g.nx < 16 || g.ny < 16 || g.nz < 16) throw DomainError("generate_geometry: grid smaller than 16^3");
  const Index N = g.voxels();
  PhantomMasks m;
  m.gray.assign(std::size_t(N), 0);
  m.white.assign(std::size_t(N), 0);
  m.blood.assign(std::size_t(N), 0);
  m.lesion_gray.assign(std::size_t(N), 0);
  m.lesion_white.assign(std::size_t(N), 0);
  m.r1_gray = Vector::Ones(N);
  m.r1_white = Vector::Ones(N);

  const double cx = 0.5 * (g.nx - 1), cy = 0.5 * (g.ny - 1), cz = 0.5 * (g.nz - 1);
  const double wx = 0.3 * g.nx, wy = 0.3 * g.ny, wz = 0.3 * g.nz;
  const double bx = 0.12 * g.nx, br = std::max(1.5, 0.05 * g.nx);
  for (int z = 0; z < g.nz; ++z)
    for (int y = 0; y < g.ny; ++y)
      for (int x = 0; x < g.nx; ++x) {
        const auto n = std::size_t(g.index(x, y, z));
        const double e = std::pow((x - cx) / wx, 2) + std::pow((y - cy) / wy, 2) + std::pow((z - cz) / wz, 2);
        const double rb = std::hypot(x - bx, y - cy);
        if (e <= 1.0)
          m.white[n] = 1;
        else if (rb <= br)
          m.blood[n] = 1;
        else
          m.gray[n] = 1;
      }

  std::mt19937_64 rng(cfg.seed);
  const double r = cfg.lesion_radius_vox;
  const int ri = int(std::ceil(r));
  auto place = [&](const std::vector<std::uint8_t>& tissue, const std::vector<double>& levels,
                   std::vector<std::uint8_t>& lesion, Vector& r1, const char* name) {
    // Centers whose whole ball lies inside the tissue.
    std::vector<std::array<int, 3>> candidates;
    for (int z = ri; z < g.nz - ri; ++z)
      for (int y = ri; y < g.ny - ri; ++y)
        for (int x = ri; x < g.nx - ri; ++x) {
          bool inside = true;
          for (int dz = -ri; dz <= ri && inside; ++dz)
            for (int dy = -ri; dy <= ri && inside; ++dy)
              for (int dx = -ri; dx <= ri && inside; ++dx)
                if (dx * dx + dy * dy + dz * dz <= r * r && !tissue[std::size_t(g.index(x + dx, y + dy, z + dz))])
                  inside = false;
          if (inside) candidates.push_back({x, y, z});
        }

    auto apart = [&](const std::array<int, 3>& a, const std::array<int, 3>& b) {
      return std::pow(a[0] - b[0], 2) + std::pow(a[1] - b[1], 2) + std::pow(a[2] - b[2], 2) > std::pow(2.0 * r + 1.5, 2);
    };
    std::vector<std::array<int, 3>> centers;
    for (std::size_t li = 0; li < levels.size(); ++li) {
      const double level = levels[li];
      std::vector<std::array<int, 3>> free;
      for (const auto& c : candidates)
        if (std::all_of(centers.begin(), centers.end(), [&](const auto& p) { return apart(c, p); })) free.push_back(c);
      // keep room for the next lesion
      if (li + 1 < levels.size()) {
        std::vector<std::array<int, 3>> keep;
        for (const auto& c : free)
          if (std::any_of(free.begin(), free.end(), [&](const auto& o) { return apart(c, o); })) keep.push_back(c);
        free.swap(keep);
      }
      if (free.empty()) throw DomainError(std::string("generate_geometry: no room for ") + name + " lesions");
      const auto c = free[std::size_t(rng() % free.size())];
      centers.push_back(c);
      for (int dz = -ri; dz <= ri; ++dz)
        for (int dy = -ri; dy <= ri; ++dy)
          for (int dx = -ri; dx <= ri; ++dx)
            if (dx * dx + dy * dy + dz * dz <= r * r) {
              const auto n = std::size_t(g.index(c[0] + dx, c[1] + dy, c[2] + dz));
              lesion[n] = 1;
              r1[Index(n)] = level;
            }
    }
  };
  place(m.gray, cfg.gray_binding.r1_levels, m.lesion_gray, m.r1_gray, "gray");
  place(m.white, cfg.white_binding.r1_levels, m.lesion_white, m.r1_white, "white");
  return m;
}

Matrix generate_factor_tacs(const PhantomConfig& cfg, const AcquisitionTimeline& timeline) {
  timeline.validate();
  Matrix M(timeline.frames(), 3);
  for (Index l = 0; l < timeline.frames(); ++l) {
    const double t = timeline.mid_times[l];
    M(l, 0) = one_tissue(cfg.gray_tissue, cfg.blood, t);
    M(l, 1) = one_tissue(cfg.white_tissue, cfg.blood, t);
    M(l, 2) = cfg.blood(t);
  }
  return M.cwiseMax(0.0);
}

Vector gaussian_kernel(double sigma_vox) {
  if (!(sigma_vox > 0.0)) return Vector::Ones(1);
  const int R = std::max(1, int(std::ceil(4.0 * sigma_vox)));
  Vector k(2 * R + 1);
  for (int i = -R; i <= R; ++i) k[i + R] = std::exp(-0.5 * double(i * i) / (sigma_vox * sigma_vox));
  return k / k.sum();
}

Matrix gaussian_blur(const Matrix& frames, GridDims dims, double voxel_size_mm, double fwhm_mm) {
  if (frames.cols() != dims.voxels()) throw DomainError("gaussian_blur: voxel count != grid size");
  const double sigma = fwhm_mm / (2.0 * std::sqrt(2.0 * std::log(2.0))) / voxel_size_mm;
  const Vector k = gaussian_kernel(sigma);
  if (k.size() == 1) return frames;
  const int R = int(k.size() / 2);
  const std::array<int, 3> n{dims.nx, dims.ny, dims.nz};
  const std::array<Index, 3> stride{1, Index(dims.nx), Index(dims.nx) * dims.ny};

  Matrix out(frames.rows(), frames.cols());
#pragma omp parallel for schedule(static)
  for (Index l = 0; l < frames.rows(); ++l) {
    std::vector<double> a(std::size_t(frames.cols())), b(a.size());
    for (Index v = 0; v < frames.cols(); ++v) a[std::size_t(v)] = frames(l, v);
    for (int axis = 0; axis < 3; ++axis) {
      for (Index v = 0; v < frames.cols(); ++v) {
        const int pos = int((v / stride[axis]) % n[axis]);
        const Index base = v - Index(pos) * stride[axis];
        double acc = 0.0;
        for (int i = -R; i <= R; ++i) {
          const int q = std::clamp(pos + i, 0, n[axis] - 1);
          acc += k[i + R] * a[std::size_t(base + Index(q) * stride[axis])];
        }
        b[std::size_t(v)] = acc;
      }
      std::swap(a, b);
    }
    for (Index v = 0; v < frames.cols(); ++v) out(l, v) = a[std::size_t(v)];
  }
  return out;
}

NoiseRealization add_noise(const Matrix& clean, double snr_db, std::uint64_t seed) {
  NoiseRealization r;
  if (std::isinf(snr_db) && snr_db > 0.0) {
    r.noisy = clean;
    r.realized_snr_db = std::numeric_limits<double>::infinity();
    return r;
  }
  const double power = clean.squaredNorm();
  const double count = double(clean.size());
  if (!(power > 0.0)) throw DomainError("add_noise: image has zero energy");
  r.sigma = std::sqrt(power / (count * std::pow(10.0, snr_db / 10.0)));

  r.noisy.resize(clean.rows(), clean.cols());
  std::vector<double> frame_noise(std::size_t(clean.rows()), 0.0);
#pragma omp parallel for schedule(static)
  for (Index l = 0; l < clean.rows(); ++l) {
    std::seed_seq seq{std::uint32_t(seed), std::uint32_t(seed >> 32), std::uint32_t(l), 0x6e6f6973u};
    std::mt19937_64 rng(seq);
    std::normal_distribution<double> gauss(0.0, r.sigma);
    double acc = 0.0;
    for (Index v = 0; v < clean.cols(); ++v) {
      const double e = gauss(rng);
      acc += e * e;
      r.noisy(l, v) = std::max(0.0, clean(l, v) + e);
    }
    frame_noise[std::size_t(l)] = acc;
  }
  double noise_power = 0.0;
  for (double p : frame_noise) noise_power += p;
  r.realized_snr_db = 10.0 * std::log10(power / noise_power);
  return r;
}

Matrix PhantomGroundTruth::r1() const { return delivery_ratio_map(B); }
Matrix PhantomGroundTruth::bp() const { return binding_potential_map(B, alpha); }

PhantomGroundTruth build_ground_truth(const PhantomConfig& cfg) {
  cfg.validate();
  const AcquisitionTimeline timeline = cfg.timeline();
  PhantomGroundTruth t;
  t.masks = generate_geometry(cfg);
  t.M = generate_factor_tacs(cfg, timeline);
  const Index N = cfg.grid.voxels();

  const BindingKinetics* kin[2] = {&cfg.gray_binding, &cfg.white_binding};
  const std::vector<std::uint8_t>* lesion[2] = {&t.masks.lesion_gray, &t.masks.lesion_white};
  const Vector* r1[2] = {&t.masks.r1_gray, &t.masks.r1_white};
  t.alpha.resize(2, 2);
  t.B_model.assign(3, Matrix::Zero(2, N));
  for (int k = 0; k < 2; ++k) {
    const auto base = frtm_to_gunn(1.0, kin[k]->k2, kin[k]->k3, kin[k]->k4);
    t.alpha(k, 0) = base.alpha_fast;
    t.alpha(k, 1) = base.alpha_slow;
    for (Index n = 0; n < N; ++n) {
      if (!(*lesion[k])[std::size_t(n)]) continue;
      const auto g = frtm_to_gunn((*r1[k])[n], kin[k]->k2, kin[k]->k3, kin[k]->k4);
      t.B_model[0](k, n) = g.b0;
      t.B_model[1](k, n) = g.b_fast;
      t.B_model[2](k, n) = g.b_slow;
    }
  }

  const Matrix A_hard = t.masks.hard_proportions();
  const Matrix X = reconstruct(t.M, A_hard, t.B_model, t.alpha, timeline);
  t.clean = gaussian_blur(X, cfg.grid, cfg.voxel_size_mm, cfg.psf_fwhm_mm);

  Variables init{t.M, A_hard, t.B_model, t.alpha};
  const auto state = palm_run(t.clean, cfg.grid, timeline, std::move(init), t.M, cfg.truth_solver);
  t.A = state.vars.A;
  t.B = state.vars.B;
  t.truth_iterations = state.iterations;
  spdlog::info("phantom truth pass: {} iterations ({})", state.iterations, to_string(state.stop));
  return t;
}

PhantomGroundTruth assemble_phantom(const PhantomConfig& cfg) {
  PhantomGroundTruth t = build_ground_truth(cfg);
  t.noise = add_noise(t.clean, cfg.snr_db, cfg.seed);
  return t;
}

}  // namespace pnmm
