#pragma once

// Procedural dynamic PET phantom: three classes (gray, white, blood),
// reference-tissue binding lesions in both tissues, Gaussian PSF, Gaussian
// noise at a pooled SNR, and a restricted solver pass that yields the
// partial-volume-aware ground truth for A and B.

#include <array>
#include <cstdint>
#include <vector>

#include "pnmm/objective.hpp"
#include "pnmm/tac_model.hpp"

namespace pnmm {

struct GunnCoefficients {
  double b0 = 0.0;
  double b_fast = 0.0;  // coefficient of exp(-alpha_fast t), <= 0
  double b_slow = 0.0;
  double alpha_fast = 0.0;
  double alpha_slow = 0.0;

  double bp() const { return b0 + b_fast / alpha_fast + b_slow / alpha_slow; }
};

// Full reference tissue model written against the reference TAC C_R:
//   C_T = (1 + b0) C_R + (b_fast e^{-alpha_fast t} + b_slow e^{-alpha_slow t}) * C_R
// with b0 = R1 - 1. Requires k2, k4 > 0, k3 >= 0, R1 > 0.
GunnCoefficients frtm_to_gunn(double R1, double k2, double k3, double k4);

// Tri-exponential arterial input: (A1 t - A2 - A3) e^{-l1 t} + A2 e^{-l2 t} + A3 e^{-l3 t}.
struct BloodInput {
  double A1 = 851.1225, A2 = 21.8798, A3 = 20.8113;
  double l1 = 4.134, l2 = 0.1191, l3 = 0.0104;

  double operator()(double t) const;
};

// One-tissue response K1 e^{-k2 t} convolved with a blood input.
struct OneTissue {
  double K1 = 0.5;
  double k2 = 0.2;
};

struct BindingKinetics {
  double k2 = 0.4;
  double k3 = 0.15;
  double k4 = 0.01;
  std::vector<double> r1_levels{1.0, 1.6};  // one lesion per level
};

struct PhantomConfig {
  GridDims grid{32, 32, 16};
  double voxel_size_mm = 2.0;
  std::vector<double> frame_durations{1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 2, 2, 2, 2, 2, 3, 3, 3, 3, 5, 5, 5, 5, 5, 8, 10, 15};
  BloodInput blood;
  OneTissue gray_tissue{0.5, 0.2};
  OneTissue white_tissue{0.25, 0.15};
  BindingKinetics gray_binding{0.4, 0.15, 0.01, {1.0, 1.6}};
  BindingKinetics white_binding{0.3, 0.15, 0.01, {1.0, 1.6}};
  double lesion_radius_vox = 2.0;
  double psf_fwhm_mm = 4.4;
  double snr_db = 20.0;  // +inf disables noise
  std::uint64_t seed = 1;

  // Restricted pass (A and B only) for the partial-volume ground truth.
  SolverConfig truth_solver = default_truth_solver();
  static SolverConfig default_truth_solver();

  AcquisitionTimeline timeline() const { return AcquisitionTimeline::from_durations(frame_durations); }
  void validate() const;
};

struct PhantomMasks {
  std::vector<std::uint8_t> gray, white, blood, lesion_gray, lesion_white;
  // R1 assigned to each lesion voxel of the tissue (1 elsewhere).
  Vector r1_gray, r1_white;

  // Voxel index lists in class order gray, white, blood.
  std::vector<std::vector<Index>> class_indices() const;
  // Hard proportions: 3 x N one-hot.
  Matrix hard_proportions() const;
};

struct NoiseRealization {
  Matrix noisy;
  double sigma = 0.0;
  double realized_snr_db = 0.0;  // before clipping
};

struct PhantomGroundTruth {
  PhantomMasks masks;
  Matrix M;                // L x 3
  Matrix A;                // after the restricted pass
  std::vector<Matrix> B;   // after the restricted pass
  Matrix alpha;            // 2 x 2, columns fast, slow
  std::vector<Matrix> B_model;  // unclamped coefficients on the hard masks
  Matrix clean;            // blurred, noiseless
  NoiseRealization noise;
  int truth_iterations = 0;

  Matrix r1() const;  // 2 x N
  Matrix bp() const;  // 2 x N
};

PhantomMasks generate_geometry(const PhantomConfig& cfg);
Matrix generate_factor_tacs(const PhantomConfig& cfg, const AcquisitionTimeline& timeline);

// Per-frame separable Gaussian blur with replicate padding. fwhm <= 0 is identity.
Matrix gaussian_blur(const Matrix& frames, GridDims dims, double voxel_size_mm, double fwhm_mm);
Vector gaussian_kernel(double sigma_vox);

// Gaussian noise with variance set from the pooled power of `clean`, then
// clipped at zero. Each frame draws from its own stream seeded by (seed, frame).
NoiseRealization add_noise(const Matrix& clean, double snr_db, std::uint64_t seed);

// Everything except noise.
PhantomGroundTruth build_ground_truth(const PhantomConfig& cfg);
PhantomGroundTruth assemble_phantom(const PhantomConfig& cfg);

}  // namespace pnmm
