#pragma once

// Noisy Lorenz benchmark: RK4 integration of the attractor, a random orthonormal
// lift to N dimensions, and anisotropic Gaussian noise at a prescribed SNR.

#include "cpic/ndmath.hpp"
#include "cpic/series.hpp"

#include <array>
#include <cstdint>
#include <string>
#include <vector>

namespace cpic {

struct LorenzParams {
  double sigma = 10.0;
  double rho = 28.0;
  double b = 8.0 / 3.0;
  double dt = 0.01;
  int steps = 21000;
  int burn_in = 1000;
  std::array<double, 3> initial{1.0, 1.0, 1.0};

  void validate() const;
};

Eigen::Vector3d lorenz_derivative(const Eigen::Vector3d& state, const LorenzParams& params);

/// Classical fourth-order Runge-Kutta; returns steps - burn_in rows.
/// Throws std::runtime_error if |state| exceeds 1e6.
Series integrate_lorenz(const LorenzParams& params);

struct Lifted {
  Series series;
  Matrix embedding;  // N x 3, orthonormal columns
};

/// x_t = V f_t with V from a seeded Gaussian draw, orthonormalized.
Lifted lift(const Series& latents, int dim, std::uint64_t seed);

struct Corrupted {
  Series series;
  Matrix noise_cov;
  Vector noise_eigenvalues;  // ascending
  double signal_top_eigenvalue = 0.0;
  double achieved_snr = 0.0;
};

/// Noise spectrum decays as exp(-2k / kNoiseDecay), k = 0..N-1.
inline constexpr double kNoiseDecay = 7.0;

/// Adds N(0, Sigma_noise) with Sigma_noise = Q diag(spectrum) Q^T, Q a seeded
/// Haar-random orthogonal matrix, scaled so that the top eigenvalue of the signal
/// covariance divided by the top eigenvalue of Sigma_noise equals `snr`.
Corrupted corrupt(const Series& lifted, double snr, std::uint64_t seed);

/// 10^linspace(-3, -1, k).
std::vector<double> snr_grid(int k = 10);

/// Five decimals with trailing zeros dropped: 0.001, 0.00167, ..., 0.1.
std::string snr_label(double snr);

struct LorenzBenchmark {
  LorenzParams params;
  Series latents;  // centered ground truth
  Lifted lifted;
  Corrupted noisy;
  double snr = 0.0;
  std::uint64_t seed = 0;
};

LorenzBenchmark make_lorenz_benchmark(const LorenzParams& params, int dim, double snr, std::uint64_t seed);

}  // namespace cpic
