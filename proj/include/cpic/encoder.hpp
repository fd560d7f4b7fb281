#pragma once

#include "cpic/ndmath.hpp"

#include <cstdint>
#include <random>

namespace cpic {

/// Codes for a batch of windows. Row i holds T*D entries, time-major, and
/// y = mu + sigma .* eps holds entrywise.
struct WindowCode {
  Matrix y;
  Matrix mu;
  Matrix sigma;
  Matrix eps;

  // Backward state.
  Matrix steps;         // (S*T) x N inputs, one time step per row
  Mlp::Tape variance_tape;
  Matrix variance_raw;  // (S*T) x D variance-network output, before the floor
};

/// Stochastic linear encoder: y_t | x_t ~ N(U^T x_t, diag(sigma_t^2)), with
/// sigma_t = net(x_t) + softplus(floor). The deterministic variant fixes sigma = 0.
class Encoder {
 public:
  static constexpr int kDefaultHidden = 64;
  static constexpr double kInitialFloorSigma = 0.1;

  Encoder() = default;
  Encoder(ParamStore& store, int input_dim, int latent_dim, bool deterministic, int hidden = kDefaultHidden);

  void initialize(ParamStore& store, std::uint64_t seed) const;

  int input_dim() const { return input_dim_; }
  int latent_dim() const { return latent_dim_; }
  bool deterministic() const { return deterministic_; }
  ParamId mean_map() const { return mean_map_; }
  ParamId floor() const { return floor_; }
  const Mlp& variance_net() const { return variance_net_; }

  /// Per-step U^T x_t over flattened windows (rows x T*N) -> rows x T*D.
  Matrix encode_mean(const ParamStore& store, const Matrix& windows) const;
  Vector encode_mean(const ParamStore& store, const Vector& window) const;

  /// Encodes with caller-supplied standard-normal noise (same shape as the code).
  /// In deterministic mode sigma and eps are zero and y = mu.
  WindowCode encode(const ParamStore& store, const Matrix& windows, const Matrix& eps) const;
  WindowCode encode_sample(const ParamStore& store, const Matrix& windows, std::mt19937_64& rng) const;

  /// Accumulates parameter gradients given cotangents for y, mu and sigma
  /// (any of which may be empty). Gradients through y are routed to mu and sigma.
  void backward(ParamStore& store, const WindowCode& code, const Matrix& d_y, const Matrix& d_mu,
                const Matrix& d_sigma) const;

  /// log p(y | x) for one window under the diagonal Gaussian conditional.
  double log_density(const ParamStore& store, const Vector& window, const Vector& y) const;

 private:
  int input_dim_ = 0;
  int latent_dim_ = 0;
  bool deterministic_ = false;
  ParamId mean_map_;
  ParamId floor_;
  Mlp variance_net_;
};

/// Entry (i, j) = log p(y_i | x_j) for diagonal Gaussians with rows mu_j, sigma_j.
/// Per-dimension log-densities are clamped at `clamp_floor`; clamped entries
/// contribute no gradient and are counted in `clamped`.
struct ConditionalDensity {
  Matrix log_density;
  std::size_t clamped = 0;
};

inline constexpr double kLogDensityClamp = -30.0;

ConditionalDensity conditional_log_density(const Matrix& y, const Matrix& mu, const Matrix& sigma,
                                           double clamp_floor = kLogDensityClamp);

/// Backward of conditional_log_density; accumulates into d_y, d_mu, d_sigma.
void conditional_log_density_backward(const Matrix& y, const Matrix& mu, const Matrix& sigma,
                                      const Matrix& d_log_density, Matrix& d_y, Matrix& d_mu, Matrix& d_sigma,
                                      double clamp_floor = kLogDensityClamp);

/// Sum over entries of the diagonal Gaussian log-pdf.
double diagonal_gaussian_log_pdf(const Vector& y, const Vector& mu, const Vector& sigma);

}  // namespace cpic
