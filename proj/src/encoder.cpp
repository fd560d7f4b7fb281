#include "cpic/encoder.hpp"

#include "cpic/series.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace cpic {

namespace {

const double kHalfLog2Pi = 0.5 * std::log(2.0 * std::numbers::pi);

void check_window(const Matrix& windows, int input_dim) {
  if (windows.cols() == 0 || windows.cols() % input_dim != 0) {
    throw std::invalid_argument("window width " + std::to_string(windows.cols()) +
                                " is not a positive multiple of input dimension " + std::to_string(input_dim));
  }
}

}  // namespace

Encoder::Encoder(ParamStore& store, int input_dim, int latent_dim, bool deterministic, int hidden)
    : input_dim_(input_dim), latent_dim_(latent_dim), deterministic_(deterministic) {
  if (input_dim <= 0 || latent_dim <= 0) throw std::invalid_argument("encoder dimensions must be positive");
  mean_map_ = store.add("encoder.U", input_dim, latent_dim);
  if (!deterministic_) {
    variance_net_ = Mlp(MlpSpec::two_layer(input_dim, hidden, latent_dim, OutputTransform::softplus), store,
                        "encoder.variance");
    floor_ = store.add("encoder.sigma_floor", 1, 1);
  }
}

void Encoder::initialize(ParamStore& store, std::uint64_t seed) const {
  store.init_uniform(mean_map_, 1.0 / std::sqrt(static_cast<double>(input_dim_)), seed);
  if (!deterministic_) {
    variance_net_.initialize(store, seed);
    // softplus(floor) = kInitialFloorSigma
    store.value(floor_)(0, 0) = std::log(std::expm1(kInitialFloorSigma));
  }
}

Matrix Encoder::encode_mean(const ParamStore& store, const Matrix& windows) const {
  check_window(windows, input_dim_);
  const int T = static_cast<int>(windows.cols() / input_dim_);
  return flatten_steps(unflatten_steps(windows, input_dim_) * store.value(mean_map_), T);
}

Vector Encoder::encode_mean(const ParamStore& store, const Vector& window) const {
  return encode_mean(store, Matrix(window.transpose())).row(0).transpose();
}

WindowCode Encoder::encode(const ParamStore& store, const Matrix& windows, const Matrix& eps) const {
  check_window(windows, input_dim_);
  const int T = static_cast<int>(windows.cols() / input_dim_);
  WindowCode code;
  code.steps = unflatten_steps(windows, input_dim_);
  code.mu = flatten_steps(code.steps * store.value(mean_map_), T);
  if (deterministic_) {
    code.sigma = Matrix::Zero(code.mu.rows(), code.mu.cols());
    code.eps = code.sigma;
    code.y = code.mu;
    return code;
  }
  if (eps.rows() != code.mu.rows() || eps.cols() != code.mu.cols())
    throw std::invalid_argument("encoder noise shape does not match code shape");
  code.variance_raw = variance_net_.forward(store, code.steps, &code.variance_tape);
  const double floor_sigma = softplus(store.value(floor_)(0, 0));
  code.sigma = flatten_steps(code.variance_raw.array() + floor_sigma, T);
  code.eps = eps;
  code.y = code.mu + code.sigma.cwiseProduct(code.eps);
  return code;
}

WindowCode Encoder::encode_sample(const ParamStore& store, const Matrix& windows, std::mt19937_64& rng) const {
  check_window(windows, input_dim_);
  const Index cols = windows.cols() / input_dim_ * latent_dim_;
  if (deterministic_) return encode(store, windows, Matrix());
  return encode(store, windows, standard_normal(windows.rows(), cols, rng));
}

void Encoder::backward(ParamStore& store, const WindowCode& code, const Matrix& d_y, const Matrix& d_mu,
                       const Matrix& d_sigma) const {
  const Index D = latent_dim_;
  Matrix g_mu = Matrix::Zero(code.mu.rows(), code.mu.cols());
  Matrix g_sigma = Matrix::Zero(code.mu.rows(), code.mu.cols());
  if (d_mu.size()) g_mu += d_mu;
  if (d_y.size()) {
    g_mu += d_y;
    if (!deterministic_) g_sigma += d_y.cwiseProduct(code.eps);
  }
  if (d_sigma.size() && !deterministic_) g_sigma += d_sigma;

  store.grad(mean_map_).noalias() += code.steps.transpose() * unflatten_steps(g_mu, D);
  if (deterministic_) return;
  const Matrix g_sigma_steps = unflatten_steps(g_sigma, D);
  variance_net_.backward(store, code.variance_tape, g_sigma_steps);
  store.grad(floor_)(0, 0) += g_sigma_steps.sum() * sigmoid(store.value(floor_)(0, 0));
}

double Encoder::log_density(const ParamStore& store, const Vector& window, const Vector& y) const {
  if (deterministic_) throw std::logic_error("L1Out undefined for deterministic encoder");
  const Matrix x = window.transpose();
  const Matrix eps = Matrix::Zero(1, y.size());
  const WindowCode code = encode(store, x, eps);
  if (code.mu.cols() != y.size()) throw std::invalid_argument("code length does not match encoder output");
  return diagonal_gaussian_log_pdf(y, code.mu.row(0).transpose(), code.sigma.row(0).transpose());
}

double diagonal_gaussian_log_pdf(const Vector& y, const Vector& mu, const Vector& sigma) {
  double total = 0.0;
  for (Index k = 0; k < y.size(); ++k) {
    const double z = (y(k) - mu(k)) / sigma(k);
    total += -kHalfLog2Pi - std::log(sigma(k)) - 0.5 * z * z;
  }
  return total;
}

ConditionalDensity conditional_log_density(const Matrix& y, const Matrix& mu, const Matrix& sigma,
                                           double clamp_floor) {
  const Index S = y.rows();
  const Index K = y.cols();
  ConditionalDensity out;
  out.log_density.resize(S, S);
  const Matrix log_sigma = sigma.array().log().matrix();
  const Matrix inv_sigma = sigma.cwiseInverse();
  for (Index i = 0; i < S; ++i) {
    for (Index j = 0; j < S; ++j) {
      double total = 0.0;
      for (Index k = 0; k < K; ++k) {
        const double z = (y(i, k) - mu(j, k)) * inv_sigma(j, k);
        double v = -kHalfLog2Pi - log_sigma(j, k) - 0.5 * z * z;
        if (v < clamp_floor) {
          v = clamp_floor;
          ++out.clamped;
        }
        total += v;
      }
      out.log_density(i, j) = total;
    }
  }
  return out;
}

void conditional_log_density_backward(const Matrix& y, const Matrix& mu, const Matrix& sigma,
                                      const Matrix& d_log_density, Matrix& d_y, Matrix& d_mu, Matrix& d_sigma,
                                      double clamp_floor) {
  const Index S = y.rows();
  const Index K = y.cols();
  const Matrix log_sigma = sigma.array().log().matrix();
  const Matrix inv_sigma = sigma.cwiseInverse();
  for (Index i = 0; i < S; ++i) {
    for (Index j = 0; j < S; ++j) {
      const double g = d_log_density(i, j);
      if (g == 0.0) continue;
      for (Index k = 0; k < K; ++k) {
        const double z = (y(i, k) - mu(j, k)) * inv_sigma(j, k);
        const double v = -kHalfLog2Pi - log_sigma(j, k) - 0.5 * z * z;
        if (v < clamp_floor) continue;
        const double dz = g * z * inv_sigma(j, k);
        d_y(i, k) -= dz;
        d_mu(j, k) += dz;
        d_sigma(j, k) += g * (z * z - 1.0) * inv_sigma(j, k);
      }
    }
  }
}

}  // namespace cpic
