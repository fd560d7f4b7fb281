#include "cpic/lorenz.hpp"

#include <cmath>
#include <cstdio>
#include <stdexcept>
#include <string>

namespace cpic {

namespace {

Matrix haar_orthogonal(Index n, std::mt19937_64& rng) {
  Eigen::HouseholderQR<Matrix> qr(standard_normal(n, n, rng));
  Matrix q = qr.householderQ();
  const Matrix r = qr.matrixQR().triangularView<Eigen::Upper>();
  for (Index j = 0; j < n; ++j)
    if (r(j, j) < 0.0) q.col(j) = -q.col(j);
  return q;
}

}  // namespace

void LorenzParams::validate() const {
  if (!(dt > 0.0)) throw std::invalid_argument("lorenz dt must be positive");
  if (burn_in < 0 || steps <= burn_in) throw std::invalid_argument("lorenz steps must exceed burn-in");
}

Eigen::Vector3d lorenz_derivative(const Eigen::Vector3d& s, const LorenzParams& p) {
  return {p.sigma * (s.y() - s.x()), s.x() * (p.rho - s.z()) - s.y(), s.x() * s.y() - p.b * s.z()};
}

Series integrate_lorenz(const LorenzParams& params) {
  params.validate();
  Series out;
  out.data.resize(params.steps - params.burn_in, 3);
  out.channel_names = {"f1", "f2", "f3"};
  out.step_label = "dt=" + std::to_string(params.dt);
  Eigen::Vector3d s(params.initial[0], params.initial[1], params.initial[2]);
  const double h = params.dt;
  for (int step = 0; step < params.steps; ++step) {
    if (step >= params.burn_in) out.data.row(step - params.burn_in) = s.transpose();
    const Eigen::Vector3d k1 = lorenz_derivative(s, params);
    const Eigen::Vector3d k2 = lorenz_derivative(s + 0.5 * h * k1, params);
    const Eigen::Vector3d k3 = lorenz_derivative(s + 0.5 * h * k2, params);
    const Eigen::Vector3d k4 = lorenz_derivative(s + h * k3, params);
    s += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    if (!s.allFinite() || s.norm() > 1e6)
      throw std::runtime_error("lorenz integration diverged at step " + std::to_string(step));
  }
  return out;
}

Lifted lift(const Series& latents, int dim, std::uint64_t seed) {
  if (dim < latents.channels()) throw std::invalid_argument("lift dimension must be >= latent dimension");
  auto rng = substream(seed, "lift.embedding");
  const Matrix draw = standard_normal(dim, latents.channels(), rng);
  Eigen::HouseholderQR<Matrix> qr(draw);
  Lifted out;
  out.embedding = qr.householderQ() * Matrix::Identity(dim, latents.channels());
  out.series.data = latents.data * out.embedding.transpose();
  out.series.step_label = latents.step_label;
  return out;
}

Corrupted corrupt(const Series& lifted, double snr, std::uint64_t seed) {
  if (!(snr > 0.0)) throw std::invalid_argument("snr must be positive");
  const Index N = lifted.channels();
  const Index L = lifted.length();

  const Matrix centered = lifted.data.rowwise() - lifted.data.colwise().mean();
  const Matrix signal_cov = centered.transpose() * centered / static_cast<double>(L);
  Eigen::SelfAdjointEigenSolver<Matrix> signal_eig(signal_cov, Eigen::EigenvaluesOnly);
  const double signal_top = signal_eig.eigenvalues()(N - 1);

  auto cov_rng = substream(seed, "corrupt.covariance");
  const Matrix basis = haar_orthogonal(N, cov_rng);
  Vector spectrum(N);
  for (Index k = 0; k < N; ++k) spectrum(k) = signal_top / snr * std::exp(-2.0 * static_cast<double>(k) / kNoiseDecay);
  Matrix noise_cov = basis * spectrum.asDiagonal() * basis.transpose();
  noise_cov = 0.5 * (noise_cov + noise_cov.transpose());

  Eigen::SelfAdjointEigenSolver<Matrix> eig(noise_cov);
  const Vector root = eig.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  const Matrix factor = eig.eigenvectors() * root.asDiagonal();

  auto draw_rng = substream(seed, "corrupt.draws");
  const Matrix z = standard_normal(L, N, draw_rng);

  Corrupted out;
  out.series.data = lifted.data + z * factor.transpose();
  out.series.step_label = lifted.step_label;
  out.noise_cov = noise_cov;
  out.noise_eigenvalues = eig.eigenvalues();
  out.signal_top_eigenvalue = signal_top;
  out.achieved_snr = signal_top / eig.eigenvalues()(N - 1);
  return out;
}

std::vector<double> snr_grid(int k) {
  if (k < 2) throw std::invalid_argument("snr grid needs at least 2 levels");
  std::vector<double> out(static_cast<std::size_t>(k));
  for (int i = 0; i < k; ++i) out[static_cast<std::size_t>(i)] = std::pow(10.0, -3.0 + 2.0 * i / (k - 1));
  return out;
}

std::string snr_label(double snr) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.5f", snr);
  std::string s(buf);
  while (s.size() > 1 && s.back() == '0') s.pop_back();
  if (s.back() == '.') s.pop_back();
  return s;
}

LorenzBenchmark make_lorenz_benchmark(const LorenzParams& params, int dim, double snr, std::uint64_t seed) {
  LorenzBenchmark bench;
  bench.params = params;
  bench.snr = snr;
  bench.seed = seed;
  bench.latents = integrate_lorenz(params);
  bench.latents.data.rowwise() -= bench.latents.data.colwise().mean();
  bench.lifted = lift(bench.latents, dim, seed);
  bench.noisy = corrupt(bench.lifted.series, snr, seed);
  return bench;
}

}  // namespace cpic
