// Acceptance suite. `cpic_acceptance N` runs criterion N; without arguments all run.
// Prints one [PASS]/[FAIL] line per criterion and exits nonzero on any failure.

#include "cpic/artifact.hpp"
#include "cpic/evalkit.hpp"
#include "cpic/lorenz.hpp"
#include "cpic/mibounds.hpp"
#include "cpic/objective.hpp"
#include "cpic/selftest.hpp"
#include "cpic/sweep.hpp"

#include "support.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>

using namespace cpic;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string sci(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2e", v);
  return buf;
}

std::string fmt(double v, int precision = 4) {
  std::ostringstream s;
  s.precision(precision);
  s << std::fixed << v;
  return s.str();
}

Outcome ac1() {
  MiSelftestConfig config;
  config.seed = 0;
  const MiSelftestResult r = mi_selftest(config);
  std::ostringstream detail;
  detail << "truth " << fmt(r.truth);
  for (const auto& row : r.rows) detail << ", " << row.estimator << " " << fmt(row.estimate) << (row.pass ? "" : " (out of band)");
  return {r.all_pass(), detail.str()};
}

Outcome ac2() {
  auto rng = substream(2, "acceptance.infonce");
  std::normal_distribution<double> scale(0.0, 3.0);
  std::size_t violations = 0, trials = 0;
  double worst = -std::numeric_limits<double>::infinity();
  for (Index s : {2, 8, 64}) {
    const int count = s == 64 ? 3334 : 3333;
    for (int k = 0; k < count; ++k) {
      // Mix of moderate and extreme scales, including a dominant diagonal.
      Matrix scores = standard_normal(s, s, rng) * std::exp(scale(rng));
      if (k % 3 == 0) scores.diagonal().array() += 50.0 * std::abs(scale(rng));
      const double gap = infonce(scores).value - std::log(static_cast<double>(s));
      worst = std::max(worst, gap);
      if (gap > 0.0) ++violations;
      ++trials;
    }
  }
  return {violations == 0, std::to_string(trials) + " matrices, max (infonce - ln S) = " + sci(worst) + ", " +
                               std::to_string(violations) + " violations"};
}

Outcome ac3() {
  double worst = 0.0;
  std::string worst_name;
  std::size_t variants = 0;
  std::uint64_t seed = 100;
  for (const CpicConfig& config : testing::all_loss_variants()) {
    ++seed;
    const int n = 5;
    CpicModel model = build_model(config, n);
    auto rng = substream(seed, "acceptance.gradcheck");
    const Matrix data = standard_normal(60, n, rng);
    const auto anchors = sample_anchors(data.rows(), config.window, config.batch, rng);
    const WindowPairBatch batch = window_pairs(data, config.window, anchors);
    const bool multi = config.loss == LossFamily::multi;
    LossFn loss = [&](ParamStore&, bool with_grad) {
      auto noise_rng = substream(seed, "acceptance.noise");
      return multi ? cpic_loss_multi(model, batch, noise_rng, with_grad).loss
                   : cpic_loss_uni(model, batch, noise_rng, with_grad).loss;
    };
    GradCheckOptions options;
    options.seed = seed;
    const GradCheckReport report = grad_check(loss, model.store, options);
    if (worst_name.empty() || report.max_rel_error > worst) {
      worst = report.max_rel_error;
      worst_name = testing::describe(config) + " " + report.worst_param;
    }
    ++variants;
  }
  return {worst < 1e-4, std::to_string(variants) + " variants, max relative error " + sci(worst) +
                            " (" + worst_name + ")"};
}

Outcome ac4() {
  const LorenzParams params;
  double best = -1.0;
  std::ostringstream detail;
  detail << "stochastic-nec seeds";
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    const LorenzBenchmark bench = make_lorenz_benchmark(params, 30, 0.1, seed);
    const RunRecord r = run_lorenz_method("stochastic-nec", bench, seed);
    detail << ' ' << fmt(r.r2);
    best = std::max(best, r.r2);
  }
  const LorenzBenchmark bench = make_lorenz_benchmark(params, 30, 0.1, 0);
  const RunRecord dca = run_lorenz_method("dca", bench, 0);
  detail << " (best " << fmt(best) << "), dca " << fmt(dca.r2) << "; need >= 0.85 each";
  return {best >= 0.85 && dca.r2 >= 0.85, detail.str()};
}

Outcome ac5() {
  SweepOptions options;
  options.methods = {"stochastic-nec"};
  options.threads = 0;
  const auto runs = sweep_lorenz(options, [](const RunRecord& r) {
    std::cout << "  snr " << snr_label(r.snr) << " seed " << r.seed << " r2 " << fmt(r.r2) << std::endl;
  });
  const SweepTable table = sweep_report(runs, options.methods);
  std::vector<double> medians;
  for (const SweepRow& row : table.rows) medians.push_back(row.median);
  int violations = 0;
  for (std::size_t i = 1; i < medians.size(); ++i)
    if (medians[i] < medians[i - 1]) ++violations;
  const double gap = medians.back() - medians.front();
  std::ostringstream detail;
  detail << "medians";
  for (double m : medians) detail << ' ' << fmt(m, 3);
  detail << "; " << violations << " monotonicity violations (max 1), gap " << fmt(gap, 3) << " (need >= 0.3)";
  return {medians.size() == 10 && violations <= 1 && gap >= 0.3, detail.str()};
}

Outcome ac6() {
  double worst = 0.0;
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    LorenzParams params;
    const Series latents = integrate_lorenz(params);
    const Lifted lifted = lift(latents, 30, seed);
    const PcaResult pca = pca_project(lifted.series.data, 3);
    worst = std::max(worst, std::abs(1.0 - align_r2(pca.scores, latents.data).r2));
  }
  return {worst <= 1e-6, "max |1 - R2| over 3 embeddings = " + sci(worst)};
}

// A slow AR(1) latent hidden along a low-variance direction of 12 channels whose
// top-variance subspace carries only white noise.
struct ForecastData {
  Series observed;
  Matrix latent;
};

ForecastData synthetic_forecast_data(std::uint64_t seed) {
  const Index L = 8000, N = 12;
  auto rng = substream(seed, "acceptance.forecast");
  Matrix z = standard_normal(L, 1, rng);
  for (Index t = 1; t < L; ++t) z(t, 0) = 0.95 * z(t - 1, 0) + std::sqrt(1.0 - 0.95 * 0.95) * z(t, 0);
  const Matrix basis = Eigen::HouseholderQR<Matrix>(standard_normal(N, N, rng)).householderQ();
  Vector noise_scale = Vector::Constant(N, 0.5);
  noise_scale.head(4).setConstant(5.0);
  ForecastData out;
  out.latent = z;
  out.observed.data = (standard_normal(L, N, rng) * noise_scale.asDiagonal()) * basis.transpose() +
                      z * basis.col(N - 1).transpose();
  return out;
}

Outcome ac7() {
  const int dim = 2;
  double cpic_sum = 0.0, pca_sum = 0.0;
  std::ostringstream detail;
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    const ForecastData data = synthetic_forecast_data(seed);
    CpicConfig config;
    config.latent_dim = dim;
    config.window = 4;
    config.steps = 2000;
    config.seed = seed;
    const TrainReport report = train(config, data.observed);
    ForecastTask task;
    task.targets = data.latent;
    task.latents = report.model.project(data.observed.data);
    const double cpic_r2 = forecast_r2(task).mean_r2;
    task.latents = pca_project(data.observed.data, dim).scores;
    const double pca_r2 = forecast_r2(task).mean_r2;
    cpic_sum += cpic_r2;
    pca_sum += pca_r2;
    detail << "seed " << seed << ": cpic " << fmt(cpic_r2, 3) << " pca " << fmt(pca_r2, 3) << "; ";
  }
  const double margin = (cpic_sum - pca_sum) / 3.0;
  detail << "mean margin " << fmt(margin, 3) << " (need >= 0.05)";
  return {margin >= 0.05, detail.str()};
}

Outcome ac8() {
  LorenzParams params;
  params.steps = 4000;
  const LorenzBenchmark bench = make_lorenz_benchmark(params, 10, 0.05, 1);
  bool traces_equal = true;
  bool round_trip = true;
  for (LossFamily family : {LossFamily::multi, LossFamily::uni}) {
    CpicConfig config = CpicConfig::for_family(family, EncoderMode::stochastic);
    config.steps = 200;
    config.seed = 17;
    const TrainReport a = train(config, bench.noisy.series), b = train(config, bench.noisy.series);
    traces_equal = traces_equal && a.loss == b.loss && a.pi == b.pi && a.compression == b.compression &&
                   serialize_model(make_artifact(a)) == serialize_model(make_artifact(b));
    const std::string once = serialize_model(make_artifact(a));
    const std::string twice = serialize_model(parse_model(once));
    round_trip = round_trip && once == twice;
  }
  return {traces_equal && round_trip, std::string("traces ") + (traces_equal ? "bit-identical" : "differ") +
                                          ", artifact round-trip " + (round_trip ? "byte-identical" : "differs")};
}

Outcome ac9() {
  const Index L = 50000;
  auto rng = substream(9, "acceptance.ar1");
  Matrix x = standard_normal(L, 1, rng);
  x(0, 0) /= std::sqrt(1.0 - 0.25);
  for (Index t = 1; t < L; ++t) x(t, 0) += 0.5 * x(t - 1, 0);
  const double truth = -0.5 * std::log(1.0 - 0.25);
  const double pi = gaussian_pi(lagged_covariance(x, 1), Matrix::Identity(1, 1), 1);

  const Matrix y = [&] {
    Matrix m = standard_normal(20000, 5, rng);
    for (Index t = 1; t < m.rows(); ++t) m.row(t) += 0.6 * m.row(t - 1);
    return m;
  }();
  const LaggedCovariance cov = lagged_covariance(y, 5);
  double worst = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    const Matrix u = standard_normal(5, 2, rng);
    const Matrix m = standard_normal(2, 2, rng) + 2.0 * Matrix::Identity(2, 2);
    worst = std::max(worst, std::abs(gaussian_pi(cov, u * m, 3) - gaussian_pi(cov, u, 3)));
  }
  const bool pass = std::abs(pi - truth) <= 0.01 && worst <= 1e-6;
  return {pass, "gaussian_pi " + fmt(pi) + " vs " + fmt(truth) + " (tol 0.01), max invariance error " +
                    sci(worst) + " (tol 1e-6)"};
}

const std::function<Outcome()> kCriteria[] = {ac1, ac2, ac3, ac4, ac5, ac6, ac7, ac8, ac9};

}  // namespace

int main(int argc, char** argv) {
  std::vector<int> which;
  for (int i = 1; i < argc; ++i) which.push_back(std::atoi(argv[i]));
  if (which.empty())
    for (int n = 1; n <= 9; ++n) which.push_back(n);
  bool all = true;
  for (int n : which) {
    if (n < 1 || n > 9) {
      std::cerr << "unknown criterion " << n << '\n';
      return 2;
    }
    const auto start = std::chrono::steady_clock::now();
    Outcome outcome;
    try {
      outcome = kCriteria[n - 1]();
    } catch (const std::exception& e) {
      outcome = {false, std::string("exception: ") + e.what()};
    }
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::cout << (outcome.pass ? "[PASS] " : "[FAIL] ") << "AC" << n << ": " << outcome.detail << " [" << fmt(seconds, 1)
              << " s]" << std::endl;
    all = all && outcome.pass;
  }
  return all ? 0 : 1;
}
