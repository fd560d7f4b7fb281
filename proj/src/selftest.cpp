#include "cpic/selftest.hpp"

#include "cpic/encoder.hpp"
#include "cpic/mibounds.hpp"

#include <cmath>
#include <iomanip>
#include <sstream>
#include <stdexcept>

namespace cpic {

namespace {

// Bands at rho = 0.5, dim = 1 (truth 0.1438 nats).
constexpr double kReferenceTruth = 0.14384103622589045;
constexpr double kInfonceBand[2] = {0.09, 0.16};
constexpr double kNwjBand[2] = {0.07, 0.18};
constexpr double kUpperBoundFloor = 0.12;

enum class LowerBound { infonce, nwj };

double score_bound(LowerBound kind, const Matrix& scores, Matrix* d_scores) {
  if (kind == LowerBound::infonce) {
    ScoreBound b = infonce(scores);
    if (d_scores) *d_scores = std::move(b.d_scores);
    return b.value;
  }
  // NWJ: log a(y) = 1.
  TubaBound b = tuba(scores, Vector::Ones(scores.cols()), TubaForm::standard);
  if (d_scores) *d_scores = std::move(b.d_scores);
  return b.value;
}

double train_lower_bound(LowerBound kind, const MiSelftestConfig& config, const char* tag) {
  ParamStore store;
  Critic critic(store, CriticKind::separable, config.dim, config.dim, tag);
  critic.initialize(store, config.seed);
  Adam adam(AdamConfig{config.lr});
  auto rng = substream(config.seed, std::string(tag) + ".train");
  Matrix x, y;
  for (int step = 0; step < config.steps; ++step) {
    gaussian_pairs(config.rho, config.dim, config.batch, rng, x, y);
    Critic::Tape tape;
    const Matrix scores = critic.scores(store, x, y, &tape);
    Matrix d_scores;
    score_bound(kind, scores, &d_scores);
    critic.backward(store, tape, -d_scores, nullptr, nullptr);
    adam.step(store);
  }
  auto eval_rng = substream(config.seed, std::string(tag) + ".eval");
  double total = 0.0;
  for (int b = 0; b < config.eval_batches; ++b) {
    gaussian_pairs(config.rho, config.dim, config.batch, eval_rng, x, y);
    total += score_bound(kind, critic.scores(store, x, y), nullptr);
  }
  return total / config.eval_batches;
}

double l1out_estimate(const MiSelftestConfig& config) {
  auto rng = substream(config.seed, "selftest.l1out");
  const double sd = std::sqrt(1.0 - config.rho * config.rho);
  Matrix x, y;
  double total = 0.0;
  for (int b = 0; b < config.eval_batches; ++b) {
    gaussian_pairs(config.rho, config.dim, config.batch, rng, x, y);
    const Matrix sigma = Matrix::Constant(y.rows(), y.cols(), sd);
    total += l1out(conditional_log_density(y, config.rho * x, sigma).log_density).value;
  }
  return total / config.eval_batches;
}

double vub_estimate(const MiSelftestConfig& config) {
  ParamStore store;
  VariationalMarginal marginal(store, config.dim, true, "selftest.marginal");
  marginal.initialize(store);
  // Start away from the optimum so the fit is exercised.
  store.value(marginal.mean()).setConstant(0.5);
  store.value(marginal.log_sigma()).setConstant(-0.5);
  Adam adam(AdamConfig{config.lr});
  auto rng = substream(config.seed, "selftest.vub");
  const double sd = std::sqrt(1.0 - config.rho * config.rho);
  Matrix x, y;
  for (int step = 0; step < config.steps; ++step) {
    gaussian_pairs(config.rho, config.dim, config.batch, rng, x, y);
    vub(store, marginal, config.rho * x, Matrix::Constant(x.rows(), x.cols(), sd), 1.0);
    adam.step(store);
  }
  double total = 0.0;
  for (int b = 0; b < config.eval_batches; ++b) {
    gaussian_pairs(config.rho, config.dim, config.batch, rng, x, y);
    total += vub(store, marginal, config.rho * x, Matrix::Constant(x.rows(), x.cols(), sd)).value;
  }
  return total / config.eval_batches;
}

}  // namespace

void MiSelftestConfig::validate() const {
  if (!(std::abs(rho) < 1.0) || rho == 0.0) throw std::invalid_argument("rho must satisfy 0 < |rho| < 1");
  if (dim < 1) throw std::invalid_argument("dim must be >= 1");
  if (batch < 2) throw std::invalid_argument("batch must be >= 2");
  if (steps < 0 || eval_batches < 1) throw std::invalid_argument("steps must be >= 0 and eval batches >= 1");
}

double gaussian_pair_mi(double rho, int dim) { return -0.5 * dim * std::log1p(-rho * rho); }

void gaussian_pairs(double rho, int dim, Index batch, std::mt19937_64& rng, Matrix& x, Matrix& y) {
  x = standard_normal(batch, dim, rng);
  y = rho * x + std::sqrt(1.0 - rho * rho) * standard_normal(batch, dim, rng);
}

bool MiSelftestResult::all_pass() const {
  for (const auto& row : rows)
    if (!row.pass) return false;
  return true;
}

std::string MiSelftestResult::to_text() const {
  std::ostringstream out;
  out << std::fixed << std::setprecision(4) << "truth " << truth << " nats\n";
  for (const auto& row : rows) {
    out << std::left << std::setw(8) << row.estimator << std::right << std::setw(9) << row.estimate << "  band ["
        << row.lower << ", ";
    if (std::isinf(row.upper))
      out << "inf";
    else
      out << row.upper;
    out << "]  " << (row.pass ? "PASS" : "FAIL") << '\n';
  }
  return out.str();
}

MiSelftestResult mi_selftest(const MiSelftestConfig& config) {
  config.validate();
  MiSelftestResult result;
  result.truth = gaussian_pair_mi(config.rho, config.dim);
  const double scale = result.truth / kReferenceTruth;
  auto add = [&](std::string name, double estimate, double lower, double upper) {
    SelftestRow row{std::move(name), estimate, lower, upper, false};
    row.pass = std::isfinite(estimate) && estimate >= lower && estimate <= upper;
    result.rows.push_back(row);
  };
  const double inf = std::numeric_limits<double>::infinity();
  add("infonce", train_lower_bound(LowerBound::infonce, config, "selftest.infonce"), kInfonceBand[0] * scale,
      kInfonceBand[1] * scale);
  add("nwj", train_lower_bound(LowerBound::nwj, config, "selftest.nwj"), kNwjBand[0] * scale, kNwjBand[1] * scale);
  add("l1out", l1out_estimate(config), kUpperBoundFloor * scale, inf);
  add("vub", vub_estimate(config), kUpperBoundFloor * scale, inf);
  return result;
}

}  // namespace cpic
