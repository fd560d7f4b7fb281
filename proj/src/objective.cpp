#include "cpic/objective.hpp"

#include <chrono>
#include <cmath>
#include <sstream>

namespace cpic {

namespace {

template <typename E>
struct Names {
  E value;
  std::string_view name;
};

constexpr Names<EncoderMode> kEncoderModes[] = {{EncoderMode::stochastic, "stochastic"},
                                                {EncoderMode::deterministic, "deterministic"}};
constexpr Names<LossFamily> kFamilies[] = {{LossFamily::uni, "uni"}, {LossFamily::multi, "multi"}};
constexpr Names<PiEstimator> kEstimators[] = {{PiEstimator::infonce, "infonce"}, {PiEstimator::nwj, "nwj"},
                                              {PiEstimator::mine, "mine"},       {PiEstimator::tuba, "tuba"},
                                              {PiEstimator::lba, "lba"},         {PiEstimator::gaussian, "gaussian"}};
constexpr Names<Compression> kCompressions[] = {
    {Compression::vub, "vub"}, {Compression::l1out, "l1out"}, {Compression::none, "none"}};
constexpr Names<CriticKind> kCritics[] = {{CriticKind::separable, "separable"}, {CriticKind::joint, "joint"}};
constexpr Names<TubaForm> kTubaForms[] = {{TubaForm::standard, "standard"}, {TubaForm::printed, "printed"}};
constexpr Names<Preprocess> kPreprocess[] = {
    {Preprocess::center, "center"}, {Preprocess::standardize, "standardize"}, {Preprocess::whiten, "whiten"}};

template <typename E, std::size_t N>
std::string name_of(const Names<E> (&table)[N], E v) {
  for (const auto& entry : table)
    if (entry.value == v) return std::string(entry.name);
  throw std::logic_error("unnamed enum value");
}

template <typename E, std::size_t N>
E parse_name(const Names<E> (&table)[N], std::string_view s, std::string_view what) {
  for (const auto& entry : table)
    if (entry.name == s) return entry.value;
  std::string options;
  for (const auto& entry : table) options += (options.empty() ? "" : "|") + std::string(entry.name);
  throw ConfigError("unknown " + std::string(what) + " '" + std::string(s) + "' (expected " + options + ")");
}

BaselineKind baseline_for(PiEstimator pi) {
  switch (pi) {
    case PiEstimator::mine:
      return BaselineKind::constant_one;
    case PiEstimator::nwj:
      return BaselineKind::constant_e;
    case PiEstimator::tuba:
      return BaselineKind::learned_network;
    default:
      throw std::logic_error("estimator has no baseline");
  }
}

bool uses_tuba(PiEstimator pi) {
  return pi == PiEstimator::nwj || pi == PiEstimator::mine || pi == PiEstimator::tuba;
}

void retract(Matrix& u) {
  Eigen::HouseholderQR<Matrix> qr(u);
  Matrix q = qr.householderQ() * Matrix::Identity(u.rows(), u.cols());
  // Fix column signs so the retraction is continuous.
  const Matrix r = qr.matrixQR().topRows(u.cols()).triangularView<Eigen::Upper>();
  for (Index c = 0; c < u.cols(); ++c)
    if (r(c, c) < 0.0) q.col(c) *= -1.0;
  u = q;
}

// Maps centered rows to unit scale. center and standardize keep channel ratios
// under one global RMS divisor; whiten is the symmetric inverse square root of
// the covariance, with null directions dropped.
Matrix input_transform(const Series& series, Preprocess mode) {
  const Index n = series.channels();
  if (mode == Preprocess::whiten) {
    const Matrix centered = series.data.rowwise() - series.data.colwise().mean();
    const Matrix cov = centered.transpose() * centered / static_cast<double>(series.length());
    Eigen::SelfAdjointEigenSolver<Matrix> eig(cov);
    const double top = eig.eigenvalues().maxCoeff();
    if (!(top > 0.0)) return Matrix::Identity(n, n);
    Vector inv_root(n);
    for (Index k = 0; k < n; ++k) {
      const double v = eig.eigenvalues()(k);
      inv_root(k) = v > 1e-12 * top ? 1.0 / std::sqrt(v) : 0.0;
    }
    return eig.eigenvectors() * inv_root.asDiagonal() * eig.eigenvectors().transpose();
  }
  const Preprocessed pre = mode == Preprocess::standardize ? standardize(series) : center(series);
  const double rms = std::sqrt(pre.series.data.squaredNorm() / static_cast<double>(pre.series.data.size()));
  const double global = rms > 0.0 ? rms : 1.0;
  return (pre.scale * global).cwiseInverse().asDiagonal();
}

}  // namespace

std::string to_string(EncoderMode v) { return name_of(kEncoderModes, v); }
std::string to_string(LossFamily v) { return name_of(kFamilies, v); }
std::string to_string(PiEstimator v) { return name_of(kEstimators, v); }
std::string to_string(Compression v) { return name_of(kCompressions, v); }
std::string to_string(CriticKind v) { return name_of(kCritics, v); }
std::string to_string(TubaForm v) { return name_of(kTubaForms, v); }
std::string to_string(Preprocess v) { return name_of(kPreprocess, v); }

EncoderMode parse_encoder_mode(std::string_view s) { return parse_name(kEncoderModes, s, "encoder mode"); }
LossFamily parse_loss_family(std::string_view s) { return parse_name(kFamilies, s, "loss family"); }
PiEstimator parse_pi_estimator(std::string_view s) { return parse_name(kEstimators, s, "pi estimator"); }
Compression parse_compression(std::string_view s) { return parse_name(kCompressions, s, "compression"); }
CriticKind parse_critic_kind(std::string_view s) { return parse_name(kCritics, s, "critic kind"); }
TubaForm parse_tuba_form(std::string_view s) { return parse_name(kTubaForms, s, "tuba form"); }
Preprocess parse_preprocess(std::string_view s) { return parse_name(kPreprocess, s, "preprocessing"); }

CpicConfig CpicConfig::for_family(LossFamily family, EncoderMode mode) {
  CpicConfig c;
  c.loss = family;
  c.encoder = mode;
  c.pi = family == LossFamily::multi ? PiEstimator::infonce : PiEstimator::nwj;
  c.compression = family == LossFamily::multi ? Compression::l1out : Compression::vub;
  if (mode == EncoderMode::deterministic) c.compression = Compression::none;
  return c;
}

void CpicConfig::validate() const {
  if (latent_dim < 1) throw ConfigError("latent dimension must be >= 1");
  if (window < 1) throw ConfigError("window must be >= 1");
  if (!(beta >= 0.0) || !std::isfinite(beta)) throw ConfigError("beta must be a finite value >= 0");
  if (batch < 2) throw ConfigError("batch size must be >= 2");
  if (steps < 0) throw ConfigError("steps must be >= 0");
  if (!(lr > 0.0)) throw ConfigError("learning rate must be positive");
  if (encoder == EncoderMode::deterministic && compression != Compression::none) {
    throw ConfigError("compression term constant for a deterministic encoder; use --compression none");
  }
  if (pi == PiEstimator::gaussian && encoder != EncoderMode::deterministic)
    throw ConfigError("the gaussian estimator requires --encoder deterministic");
}

Matrix CpicModel::prepare(const Matrix& raw) const {
  if (raw.cols() != input_dim) {
    throw std::invalid_argument("data has " + std::to_string(raw.cols()) + " channels, model expects " +
                                std::to_string(input_dim));
  }
  return (raw.rowwise() - input_mean.transpose()) * input_transform;
}

Matrix CpicModel::project(const Matrix& raw) const { return prepare(raw) * store.value(encoder.mean_map()); }

CpicModel build_model(const CpicConfig& config, int input_dim) {
  config.validate();
  CpicModel model;
  model.config = config;
  model.input_dim = input_dim;
  model.input_mean = Vector::Zero(input_dim);
  model.input_transform = Matrix::Identity(input_dim, input_dim);
  auto& store = model.store;
  model.encoder = Encoder(store, input_dim, config.latent_dim, config.encoder == EncoderMode::deterministic);
  const int code = config.window * config.latent_dim;
  if (config.pi == PiEstimator::infonce || uses_tuba(config.pi))
    model.critic = Critic(store, config.critic, code, code);
  if (uses_tuba(config.pi)) model.baseline = Baseline(store, baseline_for(config.pi), code);
  if (config.pi == PiEstimator::lba) model.decoder = GaussianDecoder(store, code, code);
  if (config.compression == Compression::vub) model.marginal = VariationalMarginal(store, code, config.learnable_marginal);

  const std::uint64_t seed = config.seed;
  model.encoder.initialize(store, seed);
  if (model.critic) model.critic->initialize(store, seed);
  if (model.baseline) model.baseline->initialize(store, seed);
  if (model.decoder) model.decoder->initialize(store, seed);
  if (model.marginal) model.marginal->initialize(store);
  if (config.orthonormalize) retract(store.value(model.encoder.mean_map()));
  return model;
}

BatchNoise draw_noise(const CpicModel& model, Index batch, std::mt19937_64& rng) {
  const Index code = static_cast<Index>(model.config.window) * model.config.latent_dim;
  if (model.encoder.deterministic()) return {};
  BatchNoise noise;
  noise.past = standard_normal(batch, code, rng);
  noise.future = standard_normal(batch, code, rng);
  return noise;
}

LossTerms evaluate_loss(CpicModel& model, const WindowPairBatch& batch, const BatchNoise& noise, bool with_grad) {
  const auto& config = model.config;
  if (config.pi == PiEstimator::gaussian)
    throw std::logic_error("the gaussian estimator is trained from lagged covariances, not batches");
  auto& store = model.store;
  const WindowCode past = model.encoder.encode(store, batch.past, noise.past);
  const WindowCode future = model.encoder.encode(store, batch.future, noise.future);
  const Index S = past.y.rows();
  const Index K = past.y.cols();

  LossTerms terms;
  Matrix d_past_y = Matrix::Zero(S, K);
  Matrix d_future_y = Matrix::Zero(S, K);
  Matrix d_future_mu = Matrix::Zero(S, K);
  Matrix d_future_sigma = Matrix::Zero(S, K);

  // Compression complexity on the (x(T), y(T)) pairs.
  switch (config.compression) {
    case Compression::none:
      break;
    case Compression::vub: {
      const VubBound b = vub(store, *model.marginal, future.mu, future.sigma, with_grad ? config.beta : 0.0);
      terms.compression = b.value;
      if (with_grad) {
        d_future_mu += b.d_mu;
        d_future_sigma += b.d_sigma;
      }
      break;
    }
    case Compression::l1out: {
      if (model.encoder.deterministic()) throw std::logic_error("L1Out undefined for deterministic encoder");
      const ConditionalDensity cd = conditional_log_density(future.y, future.mu, future.sigma);
      const DensityBound b = l1out(cd.log_density);
      terms.compression = b.value;
      terms.clamped = cd.clamped;
      if (with_grad) {
        conditional_log_density_backward(future.y, future.mu, future.sigma, config.beta * b.d_log_density,
                                          d_future_y, d_future_mu, d_future_sigma);
      }
      break;
    }
  }

  // Predictive information between past and future codes.
  if (config.pi == PiEstimator::lba) {
    const LbaBound b = lba(store, *model.decoder, past.y, future.y, with_grad ? -1.0 : 0.0);
    terms.pi = b.value;
    if (with_grad) {
      d_past_y += b.d_past;
      d_future_y += b.d_future;
    }
  } else {
    Critic::Tape tape;
    const Matrix scores = model.critic->scores(store, past.y, future.y, with_grad ? &tape : nullptr);
    Matrix d_scores;
    if (config.pi == PiEstimator::infonce) {
      const ScoreBound b = infonce(scores);
      terms.pi = b.value;
      d_scores = -b.d_scores;
    } else {
      Baseline::Tape btape;
      const Vector log_a = model.baseline->log_baseline(store, future.y, with_grad ? &btape : nullptr);
      const TubaBound b = tuba(scores, log_a, config.tuba_form);
      terms.pi = b.value;
      d_scores = -b.d_scores;
      if (with_grad) d_future_y += model.baseline->backward(store, btape, -b.d_log_baseline, future.y);
    }
    if (with_grad) model.critic->backward(store, tape, d_scores, &d_past_y, &d_future_y);
  }

  terms.loss = config.beta * terms.compression - terms.pi;
  if (with_grad) {
    model.encoder.backward(store, past, d_past_y, Matrix(), Matrix());
    model.encoder.backward(store, future, d_future_y, d_future_mu, d_future_sigma);
  }
  return terms;
}

LossTerms cpic_loss_multi(CpicModel& model, const WindowPairBatch& batch, std::mt19937_64& rng, bool with_grad) {
  if (model.config.loss != LossFamily::multi) throw ConfigError("model is not configured for the multi-sample loss");
  return evaluate_loss(model, batch, draw_noise(model, batch.past.rows(), rng), with_grad);
}

LossTerms cpic_loss_uni(CpicModel& model, const WindowPairBatch& batch, std::mt19937_64& rng, bool with_grad) {
  if (model.config.loss != LossFamily::uni) throw ConfigError("model is not configured for the uni-sample loss");
  return evaluate_loss(model, batch, draw_noise(model, batch.past.rows(), rng), with_grad);
}

double gaussian_objective(const Matrix& mean_map, const LaggedCovariance& cov, int window, Matrix* grad) {
  Matrix g;
  const double pi = gaussian_pi(cov, mean_map, window, grad ? &g : nullptr);
  if (grad) {
    if (grad->size() == 0) grad->setZero(g.rows(), g.cols());
    *grad -= g;
  }
  return -pi;
}

TrainReport train(const CpicConfig& config, const Series& series) {
  config.validate();
  const auto start = std::chrono::steady_clock::now();
  if (series.length() < 2 * config.window + 1) {
    throw std::invalid_argument("series of length " + std::to_string(series.length()) + " is too short for window " +
                                std::to_string(config.window));
  }

  TrainReport report;
  report.config = config;
  report.model = build_model(config, static_cast<int>(series.channels()));
  CpicModel& model = report.model;

  model.input_mean = series.data.colwise().mean().transpose();
  model.input_transform = input_transform(series, config.preprocess);
  const Matrix data = model.prepare(series.data);

  Adam adam(AdamConfig{config.lr});
  const ParamId u = model.encoder.mean_map();
  const std::size_t steps = static_cast<std::size_t>(config.steps);
  report.loss.reserve(steps);
  report.compression.reserve(steps);
  report.pi.reserve(steps);

  auto fail = [&](std::size_t step, const std::string& why) {
    std::ostringstream msg;
    msg << "training diverged at step " << step << ": " << why;
    if (!report.loss.empty()) {
      msg << " (last finite loss " << report.loss.back() << ", compression " << report.compression.back() << ", pi "
          << report.pi.back() << ")";
    }
    throw TrainingError(msg.str());
  };

  std::optional<LaggedCovariance> cov;
  if (config.pi == PiEstimator::gaussian) cov = lagged_covariance(data, 2 * config.window - 1);

  for (std::size_t step = 0; step < steps; ++step) {
    LossTerms terms;
    try {
      if (cov) {
        terms.pi = gaussian_pi(*cov, model.store.value(u), config.window, &model.store.grad(u));
        model.store.grad(u) *= -1.0;
        terms.loss = -terms.pi;
      } else {
        auto rng = substream(config.seed, static_cast<std::uint64_t>(step));
        const auto anchors = sample_anchors(data.rows(), config.window, config.batch, rng);
        const WindowPairBatch batch = window_pairs(data, config.window, anchors);
        const BatchNoise noise = draw_noise(model, config.batch, rng);
        terms = evaluate_loss(model, batch, noise, true);
      }
      if (!std::isfinite(terms.loss)) fail(step, "non-finite loss");
      adam.step(model.store);
    } catch (const TrainingError&) {
      throw;
    } catch (const std::runtime_error& e) {
      fail(step, e.what());
    }
    if (config.orthonormalize) retract(model.store.value(u));
    report.loss.push_back(terms.loss);
    report.compression.push_back(terms.compression);
    report.pi.push_back(terms.pi);
    report.clamp_events += terms.clamped;
  }
  report.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return report;
}

}  // namespace cpic
