#pragma once

#include "cpic/encoder.hpp"
#include "cpic/mibounds.hpp"
#include "cpic/ndmath.hpp"
#include "cpic/series.hpp"

#include <cstdint>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace cpic {

enum class EncoderMode { stochastic, deterministic };
enum class LossFamily { uni, multi };
enum class PiEstimator { infonce, nwj, mine, tuba, lba, gaussian };
enum class Compression { vub, l1out, none };
enum class Preprocess { center, standardize, whiten };

std::string to_string(EncoderMode v);
std::string to_string(LossFamily v);
std::string to_string(PiEstimator v);
std::string to_string(Compression v);
std::string to_string(CriticKind v);
std::string to_string(TubaForm v);
std::string to_string(Preprocess v);

EncoderMode parse_encoder_mode(std::string_view s);
LossFamily parse_loss_family(std::string_view s);
PiEstimator parse_pi_estimator(std::string_view s);
Compression parse_compression(std::string_view s);
CriticKind parse_critic_kind(std::string_view s);
TubaForm parse_tuba_form(std::string_view s);
Preprocess parse_preprocess(std::string_view s);

/// Invalid combination of configuration values.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Raised when training produces a non-finite loss.
class TrainingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct CpicConfig {
  int latent_dim = 3;
  int window = 4;
  double beta = 1e-3;
  EncoderMode encoder = EncoderMode::stochastic;
  LossFamily loss = LossFamily::multi;
  PiEstimator pi = PiEstimator::infonce;
  Compression compression = Compression::l1out;
  CriticKind critic = CriticKind::separable;
  TubaForm tuba_form = TubaForm::standard;
  bool learnable_marginal = true;
  bool orthonormalize = false;  // QR retraction of U after every step
  Preprocess preprocess = Preprocess::whiten;
  int batch = 64;
  int steps = 5000;
  double lr = 1e-3;
  std::uint64_t seed = 0;

  /// Defaults for a loss family: multi -> (l1out, infonce), uni -> (vub, nwj).
  /// Deterministic encoders get compression none.
  static CpicConfig for_family(LossFamily family, EncoderMode mode);

  /// Throws ConfigError. Deterministic encoders require compression none, the
  /// gaussian estimator requires a deterministic encoder.
  void validate() const;
};

/// Parameters and preprocessing of a CPIC model. The component handles index
/// into `store`, so copies are independent models.
struct CpicModel {
  CpicConfig config;
  int input_dim = 0;
  Vector input_mean;
  Matrix input_transform;  // N x N
  ParamStore store;
  Encoder encoder;
  std::optional<Critic> critic;
  std::optional<Baseline> baseline;
  std::optional<VariationalMarginal> marginal;
  std::optional<GaussianDecoder> decoder;

  /// (raw - mean) * transform, row-wise.
  Matrix prepare(const Matrix& raw) const;
  /// Mean-path latents U^T x_t for every row of a raw series (no sampling).
  Matrix project(const Matrix& raw) const;
};

/// Registers every component the configuration needs and initializes it from
/// the config seed. Preprocessing defaults to the identity.
CpicModel build_model(const CpicConfig& config, int input_dim);

struct LossTerms {
  double loss = 0.0;
  double compression = 0.0;
  double pi = 0.0;
  std::size_t clamped = 0;
};

struct BatchNoise {
  Matrix past;
  Matrix future;
};

BatchNoise draw_noise(const CpicModel& model, Index batch, std::mt19937_64& rng);

/// beta * compression - pi for one batch of prepared windows. With `with_grad`
/// set, gradients of the loss are accumulated into model.store.
LossTerms evaluate_loss(CpicModel& model, const WindowPairBatch& batch, const BatchNoise& noise, bool with_grad);

/// Multi-sample loss: beta * L1Out - InfoNCE (or the configured pair).
LossTerms cpic_loss_multi(CpicModel& model, const WindowPairBatch& batch, std::mt19937_64& rng, bool with_grad);
/// Uni-sample loss: beta * VUB - TUBA with the configured baseline.
LossTerms cpic_loss_uni(CpicModel& model, const WindowPairBatch& batch, std::mt19937_64& rng, bool with_grad);

/// -gaussian_pi; adds the gradient w.r.t. U into `grad` when given.
double gaussian_objective(const Matrix& mean_map, const LaggedCovariance& cov, int window, Matrix* grad = nullptr);

struct TrainReport {
  CpicConfig config;
  std::vector<double> loss;
  std::vector<double> compression;
  std::vector<double> pi;
  double wall_seconds = 0.0;
  std::size_t clamp_events = 0;
  CpicModel model;
};

/// Adam over every trainable parameter for config.steps steps. Deterministic
/// given config.seed. Throws TrainingError on a non-finite loss.
TrainReport train(const CpicConfig& config, const Series& series);

}  // namespace cpic
