#pragma once

// Shared fixtures for the unit and acceptance tests.

#include "cpic/objective.hpp"

#include <string>
#include <vector>

namespace cpic::testing {

/// Every estimator pairing the two loss families accept, both critic kinds and
/// both TUBA forms, with small networks.
inline std::vector<CpicConfig> all_loss_variants() {
  std::vector<CpicConfig> out;
  auto add = [&](LossFamily family, EncoderMode mode, PiEstimator pi, Compression comp,
                 CriticKind critic = CriticKind::separable, TubaForm form = TubaForm::standard) {
    CpicConfig c = CpicConfig::for_family(family, mode);
    c.latent_dim = 2;
    c.window = 2;
    c.beta = 0.7;
    c.pi = pi;
    c.compression = comp;
    c.critic = critic;
    c.tuba_form = form;
    c.batch = 8;
    out.push_back(c);
  };
  for (auto critic : {CriticKind::separable, CriticKind::joint}) {
    add(LossFamily::multi, EncoderMode::stochastic, PiEstimator::infonce, Compression::l1out, critic);
    add(LossFamily::multi, EncoderMode::stochastic, PiEstimator::infonce, Compression::vub, critic);
    add(LossFamily::multi, EncoderMode::deterministic, PiEstimator::infonce, Compression::none, critic);
    for (auto pi : {PiEstimator::nwj, PiEstimator::mine, PiEstimator::tuba}) {
      for (auto form : {TubaForm::standard, TubaForm::printed}) {
        add(LossFamily::uni, EncoderMode::stochastic, pi, Compression::vub, critic, form);
        add(LossFamily::uni, EncoderMode::deterministic, pi, Compression::none, critic, form);
      }
    }
  }
  add(LossFamily::uni, EncoderMode::stochastic, PiEstimator::lba, Compression::vub);
  add(LossFamily::uni, EncoderMode::stochastic, PiEstimator::nwj, Compression::l1out);
  add(LossFamily::multi, EncoderMode::stochastic, PiEstimator::lba, Compression::l1out);
  add(LossFamily::multi, EncoderMode::deterministic, PiEstimator::lba, Compression::none);
  return out;
}

inline std::string describe(const CpicConfig& c) {
  return to_string(c.loss) + "/" + to_string(c.encoder) + "/" + to_string(c.pi) + "/" + to_string(c.compression) +
         "/" + to_string(c.critic) + "/" + to_string(c.tuba_form);
}

/// Finite-difference check of evaluate_loss on one fixed 8-sample batch with fixed noise.
inline GradCheckReport check_loss_gradient(const CpicConfig& config, std::uint64_t seed) {
  const int n = 5;
  CpicModel model = build_model(config, n);
  auto rng = substream(seed, "gradcheck");
  const Matrix data = standard_normal(60, n, rng);
  const auto anchors = sample_anchors(data.rows(), config.window, config.batch, rng);
  const WindowPairBatch batch = window_pairs(data, config.window, anchors);
  const BatchNoise noise = draw_noise(model, config.batch, rng);
  LossFn loss = [&](ParamStore&, bool with_grad) { return evaluate_loss(model, batch, noise, with_grad).loss; };
  GradCheckOptions options;
  options.seed = seed;
  return grad_check(loss, model.store, options);
}

}  // namespace cpic::testing
