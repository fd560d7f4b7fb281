#pragma once

// Method grid over the noisy Lorenz benchmark.

#include "cpic/evalkit.hpp"
#include "cpic/lorenz.hpp"
#include "cpic/objective.hpp"

#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace cpic {

/// Training overrides applied to every learned method.
struct TrainOverrides {
  std::optional<double> beta;
  std::optional<int> steps;
  std::optional<int> batch;
  std::optional<double> lr;
  std::optional<Preprocess> preprocess;
};

/// Method names: "pca", "dca", or "<stochastic|deterministic>-<nec|nwj|mine|tuba>".
/// nec is the multi-sample family (InfoNCE); the rest are uni-sample TUBA variants.
/// Throws ConfigError for unknown names.
CpicConfig method_config(const std::string& method, const TrainOverrides& overrides = {});
bool is_learned_method(const std::string& method);

const std::vector<std::string>& default_sweep_methods();

/// Fits the method on bench.noisy and aligns its latents to bench.latents.
/// Training uses `seed`; latent dimension 3, window 4.
RunRecord run_lorenz_method(const std::string& method, const LorenzBenchmark& bench, std::uint64_t seed,
                            const TrainOverrides& overrides = {}, AlignmentResult* alignment = nullptr);

struct SweepOptions {
  int levels = 10;
  int seeds = 3;
  std::vector<std::string> methods = default_sweep_methods();
  LorenzParams lorenz;
  int embed_dim = 30;
  TrainOverrides overrides;
  unsigned threads = 1;
};

/// One run per (method, SNR level, seed); benchmark data for seed k is generated
/// with seed k. Results are ordered by (SNR, method, seed) regardless of threads.
std::vector<RunRecord> sweep_lorenz(const SweepOptions& options,
                                    const std::function<void(const RunRecord&)>& on_run = {});

}  // namespace cpic
