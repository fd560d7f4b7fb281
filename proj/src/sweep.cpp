#include "cpic/sweep.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <mutex>
#include <thread>

namespace cpic {

namespace {

constexpr int kLatentDim = 3;
constexpr int kWindow = 4;

}  // namespace

const std::vector<std::string>& default_sweep_methods() {
  static const std::vector<std::string> methods{"dca",
                                                "deterministic-nwj",
                                                "deterministic-mine",
                                                "deterministic-tuba",
                                                "deterministic-nec",
                                                "stochastic-nwj",
                                                "stochastic-mine",
                                                "stochastic-tuba",
                                                "stochastic-nec",
                                                "pca"};
  return methods;
}

bool is_learned_method(const std::string& method) { return method != "pca"; }

CpicConfig method_config(const std::string& method, const TrainOverrides& overrides) {
  CpicConfig c;
  if (method == "pca") {
    throw ConfigError("pca is not a CPIC configuration");
  } else if (method == "dca") {
    c = CpicConfig::for_family(LossFamily::multi, EncoderMode::deterministic);
    c.pi = PiEstimator::gaussian;
    c.lr = 1e-2;
  } else {
    const auto dash = method.find('-');
    if (dash == std::string::npos) throw ConfigError("unknown method '" + method + "'");
    const EncoderMode mode = parse_encoder_mode(method.substr(0, dash));
    const std::string estimator = method.substr(dash + 1);
    if (estimator == "nec") {
      c = CpicConfig::for_family(LossFamily::multi, mode);
    } else {
      c = CpicConfig::for_family(LossFamily::uni, mode);
      c.pi = parse_pi_estimator(estimator);
      if (c.pi != PiEstimator::nwj && c.pi != PiEstimator::mine && c.pi != PiEstimator::tuba)
        throw ConfigError("unknown method '" + method + "' (estimator must be nec, nwj, mine or tuba)");
    }
  }
  c.latent_dim = kLatentDim;
  c.window = kWindow;
  if (overrides.beta) c.beta = *overrides.beta;
  if (overrides.steps) c.steps = *overrides.steps;
  if (overrides.batch) c.batch = *overrides.batch;
  if (overrides.lr) c.lr = *overrides.lr;
  if (overrides.preprocess) c.preprocess = *overrides.preprocess;
  c.validate();
  return c;
}

RunRecord run_lorenz_method(const std::string& method, const LorenzBenchmark& bench, std::uint64_t seed,
                            const TrainOverrides& overrides, AlignmentResult* alignment) {
  Matrix latents;
  if (method == "pca") {
    latents = pca_project(bench.noisy.series.data, kLatentDim).scores;
  } else {
    CpicConfig config = method_config(method, overrides);
    config.seed = seed;
    const TrainReport report = train(config, bench.noisy.series);
    latents = report.model.project(bench.noisy.series.data);
  }
  AlignmentResult aligned = align_r2(latents, bench.latents.data);
  RunRecord record{"lorenz", method, bench.snr, seed, aligned.r2, aligned.r2_mean};
  if (alignment) *alignment = std::move(aligned);
  return record;
}

std::vector<RunRecord> sweep_lorenz(const SweepOptions& options, const std::function<void(const RunRecord&)>& on_run) {
  if (options.seeds < 1) throw std::invalid_argument("sweep needs at least one seed");
  for (const auto& m : options.methods)
    if (is_learned_method(m)) method_config(m, options.overrides);
  const std::vector<double> grid = snr_grid(options.levels);

  struct Job {
    double snr;
    std::size_t method;
    int seed;
  };
  std::vector<Job> jobs;
  for (double snr : grid)
    for (std::size_t m = 0; m < options.methods.size(); ++m)
      for (int s = 0; s < options.seeds; ++s) jobs.push_back({snr, m, s});

  std::vector<RunRecord> results(jobs.size());
  std::atomic<std::size_t> next{0};
  std::mutex report_mutex;
  std::exception_ptr failure;
  auto worker = [&] {
    for (std::size_t i = next++; i < jobs.size(); i = next++) {
      try {
        const Job& job = jobs[i];
        const auto bench = make_lorenz_benchmark(options.lorenz, options.embed_dim, job.snr,
                                                 static_cast<std::uint64_t>(job.seed));
        results[i] = run_lorenz_method(options.methods[job.method], bench, static_cast<std::uint64_t>(job.seed),
                                       options.overrides);
        std::lock_guard lock(report_mutex);
        if (on_run) on_run(results[i]);
      } catch (...) {
        std::lock_guard lock(report_mutex);
        if (!failure) failure = std::current_exception();
        next = jobs.size();
      }
    }
  };
  const unsigned threads = std::max(1u, std::min<unsigned>(options.threads, static_cast<unsigned>(jobs.size())));
  std::vector<std::thread> pool;
  for (unsigned t = 1; t < threads; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
  return results;
}

}  // namespace cpic
