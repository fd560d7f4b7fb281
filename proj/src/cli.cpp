#include "cpic/cli.hpp"

#include "cpic/artifact.hpp"
#include "cpic/evalkit.hpp"
#include "cpic/lorenz.hpp"
#include "cpic/selftest.hpp"
#include "cpic/series.hpp"
#include "cpic/sweep.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <thread>

namespace cpic::cli {

namespace {

using nlohmann::json;

class UsageError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << text;
}

json matrix_json(const Matrix& m) {
  json out = json::array();
  for (Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    out.push_back(row);
  }
  return out;
}

std::vector<std::string> numbered(const std::string& stem, Index count) {
  std::vector<std::string> names;
  for (Index i = 1; i <= count; ++i) names.push_back(stem + std::to_string(i));
  return names;
}

struct SimulateArgs {
  LorenzParams params;
  int embed_dim = 30;
  double snr = 0.1;
  std::uint64_t seed = 0;
  std::string out, latents_out, sidecar;
};

int simulate(const SimulateArgs& a, std::ostream& out) {
  const LorenzBenchmark bench = make_lorenz_benchmark(a.params, a.embed_dim, a.snr, a.seed);
  save_matrix_csv(bench.noisy.series.data, a.out, numbered("x", a.embed_dim));
  save_matrix_csv(bench.latents.data, a.latents_out, {"f1", "f2", "f3"});
  if (!a.sidecar.empty()) {
    json side{{"seed", a.seed},
              {"snr", a.snr},
              {"achieved_snr", bench.noisy.achieved_snr},
              {"dt", a.params.dt},
              {"steps", a.params.steps},
              {"burn_in", a.params.burn_in},
              {"embed_dim", a.embed_dim},
              {"embedding", matrix_json(bench.lifted.embedding)},
              {"noise_eigenvalues", std::vector<double>(bench.noisy.noise_eigenvalues.data(),
                                                        bench.noisy.noise_eigenvalues.data() +
                                                            bench.noisy.noise_eigenvalues.size())}};
    write_text(a.sidecar, side.dump(2) + "\n");
  }
  out << "wrote " << bench.noisy.series.length() << " x " << a.embed_dim << " observations to " << a.out
      << " (snr " << bench.noisy.achieved_snr << ")\n";
  return 0;
}

struct TrainArgs {
  std::string data, out, report;
  int latent_dim = 3;
  int window = 4;
  std::optional<double> beta;
  std::string loss = "multi";
  std::string encoder = "stochastic";
  std::optional<std::string> pi, compression, critic, tuba_form, preprocess;
  std::optional<int> steps, batch;
  std::optional<double> lr;
  std::uint64_t seed = 0;
  bool orthonormalize = false;
  bool fixed_marginal = false;
};

CpicConfig train_config(const TrainArgs& a) {
  CpicConfig c = CpicConfig::for_family(parse_loss_family(a.loss), parse_encoder_mode(a.encoder));
  c.latent_dim = a.latent_dim;
  c.window = a.window;
  if (a.beta) c.beta = *a.beta;
  if (a.pi) c.pi = parse_pi_estimator(*a.pi);
  if (a.compression) c.compression = parse_compression(*a.compression);
  if (a.critic) c.critic = parse_critic_kind(*a.critic);
  if (a.tuba_form) c.tuba_form = parse_tuba_form(*a.tuba_form);
  if (a.preprocess) c.preprocess = parse_preprocess(*a.preprocess);
  if (a.steps) c.steps = *a.steps;
  if (a.batch) c.batch = *a.batch;
  if (a.lr) c.lr = *a.lr;
  c.seed = a.seed;
  c.orthonormalize = a.orthonormalize;
  c.learnable_marginal = !a.fixed_marginal;
  c.validate();
  return c;
}

int train_command(const TrainArgs& a, std::ostream& out) {
  const CpicConfig config = train_config(a);
  const Series series = load_series(a.data);
  const TrainReport report = train(config, series);
  save_model(make_artifact(report), a.out);
  if (!a.report.empty()) write_text(a.report, serialize_report(report));
  out << std::setprecision(6) << "trained " << report.loss.size() << " steps in " << report.wall_seconds
      << " s; final loss " << (report.loss.empty() ? 0.0 : report.loss.back()) << ", compression "
      << (report.compression.empty() ? 0.0 : report.compression.back()) << ", pi "
      << (report.pi.empty() ? 0.0 : report.pi.back()) << "; model written to " << a.out << '\n';
  return 0;
}

int project_command(const std::string& model_path, const std::string& data, const std::string& out_path,
                    std::ostream& out) {
  const ModelArtifact artifact = load_model(model_path);
  const Series series = load_series(data);
  const Matrix latents = artifact.model.project(series.data);
  save_matrix_csv(latents, out_path, numbered("y", latents.cols()));
  out << "wrote " << latents.rows() << " x " << latents.cols() << " latents to " << out_path << '\n';
  return 0;
}

int eval_align_command(const std::string& latents, const std::string& truth, const std::string& errors_out,
                       std::ostream& out) {
  const AlignmentResult r = align_r2(load_series(latents).data, load_series(truth).data);
  out << std::fixed << std::setprecision(6) << "r2 " << r.r2 << "\nr2_mean " << r.r2_mean << '\n';
  for (Index d = 0; d < r.r2_per_dim.size(); ++d) out << "r2_dim" << d + 1 << ' ' << r.r2_per_dim(d) << '\n';
  if (!errors_out.empty()) {
    Matrix table(r.errors.size(), 2);
    for (Index t = 0; t < r.errors.size(); ++t) table.row(t) << static_cast<double>(t), r.errors(t);
    save_matrix_csv(table, errors_out, {"t", "error"});
  }
  return 0;
}

int forecast_command(ForecastTask task, const std::string& latents, const std::string& targets, std::ostream& out) {
  task.latents = load_series(latents).data;
  task.targets = load_series(targets).data;
  const ForecastResult r = forecast_r2(task);
  out << std::fixed << std::setprecision(6);
  for (std::size_t f = 0; f < r.fold_r2.size(); ++f) out << "fold" << f + 1 << ' ' << r.fold_r2[f] << '\n';
  out << "mean_r2 " << r.mean_r2 << '\n';
  return 0;
}

int selftest_command(const MiSelftestConfig& config, std::ostream& out) {
  try {
    config.validate();
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  const MiSelftestResult r = mi_selftest(config);
  out << r.to_text();
  return r.all_pass() ? 0 : 1;
}

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> items;
  std::stringstream in(text);
  std::string item;
  while (std::getline(in, item, ','))
    if (!item.empty()) items.push_back(item);
  return items;
}

struct SweepArgs {
  SweepOptions options;
  std::string methods;
  std::string out;
  std::optional<double> beta, lr;
  std::optional<int> steps, batch;
};

int sweep_command(SweepArgs a, std::ostream& out) {
  if (!a.methods.empty()) a.options.methods = split_list(a.methods);
  if (a.options.methods.empty()) throw UsageError("--methods must name at least one method");
  a.options.overrides.beta = a.beta;
  a.options.overrides.lr = a.lr;
  a.options.overrides.steps = a.steps;
  a.options.overrides.batch = a.batch;
  if (a.options.threads == 0) a.options.threads = std::max(1u, std::thread::hardware_concurrency());
  for (const auto& m : a.options.methods)
    if (is_learned_method(m)) method_config(m, a.options.overrides);

  const auto runs = sweep_lorenz(a.options, [&](const RunRecord& r) {
    out << "  " << std::left << std::setw(10) << snr_label(r.snr) << std::setw(22) << r.method << "seed " << r.seed
        << "  r2 " << std::fixed << std::setprecision(4) << r.r2 << '\n'
        << std::flush;
  });
  const SweepTable table = sweep_report(runs, a.options.methods);
  out << table.to_text();

  if (!a.out.empty()) {
    json runs_json = json::array();
    for (const auto& r : runs) {
      runs_json.push_back(json{{"method", r.method},
                               {"snr", r.snr},
                               {"snr_label", snr_label(r.snr)},
                               {"seed", r.seed},
                               {"r2", r.r2},
                               {"r2_mean", r.r2_mean}});
    }
    json rows = json::array();
    for (const auto& row : table.rows) {
      rows.push_back(json{{"method", row.method},
                          {"snr", row.snr},
                          {"snr_label", snr_label(row.snr)},
                          {"runs", row.runs},
                          {"median", row.median},
                          {"mean", row.mean},
                          {"std", row.stddev},
                          {"max", row.max}});
    }
    json report{{"benchmark", table.benchmark},
                {"levels", a.options.levels},
                {"seeds", a.options.seeds},
                {"methods", table.methods},
                {"runs", runs_json},
                {"table", rows}};
    write_text(a.out, report.dump(2) + "\n");
  }
  return 0;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Compressed predictive information coding: training and evaluation tools", "cpic"};
  app.require_subcommand(1);

  SimulateArgs sim;
  auto* simulate_cmd = app.add_subcommand("simulate-lorenz", "Simulate the noisy lifted Lorenz benchmark");
  simulate_cmd->add_option("--steps", sim.params.steps, "Integration steps including burn-in")->capture_default_str();
  simulate_cmd->add_option("--dt", sim.params.dt, "RK4 step size")->capture_default_str();
  simulate_cmd->add_option("--burn-in", sim.params.burn_in, "Steps discarded before recording")->capture_default_str();
  simulate_cmd->add_option("--embed-dim", sim.embed_dim, "Observation dimension")->capture_default_str();
  simulate_cmd->add_option("--snr", sim.snr, "Signal-to-noise ratio")->capture_default_str();
  simulate_cmd->add_option("--seed", sim.seed, "Seed for embedding and noise")->capture_default_str();
  simulate_cmd->add_option("--out", sim.out, "Observation CSV")->required();
  simulate_cmd->add_option("--latents-out", sim.latents_out, "Ground-truth latent CSV")->required();
  simulate_cmd->add_option("--sidecar", sim.sidecar, "JSON with seed, embedding and noise spectrum");

  TrainArgs tr;
  auto* train_cmd = app.add_subcommand("train", "Fit a CPIC encoder to a CSV series");
  train_cmd->add_option("--data", tr.data, "Input CSV (rows are time steps)")->required()->check(CLI::ExistingFile);
  train_cmd->add_option("--latent-dim", tr.latent_dim, "Latent dimension")->capture_default_str();
  train_cmd->add_option("--window", tr.window, "Window length T")->capture_default_str();
  train_cmd->add_option("--beta", tr.beta, "Compression trade-off weight");
  train_cmd->add_option("--loss", tr.loss, "uni|multi")->capture_default_str();
  train_cmd->add_option("--pi", tr.pi, "infonce|nwj|mine|tuba|lba|gaussian");
  train_cmd->add_option("--compression", tr.compression, "vub|l1out|none");
  train_cmd->add_option("--encoder", tr.encoder, "stochastic|deterministic")->capture_default_str();
  train_cmd->add_option("--critic", tr.critic, "separable|joint");
  train_cmd->add_option("--tuba-form", tr.tuba_form, "standard|printed");
  train_cmd->add_option("--preprocess", tr.preprocess, "center|standardize|whiten");
  train_cmd->add_flag("--orthonormalize", tr.orthonormalize, "QR-retract U after every step");
  train_cmd->add_flag("--fixed-marginal", tr.fixed_marginal, "Keep the VUB marginal at N(0, I)");
  train_cmd->add_option("--steps", tr.steps, "Optimizer steps");
  train_cmd->add_option("--batch", tr.batch, "Window pairs per step");
  train_cmd->add_option("--lr", tr.lr, "Adam learning rate");
  train_cmd->add_option("--seed", tr.seed, "Seed")->capture_default_str();
  train_cmd->add_option("--out", tr.out, "Model JSON")->required();
  train_cmd->add_option("--report", tr.report, "Training report JSON");

  std::string model_path, project_data, project_out;
  auto* project_cmd = app.add_subcommand("project", "Mean-path latents of a trained model");
  project_cmd->add_option("--model", model_path, "Model JSON")->required()->check(CLI::ExistingFile);
  project_cmd->add_option("--data", project_data, "Input CSV")->required()->check(CLI::ExistingFile);
  project_cmd->add_option("--out", project_out, "Latent CSV")->required();

  std::string align_latents, align_truth, errors_out;
  auto* align_cmd = app.add_subcommand("eval-align", "R^2 after the optimal affine map to ground truth");
  align_cmd->add_option("--latents", align_latents, "Inferred latent CSV")->required()->check(CLI::ExistingFile);
  align_cmd->add_option("--truth", align_truth, "Ground-truth CSV")->required()->check(CLI::ExistingFile);
  align_cmd->add_option("--errors-out", errors_out, "Pointwise error CSV (t,error)");

  ForecastTask task;
  std::string fc_latents, fc_targets;
  auto* forecast_cmd = app.add_subcommand("forecast", "Cross-validated linear forecast from latent windows");
  forecast_cmd->add_option("--latents", fc_latents, "Latent CSV")->required()->check(CLI::ExistingFile);
  forecast_cmd->add_option("--targets", fc_targets, "Target CSV")->required()->check(CLI::ExistingFile);
  forecast_cmd->add_option("--lag", task.lag, "Steps ahead")->capture_default_str();
  forecast_cmd->add_option("--window", task.window, "Latent steps per feature vector")->capture_default_str();
  forecast_cmd->add_option("--folds", task.folds, "Contiguous folds")->capture_default_str();

  MiSelftestConfig st;
  auto* selftest_cmd = app.add_subcommand("mi-selftest", "Estimators against a Gaussian pair with known MI");
  selftest_cmd->add_option("--rho", st.rho, "Correlation")->capture_default_str();
  selftest_cmd->add_option("--dim", st.dim, "Independent pairs")->capture_default_str();
  selftest_cmd->add_option("--batch", st.batch, "Batch size")->capture_default_str();
  selftest_cmd->add_option("--steps", st.steps, "Training steps")->capture_default_str();
  selftest_cmd->add_option("--seed", st.seed, "Seed")->capture_default_str();

  SweepArgs sw;
  auto* sweep_cmd = app.add_subcommand("sweep-lorenz", "Alignment R^2 over the SNR grid");
  sweep_cmd->add_option("--levels", sw.options.levels, "SNR levels in [1e-3, 1e-1]")->capture_default_str();
  sweep_cmd->add_option("--seeds", sw.options.seeds, "Seeds per level")->capture_default_str();
  sweep_cmd->add_option("--methods", sw.methods,
                        "Comma-separated: pca, dca, <stochastic|deterministic>-<nec|nwj|mine|tuba>");
  sweep_cmd->add_option("--beta", sw.beta, "Override beta");
  sweep_cmd->add_option("--steps", sw.steps, "Override steps");
  sweep_cmd->add_option("--batch", sw.batch, "Override batch size");
  sweep_cmd->add_option("--lr", sw.lr, "Override learning rate");
  sweep_cmd->add_option("--threads", sw.options.threads, "Worker threads (0 = all cores)")->capture_default_str();
  sweep_cmd->add_option("--out", sw.out, "Report JSON");

  try {
    app.parse(std::vector<std::string>(args.rbegin(), args.rend()));
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*simulate_cmd) return simulate(sim, out);
    if (*train_cmd) return train_command(tr, out);
    if (*project_cmd) return project_command(model_path, project_data, project_out, out);
    if (*align_cmd) return eval_align_command(align_latents, align_truth, errors_out, out);
    if (*forecast_cmd) return forecast_command(task, fc_latents, fc_targets, out);
    if (*selftest_cmd) return selftest_command(st, out);
    if (*sweep_cmd) return sweep_command(sw, out);
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  } catch (const UsageError& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
  return 2;
}

int run(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return run(args, std::cout, std::cerr);
}

}  // namespace cpic::cli
