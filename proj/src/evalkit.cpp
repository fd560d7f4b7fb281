#include "cpic/evalkit.hpp"

#include "cpic/lorenz.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace cpic {

namespace {

Matrix with_intercept(const Matrix& features) {
  Matrix out(features.rows(), features.cols() + 1);
  out.leftCols(features.cols()) = features;
  out.col(features.cols()).setOnes();
  return out;
}

}  // namespace

Matrix fit_ols(const Matrix& features, const Matrix& targets) {
  if (features.rows() != targets.rows()) throw std::invalid_argument("ols: feature and target lengths differ");
  const Matrix x = with_intercept(features);
  Matrix gram = x.transpose() * x;
  gram.diagonal().array() += kPsdJitter;
  return gram.ldlt().solve(x.transpose() * targets);
}

Matrix predict_ols(const Matrix& coef, const Matrix& features) { return with_intercept(features) * coef; }

double r2_score(const Matrix& truth, const Matrix& predicted) {
  const Matrix centered = truth.rowwise() - truth.colwise().mean();
  const double sst = centered.squaredNorm();
  if (!(sst > 0.0)) throw std::invalid_argument("r2: target has zero variance");
  return 1.0 - (truth - predicted).squaredNorm() / sst;
}

AlignmentResult align_r2(const Matrix& inferred, const Matrix& truth) {
  if (inferred.rows() != truth.rows()) {
    throw std::invalid_argument("alignment: inferred has " + std::to_string(inferred.rows()) + " rows, truth has " +
                                std::to_string(truth.rows()));
  }
  const Matrix centered = truth.rowwise() - truth.colwise().mean();
  const Vector sst = centered.colwise().squaredNorm().transpose();
  if ((sst.array() <= 0.0).any()) throw std::invalid_argument("alignment: ground truth has a zero-variance dimension");

  AlignmentResult out;
  out.map = fit_ols(inferred, truth);
  const Matrix residual = truth - predict_ols(out.map, inferred);
  const Vector sse = residual.colwise().squaredNorm().transpose();
  out.r2_per_dim = (1.0 - sse.array() / sst.array()).matrix();
  out.r2 = 1.0 - sse.sum() / sst.sum();
  out.r2_mean = out.r2_per_dim.mean();
  out.errors = residual.rowwise().norm();
  return out;
}

PcaResult pca_project(const Matrix& data, int dim) {
  if (dim < 1 || dim > data.cols()) throw std::invalid_argument("pca: dimension must be in [1, channels]");
  PcaResult out;
  out.mean = data.colwise().mean().transpose();
  const Matrix centered = data.rowwise() - out.mean.transpose();
  const Matrix cov = centered.transpose() * centered / static_cast<double>(data.rows());
  Eigen::SelfAdjointEigenSolver<Matrix> eig(cov);
  const Index n = data.cols();
  out.components.resize(n, dim);
  out.variances.resize(dim);
  for (int k = 0; k < dim; ++k) {
    out.components.col(k) = eig.eigenvectors().col(n - 1 - k);
    out.variances(k) = eig.eigenvalues()(n - 1 - k);
  }
  out.scores = centered * out.components;
  return out;
}

void forecast_design(const ForecastTask& task, Matrix& features, Matrix& targets) {
  if (task.latents.rows() != task.targets.rows()) throw std::invalid_argument("forecast: latents and targets differ in length");
  if (task.window < 1 || task.lag < 0) throw std::invalid_argument("forecast: window must be >= 1 and lag >= 0");
  const Index L = task.latents.rows();
  const Index D = task.latents.cols();
  const Index first = task.window - 1;
  const Index count = L - task.lag - first;
  if (count <= 0) throw std::invalid_argument("forecast: series too short for window and lag");
  features.resize(count, task.window * D);
  targets.resize(count, task.targets.cols());
  for (Index s = 0; s < count; ++s) {
    const Index t = first + s;
    for (int k = 0; k < task.window; ++k) features.block(s, k * D, 1, D) = task.latents.row(t - task.window + 1 + k);
    targets.row(s) = task.targets.row(t + task.lag);
  }
}

ForecastResult forecast_r2(const ForecastTask& task) {
  if (task.folds < 2) throw std::invalid_argument("forecast: need at least 2 folds");
  Matrix features, targets;
  forecast_design(task, features, targets);
  const Index n = features.rows();
  const Index per_fold = n / task.folds;
  const Index required = 10 * features.cols();
  if (per_fold < required) {
    throw std::invalid_argument("forecast: " + std::to_string(per_fold) + " samples per fold, need at least " +
                                std::to_string(required) + " (10 x feature dimension)");
  }
  ForecastResult out;
  out.samples = n;
  for (int f = 0; f < task.folds; ++f) {
    const Index begin = f * per_fold;
    const Index end = f + 1 == task.folds ? n : begin + per_fold;
    const Index test = end - begin;
    Matrix train_x(n - test, features.cols()), train_y(n - test, targets.cols());
    train_x << features.topRows(begin), features.bottomRows(n - end);
    train_y << targets.topRows(begin), targets.bottomRows(n - end);
    const Matrix coef = fit_ols(train_x, train_y);
    const Matrix prediction = predict_ols(coef, features.middleRows(begin, test));
    out.fold_r2.push_back(r2_score(targets.middleRows(begin, test), prediction));
  }
  out.mean_r2 = std::accumulate(out.fold_r2.begin(), out.fold_r2.end(), 0.0) / static_cast<double>(task.folds);
  return out;
}

double median(std::vector<double> values) {
  if (values.empty()) throw std::invalid_argument("median of empty input");
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  return n % 2 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

const SweepRow* SweepTable::find(const std::string& method, double snr) const {
  for (const auto& row : rows)
    if (row.method == method && row.snr == snr) return &row;
  return nullptr;
}

SweepTable sweep_report(std::span<const RunRecord> runs, const std::vector<std::string>& method_order) {
  if (runs.empty()) throw std::invalid_argument("sweep report needs at least one run");
  SweepTable table;
  table.benchmark = runs.front().benchmark;
  table.methods = method_order;
  std::vector<double> snrs;
  for (const auto& run : runs) {
    if (run.benchmark != table.benchmark) {
      throw std::invalid_argument("sweep report mixes benchmark ids '" + table.benchmark + "' and '" + run.benchmark +
                                  "'");
    }
    if (std::find(table.methods.begin(), table.methods.end(), run.method) == table.methods.end())
      table.methods.push_back(run.method);
    if (std::find(snrs.begin(), snrs.end(), run.snr) == snrs.end()) snrs.push_back(run.snr);
  }
  std::sort(snrs.begin(), snrs.end());
  for (double snr : snrs) {
    for (const auto& method : table.methods) {
      std::vector<double> values;
      for (const auto& run : runs)
        if (run.method == method && run.snr == snr) values.push_back(run.r2);
      if (values.empty()) continue;
      SweepRow row;
      row.method = method;
      row.snr = snr;
      row.runs = values.size();
      row.mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
      double var = 0.0;
      for (double v : values) var += (v - row.mean) * (v - row.mean);
      row.stddev = std::sqrt(var / static_cast<double>(values.size()));
      row.max = *std::max_element(values.begin(), values.end());
      row.median = median(values);
      table.rows.push_back(row);
    }
  }
  return table;
}

std::string SweepTable::to_text() const {
  std::ostringstream out;
  out << "benchmark: " << benchmark << '\n';
  out << std::left << std::setw(12) << "snr" << std::setw(28) << "method" << std::right << std::setw(6) << "runs"
      << std::setw(10) << "median" << std::setw(10) << "mean" << std::setw(10) << "std" << std::setw(10) << "max"
      << '\n';
  out << std::fixed;
  for (const auto& row : rows) {
    out << std::left << std::setw(12) << snr_label(row.snr) << std::setw(28) << row.method << std::right << std::setw(6)
        << row.runs << std::setprecision(4) << std::setw(10) << row.median << std::setw(10) << row.mean
        << std::setw(10) << row.stddev << std::setw(10) << row.max << '\n';
  }
  return out.str();
}

}  // namespace cpic
