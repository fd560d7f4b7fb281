#pragma once

#include "cpic/ndmath.hpp"

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace cpic {

struct AlignmentResult {
  Matrix map;          // (D + 1) x M; last row is the intercept
  Vector r2_per_dim;   // one entry per truth dimension
  double r2 = 0.0;     // 1 - SSE_total / SST_total (variance-weighted)
  double r2_mean = 0.0;  // unweighted mean of r2_per_dim
  Vector errors;       // pointwise Euclidean distance after alignment
};

/// Ordinary least squares with intercept from inferred latents to ground truth.
/// Throws std::invalid_argument for mismatched lengths or zero-variance truth.
AlignmentResult align_r2(const Matrix& inferred, const Matrix& truth);

/// Coefficients (features + 1) x outputs; the last row is the intercept.
/// Normal equations with kPsdJitter on the diagonal.
Matrix fit_ols(const Matrix& features, const Matrix& targets);
Matrix predict_ols(const Matrix& coef, const Matrix& features);
/// 1 - SSE / SST summed over all outputs, SST about the column means of `truth`.
double r2_score(const Matrix& truth, const Matrix& predicted);

struct PcaResult {
  Matrix components;  // N x D, columns ordered by decreasing variance
  Vector variances;
  Vector mean;
  Matrix scores;      // L x D
};

PcaResult pca_project(const Matrix& data, int dim);

struct ForecastTask {
  Matrix latents;
  Matrix targets;
  int lag = 5;
  int window = 3;
  int folds = 5;
};

struct ForecastResult {
  std::vector<double> fold_r2;
  double mean_r2 = 0.0;
  Index samples = 0;
};

/// Features at t are latents[t-window+1..t] flattened; the target is targets[t+lag].
/// Contiguous folds; OLS fitted on the other folds and scored on the held-out one.
ForecastResult forecast_r2(const ForecastTask& task);

/// Builds the (features, targets) design used by forecast_r2.
void forecast_design(const ForecastTask& task, Matrix& features, Matrix& targets);

struct RunRecord {
  std::string benchmark;
  std::string method;
  double snr = 0.0;
  std::uint64_t seed = 0;
  double r2 = 0.0;
  double r2_mean = 0.0;
};

struct SweepRow {
  std::string method;
  double snr = 0.0;
  std::size_t runs = 0;
  double median = 0.0;
  double mean = 0.0;
  double stddev = 0.0;  // population
  double max = 0.0;
};

struct SweepTable {
  std::string benchmark;
  std::vector<std::string> methods;
  std::vector<SweepRow> rows;  // ascending SNR, methods in declared order

  const SweepRow* find(const std::string& method, double snr) const;
  std::string to_text() const;
};

/// Aggregates R^2 over seeds per (method, SNR). `method_order` fixes the method
/// order; methods missing from it follow in first-seen order.
/// Throws std::invalid_argument for mixed benchmark ids or an empty input.
SweepTable sweep_report(std::span<const RunRecord> runs, const std::vector<std::string>& method_order = {});

double median(std::vector<double> values);

}  // namespace cpic
