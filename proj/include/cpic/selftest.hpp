#pragma once

// Known-MI check for the estimators: Gaussian pairs x ~ N(0, I),
// y = rho x + sqrt(1 - rho^2) eps, with I(x; y) = -dim/2 ln(1 - rho^2).

#include "cpic/ndmath.hpp"

#include <cstdint>
#include <limits>
#include <string>
#include <vector>

namespace cpic {

struct MiSelftestConfig {
  double rho = 0.5;
  int dim = 1;
  int batch = 128;
  int steps = 2000;
  double lr = 5e-3;
  int eval_batches = 200;
  std::uint64_t seed = 0;

  void validate() const;
};

struct SelftestRow {
  std::string estimator;
  double estimate = 0.0;
  double lower = 0.0;
  double upper = std::numeric_limits<double>::infinity();
  bool pass = false;
};

struct MiSelftestResult {
  double truth = 0.0;
  std::vector<SelftestRow> rows;
  bool all_pass() const;
  std::string to_text() const;
};

double gaussian_pair_mi(double rho, int dim);

/// Draws `batch` pairs; returns x and y as batch x dim matrices.
void gaussian_pairs(double rho, int dim, Index batch, std::mt19937_64& rng, Matrix& x, Matrix& y);

/// Trains InfoNCE and NWJ critics, evaluates batch-mean L1Out with the true
/// conditional, and fits a learnable marginal for VUB. Acceptance bands are
/// those for rho = 0.5 in one dimension, scaled by the true MI.
MiSelftestResult mi_selftest(const MiSelftestConfig& config);

}  // namespace cpic
