#pragma once

#include "cpic/ndmath.hpp"

#include <filesystem>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace cpic {

/// L time steps x N channels.
struct Series {
  Matrix data;
  std::vector<std::string> channel_names;
  std::string step_label;

  Index length() const { return data.rows(); }
  Index channels() const { return data.cols(); }
};

/// Reads a comma-separated file (rows = time steps). Throws std::runtime_error
/// for unreadable files, ragged rows, non-numeric cells and fewer than 2 rows.
Series load_series(const std::filesystem::path& path, bool has_header);
/// Treats the first non-empty line as a header when any of its cells is not numeric.
Series load_series(const std::filesystem::path& path);
/// Writes the same format; a header row is written when channel names are present.
void save_series(const Series& series, const std::filesystem::path& path);
void save_matrix_csv(const Matrix& data, const std::filesystem::path& path,
                     const std::vector<std::string>& header = {});

struct Preprocessed {
  Series series;
  Vector mean;
  Vector scale;  // per-channel divisor; ones for center()
  std::vector<std::string> warnings;
};

/// Subtracts the column means.
Preprocessed center(const Series& series);
/// Centers and divides by the population standard deviation (denominator L).
/// Zero-variance channels are only centered and reported in `warnings`.
Preprocessed standardize(const Series& series);

/// S aligned windows. For anchor t the past row flattens x_{t-T+1..t} and the
/// future row x_{t+1..t+T}, time-major.
struct WindowPairBatch {
  Matrix past;
  Matrix future;
  std::vector<Index> anchors;
  int window = 0;
  Index channels = 0;
};

Index min_anchor(int window);
Index max_anchor(Index length, int window);

WindowPairBatch window_pairs(const Series& series, int window, std::span<const Index> anchors);
WindowPairBatch window_pairs(const Matrix& data, int window, std::span<const Index> anchors);

/// Uniform with replacement over the valid anchor range.
std::vector<Index> sample_anchors(Index length, int window, Index count, std::mt19937_64& rng);

/// Reshapes a (rows x T*N) block of flattened windows into (rows*T x N), one time step per row.
Matrix unflatten_steps(const Matrix& windows, Index channels);
/// Inverse of unflatten_steps.
Matrix flatten_steps(const Matrix& steps, int window);

struct LaggedCovariance {
  std::vector<Matrix> lags;  // C_0..C_K
  Index samples = 0;
  Vector mean;

  int max_lag() const { return static_cast<int>(lags.size()) - 1; }
};

/// C_d = 1/(L-d) sum_t (x_t - mu)(x_{t+d} - mu)^T for d = 0..K.
LaggedCovariance lagged_covariance(const Series& series, int max_lag);
LaggedCovariance lagged_covariance(const Matrix& data, int max_lag);

/// (W*N) square matrix with block (i, j) = C_{j-i}, and C_{i-j}^T below the diagonal.
Matrix block_toeplitz(std::span<const Matrix> lags, int window);
Matrix block_toeplitz(const LaggedCovariance& cov, int window);

}  // namespace cpic
