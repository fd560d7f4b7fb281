#include "cpic/series.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <stdexcept>

namespace cpic {

namespace {

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream in(line);
  while (std::getline(in, field, ',')) out.push_back(field);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

bool parse_double(const std::string& text, double& out) {
  const std::string t = trim(text);
  if (t.empty()) return false;
  const char* begin = t.data();
  const char* end = t.data() + t.size();
  if (*begin == '+') ++begin;
  auto [ptr, ec] = std::from_chars(begin, end, out);
  return ec == std::errc() && ptr == end && std::isfinite(out);
}

}  // namespace

Series load_series(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read '" + path.string() + "'");
  std::string line;
  while (std::getline(in, line) && trim(line).empty()) {
  }
  bool header = false;
  double ignored = 0.0;
  for (const auto& f : split_fields(line))
    if (!parse_double(f, ignored)) header = true;
  return load_series(path, header);
}

Series load_series(const std::filesystem::path& path, bool has_header) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read '" + path.string() + "'");
  Series series;
  std::vector<std::vector<double>> rows;
  std::string line;
  std::size_t line_no = 0;
  std::size_t width = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    auto fields = split_fields(line);
    if (has_header && series.channel_names.empty() && rows.empty()) {
      for (auto& f : fields) series.channel_names.push_back(trim(f));
      width = fields.size();
      continue;
    }
    if (width == 0) width = fields.size();
    if (fields.size() != width) {
      throw std::runtime_error("ragged row " + std::to_string(line_no) + " in '" + path.string() + "': expected " +
                               std::to_string(width) + " columns, found " + std::to_string(fields.size()));
    }
    std::vector<double> row(width);
    for (std::size_t c = 0; c < width; ++c) {
      if (!parse_double(fields[c], row[c])) {
        throw std::runtime_error("non-numeric cell at (row " + std::to_string(line_no) + ", column " +
                                 std::to_string(c + 1) + ") in '" + path.string() + "': '" + trim(fields[c]) + "'");
      }
    }
    rows.push_back(std::move(row));
  }
  if (rows.size() < 2)
    throw std::runtime_error("'" + path.string() + "' has fewer than 2 data rows");
  series.data.resize(static_cast<Index>(rows.size()), static_cast<Index>(width));
  for (std::size_t r = 0; r < rows.size(); ++r)
    for (std::size_t c = 0; c < width; ++c) series.data(static_cast<Index>(r), static_cast<Index>(c)) = rows[r][c];
  return series;
}

void save_matrix_csv(const Matrix& data, const std::filesystem::path& path, const std::vector<std::string>& header) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
  out << std::setprecision(17);
  if (!header.empty()) {
    for (std::size_t c = 0; c < header.size(); ++c) out << (c ? "," : "") << header[c];
    out << '\n';
  }
  for (Index r = 0; r < data.rows(); ++r) {
    for (Index c = 0; c < data.cols(); ++c) out << (c ? "," : "") << data(r, c);
    out << '\n';
  }
  if (!out) throw std::runtime_error("failed writing '" + path.string() + "'");
}

void save_series(const Series& series, const std::filesystem::path& path) {
  save_matrix_csv(series.data, path, series.channel_names);
}

Preprocessed center(const Series& series) {
  Preprocessed out;
  out.mean = series.data.colwise().mean().transpose();
  out.scale = Vector::Ones(series.channels());
  out.series = series;
  out.series.data.rowwise() -= out.mean.transpose();
  for (Index c = 0; c < series.channels(); ++c) {
    if (out.series.data.col(c).cwiseAbs().maxCoeff() == 0.0)
      out.warnings.push_back("channel " + std::to_string(c) + " has zero variance");
  }
  return out;
}

Preprocessed standardize(const Series& series) {
  Preprocessed out = center(series);
  out.warnings.clear();
  const double n = static_cast<double>(series.length());
  for (Index c = 0; c < series.channels(); ++c) {
    const double sd = std::sqrt(out.series.data.col(c).squaredNorm() / n);
    if (sd > 0.0) {
      out.scale(c) = sd;
      out.series.data.col(c) /= sd;
    } else {
      out.warnings.push_back("channel " + std::to_string(c) + " has zero variance; left centered");
    }
  }
  return out;
}

Index min_anchor(int window) { return window - 1; }
Index max_anchor(Index length, int window) { return length - window - 1; }

WindowPairBatch window_pairs(const Matrix& data, int window, std::span<const Index> anchors) {
  if (window < 1) throw std::invalid_argument("window must be >= 1");
  const Index L = data.rows();
  const Index N = data.cols();
  WindowPairBatch batch;
  batch.window = window;
  batch.channels = N;
  batch.anchors.assign(anchors.begin(), anchors.end());
  const auto S = static_cast<Index>(anchors.size());
  batch.past.resize(S, window * N);
  batch.future.resize(S, window * N);
  for (Index i = 0; i < S; ++i) {
    const Index t = anchors[static_cast<std::size_t>(i)];
    if (t < min_anchor(window) || t > max_anchor(L, window)) {
      throw std::out_of_range("anchor " + std::to_string(t) + " outside valid range [" +
                              std::to_string(min_anchor(window)) + ", " + std::to_string(max_anchor(L, window)) +
                              "] for window " + std::to_string(window) + " and length " + std::to_string(L));
    }
    for (int k = 0; k < window; ++k) {
      batch.past.block(i, k * N, 1, N) = data.row(t - window + 1 + k);
      batch.future.block(i, k * N, 1, N) = data.row(t + 1 + k);
    }
  }
  return batch;
}

WindowPairBatch window_pairs(const Series& series, int window, std::span<const Index> anchors) {
  return window_pairs(series.data, window, anchors);
}

std::vector<Index> sample_anchors(Index length, int window, Index count, std::mt19937_64& rng) {
  const Index lo = min_anchor(window);
  const Index hi = max_anchor(length, window);
  if (hi < lo) throw std::invalid_argument("series of length " + std::to_string(length) +
                                           " is too short for window " + std::to_string(window));
  std::uniform_int_distribution<Index> dist(lo, hi);
  std::vector<Index> out(static_cast<std::size_t>(count));
  for (auto& a : out) a = dist(rng);
  return out;
}

Matrix unflatten_steps(const Matrix& windows, Index channels) {
  if (windows.cols() % channels != 0) throw std::invalid_argument("window width is not a multiple of channel count");
  const Index T = windows.cols() / channels;
  Matrix steps(windows.rows() * T, channels);
  for (Index i = 0; i < windows.rows(); ++i)
    for (Index k = 0; k < T; ++k) steps.row(i * T + k) = windows.block(i, k * channels, 1, channels);
  return steps;
}

Matrix flatten_steps(const Matrix& steps, int window) {
  if (steps.rows() % window != 0) throw std::invalid_argument("step count is not a multiple of window");
  const Index S = steps.rows() / window;
  const Index D = steps.cols();
  Matrix out(S, window * D);
  for (Index i = 0; i < S; ++i)
    for (Index k = 0; k < window; ++k) out.block(i, k * D, 1, D) = steps.row(i * window + k);
  return out;
}

LaggedCovariance lagged_covariance(const Matrix& data, int max_lag) {
  const Index L = data.rows();
  if (max_lag < 0) throw std::invalid_argument("max lag must be >= 0");
  if (max_lag >= L) {
    throw std::invalid_argument("max lag " + std::to_string(max_lag) + " must be smaller than series length " +
                                std::to_string(L));
  }
  LaggedCovariance cov;
  cov.samples = L;
  cov.mean = data.colwise().mean().transpose();
  const Matrix x = data.rowwise() - cov.mean.transpose();
  for (int d = 0; d <= max_lag; ++d) {
    const Index n = L - d;
    cov.lags.push_back(x.topRows(n).transpose() * x.middleRows(d, n) / static_cast<double>(n));
  }
  return cov;
}

LaggedCovariance lagged_covariance(const Series& series, int max_lag) { return lagged_covariance(series.data, max_lag); }

Matrix block_toeplitz(std::span<const Matrix> lags, int window) {
  if (window < 1) throw std::invalid_argument("block_toeplitz window must be >= 1");
  if (static_cast<std::size_t>(window) > lags.size()) {
    throw std::invalid_argument("block_toeplitz window " + std::to_string(window) + " needs lags up to " +
                                std::to_string(window - 1) + ", have " + std::to_string(lags.size() - 1));
  }
  const Index n = lags[0].rows();
  Matrix out(window * n, window * n);
  for (int i = 0; i < window; ++i) {
    for (int j = 0; j < window; ++j) {
      if (j >= i)
        out.block(i * n, j * n, n, n) = lags[static_cast<std::size_t>(j - i)];
      else
        out.block(i * n, j * n, n, n) = lags[static_cast<std::size_t>(i - j)].transpose();
    }
  }
  // C_0 is symmetric only up to rounding; mirror the upper triangle so the result is exactly symmetric.
  const Matrix upper = out;
  out.triangularView<Eigen::StrictlyLower>() = upper.transpose();
  return out;
}

Matrix block_toeplitz(const LaggedCovariance& cov, int window) { return block_toeplitz(cov.lags, window); }

}  // namespace cpic
