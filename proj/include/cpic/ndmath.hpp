#pragma once

// Small differentiable numerical core: named parameter storage, tiny MLPs with
// hand-written reverse passes, stable reductions, PSD log-determinants, Adam.
//
// Conventions: all matrices are row-per-sample. A dense layer maps
// X (batch x in) to X * W + b with W stored as (in x out) and b as (1 x out).

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace cpic {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using RowVector = Eigen::RowVectorXd;
using Index = Eigen::Index;

/// Diagonal jitter for near-singular covariance-like matrices.
inline constexpr double kPsdJitter = 1e-6;

/// 64-bit FNV-1a; stable across platforms, used to derive RNG substreams.
std::uint64_t fnv1a(std::string_view text, std::uint64_t seed = 0xcbf29ce484222325ULL);

/// Independent generator derived from a run seed and a tag (parameter name, step, ...).
std::mt19937_64 substream(std::uint64_t seed, std::string_view tag);
std::mt19937_64 substream(std::uint64_t seed, std::uint64_t index);

/// Fills a matrix with standard normal draws.
Matrix standard_normal(Index rows, Index cols, std::mt19937_64& rng);

struct ParamId {
  std::size_t index = 0;
  friend bool operator==(ParamId, ParamId) = default;
};

/// Named parameter arrays with matching gradient buffers. Insertion order is the
/// iteration order. References returned by value()/grad() are invalidated by add().
class ParamStore {
 public:
  ParamId add(std::string name, Index rows, Index cols, bool trainable = true);

  Matrix& value(ParamId id) { return entries_.at(id.index).value; }
  const Matrix& value(ParamId id) const { return entries_.at(id.index).value; }
  Matrix& grad(ParamId id) { return entries_.at(id.index).grad; }
  const Matrix& grad(ParamId id) const { return entries_.at(id.index).grad; }
  const std::string& name(ParamId id) const { return entries_.at(id.index).name; }
  bool trainable(ParamId id) const { return entries_.at(id.index).trainable; }
  void set_trainable(ParamId id, bool flag) { entries_.at(id.index).trainable = flag; }

  std::optional<ParamId> find(std::string_view name) const;
  /// Like find() but throws std::out_of_range for unknown names.
  ParamId at(std::string_view name) const;

  std::size_t size() const { return entries_.size(); }
  std::vector<ParamId> ids() const;
  Index total_entries() const;

  void zero_grad();
  /// Uniform(-bound, bound) fill from a substream keyed by (seed, parameter name).
  void init_uniform(ParamId id, double bound, std::uint64_t seed);

 private:
  struct Entry {
    std::string name;
    Matrix value;
    Matrix grad;
    bool trainable = true;
  };
  std::vector<Entry> entries_;
};

enum class Activation { tanh, relu };
enum class OutputTransform { identity, softplus };

struct MlpSpec {
  std::vector<int> widths;              // input, hidden..., output
  std::vector<Activation> activations;  // one per hidden layer
  OutputTransform output = OutputTransform::identity;

  int input_width() const { return widths.front(); }
  int output_width() const { return widths.back(); }
  std::size_t layers() const { return widths.size() - 1; }
  void validate() const;

  /// in -> hidden -> out with a single tanh hidden layer.
  static MlpSpec two_layer(int in, int hidden, int out,
                           OutputTransform output = OutputTransform::identity);
};

double softplus(double x);
double sigmoid(double x);

/// Dense feed-forward network whose weights live in a ParamStore.
class Mlp {
 public:
  /// Per-call activations needed by backward().
  struct Tape {
    std::vector<Matrix> inputs;  // input to each layer
    std::vector<Matrix> pre;     // pre-activation of each layer
  };

  Mlp() = default;
  Mlp(MlpSpec spec, ParamStore& store, std::string_view prefix);

  /// Weights ~ U(+-1/sqrt(fan_in)), biases 0.
  void initialize(ParamStore& store, std::uint64_t seed) const;

  Matrix forward(const ParamStore& store, const Matrix& x, Tape* tape = nullptr) const;
  /// Accumulates parameter gradients and returns d(loss)/d(input).
  Matrix backward(ParamStore& store, const Tape& tape, const Matrix& d_out) const;

  Vector apply(const ParamStore& store, const Vector& x) const;

  const MlpSpec& spec() const { return spec_; }
  const std::string& prefix() const { return prefix_; }
  ParamId weight(std::size_t layer) const { return weights_.at(layer); }
  ParamId bias(std::size_t layer) const { return biases_.at(layer); }

 private:
  MlpSpec spec_;
  std::string prefix_;
  std::vector<ParamId> weights_;
  std::vector<ParamId> biases_;
};

/// log(sum(exp(v))) computed with a max shift. Throws on empty input.
double logsumexp(std::span<const double> values);
double logsumexp(const Eigen::Ref<const RowVector>& values);
/// Gradient of logsumexp: the softmax weights.
RowVector softmax(const Eigen::Ref<const RowVector>& values);

struct LogDet {
  double value = 0.0;
  Matrix grad;  // inverse of the factorized matrix, symmetrized
};

/// Log-determinant of a symmetric PSD matrix. Factorized as given when every
/// Cholesky pivot exceeds kPsdJitter, otherwise after adding kPsdJitter * I.
/// Throws std::runtime_error("matrix not positive definite") if both fail.
LogDet logdet_psd(const Matrix& matrix, bool with_grad = true);

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  AdamConfig config;
  std::int64_t step = 0;
  std::vector<Matrix> first;
  std::vector<Matrix> second;
};

class Adam {
 public:
  explicit Adam(AdamConfig config = {}) { state_.config = config; }

  /// One bias-corrected update of every trainable parameter; zeroes all gradients.
  /// Throws std::runtime_error naming the parameter if a gradient is not finite.
  void step(ParamStore& store);

  const AdamState& state() const { return state_; }

 private:
  AdamState state_;
};

struct GradCheckReport {
  double max_rel_error = 0.0;
  std::string worst_param;
  Index worst_entry = -1;
  double analytic = 0.0;
  double numeric = 0.0;
  std::size_t checked = 0;
};

/// Evaluates the loss; when `with_grad` is set it also accumulates gradients.
using LossFn = std::function<double(ParamStore&, bool with_grad)>;

struct GradCheckOptions {
  double h = 1e-5;
  std::size_t max_entries_per_param = 24;
  /// Relative error is |a - n| / max(|a|, |n|, abs_floor).
  double abs_floor = 1e-6;
  std::uint64_t seed = 0;
};

/// Central-difference comparison against the analytic gradient. Large parameters
/// are subsampled. The store's values are restored on return.
GradCheckReport grad_check(const LossFn& loss, ParamStore& store, const GradCheckOptions& options = {});

}  // namespace cpic
