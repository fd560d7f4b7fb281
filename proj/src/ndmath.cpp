#include "cpic/ndmath.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace cpic {

std::uint64_t fnv1a(std::string_view text, std::uint64_t seed) {
  std::uint64_t hash = seed;
  for (unsigned char c : text) {
    hash ^= c;
    hash *= 0x100000001b3ULL;
  }
  return hash;
}

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace

std::mt19937_64 substream(std::uint64_t seed, std::string_view tag) {
  return std::mt19937_64(splitmix64(seed ^ splitmix64(fnv1a(tag))));
}

std::mt19937_64 substream(std::uint64_t seed, std::uint64_t index) {
  return std::mt19937_64(splitmix64(splitmix64(seed) + splitmix64(index + 0x632be59bd9b4e019ULL)));
}

Matrix standard_normal(Index rows, Index cols, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix out(rows, cols);
  // Row-major fill so the draw order matches the flattened (sample, feature) layout.
  for (Index r = 0; r < rows; ++r)
    for (Index c = 0; c < cols; ++c) out(r, c) = normal(rng);
  return out;
}

// ---------------------------------------------------------------------------
// ParamStore

ParamId ParamStore::add(std::string name, Index rows, Index cols, bool trainable) {
  if (rows <= 0 || cols <= 0)
    throw std::invalid_argument("parameter '" + name + "' must have positive shape");
  if (find(name)) throw std::invalid_argument("duplicate parameter name '" + name + "'");
  entries_.push_back(Entry{std::move(name), Matrix::Zero(rows, cols), Matrix::Zero(rows, cols), trainable});
  return ParamId{entries_.size() - 1};
}

std::optional<ParamId> ParamStore::find(std::string_view name) const {
  for (std::size_t i = 0; i < entries_.size(); ++i)
    if (entries_[i].name == name) return ParamId{i};
  return std::nullopt;
}

ParamId ParamStore::at(std::string_view name) const {
  if (auto id = find(name)) return *id;
  throw std::out_of_range("unknown parameter '" + std::string(name) + "'");
}

std::vector<ParamId> ParamStore::ids() const {
  std::vector<ParamId> out(entries_.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = ParamId{i};
  return out;
}

Index ParamStore::total_entries() const {
  Index n = 0;
  for (const auto& e : entries_) n += e.value.size();
  return n;
}

void ParamStore::zero_grad() {
  for (auto& e : entries_) e.grad.setZero();
}

void ParamStore::init_uniform(ParamId id, double bound, std::uint64_t seed) {
  auto& entry = entries_.at(id.index);
  auto rng = substream(seed, entry.name);
  std::uniform_real_distribution<double> dist(-bound, bound);
  for (Index r = 0; r < entry.value.rows(); ++r)
    for (Index c = 0; c < entry.value.cols(); ++c) entry.value(r, c) = dist(rng);
}

// ---------------------------------------------------------------------------
// MLP

void MlpSpec::validate() const {
  if (widths.size() < 2) throw std::invalid_argument("MlpSpec needs at least input and output widths");
  for (int w : widths)
    if (w <= 0) throw std::invalid_argument("MlpSpec widths must be positive");
  if (activations.size() != widths.size() - 2)
    throw std::invalid_argument("MlpSpec needs one activation per hidden layer");
}

MlpSpec MlpSpec::two_layer(int in, int hidden, int out, OutputTransform output) {
  return MlpSpec{{in, hidden, out}, {Activation::tanh}, output};
}

double softplus(double x) { return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

Mlp::Mlp(MlpSpec spec, ParamStore& store, std::string_view prefix) : spec_(std::move(spec)), prefix_(prefix) {
  spec_.validate();
  for (std::size_t l = 0; l < spec_.layers(); ++l) {
    weights_.push_back(store.add(prefix_ + ".W" + std::to_string(l), spec_.widths[l], spec_.widths[l + 1]));
    biases_.push_back(store.add(prefix_ + ".b" + std::to_string(l), 1, spec_.widths[l + 1]));
  }
}

void Mlp::initialize(ParamStore& store, std::uint64_t seed) const {
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    store.init_uniform(weights_[l], 1.0 / std::sqrt(static_cast<double>(spec_.widths[l])), seed);
    store.value(biases_[l]).setZero();
  }
}

Matrix Mlp::forward(const ParamStore& store, const Matrix& x, Tape* tape) const {
  if (x.cols() != spec_.input_width()) {
    throw std::invalid_argument("mlp '" + prefix_ + "': input width " + std::to_string(x.cols()) +
                                " does not match parameter " + store.name(weights_[0]) + " rows " +
                                std::to_string(spec_.input_width()));
  }
  if (tape) {
    tape->inputs.clear();
    tape->pre.clear();
  }
  Matrix h = x;
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    const Matrix& w = store.value(weights_[l]);
    if (w.rows() != h.cols())
      throw std::invalid_argument("mlp '" + prefix_ + "': shape mismatch at parameter " + store.name(weights_[l]));
    Matrix pre = h * w;
    pre.rowwise() += store.value(biases_[l]).row(0);
    if (tape) {
      tape->inputs.push_back(h);
      tape->pre.push_back(pre);
    }
    const bool last = l + 1 == weights_.size();
    if (!last) {
      h = spec_.activations[l] == Activation::tanh ? Matrix(pre.array().tanh()) : Matrix(pre.cwiseMax(0.0));
    } else if (spec_.output == OutputTransform::softplus) {
      h = pre.unaryExpr([](double v) { return softplus(v); });
    } else {
      h = std::move(pre);
    }
  }
  return h;
}

Matrix Mlp::backward(ParamStore& store, const Tape& tape, const Matrix& d_out) const {
  if (tape.pre.size() != weights_.size()) throw std::logic_error("mlp '" + prefix_ + "': tape does not match network");
  Matrix delta;
  for (std::size_t k = weights_.size(); k-- > 0;) {
    const Matrix& pre = tape.pre[k];
    const bool last = k + 1 == weights_.size();
    if (last) {
      delta = spec_.output == OutputTransform::softplus
                  ? Matrix(d_out.cwiseProduct(pre.unaryExpr([](double v) { return sigmoid(v); })))
                  : d_out;
    } else if (spec_.activations[k] == Activation::tanh) {
      delta = delta.cwiseProduct(Matrix((1.0 - pre.array().tanh().square()).matrix()));
    } else {
      delta = delta.cwiseProduct(Matrix((pre.array() > 0.0).cast<double>().matrix()));
    }
    store.grad(weights_[k]).noalias() += tape.inputs[k].transpose() * delta;
    store.grad(biases_[k]).row(0) += delta.colwise().sum();
    delta = delta * store.value(weights_[k]).transpose();
  }
  return delta;
}

Vector Mlp::apply(const ParamStore& store, const Vector& x) const {
  return forward(store, x.transpose()).row(0).transpose();
}

// ---------------------------------------------------------------------------
// Reductions

double logsumexp(std::span<const double> values) {
  if (values.empty()) throw std::invalid_argument("logsumexp of an empty input");
  const double m = *std::max_element(values.begin(), values.end());
  if (!std::isfinite(m)) return m;
  double s = 0.0;
  for (double v : values) s += std::exp(v - m);
  return m + std::log(s);
}

double logsumexp(const Eigen::Ref<const RowVector>& values) {
  if (values.size() == 0) throw std::invalid_argument("logsumexp of an empty input");
  const double m = values.maxCoeff();
  if (!std::isfinite(m)) return m;
  return m + std::log((values.array() - m).exp().sum());
}

RowVector softmax(const Eigen::Ref<const RowVector>& values) {
  const double m = values.maxCoeff();
  RowVector e = (values.array() - m).exp().matrix();
  return e / e.sum();
}

LogDet logdet_psd(const Matrix& matrix, bool with_grad) {
  if (matrix.rows() != matrix.cols()) throw std::invalid_argument("logdet_psd: matrix is not square");
  const double scale = std::max(1.0, matrix.cwiseAbs().maxCoeff());
  if ((matrix - matrix.transpose()).cwiseAbs().maxCoeff() > 1e-8 * scale)
    throw std::invalid_argument("logdet_psd: matrix is not symmetric");
  // Exact factorization when every pivot is well above the jitter; otherwise jitter.
  Eigen::LLT<Matrix> llt(matrix);
  auto pivots_ok = [&] {
    if (llt.info() != Eigen::Success) return false;
    const Vector d = llt.matrixLLT().diagonal();
    return d.allFinite() && (d.array().square() > kPsdJitter).all();
  };
  if (!pivots_ok()) {
    Matrix jittered = matrix;
    jittered.diagonal().array() += kPsdJitter;
    llt.compute(jittered);
    if (llt.info() != Eigen::Success) throw std::runtime_error("matrix not positive definite");
  }
  const Vector diag = llt.matrixLLT().diagonal();
  if ((diag.array() <= 0.0).any() || !diag.allFinite()) throw std::runtime_error("matrix not positive definite");
  LogDet out;
  out.value = 2.0 * diag.array().log().sum();
  if (with_grad) {
    Matrix inv = llt.solve(Matrix::Identity(matrix.rows(), matrix.cols()));
    out.grad = 0.5 * (inv + inv.transpose());
  }
  return out;
}

// ---------------------------------------------------------------------------
// Adam

void Adam::step(ParamStore& store) {
  auto& s = state_;
  if (s.first.size() != store.size()) {
    s.first.resize(store.size());
    s.second.resize(store.size());
    for (auto id : store.ids()) {
      s.first[id.index] = Matrix::Zero(store.value(id).rows(), store.value(id).cols());
      s.second[id.index] = s.first[id.index];
    }
  }
  ++s.step;
  for (auto id : store.ids()) {
    const Matrix& g = store.grad(id);
    if (!g.allFinite())
      throw std::runtime_error("non-finite gradient in parameter '" + store.name(id) + "' at step " +
                               std::to_string(s.step));
  }
  const auto& c = s.config;
  const double t = static_cast<double>(s.step);
  const double correction1 = 1.0 - std::pow(c.beta1, t);
  const double correction2 = 1.0 - std::pow(c.beta2, t);
  for (auto id : store.ids()) {
    if (!store.trainable(id)) continue;
    const Matrix& g = store.grad(id);
    Matrix& m = s.first[id.index];
    Matrix& v = s.second[id.index];
    m = c.beta1 * m + (1.0 - c.beta1) * g;
    v = c.beta2 * v + (1.0 - c.beta2) * g.cwiseProduct(g);
    store.value(id).array() -=
        c.lr * (m.array() / correction1) / ((v.array() / correction2).sqrt() + c.eps);
  }
  store.zero_grad();
}

// ---------------------------------------------------------------------------
// Gradient check

GradCheckReport grad_check(const LossFn& loss, ParamStore& store, const GradCheckOptions& options) {
  store.zero_grad();
  loss(store, true);
  std::vector<Matrix> analytic;
  for (auto id : store.ids()) analytic.push_back(store.grad(id));
  store.zero_grad();

  GradCheckReport report;
  auto rng = substream(options.seed, "grad_check");
  for (auto id : store.ids()) {
    Matrix& value = store.value(id);
    const Index n = value.size();
    std::vector<Index> entries(static_cast<std::size_t>(n));
    std::iota(entries.begin(), entries.end(), Index{0});
    if (entries.size() > options.max_entries_per_param) {
      std::shuffle(entries.begin(), entries.end(), rng);
      entries.resize(options.max_entries_per_param);
    }
    for (Index e : entries) {
      double& slot = value.data()[e];
      const double saved = slot;
      slot = saved + options.h;
      const double up = loss(store, false);
      slot = saved - options.h;
      const double down = loss(store, false);
      slot = saved;
      const double numeric = (up - down) / (2.0 * options.h);
      const double a = analytic[id.index].data()[e];
      const double denom = std::max({std::abs(a), std::abs(numeric), options.abs_floor});
      const double rel = std::abs(a - numeric) / denom;
      ++report.checked;
      if (rel > report.max_rel_error || !std::isfinite(rel)) {
        report.max_rel_error = std::isfinite(rel) ? rel : std::numeric_limits<double>::infinity();
        report.worst_param = store.name(id);
        report.worst_entry = e;
        report.analytic = a;
        report.numeric = numeric;
      }
    }
  }
  store.zero_grad();
  return report;
}

}  // namespace cpic
