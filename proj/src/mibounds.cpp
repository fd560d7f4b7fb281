#include "cpic/mibounds.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace cpic {

namespace {

const double kHalfLog2Pi = 0.5 * std::log(2.0 * std::numbers::pi);

void require_square(const Matrix& m, const char* what) {
  if (m.rows() != m.cols()) throw std::invalid_argument(std::string(what) + ": matrix must be square");
  if (m.rows() < 2) throw std::invalid_argument(std::string(what) + ": batch size must be at least 2");
}

}  // namespace

// ---------------------------------------------------------------------------
// Critic

Critic::Critic(ParamStore& store, CriticKind kind, int past_dim, int future_dim, std::string_view prefix, int embed,
               int hidden)
    : kind_(kind) {
  const std::string p(prefix);
  if (kind == CriticKind::separable) {
    h_ = Mlp(MlpSpec::two_layer(past_dim, hidden, embed), store, p + ".h");
    g_ = Mlp(MlpSpec::two_layer(future_dim, hidden, embed), store, p + ".g");
  } else {
    joint_ = Mlp(MlpSpec::two_layer(past_dim + future_dim, hidden, 1), store, p + ".f");
  }
}

Critic Critic::separable(ParamStore& store, MlpSpec h, MlpSpec g, std::string_view prefix) {
  if (h.output_width() != g.output_width())
    throw std::invalid_argument("separable critic embeddings must have equal width");
  Critic c;
  c.kind_ = CriticKind::separable;
  c.h_ = Mlp(std::move(h), store, std::string(prefix) + ".h");
  c.g_ = Mlp(std::move(g), store, std::string(prefix) + ".g");
  return c;
}

Critic Critic::joint(ParamStore& store, MlpSpec f, std::string_view prefix) {
  if (f.output_width() != 1) throw std::invalid_argument("joint critic must have scalar output");
  Critic c;
  c.kind_ = CriticKind::joint;
  c.joint_ = Mlp(std::move(f), store, std::string(prefix) + ".f");
  return c;
}

void Critic::initialize(ParamStore& store, std::uint64_t seed) const {
  if (kind_ == CriticKind::separable) {
    h_.initialize(store, seed);
    g_.initialize(store, seed);
  } else {
    joint_.initialize(store, seed);
  }
}

Matrix Critic::scores(const ParamStore& store, const Matrix& past, const Matrix& future, Tape* tape) const {
  if (past.rows() != future.rows()) throw std::invalid_argument("critic: past and future batch sizes differ");
  const Index S = past.rows();
  if (S < 2) throw std::invalid_argument("critic: batch size must be at least 2 for contrastive scores");
  if (tape) {
    tape->batch = S;
    tape->past_width = past.cols();
  }
  if (kind_ == CriticKind::separable) {
    Matrix hx = h_.forward(store, past, tape ? &tape->h : nullptr);
    Matrix gy = g_.forward(store, future, tape ? &tape->g : nullptr);
    Matrix out = hx * gy.transpose();
    if (tape) {
      tape->h_out = std::move(hx);
      tape->g_out = std::move(gy);
    }
    return out;
  }
  Matrix pairs(S * S, past.cols() + future.cols());
  for (Index i = 0; i < S; ++i) {
    for (Index j = 0; j < S; ++j) {
      pairs.block(i * S + j, 0, 1, past.cols()) = past.row(i);
      pairs.block(i * S + j, past.cols(), 1, future.cols()) = future.row(j);
    }
  }
  const Matrix flat = joint_.forward(store, pairs, tape ? &tape->joint : nullptr);
  Matrix out(S, S);
  for (Index i = 0; i < S; ++i)
    for (Index j = 0; j < S; ++j) out(i, j) = flat(i * S + j, 0);
  return out;
}

void Critic::backward(ParamStore& store, const Tape& tape, const Matrix& d_scores, Matrix* d_past,
                      Matrix* d_future) const {
  const Index S = tape.batch;
  if (kind_ == CriticKind::separable) {
    const Matrix d_h = d_scores * tape.g_out;
    const Matrix d_g = d_scores.transpose() * tape.h_out;
    const Matrix dp = h_.backward(store, tape.h, d_h);
    const Matrix df = g_.backward(store, tape.g, d_g);
    if (d_past) *d_past += dp;
    if (d_future) *d_future += df;
    return;
  }
  Matrix d_flat(S * S, 1);
  for (Index i = 0; i < S; ++i)
    for (Index j = 0; j < S; ++j) d_flat(i * S + j, 0) = d_scores(i, j);
  const Matrix d_pairs = joint_.backward(store, tape.joint, d_flat);
  const Index P = tape.past_width;
  const Index F = d_pairs.cols() - P;
  for (Index i = 0; i < S; ++i) {
    for (Index j = 0; j < S; ++j) {
      if (d_past) d_past->row(i) += d_pairs.block(i * S + j, 0, 1, P);
      if (d_future) d_future->row(j) += d_pairs.block(i * S + j, P, 1, F);
    }
  }
}

// ---------------------------------------------------------------------------
// Baseline

Baseline::Baseline(ParamStore& store, BaselineKind kind, int code_dim, std::string_view prefix, int hidden)
    : kind_(kind) {
  const std::string p(prefix);
  if (kind == BaselineKind::learned_scalar) scalar_ = store.add(p + ".log_a", 1, 1);
  if (kind == BaselineKind::learned_network) net_ = Mlp(MlpSpec::two_layer(code_dim, hidden, 1), store, p + ".net");
}

void Baseline::initialize(ParamStore& store, std::uint64_t seed) const {
  if (kind_ == BaselineKind::learned_scalar) store.value(scalar_)(0, 0) = 0.0;
  if (kind_ == BaselineKind::learned_network) net_.initialize(store, seed);
}

Vector Baseline::log_baseline(const ParamStore& store, const Matrix& future, Tape* tape) const {
  switch (kind_) {
    case BaselineKind::constant_one:
      return Vector::Zero(future.rows());
    case BaselineKind::constant_e:
      return Vector::Ones(future.rows());
    case BaselineKind::learned_scalar:
      return Vector::Constant(future.rows(), store.value(scalar_)(0, 0));
    case BaselineKind::learned_network:
      return net_.forward(store, future, tape ? &tape->net : nullptr).col(0);
  }
  throw std::logic_error("unknown baseline kind");
}

Matrix Baseline::backward(ParamStore& store, const Tape& tape, const Vector& d_log_baseline,
                          const Matrix& future) const {
  switch (kind_) {
    case BaselineKind::constant_one:
    case BaselineKind::constant_e:
      return Matrix::Zero(future.rows(), future.cols());
    case BaselineKind::learned_scalar:
      store.grad(scalar_)(0, 0) += d_log_baseline.sum();
      return Matrix::Zero(future.rows(), future.cols());
    case BaselineKind::learned_network:
      return net_.backward(store, tape.net, Matrix(d_log_baseline));
  }
  throw std::logic_error("unknown baseline kind");
}

// ---------------------------------------------------------------------------
// Marginal and decoder

VariationalMarginal::VariationalMarginal(ParamStore& store, int code_dim, bool learnable, std::string_view prefix) {
  const std::string p(prefix);
  mean_ = store.add(p + ".mean", 1, code_dim, learnable);
  log_sigma_ = store.add(p + ".log_sigma", 1, code_dim, learnable);
}

void VariationalMarginal::initialize(ParamStore& store) const {
  store.value(mean_).setZero();
  store.value(log_sigma_).setZero();
}

GaussianDecoder::GaussianDecoder(ParamStore& store, int past_dim, int future_dim, std::string_view prefix,
                                 int hidden)
    : GaussianDecoder(store, MlpSpec::two_layer(past_dim, hidden, future_dim), prefix) {}

GaussianDecoder::GaussianDecoder(ParamStore& store, MlpSpec mean_spec, std::string_view prefix) {
  const std::string p(prefix);
  const int out = mean_spec.output_width();
  mean_net_ = Mlp(std::move(mean_spec), store, p + ".mean");
  log_sigma_ = store.add(p + ".log_sigma", 1, out);
}

void GaussianDecoder::initialize(ParamStore& store, std::uint64_t seed) const {
  mean_net_.initialize(store, seed);
  store.value(log_sigma_).setZero();
}

// ---------------------------------------------------------------------------
// Lower bounds

ScoreBound infonce(const Matrix& scores) {
  require_square(scores, "infonce");
  const Index S = scores.rows();
  const double inv_s = 1.0 / static_cast<double>(S);
  ScoreBound out;
  out.d_scores = Matrix::Zero(S, S);
  double total = 0.0;
  for (Index i = 0; i < S; ++i) {
    const RowVector row = scores.row(i);
    total += scores(i, i) - logsumexp(row);
    out.d_scores.row(i) = -inv_s * softmax(row);
    out.d_scores(i, i) += inv_s;
  }
  out.value = total * inv_s + std::log(static_cast<double>(S));
  return out;
}

TubaBound tuba(const Matrix& scores, const Vector& log_baseline, TubaForm form) {
  require_square(scores, "tuba");
  const Index S = scores.rows();
  if (log_baseline.size() != S) throw std::invalid_argument("tuba: baseline length does not match batch");
  const double inv_s = 1.0 / static_cast<double>(S);
  const double pairs = static_cast<double>(S) * static_cast<double>(S - 1);

  Matrix shifted = scores;
  shifted.rowwise() -= log_baseline.transpose();

  double joint = 0.0;
  std::vector<double> off;
  off.reserve(static_cast<std::size_t>(S * (S - 1)));
  for (Index i = 0; i < S; ++i) {
    joint += shifted(i, i);
    for (Index j = 0; j < S; ++j)
      if (i != j) off.push_back(shifted(i, j));
  }
  joint *= inv_s;
  const double log_mean_exp = logsumexp(off) - std::log(pairs);

  TubaBound out;
  out.d_scores = Matrix::Zero(S, S);
  Matrix weights(S, S);  // d(marginal term)/d(shifted_ij), off-diagonal only
  if (form == TubaForm::standard) {
    const double mean_exp = std::exp(log_mean_exp);
    if (!std::isfinite(mean_exp) || !std::isfinite(joint))
      throw std::runtime_error("tuba: marginal term is not finite");
    out.value = joint - mean_exp + 1.0;
    weights = (shifted.array().exp() / pairs).matrix();
  } else {
    if (!std::isfinite(log_mean_exp) || !std::isfinite(joint))
      throw std::runtime_error("tuba: marginal term is not finite");
    out.value = joint - log_mean_exp;
    weights = ((shifted.array() - (log_mean_exp + std::log(pairs))).exp()).matrix();
  }
  for (Index i = 0; i < S; ++i) {
    for (Index j = 0; j < S; ++j) {
      out.d_scores(i, j) = i == j ? inv_s : -weights(i, j);
    }
  }
  // shifted_ij = f_ij - log a_j
  out.d_log_baseline = -out.d_scores.colwise().sum().transpose();
  return out;
}

LbaBound lba(ParamStore& store, const GaussianDecoder& decoder, const Matrix& past, const Matrix& future,
             double weight) {
  if (past.rows() != future.rows()) throw std::invalid_argument("lba: batch sizes differ");
  const Index S = past.rows();
  const Index K = future.cols();
  Mlp::Tape tape;
  const Matrix mean = decoder.mean_net().forward(store, past, &tape);
  if (mean.cols() != K) throw std::invalid_argument("lba: decoder output width does not match future codes");
  const RowVector log_sigma = store.value(decoder.log_sigma()).row(0);
  const RowVector inv_sigma = (-log_sigma.array()).exp().matrix();
  const double w = weight / static_cast<double>(S);

  LbaBound out;
  Matrix d_mean(S, K);
  out.d_future.resize(S, K);
  RowVector d_log_sigma = RowVector::Zero(K);
  double total = 0.0;
  for (Index i = 0; i < S; ++i) {
    for (Index k = 0; k < K; ++k) {
      const double z = (future(i, k) - mean(i, k)) * inv_sigma(k);
      total += -kHalfLog2Pi - log_sigma(k) - 0.5 * z * z;
      d_mean(i, k) = w * z * inv_sigma(k);
      out.d_future(i, k) = -d_mean(i, k);
      d_log_sigma(k) += w * (z * z - 1.0);
    }
  }
  out.value = total / static_cast<double>(S);
  if (weight != 0.0) {
    store.grad(decoder.log_sigma()).row(0) += d_log_sigma;
    out.d_past = decoder.mean_net().backward(store, tape, d_mean);
  } else {
    out.d_past = Matrix::Zero(S, past.cols());
  }
  return out;
}

// ---------------------------------------------------------------------------
// Upper bounds

VubBound vub(ParamStore& store, const VariationalMarginal& marginal, const Matrix& mu, const Matrix& sigma,
             double weight) {
  if ((sigma.array() <= 0.0).any())
    throw std::invalid_argument("compression term constant; use compression=none");
  const Index S = mu.rows();
  const Index K = mu.cols();
  const RowVector m = store.value(marginal.mean()).row(0);
  const RowVector log_sr = store.value(marginal.log_sigma()).row(0);
  if (m.size() != K) throw std::invalid_argument("vub: marginal width does not match code width");
  const RowVector var_r = (2.0 * log_sr.array()).exp().matrix();
  const double inv_s = 1.0 / static_cast<double>(S);
  const double w = weight * inv_s;

  VubBound out;
  out.d_mu.resize(S, K);
  out.d_sigma.resize(S, K);
  RowVector d_m = RowVector::Zero(K);
  RowVector d_log_sr = RowVector::Zero(K);
  double total = 0.0;
  for (Index i = 0; i < S; ++i) {
    for (Index k = 0; k < K; ++k) {
      const double s = sigma(i, k);
      const double diff = mu(i, k) - m(k);
      const double ratio = (s * s + diff * diff) / var_r(k);
      total += log_sr(k) - std::log(s) + 0.5 * ratio - 0.5;
      out.d_mu(i, k) = w * diff / var_r(k);
      out.d_sigma(i, k) = w * (-1.0 / s + s / var_r(k));
      d_m(k) -= w * diff / var_r(k);
      d_log_sr(k) += w * (1.0 - ratio);
    }
  }
  out.value = total * inv_s;
  if (weight != 0.0) {
    store.grad(marginal.mean()).row(0) += d_m;
    store.grad(marginal.log_sigma()).row(0) += d_log_sr;
  }
  return out;
}

DensityBound l1out(const Matrix& log_density) {
  require_square(log_density, "l1out");
  const Index S = log_density.rows();
  const double inv_s = 1.0 / static_cast<double>(S);
  DensityBound out;
  out.d_log_density = Matrix::Zero(S, S);
  double total = 0.0;
  RowVector others(S - 1);
  for (Index i = 0; i < S; ++i) {
    for (Index j = 0, k = 0; j < S; ++j)
      if (j != i) others(k++) = log_density(i, j);
    total += log_density(i, i) - logsumexp(others);
    const RowVector w = softmax(others);
    for (Index j = 0, k = 0; j < S; ++j)
      if (j != i) out.d_log_density(i, j) = -inv_s * w(k++);
    out.d_log_density(i, i) = inv_s;
  }
  out.value = total * inv_s + std::log(static_cast<double>(S - 1));
  return out;
}

// ---------------------------------------------------------------------------
// Gaussian closed forms

double gaussian_mi(const Matrix& joint_cov, Index split, Matrix* grad) {
  const Index n = joint_cov.rows();
  if (split <= 0 || split >= n) throw std::invalid_argument("gaussian_mi: split must lie strictly inside the matrix");
  const LogDet a = logdet_psd(joint_cov.topLeftCorner(split, split), grad != nullptr);
  const LogDet b = logdet_psd(joint_cov.bottomRightCorner(n - split, n - split), grad != nullptr);
  const LogDet ab = logdet_psd(joint_cov, grad != nullptr);
  if (grad) {
    *grad = -0.5 * ab.grad;
    grad->topLeftCorner(split, split) += 0.5 * a.grad;
    grad->bottomRightCorner(n - split, n - split) += 0.5 * b.grad;
  }
  return 0.5 * (a.value + b.value - ab.value);
}

double gaussian_pi(const LaggedCovariance& cov, const Matrix& mean_map, int window, Matrix* grad) {
  if (window < 1) throw std::invalid_argument("gaussian_pi: window must be >= 1");
  const int needed = 2 * window - 1;
  if (cov.max_lag() < needed) {
    throw std::invalid_argument("gaussian_pi: needs lagged covariances up to lag " + std::to_string(needed) +
                                ", have " + std::to_string(cov.max_lag()));
  }
  if (mean_map.rows() != cov.lags[0].rows()) throw std::invalid_argument("gaussian_pi: U rows must equal channels");
  const Index D = mean_map.cols();
  std::vector<Matrix> projected;
  for (int d = 0; d <= needed; ++d) projected.push_back(mean_map.transpose() * cov.lags[static_cast<std::size_t>(d)] * mean_map);
  const Matrix sigma_2t = block_toeplitz(projected, 2 * window);
  const Matrix sigma_t = sigma_2t.topLeftCorner(window * D, window * D);
  const LogDet half = logdet_psd(sigma_t, grad != nullptr);
  const LogDet full = logdet_psd(sigma_2t, grad != nullptr);
  if (grad) {
    Matrix g = -0.5 * full.grad;
    g.topLeftCorner(window * D, window * D) += half.grad;
    // Collect the gradient of each projected lag from the blocks that contain it.
    const int W = 2 * window;
    std::vector<Matrix> d_lag(static_cast<std::size_t>(W), Matrix::Zero(D, D));
    for (int i = 0; i < W; ++i) {
      for (int j = 0; j < W; ++j) {
        const Matrix block = g.block(i * D, j * D, D, D);
        if (j >= i)
          d_lag[static_cast<std::size_t>(j - i)] += block;
        else
          d_lag[static_cast<std::size_t>(i - j)] += block.transpose();
      }
    }
    grad->setZero(mean_map.rows(), D);
    for (int d = 0; d < W; ++d) {
      const Matrix& c = cov.lags[static_cast<std::size_t>(d)];
      const Matrix& gd = d_lag[static_cast<std::size_t>(d)];
      *grad += c * mean_map * gd.transpose() + c.transpose() * mean_map * gd;
    }
  }
  return half.value - 0.5 * full.value;
}

}  // namespace cpic
