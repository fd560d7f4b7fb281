#pragma once

// Variational bounds on mutual information.
//
// Upper bounds (compression complexity I(X;Y)): vub, l1out.
// Lower bounds (predictive information I(Y_past;Y_future)): infonce, tuba, lba.
// Closed forms under Gaussianity: gaussian_mi, gaussian_pi.
//
// Estimators take precomputed scores or densities and return the value together
// with its gradient with respect to those inputs, so callers can chain the
// result back into critics and encoders.

#include "cpic/ndmath.hpp"
#include "cpic/series.hpp"

#include <optional>
#include <string_view>

namespace cpic {

enum class CriticKind { separable, joint };

/// Score function f(a, b) on code pairs. Separable: h(a) . g(b). Joint: one
/// network on the concatenation [a, b] with scalar output.
class Critic {
 public:
  static constexpr int kDefaultEmbed = 32;
  static constexpr int kDefaultHidden = 64;

  struct Tape {
    Mlp::Tape h, g, joint;
    Matrix h_out, g_out;
    Index batch = 0;
    Index past_width = 0;
  };

  Critic() = default;
  /// Two-layer tanh networks; embedding width `embed` for the separable kind.
  Critic(ParamStore& store, CriticKind kind, int past_dim, int future_dim, std::string_view prefix = "critic",
         int embed = kDefaultEmbed, int hidden = kDefaultHidden);

  static Critic separable(ParamStore& store, MlpSpec h, MlpSpec g, std::string_view prefix = "critic");
  static Critic joint(ParamStore& store, MlpSpec f, std::string_view prefix = "critic");

  void initialize(ParamStore& store, std::uint64_t seed) const;

  CriticKind kind() const { return kind_; }
  const Mlp& h() const { return h_; }
  const Mlp& g() const { return g_; }
  const Mlp& joint_net() const { return joint_; }

  /// S x S matrix, entry (i, j) = f(past_i, future_j). Throws for S < 2.
  Matrix scores(const ParamStore& store, const Matrix& past, const Matrix& future, Tape* tape = nullptr) const;

  /// Accumulates parameter gradients; adds input cotangents when the pointers are set.
  void backward(ParamStore& store, const Tape& tape, const Matrix& d_scores, Matrix* d_past,
                Matrix* d_future) const;

 private:
  CriticKind kind_ = CriticKind::separable;
  Mlp h_, g_, joint_;
};

enum class BaselineKind { constant_one, constant_e, learned_scalar, learned_network };

/// Baseline a(y) > 0 for TUBA, stored as log a(y).
class Baseline {
 public:
  struct Tape {
    Mlp::Tape net;
  };

  Baseline() = default;
  Baseline(ParamStore& store, BaselineKind kind, int code_dim, std::string_view prefix = "baseline",
           int hidden = 32);

  void initialize(ParamStore& store, std::uint64_t seed) const;
  BaselineKind kind() const { return kind_; }

  /// log a(y_j) for every row of `future`.
  Vector log_baseline(const ParamStore& store, const Matrix& future, Tape* tape = nullptr) const;
  /// Accumulates parameter gradients; returns d/d(future) (zero for constant kinds).
  Matrix backward(ParamStore& store, const Tape& tape, const Vector& d_log_baseline, const Matrix& future) const;

 private:
  BaselineKind kind_ = BaselineKind::constant_one;
  ParamId scalar_;
  Mlp net_;
};

/// Diagonal Gaussian r(y) over the T*D code.
class VariationalMarginal {
 public:
  VariationalMarginal() = default;
  VariationalMarginal(ParamStore& store, int code_dim, bool learnable, std::string_view prefix = "marginal");

  /// Standard normal.
  void initialize(ParamStore& store) const;

  ParamId mean() const { return mean_; }
  ParamId log_sigma() const { return log_sigma_; }

 private:
  ParamId mean_;
  ParamId log_sigma_;
};

/// q(y_future | y_past) = N(m(y_past), diag(exp(log_sigma)^2)).
class GaussianDecoder {
 public:
  GaussianDecoder() = default;
  GaussianDecoder(ParamStore& store, int past_dim, int future_dim, std::string_view prefix = "decoder",
                  int hidden = 64);
  GaussianDecoder(ParamStore& store, MlpSpec mean_spec, std::string_view prefix = "decoder");

  void initialize(ParamStore& store, std::uint64_t seed) const;

  const Mlp& mean_net() const { return mean_net_; }
  ParamId log_sigma() const { return log_sigma_; }

 private:
  Mlp mean_net_;
  ParamId log_sigma_;
};

struct ScoreBound {
  double value = 0.0;
  Matrix d_scores;
};

/// (1/S) sum_i [f_ii - logsumexp_j f_ij + ln S].
ScoreBound infonce(const Matrix& scores);

enum class TubaForm { standard, printed };

struct TubaBound {
  double value = 0.0;
  Matrix d_scores;
  Vector d_log_baseline;
};

/// With g_ij = f_ij - log a(y_j), using off-diagonal pairs for the marginal term:
///   standard: mean_i g_ii - mean_{i!=j} exp(g_ij) + 1
///   printed:  mean_i g_ii - log mean_{i!=j} exp(g_ij)
/// Throws std::runtime_error when the marginal term is not finite.
TubaBound tuba(const Matrix& scores, const Vector& log_baseline, TubaForm form);

struct LbaBound {
  double value = 0.0;
  Matrix d_past;
  Matrix d_future;
};

/// Batch mean of log q(future_i | past_i). Gradients of `weight * value` are
/// accumulated into the decoder parameters and returned for both inputs;
/// weight 0 skips the backward pass.
LbaBound lba(ParamStore& store, const GaussianDecoder& decoder, const Matrix& past, const Matrix& future,
             double weight = 0.0);

struct VubBound {
  double value = 0.0;
  Matrix d_mu;
  Matrix d_sigma;
};

/// Batch mean of KL(N(mu_i, sigma_i^2) || r). Gradients of `weight * value` are
/// accumulated into the marginal and returned for mu and sigma.
/// Throws std::invalid_argument if any sigma <= 0.
VubBound vub(ParamStore& store, const VariationalMarginal& marginal, const Matrix& mu, const Matrix& sigma,
             double weight = 0.0);

struct DensityBound {
  double value = 0.0;
  Matrix d_log_density;
};

/// (1/S) sum_i [l_ii - (logsumexp_{j!=i} l_ij - ln(S-1))], l_ij = log p(y_i | x_j).
DensityBound l1out(const Matrix& log_density);

/// 0.5 [logdet S11 + logdet S22 - logdet S]; optional gradient w.r.t. the joint covariance.
double gaussian_mi(const Matrix& joint_cov, Index split, Matrix* grad = nullptr);

/// Predictive information of the projected process: with C_d(Y) = U^T C_d U,
/// logdet Sigma_T - 0.5 logdet Sigma_2T. Needs lags up to 2T-1.
double gaussian_pi(const LaggedCovariance& cov, const Matrix& mean_map, int window, Matrix* grad = nullptr);

}  // namespace cpic
