#include "cpic/ndmath.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>

using namespace cpic;

TEST(ParamStore, GradientBufferMatchesValueShape) {
  ParamStore store;
  const auto a = store.add("a", 3, 4);
  const auto b = store.add("b", 1, 7, false);
  EXPECT_EQ(store.grad(a).rows(), 3);
  EXPECT_EQ(store.grad(a).cols(), 4);
  EXPECT_EQ(store.grad(b).size(), 7);
  EXPECT_FALSE(store.trainable(b));
  EXPECT_EQ(store.total_entries(), 19);
  EXPECT_EQ(store.at("b"), b);
  EXPECT_THROW(store.at("missing"), std::out_of_range);
}

TEST(ParamStore, InsertionOrderIsStable) {
  auto build = [] {
    ParamStore s;
    s.add("z", 1, 1);
    s.add("a", 2, 2);
    s.add("m", 3, 1);
    return s;
  };
  const ParamStore s1 = build(), s2 = build();
  ASSERT_EQ(s1.size(), s2.size());
  for (std::size_t i = 0; i < s1.size(); ++i) EXPECT_EQ(s1.name(ParamId{i}), s2.name(ParamId{i}));
  EXPECT_EQ(s1.name(ParamId{0}), "z");
}

TEST(ParamStore, SeededInitIsReproducibleAndBounded) {
  ParamStore s1, s2;
  const auto p1 = s1.add("w", 10, 10);
  const auto p2 = s2.add("w", 10, 10);
  s1.init_uniform(p1, 0.3, 42);
  s2.init_uniform(p2, 0.3, 42);
  EXPECT_EQ(s1.value(p1), s2.value(p2));
  EXPECT_LE(s1.value(p1).cwiseAbs().maxCoeff(), 0.3);
}

TEST(Mlp, ZeroWeightsSoftplusGivesLn2) {
  ParamStore store;
  Mlp net(MlpSpec::two_layer(4, 6, 3, OutputTransform::softplus), store, "net");
  for (auto id : store.ids()) store.value(id).setZero();
  const Matrix out = net.forward(store, Matrix::Random(5, 4));
  EXPECT_NEAR((out.array() - std::log(2.0)).abs().maxCoeff(), 0.0, 1e-15);
}

TEST(Mlp, IdentityLayerPassesInputThrough) {
  ParamStore store;
  MlpSpec spec;
  spec.widths = {3, 3};
  Mlp net(spec, store, "lin");
  store.value(net.weight(0)).setIdentity();
  store.value(net.bias(0)).setZero();
  const Matrix x = Matrix::Random(4, 3);
  EXPECT_EQ(net.forward(store, x), x);
}

TEST(Mlp, ParameterGradientsMatchFiniteDifferences) {
  ParamStore store;
  Mlp net(MlpSpec::two_layer(5, 8, 3), store, "net");
  net.initialize(store, 7);
  for (auto id : store.ids()) store.value(id).setRandom();
  std::mt19937_64 rng(3);
  const Matrix x = standard_normal(6, 5, rng);
  const Matrix w = standard_normal(6, 3, rng);
  LossFn loss = [&](ParamStore& s, bool with_grad) {
    Mlp::Tape tape;
    const Matrix out = net.forward(s, x, with_grad ? &tape : nullptr);
    if (with_grad) net.backward(s, tape, w);
    return (out.array() * w.array()).sum();
  };
  const auto report = grad_check(loss, store);
  EXPECT_LT(report.max_rel_error, 1e-4) << report.worst_param;
}

TEST(Mlp, InputGradientMatchesFiniteDifferences) {
  ParamStore store;
  MlpSpec spec;
  spec.widths = {3, 5, 4, 2};
  spec.activations = {Activation::tanh, Activation::relu};
  spec.output = OutputTransform::softplus;
  Mlp net(spec, store, "deep");
  net.initialize(store, 1);
  std::mt19937_64 rng(5);
  Matrix x = standard_normal(2, 3, rng);
  Mlp::Tape tape;
  net.forward(store, x, &tape);
  const Matrix d_in = net.backward(store, tape, Matrix::Ones(2, 2));
  const double h = 1e-6;
  for (Index r = 0; r < x.rows(); ++r) {
    for (Index c = 0; c < x.cols(); ++c) {
      Matrix xp = x, xm = x;
      xp(r, c) += h;
      xm(r, c) -= h;
      const double numeric = (net.forward(store, xp).sum() - net.forward(store, xm).sum()) / (2 * h);
      EXPECT_NEAR(d_in(r, c), numeric, 1e-7);
    }
  }
}

TEST(Mlp, ShapeMismatchNamesParameter) {
  ParamStore store;
  Mlp net(MlpSpec::two_layer(4, 6, 3), store, "enc");
  try {
    net.forward(store, Matrix::Zero(2, 5));
    FAIL();
  } catch (const std::invalid_argument& e) {
    EXPECT_NE(std::string(e.what()).find("enc"), std::string::npos);
  }
}

TEST(LogSumExp, SmallCases) {
  const double zeros[] = {0.0, 0.0};
  EXPECT_DOUBLE_EQ(logsumexp(zeros), std::log(2.0));
  const double big[] = {1000.0, 1000.0};
  EXPECT_DOUBLE_EQ(logsumexp(big), 1000.0 + std::log(2.0));
  EXPECT_THROW(logsumexp(std::span<const double>{}), std::invalid_argument);
}

TEST(LogSumExp, MatchesDirectEvaluation) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    const RowVector v = standard_normal(1, 10, rng);
    double direct = 0.0;
    for (Index i = 0; i < v.size(); ++i) direct += std::exp(v(i));
    EXPECT_NEAR(logsumexp(v), std::log(direct), 1e-12);
    EXPECT_NEAR(softmax(v).sum(), 1.0, 1e-12);
  }
}

TEST(LogDet, ClosedFormCases) {
  EXPECT_EQ(logdet_psd(Matrix::Identity(3, 3)).value, 0.0);
  Matrix d = Matrix::Zero(2, 2);
  d.diagonal() << 2.0, 3.0;
  EXPECT_NEAR(logdet_psd(d).value, std::log(6.0), 1e-14);
}

TEST(LogDet, GradientMatchesFiniteDifferences) {
  std::mt19937_64 rng(2);
  const Matrix a = standard_normal(6, 6, rng);
  const Matrix m = a * a.transpose() + Matrix::Identity(6, 6);
  const LogDet ld = logdet_psd(m);
  const double h = 1e-6;
  for (Index i = 0; i < 6; ++i) {
    for (Index j = 0; j < 6; ++j) {
      // Symmetric perturbation keeps the input valid; off-diagonal entries appear twice.
      Matrix e = Matrix::Zero(6, 6);
      e(i, j) += h;
      e(j, i) += h;
      if (i == j) e(i, i) = h;
      const double numeric = (logdet_psd(m + e, false).value - logdet_psd(m - e, false).value) / (2 * h);
      const double analytic = i == j ? ld.grad(i, i) : ld.grad(i, j) + ld.grad(j, i);
      EXPECT_LT(std::abs(analytic - numeric) / std::max(std::abs(numeric), 1e-6), 1e-5);
    }
  }
}

TEST(LogDet, RejectsIndefiniteAndAsymmetric) {
  Matrix m = Matrix::Identity(2, 2);
  m(0, 0) = -1.0;
  EXPECT_THROW(logdet_psd(m), std::runtime_error);
  Matrix asym = Matrix::Identity(2, 2);
  asym(0, 1) = 0.5;
  EXPECT_THROW(logdet_psd(asym), std::invalid_argument);
}

TEST(Adam, ZeroGradientLeavesParametersUnchanged) {
  ParamStore store;
  const auto w = store.add("w", 2, 2);
  store.value(w) << 1, 2, 3, 4;
  const Matrix before = store.value(w);
  Adam adam;
  adam.step(store);
  EXPECT_EQ(store.value(w), before);
  EXPECT_EQ(adam.state().step, 1);
}

TEST(Adam, FirstStepMovesByLearningRate) {
  ParamStore store;
  const auto w = store.add("w", 1, 1);
  store.value(w)(0, 0) = 0.0;
  store.grad(w)(0, 0) = 1.0;
  Adam adam(AdamConfig{0.1});
  adam.step(store);
  // m_hat = 1, v_hat = 1, so the update is lr / (1 + eps).
  EXPECT_NEAR(store.value(w)(0, 0), -0.1 / (1.0 + 1e-8), 1e-12);
  EXPECT_EQ(store.grad(w)(0, 0), 0.0);
}

TEST(Adam, DecreasesQuadratic) {
  ParamStore store;
  const auto w = store.add("w", 1, 1);
  store.value(w)(0, 0) = 1.0;
  Adam adam(AdamConfig{0.05});
  double previous = 1.0;
  for (int i = 0; i < 2; ++i) {
    store.grad(w)(0, 0) = 2.0 * store.value(w)(0, 0);
    adam.step(store);
    const double f = store.value(w)(0, 0) * store.value(w)(0, 0);
    EXPECT_LT(f, previous);
    previous = f;
  }
}

TEST(Adam, SkipsFrozenParameters) {
  ParamStore store;
  const auto w = store.add("w", 1, 1, false);
  store.grad(w)(0, 0) = 1.0;
  Adam adam;
  adam.step(store);
  EXPECT_EQ(store.value(w)(0, 0), 0.0);
}

TEST(Adam, NonFiniteGradientNamesParameter) {
  ParamStore store;
  const auto w = store.add("encoder.U", 1, 1);
  store.grad(w)(0, 0) = std::nan("");
  Adam adam;
  try {
    adam.step(store);
    FAIL();
  } catch (const std::runtime_error& e) {
    EXPECT_NE(std::string(e.what()).find("encoder.U"), std::string::npos);
  }
}

TEST(GradCheck, QuadraticIsExact) {
  ParamStore store;
  const auto w = store.add("w", 3, 3);
  store.init_uniform(w, 1.0, 9);
  LossFn loss = [&](ParamStore& s, bool with_grad) {
    if (with_grad) s.grad(w) += 2.0 * s.value(w);
    return s.value(w).squaredNorm();
  };
  const Matrix before = store.value(w);
  EXPECT_LT(grad_check(loss, store).max_rel_error, 1e-8);
  EXPECT_EQ(store.value(w), before);
}

TEST(GradCheck, DetectsWrongGradient) {
  ParamStore store;
  const auto w = store.add("w", 2, 1);
  store.value(w) << 1.0, -2.0;
  LossFn loss = [&](ParamStore& s, bool with_grad) {
    if (with_grad) s.grad(w) += 3.0 * s.value(w);
    return s.value(w).squaredNorm();
  };
  const auto report = grad_check(loss, store);
  EXPECT_GT(report.max_rel_error, 0.1);
  EXPECT_EQ(report.worst_param, "w");
}

TEST(Substream, TagsAndIndicesSelectReproducibleStreams) {
  EXPECT_EQ(substream(1, "alpha")(), substream(1, "alpha")());
  EXPECT_NE(substream(1, "alpha")(), substream(1, "beta")());
  EXPECT_NE(substream(1, "alpha")(), substream(2, "alpha")());
  EXPECT_NE(substream(0, std::uint64_t{1})(), substream(0, std::uint64_t{2})());
}

TEST(LogDet, SingularMatrixFallsBackToJitter) {
  const Matrix ones = Matrix::Ones(2, 2);
  // eigenvalues 2 and 0, shifted by the jitter
  EXPECT_NEAR(logdet_psd(ones).value, std::log((2.0 + kPsdJitter) * kPsdJitter), 1e-9);
}
