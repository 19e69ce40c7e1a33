#include <cmath>
#include <numbers>

#include <gtest/gtest.h>

#include "pmd/diagnostics.hpp"
#include "pmd/model.hpp"
#include "pmd/synthetic.hpp"
#include "test_support.hpp"

using namespace pmd;
using pmd::testing::column;
using pmd::testing::finite_difference;
using pmd::testing::relative_error;
using pmd::testing::vec;

namespace {

// Grid posterior moments of a 1-D model, independent of the closed form.
std::pair<double, double> grid_moments(const Model& model, double lo, double hi) {
  const GridOracle oracle = build_grid_oracle(model, {Axis{lo, hi, 4000}});
  return {oracle.mean()(0), oracle.variance()(0)};
}

Dataset labelled(const Matrix& x, const Vector& y) {
  Dataset d;
  d.has_labels = true;
  d.points.resize(x.rows(), x.cols() + 1);
  d.points.leftCols(x.cols()) = x;
  d.points.col(x.cols()) = y;
  return d;
}

}  // namespace

TEST(ConjugateGaussian, SingleDatumPosterior) {
  auto model = make_conjugate_gaussian(vec({0.0}), 1.0, 1.0, column({2.0}));
  const auto [mean, var] = grid_moments(*model, -6.0, 8.0);
  EXPECT_NEAR(mean, 1.0, 1e-6);
  EXPECT_NEAR(var, 0.5, 1e-5);
}

TEST(ConjugateGaussian, TwoDataPosterior) {
  auto model = make_conjugate_gaussian(vec({0.0}), 1.0, 1.0, column({1.0, 3.0}));
  const auto [mean, var] = grid_moments(*model, -6.0, 8.0);
  EXPECT_NEAR(mean, 4.0 / 3.0, 1e-6);
  EXPECT_NEAR(var, 1.0 / 3.0, 1e-5);
}

TEST(ConjugateGaussian, LogDensities) {
  auto model = make_conjugate_gaussian(vec({0.5, -1.0}), 2.0, 0.5, Dataset{Matrix::Zero(1, 2)});
  const Vector theta = vec({1.0, 1.0});
  const double expected_prior = -std::log(2.0 * std::numbers::pi * 2.0) - (0.25 + 4.0) / 4.0;
  EXPECT_NEAR(model->log_prior(theta), expected_prior, 1e-12);
  const double expected_lik = -std::log(2.0 * std::numbers::pi * 0.5) - 2.0 / 1.0;
  EXPECT_NEAR(model->log_lik(vec({0.0, 0.0}), theta), expected_lik, 1e-12);
}

TEST(ConjugateGaussian, RejectsBadParameters) {
  EXPECT_THROW(make_conjugate_gaussian(vec({0.0}), 0.0, 1.0, column({1.0})), Error);
  EXPECT_THROW(make_conjugate_gaussian(vec({0.0}), 1.0, -1.0, column({1.0})), Error);
  try {
    make_conjugate_gaussian(vec({0.0}), 1.0, 1.0, Dataset{Matrix(0, 1)});
    FAIL() << "empty dataset accepted";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::InvalidParameter);
  }
  EXPECT_THROW(make_conjugate_gaussian(vec({0.0, 0.0}), 1.0, 1.0, column({1.0})), Error);
}

TEST(TiedMixture, DegenerateSecondMean) {
  for (double p : {0.1, 0.5, 0.9}) {
    auto model = make_tied_mixture(1.0, 1.0, 2.5, p, column({0.7}));
    const double x = 0.7;
    const double expected = -0.5 * std::log(2.0 * std::numbers::pi * 6.25) - 0.5 * std::pow(x - 0.3, 2) / 6.25;
    EXPECT_NEAR(model->log_lik(vec({x}), vec({0.3, 0.0})), expected, 1e-12);
  }
}

TEST(TiedMixture, GradientAtReferencePoint) {
  auto model = make_tied_mixture(1.0, 1.0, 2.5, 0.5, column({0.5}));
  const Vector theta = vec({0.3, -0.7});
  const Vector x = vec({0.5});
  const Vector fd = finite_difference([&](const Vector& t) { return model->log_lik(x, t); }, theta);
  EXPECT_LT(relative_error(model->grad_log_lik(x, theta), fd), 1e-4);
}

TEST(TiedMixture, RejectsBadParameters) {
  for (double p : {0.0, 1.0, -0.2, 1.5}) {
    try {
      make_tied_mixture(1.0, 1.0, 2.5, p, column({0.0}));
      FAIL() << "mix_p " << p << " accepted";
    } catch (const Error& e) {
      EXPECT_EQ(e.kind(), ErrorKind::InvalidParameter);
    }
  }
  EXPECT_THROW(make_tied_mixture(0.0, 1.0, 2.5, 0.5, column({0.0})), Error);
  EXPECT_THROW(make_tied_mixture(1.0, 1.0, -2.5, 0.5, column({0.0})), Error);
}

TEST(TiedMixture, ReferenceConfigurationIsBimodal) {
  SyntheticParams sp;
  sp.truth = vec({1.0, -2.0});
  sp.mixture = {1.0, 1.0, 2.5, 0.5};
  auto model = make_tied_mixture(1.0, 1.0, 2.5, 0.5, generate_synthetic("tied_mixture", sp, 11, 1000));
  // The likelihood is symmetric under (t1, t2) -> (t1 + t2, -t2) when p = 1/2.
  const Vector a = vec({1.0, -2.0});
  const Vector b = vec({-1.0, 2.0});
  double la = 0.0, lb = 0.0;
  for (std::size_t n = 0; n < model->data_size(); ++n) {
    la += model->log_lik(model->data().row(n), a);
    lb += model->log_lik(model->data().row(n), b);
  }
  EXPECT_NEAR(la, lb, 1e-9);
}

TEST(Logistic, ZeroWeightsGiveLogHalf) {
  Matrix x(3, 2);
  x << 1.0, 2.0, -3.0, 0.5, 10.0, -7.0;
  auto model = make_logistic(labelled(x, vec({1.0, -1.0, 1.0})), 1.0);
  for (std::size_t n = 0; n < 3; ++n) EXPECT_NEAR(model->log_lik(model->data().row(n), vec({0.0, 0.0})), -std::log(2.0), 1e-15);
}

TEST(Logistic, LargeMarginDoesNotOverflow) {
  Matrix x(1, 1);
  x << 1.0;
  auto model = make_logistic(labelled(x, vec({1.0})), 1.0);
  // softplus(-30) = log1p(exp(-30)), by a high-precision evaluation.
  EXPECT_NEAR(model->log_lik(model->data().row(0), vec({30.0})), -9.357622968840175e-14, 1e-25);
  const double far = model->log_lik(model->data().row(0), vec({-800.0}));
  EXPECT_NEAR(far, -800.0, 1e-9);
  EXPECT_TRUE(std::isfinite(far));
}

TEST(Logistic, RejectsBadLabels) {
  Matrix x(2, 1);
  x << 1.0, 2.0;
  try {
    make_logistic(labelled(x, vec({1.0, 0.0})), 1.0);
    FAIL() << "label 0 accepted";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::InvalidData);
  }
  EXPECT_THROW(make_logistic(labelled(x, vec({1.0, -1.0})), 0.0), Error);
}

TEST(Properties, GradientsMatchFiniteDifferences) {
  Rng rng = make_rng(3);
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix lx(1, 3);
  lx << 0.4, -1.2, 0.8;
  std::vector<ModelPtr> models = {
      make_conjugate_gaussian(vec({0.3, -0.2}), 1.5, 0.7, Dataset{Matrix::Constant(1, 2, 0.25)}),
      make_tied_mixture(1.0, 1.0, 2.5, 0.5, column({0.5})),
      make_tied_mixture(3.16, 1.0, 1.41, 0.3, column({-1.5})),
      make_logistic(labelled(lx, vec({-1.0})), 2.0),
  };
  for (const auto& model : models) {
    const Vector x = model->data().row(0);
    for (int k = 0; k < 100; ++k) {
      Vector theta(static_cast<Eigen::Index>(model->dim()));
      for (auto& v : theta) v = 1.5 * normal(rng);
      const Vector fl = finite_difference([&](const Vector& t) { return model->log_lik(x, t); }, theta);
      const Vector fp = finite_difference([&](const Vector& t) { return model->log_prior(t); }, theta);
      EXPECT_LT(relative_error(model->grad_log_lik(x, theta), fl), 1e-4) << model->name();
      EXPECT_LT(relative_error(model->grad_log_prior(theta), fp), 1e-4) << model->name();
    }
  }
}

TEST(Properties, LikelihoodCeilings) {
  Rng rng = make_rng(5);
  std::normal_distribution<double> normal(0.0, 3.0);
  SyntheticParams sp;
  sp.truth = vec({0.5, -1.0, 2.0});
  auto logistic = make_logistic(generate_synthetic("logistic", sp, 1, 200), 1.0);
  auto mixture = make_tied_mixture(1.0, 1.0, 2.5, 0.5, column({-3.0, 0.0, 0.1, 4.0}));
  const double mixture_ceiling = -std::log(2.5 * std::sqrt(2.0 * std::numbers::pi));
  for (int k = 0; k < 200; ++k) {
    const Vector w = vec({normal(rng), normal(rng), normal(rng)});
    for (std::size_t n = 0; n < logistic->data_size(); n += 7) EXPECT_LE(logistic->log_lik(logistic->data().row(n), w), 0.0);
    const Vector t = vec({normal(rng), normal(rng)});
    for (std::size_t n = 0; n < mixture->data_size(); ++n)
      EXPECT_LE(mixture->log_lik(mixture->data().row(n), t), mixture_ceiling + 1e-12);
  }
}

TEST(Properties, PriorSamplerMoments) {
  const std::size_t count = 10000;
  auto check = [&](const Model& model, const Vector& mean, const Vector& var) {
    Rng rng = make_rng(17);
    const Matrix s = model.sample_prior(rng, count);
    ASSERT_EQ(static_cast<std::size_t>(s.rows()), count);
    const Vector m = s.colwise().mean().transpose();
    for (Eigen::Index j = 0; j < m.size(); ++j) {
      EXPECT_LT(std::abs(m(j) - mean(j)), 3.0 * std::sqrt(var(j) / count)) << model.name();
      const double v = (s.col(j).array() - m(j)).square().sum() / (count - 1.0);
      // Sample variance has standard error var * sqrt(2 / (n - 1)) under normality.
      EXPECT_LT(std::abs(v - var(j)), 3.0 * var(j) * std::sqrt(2.0 / (count - 1.0))) << model.name();
    }
  };
  check(*make_conjugate_gaussian(vec({1.0, -2.0}), 4.0, 1.0, Dataset{Matrix::Zero(1, 2)}), vec({1.0, -2.0}), vec({4.0, 4.0}));
  check(*make_tied_mixture(3.0, 0.5, 2.5, 0.5, column({0.0})), vec({0.0, 0.0}), vec({9.0, 0.25}));
  Matrix x(1, 2);
  x << 1.0, 1.0;
  check(*make_logistic(labelled(x, vec({1.0})), 2.0), vec({0.0, 0.0}), vec({2.0, 2.0}));
}
