#pragma once

#include <cmath>
#include <memory>
#include <string>
#include <utility>

#include "pmd/common.hpp"

namespace pmd {

/// N data vectors, one per row. When `has_labels` is set the last column is a
/// label in {-1, +1} and the first `feature_dim` columns are features, so a
/// supervised datum is drawn from a mini-batch exactly like an unsupervised one.
struct Dataset {
  Matrix points;
  bool has_labels = false;

  std::size_t size() const { return static_cast<std::size_t>(points.rows()); }
  std::size_t feature_dim() const {
    return static_cast<std::size_t>(points.cols()) - (has_labels ? 1 : 0);
  }
  VecRef row(std::size_t n) const { return points.row(static_cast<Eigen::Index>(n)).transpose(); }
};

inline void validate_dataset(const Dataset& data) {
  if (data.points.rows() < 1) throw Error(ErrorKind::InvalidParameter, "dataset must contain at least one point");
  if (data.points.cols() < (data.has_labels ? 2 : 1))
    throw Error(ErrorKind::InvalidData, "dataset rows have no feature columns");
  if (!data.points.allFinite()) throw Error(ErrorKind::InvalidData, "dataset contains NaN or Inf");
}

/// Prior p(theta) and per-datum likelihood p(x|theta) over a fixed dataset.
/// Every evaluation is const and free of interior mutation, so a model may be
/// shared across threads.
class Model {
 public:
  explicit Model(Dataset data) : data_(std::move(data)) { validate_dataset(data_); }
  virtual ~Model() = default;

  virtual std::size_t dim() const = 0;
  virtual std::string name() const = 0;

  const Dataset& data() const { return data_; }
  std::size_t data_size() const { return data_.size(); }

  virtual double log_prior(VecRef theta) const = 0;
  virtual double log_lik(VecRef x, VecRef theta) const = 0;

  virtual bool has_gradients() const { return false; }
  virtual Vector grad_log_prior(VecRef /*theta*/) const {
    throw Error(ErrorKind::GradientUnavailable, name() + " has no prior gradient");
  }
  virtual Vector grad_log_lik(VecRef /*x*/, VecRef /*theta*/) const {
    throw Error(ErrorKind::GradientUnavailable, name() + " has no likelihood gradient");
  }

  /// `count` i.i.d. draws from the prior, one per row.
  virtual Matrix sample_prior(Rng& rng, std::size_t count) const = 0;

 private:
  Dataset data_;
};

using ModelPtr = std::shared_ptr<const Model>;

namespace detail {

inline double log_normal_iso(VecRef x, VecRef mean, double var) {
  const double d = static_cast<double>(x.size());
  return -0.5 * (x - mean).squaredNorm() / var - 0.5 * d * (kLogTwoPi + std::log(var));
}

inline double log_normal_1d(double x, double mean, double var) {
  const double z = x - mean;
  return -0.5 * z * z / var - 0.5 * (kLogTwoPi + std::log(var));
}

/// log(1 + exp(z)) without overflow or loss of precision for large |z|.
inline double softplus(double z) {
  return z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z));
}

inline double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

inline Matrix sample_diag_normal(Rng& rng, std::size_t count, const Vector& mean, const Vector& stddev) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix out(static_cast<Eigen::Index>(count), mean.size());
  for (Eigen::Index i = 0; i < out.rows(); ++i)
    for (Eigen::Index j = 0; j < out.cols(); ++j) out(i, j) = mean(j) + stddev(j) * normal(rng);
  return out;
}

}  // namespace detail

/// theta ~ N(prior_mean, prior_var I), x | theta ~ N(theta, obs_var I).
class ConjugateGaussianModel final : public Model {
 public:
  ConjugateGaussianModel(Vector prior_mean, double prior_var, double obs_var, Dataset data)
      : Model(std::move(data)), prior_mean_(std::move(prior_mean)), prior_var_(prior_var), obs_var_(obs_var) {
    if (!(prior_var_ > 0.0) || !(obs_var_ > 0.0))
      throw Error(ErrorKind::InvalidParameter, "conjugate gaussian variances must be positive");
    if (prior_mean_.size() < 1) throw Error(ErrorKind::InvalidParameter, "dimension must be positive");
    if (this->data().has_labels || static_cast<Eigen::Index>(this->data().feature_dim()) != prior_mean_.size())
      throw Error(ErrorKind::InvalidData, "data dimension must equal the parameter dimension");
  }

  std::size_t dim() const override { return static_cast<std::size_t>(prior_mean_.size()); }
  std::string name() const override { return "conjugate_gaussian"; }

  const Vector& prior_mean() const { return prior_mean_; }
  double prior_var() const { return prior_var_; }
  double obs_var() const { return obs_var_; }

  double log_prior(VecRef theta) const override { return detail::log_normal_iso(theta, prior_mean_, prior_var_); }
  double log_lik(VecRef x, VecRef theta) const override { return detail::log_normal_iso(x, theta, obs_var_); }

  bool has_gradients() const override { return true; }
  Vector grad_log_prior(VecRef theta) const override { return (prior_mean_ - theta) / prior_var_; }
  Vector grad_log_lik(VecRef x, VecRef theta) const override { return (x - theta) / obs_var_; }

  Matrix sample_prior(Rng& rng, std::size_t count) const override {
    return detail::sample_diag_normal(rng, count, prior_mean_,
                                      Vector::Constant(prior_mean_.size(), std::sqrt(prior_var_)));
  }

 private:
  Vector prior_mean_;
  double prior_var_;
  double obs_var_;
};

/// Two-component Gaussian mixture with tied means:
///   x ~ p N(theta1, sx^2) + (1-p) N(theta1 + theta2, sx^2),
///   theta1 ~ N(0, s1^2), theta2 ~ N(0, s2^2).
/// The posterior is symmetric under (theta1, theta2) -> (theta1 + theta2, -theta2)
/// when p = 1/2, which gives the second mode.
struct TiedMixtureParams {
  double sigma1 = 1.0;
  double sigma2 = 1.0;
  double sigma_x = 2.5;
  double mix_p = 0.5;
};

inline void validate(const TiedMixtureParams& p) {
  if (!(p.sigma1 > 0.0) || !(p.sigma2 > 0.0) || !(p.sigma_x > 0.0))
    throw Error(ErrorKind::InvalidParameter, "tied mixture scales must be positive");
  if (!(p.mix_p > 0.0 && p.mix_p < 1.0)) throw Error(ErrorKind::InvalidParameter, "mix_p must lie in (0, 1)");
}

class TiedMixtureModel final : public Model {
 public:
  TiedMixtureModel(const TiedMixtureParams& params, Dataset data) : Model(std::move(data)), p_(params) {
    validate(p_);
    if (this->data().has_labels || this->data().feature_dim() != 1)
      throw Error(ErrorKind::InvalidData, "tied mixture data must be scalar");
    log_p_ = std::log(p_.mix_p);
    log_1mp_ = std::log1p(-p_.mix_p);
  }

  std::size_t dim() const override { return 2; }
  std::string name() const override { return "tied_mixture"; }
  const TiedMixtureParams& params() const { return p_; }

  double log_prior(VecRef theta) const override {
    return detail::log_normal_1d(theta(0), 0.0, p_.sigma1 * p_.sigma1) +
           detail::log_normal_1d(theta(1), 0.0, p_.sigma2 * p_.sigma2);
  }

  double log_lik(VecRef x, VecRef theta) const override {
    const double vx = p_.sigma_x * p_.sigma_x;
    const double a = log_p_ + detail::log_normal_1d(x(0), theta(0), vx);
    const double b = log_1mp_ + detail::log_normal_1d(x(0), theta(0) + theta(1), vx);
    const double hi = std::max(a, b);
    return hi + std::log1p(std::exp(std::min(a, b) - hi));
  }

  bool has_gradients() const override { return true; }

  Vector grad_log_prior(VecRef theta) const override {
    Vector g(2);
    g << -theta(0) / (p_.sigma1 * p_.sigma1), -theta(1) / (p_.sigma2 * p_.sigma2);
    return g;
  }

  Vector grad_log_lik(VecRef x, VecRef theta) const override {
    const double vx = p_.sigma_x * p_.sigma_x;
    const double a = log_p_ + detail::log_normal_1d(x(0), theta(0), vx);
    const double b = log_1mp_ + detail::log_normal_1d(x(0), theta(0) + theta(1), vx);
    // responsibility of the shifted component
    const double r = detail::sigmoid(b - a);
    const double r1 = (x(0) - theta(0)) / vx;
    const double r2 = (x(0) - theta(0) - theta(1)) / vx;
    Vector g(2);
    g << (1.0 - r) * r1 + r * r2, r * r2;
    return g;
  }

  Matrix sample_prior(Rng& rng, std::size_t count) const override {
    Vector sd(2);
    sd << p_.sigma1, p_.sigma2;
    return detail::sample_diag_normal(rng, count, Vector::Zero(2), sd);
  }

 private:
  TiedMixtureParams p_;
  double log_p_ = 0.0;
  double log_1mp_ = 0.0;
};

/// Bayesian logistic regression with a N(0, prior_var I) prior on the weights.
/// Each datum is (x_1..x_D, y) with y in {-1, +1}; p(y|x,w) = 1 / (1 + exp(-y w.x)).
class LogisticModel final : public Model {
 public:
  LogisticModel(Dataset data, double prior_var) : Model(std::move(data)), prior_var_(prior_var) {
    if (!(prior_var_ > 0.0)) throw Error(ErrorKind::InvalidParameter, "prior_var must be positive");
    if (!this->data().has_labels) throw Error(ErrorKind::InvalidData, "logistic regression needs labelled data");
    const auto& pts = this->data().points;
    for (Eigen::Index n = 0; n < pts.rows(); ++n) {
      const double y = pts(n, pts.cols() - 1);
      if (y != 1.0 && y != -1.0)
        throw Error(ErrorKind::InvalidData, "label at row " + std::to_string(n) + " is not in {-1, +1}");
    }
    dim_ = this->data().feature_dim();
  }

  std::size_t dim() const override { return dim_; }
  std::string name() const override { return "logistic"; }
  double prior_var() const { return prior_var_; }

  double log_prior(VecRef theta) const override {
    return detail::log_normal_iso(theta, Vector::Zero(theta.size()), prior_var_);
  }

  double log_lik(VecRef x, VecRef theta) const override {
    const auto d = static_cast<Eigen::Index>(dim_);
    const double margin = x(d) * x.head(d).dot(theta);
    return -detail::softplus(-margin);
  }

  bool has_gradients() const override { return true; }
  Vector grad_log_prior(VecRef theta) const override { return -theta / prior_var_; }

  Vector grad_log_lik(VecRef x, VecRef theta) const override {
    const auto d = static_cast<Eigen::Index>(dim_);
    const double y = x(d);
    const double margin = y * x.head(d).dot(theta);
    return (y * detail::sigmoid(-margin)) * x.head(d);
  }

  Matrix sample_prior(Rng& rng, std::size_t count) const override {
    const auto d = static_cast<Eigen::Index>(dim_);
    return detail::sample_diag_normal(rng, count, Vector::Zero(d), Vector::Constant(d, std::sqrt(prior_var_)));
  }

 private:
  double prior_var_;
  std::size_t dim_ = 0;
};

inline ModelPtr make_conjugate_gaussian(Vector prior_mean, double prior_var, double obs_var, Dataset data) {
  return std::make_shared<ConjugateGaussianModel>(std::move(prior_mean), prior_var, obs_var, std::move(data));
}

inline ModelPtr make_tied_mixture(double sigma1, double sigma2, double sigma_x, double mix_p, Dataset data) {
  return std::make_shared<TiedMixtureModel>(TiedMixtureParams{sigma1, sigma2, sigma_x, mix_p}, std::move(data));
}

inline ModelPtr make_logistic(Dataset data, double prior_var) {
  return std::make_shared<LogisticModel>(std::move(data), prior_var);
}

}  // namespace pmd
