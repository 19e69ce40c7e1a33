#pragma once

#include <random>
#include <string>

#include "pmd/model.hpp"

namespace pmd {

/// Forward-model parameters for synthetic data. `truth` is the parameter vector
/// the data are drawn at: (theta1, theta2) for the tied mixture, the weight
/// vector for logistic regression, the mean for the conjugate Gaussian.
struct SyntheticParams {
  Vector truth;
  TiedMixtureParams mixture;
  double obs_var = 1.0;
};

inline Dataset generate_synthetic(const std::string& kind, const SyntheticParams& params, std::uint64_t seed,
                                  std::size_t n) {
  if (n == 0) throw Error(ErrorKind::InvalidParameter, "synthetic dataset must contain at least one point");
  Rng rng = make_rng(seed, 0x5eed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const auto rows = static_cast<Eigen::Index>(n);
  const Vector& truth = params.truth;
  Dataset data;

  if (kind == "tied_mixture") {
    validate(params.mixture);
    if (truth.size() != 2) throw Error(ErrorKind::InvalidParameter, "tied mixture truth needs two values");
    data.points.resize(rows, 1);
    for (Eigen::Index i = 0; i < rows; ++i) {
      const bool first = unif(rng) < params.mixture.mix_p;
      const double mean = first ? truth(0) : truth(0) + truth(1);
      data.points(i, 0) = mean + params.mixture.sigma_x * normal(rng);
    }
  } else if (kind == "logistic") {
    if (truth.size() < 1) throw Error(ErrorKind::InvalidParameter, "logistic truth needs at least one weight");
    const auto d = truth.size();
    data.has_labels = true;
    data.points.resize(rows, d + 1);
    for (Eigen::Index i = 0; i < rows; ++i) {
      for (Eigen::Index j = 0; j < d; ++j) data.points(i, j) = normal(rng);
      const double p = detail::sigmoid(data.points.row(i).head(d).dot(truth.transpose()));
      data.points(i, d) = unif(rng) < p ? 1.0 : -1.0;
    }
  } else if (kind == "conjugate_gaussian") {
    if (truth.size() < 1) throw Error(ErrorKind::InvalidParameter, "conjugate gaussian truth needs a mean");
    if (!(params.obs_var > 0.0)) throw Error(ErrorKind::InvalidParameter, "obs_var must be positive");
    const double sd = std::sqrt(params.obs_var);
    data.points.resize(rows, truth.size());
    for (Eigen::Index i = 0; i < rows; ++i)
      for (Eigen::Index j = 0; j < truth.size(); ++j) data.points(i, j) = truth(j) + sd * normal(rng);
  } else {
    throw Error(ErrorKind::InvalidParameter, "unknown synthetic generator '" + kind + "'");
  }
  return data;
}

}  // namespace pmd
