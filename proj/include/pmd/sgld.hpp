#pragma once

#include <cmath>
#include <vector>

#include "pmd/mirror_descent.hpp"

namespace pmd {

/// eps_t = a (b + t)^{-kappa}.
struct SgldConfig {
  double step_a = 1e-3;
  double step_b = 1.0;
  double step_kappa = 0.55;
  std::size_t batch_size = 10;
  std::size_t iterations = 1000;
  std::size_t burn_in = 100;
  std::size_t thin = 1;
  std::uint64_t rng_seed = 0;
};

inline void validate(const SgldConfig& c, const Model& model) {
  if (!(c.step_a > 0.0) || !(c.step_b >= 0.0)) throw Error(ErrorKind::ConfigMismatch, "SGLD needs a > 0 and b >= 0");
  if (!(c.step_kappa > 0.5 && c.step_kappa <= 1.0)) throw Error(ErrorKind::ConfigMismatch, "SGLD kappa must lie in (0.5, 1]");
  if (c.batch_size < 1 || c.batch_size > model.data_size())
    throw Error(ErrorKind::ConfigMismatch, "batch_size must lie in [1, N]");
  if (c.burn_in >= c.iterations) throw Error(ErrorKind::ConfigMismatch, "burn_in must be below iterations");
  if (c.thin < 1) throw Error(ErrorKind::ConfigMismatch, "thin must be positive");
  if (!model.has_gradients()) throw Error(ErrorKind::GradientUnavailable, model.name() + " has no gradients");
}

inline double sgld_stepsize(const SgldConfig& c, std::size_t t) {
  return c.step_a * std::pow(c.step_b + static_cast<double>(t), -c.step_kappa);
}

/// grad log p(theta) + (N/|B|) sum_{x in B} grad log p(x|theta).
inline Vector stochastic_log_posterior_grad(const Model& model, Batch batch, VecRef theta) {
  if (!model.has_gradients()) throw Error(ErrorKind::GradientUnavailable, model.name() + " has no gradients");
  if (batch.empty()) throw Error(ErrorKind::InvalidArgument, "empty mini-batch");
  const Dataset& data = model.data();
  Vector lik = Vector::Zero(theta.size());
  for (std::size_t n : batch) lik += model.grad_log_lik(data.row(n), theta);
  const double scale = static_cast<double>(data.size()) / static_cast<double>(batch.size());
  return model.grad_log_prior(theta) + scale * lik;
}

/// theta' = theta + (eps/2) grad + sqrt(eps) z, z ~ N(0, I).
inline Vector sgld_step(VecRef theta, const Model& model, Batch batch, double eps, Rng& rng) {
  if (!(eps >= 0.0)) throw Error(ErrorKind::InvalidArgument, "SGLD step must be nonnegative");
  const Vector grad = stochastic_log_posterior_grad(model, batch, theta);
  if (eps == 0.0) return theta;
  std::normal_distribution<double> normal(0.0, 1.0);
  Vector out = theta + 0.5 * eps * grad;
  const double noise = std::sqrt(eps);
  for (Eigen::Index j = 0; j < out.size(); ++j) out(j) += noise * normal(rng);
  return out;
}

struct SgldResult {
  /// Kept samples in chain order, one per row.
  Matrix samples;
  /// The same samples with uniform weights.
  ParticleCloud cloud;
};

/// Single chain started from one prior draw. Keeps iteration t when t > burn_in
/// and (t - burn_in) is a multiple of thin. `on_keep` is called with the number
/// of data visited so far after each kept sample.
template <class OnKeep>
SgldResult run_sgld(const SgldConfig& config, const Model& model, Rng& rng, OnKeep&& on_keep) {
  validate(config, model);
  const std::uint64_t base_seed = rng();
  Rng init_rng = make_rng(base_seed, 0);
  Vector theta = model.sample_prior(init_rng, 1).row(0).transpose();
  MinibatchSampler batches(model.data_size(), config.batch_size, BatchSampling::WithReplacement);

  const std::size_t kept = (config.iterations - config.burn_in) / config.thin;
  Matrix samples(static_cast<Eigen::Index>(kept), theta.size());
  Eigen::Index row = 0;
  Rng chain_rng = make_rng(base_seed, 1);
  for (std::size_t t = 1; t <= config.iterations; ++t) {
    const Batch batch = batches.next(chain_rng);
    theta = sgld_step(theta, model, batch, sgld_stepsize(config, t), chain_rng);
    if (t > config.burn_in && (t - config.burn_in) % config.thin == 0) {
      samples.row(row++) = theta.transpose();
      on_keep(t * config.batch_size, samples.topRows(row));
    }
  }
  ParticleCloud cloud = ParticleCloud::uniform(samples);
  return {std::move(samples), std::move(cloud)};
}

inline SgldResult run_sgld(const SgldConfig& config, const Model& model, Rng& rng) {
  return run_sgld(config, model, rng, [](std::size_t, const auto&) {});
}

}  // namespace pmd
