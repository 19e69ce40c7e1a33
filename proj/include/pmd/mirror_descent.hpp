#pragma once

#include <chrono>
#include <functional>
#include <map>
#include <numeric>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "pmd/density.hpp"
#include "pmd/model.hpp"
#include "pmd/schedule.hpp"

namespace pmd {

using Batch = std::span<const std::size_t>;

/// (N / |B|) sum_{x in B} log p(x | theta): the likelihood part of the stochastic
/// functional gradient.
inline double minibatch_log_lik(const Model& model, Batch batch, VecRef theta) {
  if (batch.empty()) throw Error(ErrorKind::InvalidArgument, "empty mini-batch");
  const Dataset& data = model.data();
  double acc = 0.0;
  for (std::size_t n : batch) acc += model.log_lik(data.row(n), theta);
  if (batch.size() == data.size()) return acc;
  return static_cast<double>(data.size()) / static_cast<double>(batch.size()) * acc;
}

inline void check_step(double gamma) {
  if (!(gamma >= 0.0 && gamma <= 1.0)) throw Error(ErrorKind::InvalidArgument, "step size must lie in [0, 1]");
}

/// Exact prox-mapping restricted to a fixed support:
///   log alpha_i <- (1 - gamma) log alpha_i + gamma [ N-scaled log-lik + log p/pi ]
/// then renormalized. For prior-drawn particles the base ratio is zero and this is
/// alpha_i <- alpha_i^{1-gamma} p(x|theta_i)^{N gamma}.
inline ParticleCloud reweight_particles(const ParticleCloud& cloud, const Model& model, Batch batch, double gamma) {
  check_step(gamma);
  if (gamma == 0.0) return cloud;
  const auto m = cloud.points.rows();
  Vector logw(m);
  for (Eigen::Index i = 0; i < m; ++i) {
    const double keep = gamma == 1.0 ? 0.0 : (1.0 - gamma) * cloud.log_weights(i);
    const double ratio = cloud.log_base_ratio(i);
    logw(i) = keep + gamma * (minibatch_log_lik(model, batch, cloud.point(static_cast<std::size_t>(i))) + ratio);
  }
  return ParticleCloud(cloud.points, logw, cloud.log_base_ratio);
}

namespace detail {

/// Weighted-KDE update given fresh points drawn from the current estimate q and
/// their log q values: alpha_i ∝ q(theta_i)^{-gamma} p(theta_i)^{gamma} lik^{N gamma}.
inline KdeDensity reweight_to_kde(Matrix points, const Vector& log_q, const Model& model, Batch batch, double gamma,
                                  double h_next, bool standardize) {
  const auto m = points.rows();
  Vector logw = Vector::Zero(m);
  if (gamma > 0.0) {
    for (Eigen::Index i = 0; i < m; ++i) {
      const VecRef theta = points.row(i).transpose();
      logw(i) = gamma * (model.log_prior(theta) - log_q(i) + minibatch_log_lik(model, batch, theta));
    }
  }
  Vector scales;
  if (standardize) scales = weighted_std(points, simplex_weights(logw));
  return KdeDensity(std::move(points), logw, h_next, std::move(scales));
}

}  // namespace detail

/// One weighted-KDE inexact prox step: resample m_next points from `kde`, weight
/// them by q^{-gamma} p^{gamma} lik^{N gamma} and smooth with bandwidth h_next.
/// With `standardize`, h_next is measured in units of the weighted per-dimension
/// standard deviation of the new centers.
inline KdeDensity kde_prox_step(const KdeDensity& kde, const Model& model, Batch batch, double gamma,
                                std::size_t m_next, double h_next, Rng& rng, bool standardize = true,
                                Resampling scheme = Resampling::Multinomial) {
  check_step(gamma);
  if (m_next < 1) throw Error(ErrorKind::InvalidArgument, "m_next must be positive");
  if (!(h_next > 0.0)) throw Error(ErrorKind::InvalidArgument, "bandwidth must be positive");
  Matrix points = kde_sample(kde, rng, m_next, nullptr, scheme);
  Vector log_q(points.rows());
  for (Eigen::Index i = 0; i < points.rows(); ++i) log_q(i) = kde.log_density(points.row(i).transpose());
  return detail::reweight_to_kde(std::move(points), log_q, model, batch, gamma, h_next, standardize);
}

/// The same step taken from the prior, i.e. q = p: the prior factors cancel.
inline KdeDensity kde_prox_step_from_prior(const Model& model, Batch batch, double gamma, std::size_t m_next,
                                           double h_next, Rng& rng, bool standardize = true) {
  check_step(gamma);
  Matrix points = model.sample_prior(rng, m_next);
  Vector log_q(points.rows());
  for (Eigen::Index i = 0; i < points.rows(); ++i) log_q(i) = model.log_prior(points.row(i).transpose());
  return detail::reweight_to_kde(std::move(points), log_q, model, batch, gamma, h_next, standardize);
}

/// sum_i alpha_i f(theta_i).
template <class F>
double integral_estimate(const ParticleCloud& cloud, F&& f) {
  double acc = 0.0;
  for (std::size_t i = 0; i < cloud.size(); ++i)
    acc += std::exp(cloud.log_weights(static_cast<Eigen::Index>(i))) * f(cloud.point(i));
  return acc;
}

enum class Strategy { WeightedParticles, WeightedKde, SwitchAt };
enum class BatchSampling { WithReplacement, Epoch };

struct BandwidthSpec {
  double beta = 2.0;
  /// Multiplier c in h = c m^{-1/(d+2beta)}. Unset: anchored at the first KDE
  /// step to `median_factor` x median pairwise distance of the prior draws.
  std::optional<double> scale;
  double median_factor = 0.1;
  bool standardize = true;
};

struct PmdConfig {
  Strategy strategy = Strategy::WeightedKde;
  std::size_t t_switch = 1;
  std::size_t batch_size = 1;
  std::size_t iterations = 100;
  StepSchedule step = EtaOverT{1.0};
  ParticleSchedule particles = FixedCount{1000};
  BandwidthSpec bandwidth;
  BatchSampling sampling = BatchSampling::WithReplacement;
  Resampling resampling = Resampling::Systematic;
  std::uint64_t rng_seed = 0;
  /// Iterations recorded in addition to the geometric grid 1, 2, 4, ... and T.
  std::set<std::size_t> extra_records;
};

inline void validate(const PmdConfig& config, const Model& model) {
  if (config.iterations < 1) throw Error(ErrorKind::ConfigMismatch, "iterations must be positive");
  if (config.batch_size < 1 || config.batch_size > model.data_size())
    throw Error(ErrorKind::ConfigMismatch, "batch_size must lie in [1, N]");
  if (config.strategy == Strategy::SwitchAt && (config.t_switch < 1 || config.t_switch > config.iterations))
    throw Error(ErrorKind::ConfigMismatch, "t_switch must lie in [1, T]");
  if (!(config.bandwidth.beta > 0.0)) throw Error(ErrorKind::ConfigMismatch, "bandwidth beta must be positive");
  if (config.bandwidth.scale && !(*config.bandwidth.scale > 0.0))
    throw Error(ErrorKind::ConfigMismatch, "bandwidth scale must be positive");
  validate(config.step);
  validate(config.particles);
}

/// Uniform mini-batches, either i.i.d. with replacement or as consecutive
/// slices of a per-epoch shuffle. A batch as large as the dataset is the full
/// dataset in either mode.
class MinibatchSampler {
 public:
  MinibatchSampler(std::size_t n, std::size_t batch, BatchSampling mode)
      : n_(n), batch_(batch), mode_(mode), order_(n), cursor_(n), out_(batch) {
    std::iota(order_.begin(), order_.end(), std::size_t{0});
  }

  Batch next(Rng& rng) {
    if (batch_ == n_) {
      std::iota(out_.begin(), out_.end(), std::size_t{0});
      return out_;
    }
    if (mode_ == BatchSampling::WithReplacement) {
      std::uniform_int_distribution<std::size_t> pick(0, n_ - 1);
      for (auto& b : out_) b = pick(rng);
      return out_;
    }
    for (auto& b : out_) {
      if (cursor_ == n_) {
        std::shuffle(order_.begin(), order_.end(), rng);
        cursor_ = 0;
      }
      b = order_[cursor_++];
    }
    return out_;
  }

 private:
  std::size_t n_;
  std::size_t batch_;
  BatchSampling mode_;
  std::vector<std::size_t> order_;
  std::size_t cursor_;
  std::vector<std::size_t> out_;
};

using Metrics = std::map<std::string, double>;

struct TraceRecord {
  std::size_t t = 0;
  double gamma = 0.0;
  std::size_t m = 0;
  double ess = 0.0;
  std::size_t data_visited = 0;
  double wall_seconds = 0.0;
  DensityState state;
  Metrics metrics;
};

struct InferenceTrace {
  std::vector<TraceRecord> records;
  DensityState final_state;
};

struct RunHooks {
  /// Evaluated on the state at each recorded iteration.
  std::function<Metrics(const DensityState&)> metrics;
  /// Called after every iteration with (t, state).
  std::function<void(std::size_t, const DensityState&)> observer;
};

inline std::set<std::size_t> record_iterations(const PmdConfig& config) {
  std::set<std::size_t> out;
  for (std::size_t t = 1; t <= config.iterations; t *= 2) out.insert(t);
  out.insert(config.iterations);
  for (std::size_t t : config.extra_records)
    if (t >= 1 && t <= config.iterations) out.insert(t);
  return out;
}

/// Particle mirror descent. Starts from q_1 = prior and performs `iterations`
/// stochastic prox steps; the record for iteration t holds q_{t+1}.
///
/// WeightedParticles draws its support from the prior once and only reweights.
/// WeightedKde resamples from the current KDE each step. SwitchAt runs the KDE
/// strategy before t_switch, then draws a particle pool from the KDE and
/// reweights it, carrying log p/q_kde as the base ratio of those particles.
inline InferenceTrace run_pmd(const PmdConfig& config, const Model& model, Rng& rng, const RunHooks& hooks = {}) {
  validate(config, model);
  const std::size_t d = model.dim();
  const auto records = record_iterations(config);
  const std::uint64_t base_seed = rng();
  MinibatchSampler batches(model.data_size(), config.batch_size, config.sampling);

  std::optional<DensityState> state;  // empty while q equals the prior
  std::optional<BandwidthRule> rule;
  if (config.bandwidth.scale) rule = BandwidthRule{config.bandwidth.beta, *config.bandwidth.scale};

  InferenceTrace trace;
  const auto start = std::chrono::steady_clock::now();
  std::size_t visited = 0;

  for (std::size_t t = 1; t <= config.iterations; ++t) {
    Rng step_rng = make_rng(base_seed, t);
    const Batch batch = batches.next(step_rng);
    const std::size_t m_t = particle_count(config.particles, t);
    const double gamma = stepsize(config.step, t, m_t, d);

    const bool particle_phase = config.strategy == Strategy::WeightedParticles ||
                                (config.strategy == Strategy::SwitchAt && t >= config.t_switch);
    if (particle_phase) {
      if (!state) {
        state = ParticleCloud::uniform(model.sample_prior(step_rng, m_t));
      } else if (const auto* kde = std::get_if<KdeDensity>(&*state)) {
        Matrix pts = kde_sample(*kde, step_rng, m_t, nullptr, config.resampling);
        Vector ratio(pts.rows());
        for (Eigen::Index i = 0; i < pts.rows(); ++i) {
          const VecRef theta = pts.row(i).transpose();
          ratio(i) = model.log_prior(theta) - kde->log_density(theta);
        }
        const Vector uniform = Vector::Zero(ratio.size());
        state = ParticleCloud(std::move(pts), uniform, std::move(ratio));
      }
      state = reweight_particles(std::get<ParticleCloud>(*state), model, batch, gamma);
    } else {
      const bool standardize = config.bandwidth.standardize;
      if (!state) {
        if (!rule) {
          Matrix probe = model.sample_prior(step_rng, m_t);
          if (standardize) {
            const Vector sd = weighted_std(probe, Vector::Constant(probe.rows(), 1.0 / static_cast<double>(probe.rows())));
            probe = probe.array().rowwise() / sd.transpose().array();
          }
          double anchor = config.bandwidth.median_factor * median_pairwise_distance(probe);
          if (!(anchor > 0.0)) anchor = config.bandwidth.median_factor;
          rule = anchored_rule(config.bandwidth.beta, anchor, m_t, d);
        }
        state = kde_prox_step_from_prior(model, batch, gamma, m_t, bandwidth(*rule, m_t, d), step_rng, standardize);
      } else {
        state = kde_prox_step(std::get<KdeDensity>(*state), model, batch, gamma, m_t, bandwidth(*rule, m_t, d),
                              step_rng, standardize, config.resampling);
      }
    }
    visited += config.batch_size;

    if (hooks.observer) hooks.observer(t, *state);
    if (records.count(t)) {
      TraceRecord rec;
      rec.t = t;
      rec.gamma = gamma;
      rec.m = state_size(*state);
      rec.ess = state_ess(*state);
      rec.data_visited = visited;
      rec.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
      rec.state = *state;
      if (hooks.metrics) rec.metrics = hooks.metrics(*state);
      trace.records.push_back(std::move(rec));
    }
  }
  trace.final_state = *state;
  return trace;
}

inline InferenceTrace run_pmd(const PmdConfig& config, const Model& model, const RunHooks& hooks = {}) {
  Rng rng = make_rng(config.rng_seed);
  return run_pmd(config, model, rng, hooks);
}

}  // namespace pmd
