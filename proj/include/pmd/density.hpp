#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <ostream>
#include <span>
#include <variant>
#include <vector>

#include "pmd/common.hpp"

namespace pmd {

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();

/// log(sum_i exp(v_i)). -inf entries are absorbed; an all -inf input yields -inf.
inline double log_sum_exp(std::span<const double> values) {
  if (values.empty()) throw Error(ErrorKind::InvalidArgument, "log_sum_exp of an empty sequence");
  const double hi = *std::max_element(values.begin(), values.end());
  if (hi == kNegInf) return kNegInf;
  if (std::isinf(hi)) return hi;
  double acc = 0.0;
  for (double v : values) acc += std::exp(v - hi);
  return hi + std::log(acc);
}

inline double log_sum_exp(const Vector& values) { return log_sum_exp(std::span<const double>(values.data(), values.size())); }

/// Elementwise std::exp; exp(-inf) is exactly 0.
inline Vector exp_of(const Vector& v) {
  return v.unaryExpr([](double x) { return std::exp(x); });
}

/// Shifts log-weights so that they exponentiate onto the simplex.
inline Vector normalize_log_weights(const Vector& logw) {
  if (logw.size() == 0) throw Error(ErrorKind::InvalidArgument, "no weights to normalize");
  if (logw.array().isNaN().any()) throw Error(ErrorKind::DegenerateWeights, "NaN log-weight");
  const double hi = logw.maxCoeff();
  if (hi == kNegInf) throw Error(ErrorKind::DegenerateWeights, "all particle weights vanished");
  if (std::isinf(hi)) throw Error(ErrorKind::DegenerateWeights, "infinite log-weight");
  // Subtract the max before the log-sum so large offsets do not cost precision.
  const Vector shifted = logw.array() - hi;
  return shifted.array() - log_sum_exp(shifted);
}

/// Simplex weights exp(normalize_log_weights(logw)).
inline Vector simplex_weights(const Vector& logw) { return exp_of(normalize_log_weights(logw)); }

inline double effective_sample_size(const Vector& weights) { return 1.0 / weights.squaredNorm(); }

/// Weighted point masses. Weights are stored as normalized log-weights.
///
/// `log_base_ratio` holds log p(theta_i) - log pi(theta_i) for the density pi the
/// support points were drawn from; it is zero when pi is the prior. The
/// represented density is sum_i alpha_i delta(theta_i).
struct ParticleCloud {
  Matrix points;
  Vector log_weights;
  Vector log_base_ratio;

  ParticleCloud() = default;
  ParticleCloud(Matrix pts, const Vector& logw) : ParticleCloud(std::move(pts), logw, Vector()) {}
  ParticleCloud(Matrix pts, const Vector& logw, Vector base_ratio)
      : points(std::move(pts)), log_weights(normalize_log_weights(logw)), log_base_ratio(std::move(base_ratio)) {
    if (points.rows() < 1) throw Error(ErrorKind::InvalidArgument, "particle cloud needs at least one particle");
    if (points.rows() != log_weights.size())
      throw Error(ErrorKind::InvalidArgument, "particle and weight counts disagree");
    if (log_base_ratio.size() == 0) log_base_ratio = Vector::Zero(points.rows());
    if (log_base_ratio.size() != points.rows())
      throw Error(ErrorKind::InvalidArgument, "base ratio length disagrees with particle count");
  }

  static ParticleCloud uniform(Matrix pts) {
    const auto m = pts.rows();
    return ParticleCloud(std::move(pts), Vector::Zero(m));
  }

  std::size_t size() const { return static_cast<std::size_t>(points.rows()); }
  std::size_t dim() const { return static_cast<std::size_t>(points.cols()); }
  Vector weights() const { return exp_of(log_weights); }
  double ess() const { return effective_sample_size(weights()); }
  VecRef point(std::size_t i) const { return points.row(static_cast<Eigen::Index>(i)).transpose(); }
};

/// sum_i alpha_i K_h(theta - c_i) with a Gaussian kernel. The kernel is applied to
/// coordinates divided by `scales` (one per dimension), so the effective
/// per-dimension bandwidth is h * scales(j); with unit scales this is the usual
/// isotropic K_h(u) = h^{-d} K(u / h). Immutable once built.
class KdeDensity {
 public:
  KdeDensity(Matrix centers, const Vector& logw, double h, Vector scales = Vector())
      : centers_(std::move(centers)), log_weights_(normalize_log_weights(logw)), bandwidth_(h), scales_(std::move(scales)) {
    if (centers_.rows() < 1) throw Error(ErrorKind::InvalidArgument, "kde needs at least one center");
    if (centers_.rows() != log_weights_.size()) throw Error(ErrorKind::InvalidArgument, "center and weight counts disagree");
    if (!(bandwidth_ > 0.0) || !std::isfinite(bandwidth_)) throw Error(ErrorKind::InvalidArgument, "bandwidth must be positive");
    if (scales_.size() == 0) scales_ = Vector::Ones(centers_.cols());
    if (scales_.size() != centers_.cols() || !(scales_.array() > 0.0).all())
      throw Error(ErrorKind::InvalidArgument, "kernel scales must be positive, one per dimension");
    inv_width_ = (scales_.array() * bandwidth_).inverse();
    log_norm_ = -0.5 * static_cast<double>(centers_.cols()) * kLogTwoPi + inv_width_.array().log().sum();
    scaled_ = centers_.array().rowwise() * inv_width_.transpose().array();
  }

  const Matrix& centers() const { return centers_; }
  const Vector& log_weights() const { return log_weights_; }
  double bandwidth() const { return bandwidth_; }
  const Vector& scales() const { return scales_; }

  std::size_t size() const { return static_cast<std::size_t>(centers_.rows()); }
  std::size_t dim() const { return static_cast<std::size_t>(centers_.cols()); }
  Vector weights() const { return exp_of(log_weights_); }
  double ess() const { return effective_sample_size(weights()); }

  double log_density(VecRef theta) const {
    thread_local Eigen::ArrayXd terms;
    terms = log_weights_.array();
    for (Eigen::Index j = 0; j < scaled_.cols(); ++j)
      terms -= 0.5 * (scaled_.col(j) - theta(j) * inv_width_(j)).square();
    const double mx = terms.maxCoeff();
    if (!std::isfinite(mx)) return mx;
    // Terms more than 750 nats below the max underflow to zero.
    double sum = 0.0;
    for (Eigen::Index i = 0; i < terms.size(); ++i)
      if (terms(i) - mx > -750.0) sum += std::exp(terms(i) - mx);
    return log_norm_ + mx + std::log(sum);
  }

  double density(VecRef theta) const { return std::exp(log_density(theta)); }

 private:
  Matrix centers_;
  Vector log_weights_;
  double bandwidth_;
  Vector scales_;
  Vector inv_width_;
  double log_norm_ = 0.0;
  Eigen::ArrayXXd scaled_;  // centers / (h * scale), column-major
};

struct KdeValue {
  double density;
  double log_density;
};

inline KdeValue kde_evaluate(const KdeDensity& kde, VecRef theta) {
  const double lq = kde.log_density(theta);
  return {std::exp(lq), lq};
}

/// How component indices are drawn when sampling from a mixture. Systematic
/// uses one uniform offset for all draws: each draw keeps its marginal law but
/// component counts deviate from m * alpha_i by less than one.
enum class Resampling { Multinomial, Systematic };

/// Inverse-CDF categorical draw over simplex weights: the first index whose
/// cumulative weight reaches u, u uniform on (0, total].
class CategoricalSampler {
 public:
  explicit CategoricalSampler(const Vector& weights) : cumulative_(static_cast<std::size_t>(weights.size())) {
    double acc = 0.0;
    last_positive_ = 0;
    for (Eigen::Index i = 0; i < weights.size(); ++i) {
      acc += weights(i);
      cumulative_[static_cast<std::size_t>(i)] = acc;
      if (weights(i) > 0.0) last_positive_ = static_cast<std::size_t>(i);
    }
  }

  std::size_t operator()(Rng& rng) const {
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    const double u = (1.0 - unif(rng)) * cumulative_.back();
    const auto it = std::lower_bound(cumulative_.begin(), cumulative_.end(), u);
    const auto idx = static_cast<std::size_t>(it - cumulative_.begin());
    return std::min(idx, last_positive_);
  }

  std::vector<std::size_t> draw(Rng& rng, std::size_t count, Resampling scheme) const {
    std::vector<std::size_t> out(count);
    if (scheme == Resampling::Multinomial) {
      for (auto& c : out) c = (*this)(rng);
      return out;
    }
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    const double total = cumulative_.back();
    const double step = total / static_cast<double>(count);
    const double u0 = (1.0 - unif(rng)) * step;
    std::size_t idx = 0;
    for (std::size_t s = 0; s < count; ++s) {
      const double u = u0 + static_cast<double>(s) * step;
      while (idx < last_positive_ && cumulative_[idx] < u) ++idx;
      out[s] = idx;
    }
    return out;
  }

 private:
  std::vector<double> cumulative_;
  std::size_t last_positive_ = 0;
};

/// Draws `count` points from the KDE, each marginally distributed as the KDE;
/// i.i.d. under Multinomial. `chosen`, when given, receives the generating
/// center of each sample.
inline Matrix kde_sample(const KdeDensity& kde, Rng& rng, std::size_t count, std::vector<std::size_t>* chosen = nullptr,
                         Resampling scheme = Resampling::Multinomial) {
  if (count < 1) throw Error(ErrorKind::InvalidArgument, "sample count must be positive");
  const std::vector<std::size_t> picks = CategoricalSampler(kde.weights()).draw(rng, count, scheme);
  std::normal_distribution<double> normal(0.0, 1.0);
  const Matrix& centers = kde.centers();
  const double h = kde.bandwidth();
  const auto d = centers.cols();
  Matrix out(static_cast<Eigen::Index>(count), d);
  if (chosen) chosen->resize(count);
  for (std::size_t s = 0; s < count; ++s) {
    const std::size_t c = picks[s];
    if (chosen) (*chosen)[s] = c;
    const auto row = static_cast<Eigen::Index>(s);
    for (Eigen::Index j = 0; j < d; ++j)
      out(row, j) = centers(static_cast<Eigen::Index>(c), j) + h * kde.scales()(j) * normal(rng);
  }
  return out;
}

/// h = scale * m^{-1/(d + 2 beta)}.
struct BandwidthRule {
  double beta = 2.0;
  double scale = 1.0;

  double exponent(std::size_t d) const { return -1.0 / (static_cast<double>(d) + 2.0 * beta); }
};

inline double bandwidth(const BandwidthRule& rule, std::size_t m, std::size_t d) {
  if (m < 1) throw Error(ErrorKind::InvalidArgument, "bandwidth needs m >= 1");
  return rule.scale * std::pow(static_cast<double>(m), rule.exponent(d));
}

/// Rule whose bandwidth at m = `anchor_m` equals `anchor_h`.
inline BandwidthRule anchored_rule(double beta, double anchor_h, std::size_t anchor_m, std::size_t d) {
  BandwidthRule rule{beta, 1.0};
  rule.scale = anchor_h / std::pow(static_cast<double>(anchor_m), rule.exponent(d));
  return rule;
}

/// Median Euclidean distance over all pairs among the first `max_points` rows.
inline double median_pairwise_distance(const Matrix& points, std::size_t max_points = 2000) {
  const auto n = std::min<Eigen::Index>(points.rows(), static_cast<Eigen::Index>(max_points));
  if (n < 2) return 0.0;
  std::vector<double> dist;
  dist.reserve(static_cast<std::size_t>(n * (n - 1) / 2));
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index k = i + 1; k < n; ++k) dist.push_back((points.row(i) - points.row(k)).norm());
  auto mid = dist.begin() + static_cast<std::ptrdiff_t>(dist.size() / 2);
  std::nth_element(dist.begin(), mid, dist.end());
  if (dist.size() % 2 == 1) return *mid;
  const double upper = *mid;
  const double lower = *std::max_element(dist.begin(), mid);
  return 0.5 * (lower + upper);
}

/// Weighted per-dimension standard deviation. Dimensions with (numerically)
/// zero spread report `fallback`.
inline Vector weighted_std(const Matrix& points, const Vector& weights, double fallback = 1.0) {
  const Vector mean = points.transpose() * weights;
  Vector out(points.cols());
  for (Eigen::Index j = 0; j < points.cols(); ++j) {
    const double var = (weights.array() * (points.col(j).array() - mean(j)).square()).sum();
    out(j) = var > 1e-24 ? std::sqrt(var) : fallback;
  }
  return out;
}

/// Gaussian KDE with bandwidth 0.1 x median pairwise distance, for turning
/// weighted samples into an evaluable density.
inline KdeDensity median_trick_kde(const Matrix& points, const Vector& log_weights, double factor = 0.1) {
  double h = factor * median_pairwise_distance(points);
  if (!(h > 0.0)) h = 1e-6;
  return KdeDensity(points, log_weights, h);
}

inline KdeDensity median_trick_kde(const ParticleCloud& cloud, double factor = 0.1) {
  return median_trick_kde(cloud.points, cloud.log_weights, factor);
}

/// One row per particle: theta_1..theta_d, weight.
inline void write_cloud_csv(std::ostream& os, const Matrix& points, const Vector& log_weights) {
  os.precision(17);
  for (Eigen::Index j = 0; j < points.cols(); ++j) os << "theta_" << (j + 1) << ',';
  os << "weight\n";
  for (Eigen::Index i = 0; i < points.rows(); ++i) {
    for (Eigen::Index j = 0; j < points.cols(); ++j) os << points(i, j) << ',';
    os << std::exp(log_weights(i)) << '\n';
  }
}

inline void write_cloud_csv(std::ostream& os, const ParticleCloud& cloud) {
  write_cloud_csv(os, cloud.points, cloud.log_weights);
}

inline void write_cloud_csv(std::ostream& os, const KdeDensity& kde) { write_cloud_csv(os, kde.centers(), kde.log_weights()); }

/// Current posterior estimate: weighted point masses or a weighted KDE.
using DensityState = std::variant<ParticleCloud, KdeDensity>;

inline std::size_t state_size(const DensityState& s) {
  return std::visit([](const auto& v) { return v.size(); }, s);
}

inline double state_ess(const DensityState& s) {
  return std::visit([](const auto& v) { return v.ess(); }, s);
}

/// Evaluable density for a state. Particle clouds are smoothed with the
/// median-trick KDE so that clouds from any algorithm are compared alike.
inline KdeDensity as_kde(const DensityState& s) {
  if (const auto* kde = std::get_if<KdeDensity>(&s)) return *kde;
  return median_trick_kde(std::get<ParticleCloud>(s));
}

}  // namespace pmd
