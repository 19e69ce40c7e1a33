#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <ostream>
#include <vector>

#include "pmd/density.hpp"
#include "pmd/model.hpp"

namespace pmd {

/// n cells of equal width over [lo, hi]; grid points are cell midpoints.
struct Axis {
  double lo = 0.0;
  double hi = 1.0;
  std::size_t n = 100;

  double width() const { return (hi - lo) / static_cast<double>(n); }
  double point(std::size_t k) const { return lo + (static_cast<double>(k) + 0.5) * width(); }
};

using LogDensityFn = std::function<double(VecRef)>;

/// Normalized log-density tabulated on a rectangular grid (d <= 2). Cell k of a
/// 2-D grid is (k / n1, k % n1).
class GridOracle {
 public:
  GridOracle(std::vector<Axis> axes, const LogDensityFn& unnormalized) : axes_(std::move(axes)) {
    if (axes_.empty() || axes_.size() > 2) throw Error(ErrorKind::InvalidArgument, "grid oracle supports d in {1, 2}");
    cell_volume_ = 1.0;
    std::size_t cells = 1;
    for (const auto& a : axes_) {
      if (a.n < 2 || !(a.hi > a.lo)) throw Error(ErrorKind::InvalidArgument, "grid axis needs hi > lo and n >= 2");
      cell_volume_ *= a.width();
      cells *= a.n;
    }
    points_.resize(static_cast<Eigen::Index>(cells), static_cast<Eigen::Index>(axes_.size()));
    for (std::size_t k = 0; k < cells; ++k) {
      const auto r = static_cast<Eigen::Index>(k);
      if (axes_.size() == 1) {
        points_(r, 0) = axes_[0].point(k);
      } else {
        points_(r, 0) = axes_[0].point(k / axes_[1].n);
        points_(r, 1) = axes_[1].point(k % axes_[1].n);
      }
    }
    log_density_.resize(static_cast<Eigen::Index>(cells));
    for (Eigen::Index k = 0; k < log_density_.size(); ++k) log_density_(k) = unnormalized(point(static_cast<std::size_t>(k)));
    const double z = log_sum_exp(log_density_);
    if (!std::isfinite(z)) throw Error(ErrorKind::DegenerateWeights, "grid oracle has no finite mass");
    log_density_.array() -= z + std::log(cell_volume_);
  }

  std::size_t dim() const { return axes_.size(); }
  std::size_t cells() const { return static_cast<std::size_t>(log_density_.size()); }
  const std::vector<Axis>& axes() const { return axes_; }
  double cell_volume() const { return cell_volume_; }
  const Vector& log_density() const { return log_density_; }
  const Matrix& points() const { return points_; }
  VecRef point(std::size_t k) const { return points_.row(static_cast<Eigen::Index>(k)).transpose(); }

  /// Probability mass of each cell (midpoint rule).
  Vector cell_mass() const { return exp_of(log_density_) * cell_volume_; }

  bool on_boundary(std::size_t k) const {
    if (axes_.size() == 1) return k == 0 || k + 1 == axes_[0].n;
    const std::size_t i = k / axes_[1].n;
    const std::size_t j = k % axes_[1].n;
    return i == 0 || j == 0 || i + 1 == axes_[0].n || j + 1 == axes_[1].n;
  }

  double boundary_mass() const {
    const Vector mass = cell_mass();
    double acc = 0.0;
    for (std::size_t k = 0; k < cells(); ++k)
      if (on_boundary(k)) acc += mass(static_cast<Eigen::Index>(k));
    return acc;
  }

  /// -sum p log p* over cells (differential entropy by quadrature).
  double entropy() const { return -(cell_mass().array() * log_density_.array()).sum(); }

  Vector mean() const { return points_.transpose() * cell_mass(); }

  Vector variance() const {
    const Vector mass = cell_mass();
    const Vector mu = mean();
    Vector out(static_cast<Eigen::Index>(dim()));
    for (Eigen::Index j = 0; j < out.size(); ++j) out(j) = (mass.array() * (points_.col(j).array() - mu(j)).square()).sum();
    return out;
  }

  /// Index of the grid cell containing theta, clamped to the grid.
  std::size_t cell_of(VecRef theta) const {
    std::size_t k = 0;
    for (std::size_t a = 0; a < axes_.size(); ++a) {
      const auto& ax = axes_[a];
      const double f = std::floor((theta(static_cast<Eigen::Index>(a)) - ax.lo) / ax.width());
      const auto i = static_cast<std::size_t>(std::clamp(f, 0.0, static_cast<double>(ax.n - 1)));
      k = k * ax.n + i;
    }
    return k;
  }

 private:
  std::vector<Axis> axes_;
  double cell_volume_ = 1.0;
  Matrix points_;
  Vector log_density_;
};

/// Brute-force posterior: log p(theta) + sum_n log p(x_n|theta), normalized on
/// the grid. Throws MassLeak when the boundary cells carry more than
/// `max_boundary_mass` of the total.
inline GridOracle build_grid_oracle(const Model& model, std::vector<Axis> axes, double max_boundary_mass = 1e-4) {
  if (model.dim() != axes.size() || model.dim() > 2)
    throw Error(ErrorKind::InvalidArgument, "grid oracle needs one axis per parameter and d <= 2");
  const Dataset& data = model.data();
  GridOracle oracle(std::move(axes), [&](VecRef theta) {
    double acc = model.log_prior(theta);
    for (std::size_t n = 0; n < data.size(); ++n) acc += model.log_lik(data.row(n), theta);
    return acc;
  });
  const double leak = oracle.boundary_mass();
  if (leak > max_boundary_mass)
    throw Error(ErrorKind::MassLeak, "grid boundary carries " + std::to_string(leak) + " of the posterior mass");
  return oracle;
}

/// Bounding box of the region within `drop` nats of the maximum on a coarse
/// search grid, widened by `inflate` x its width on every side.
inline std::vector<Axis> auto_axes(const Model& model, const std::vector<Axis>& search, std::size_t n_points,
                                   double drop = 40.0, double inflate = 0.2) {
  const Dataset& data = model.data();
  const GridOracle coarse(search, [&](VecRef theta) {
    double acc = model.log_prior(theta);
    for (std::size_t n = 0; n < data.size(); ++n) acc += model.log_lik(data.row(n), theta);
    return acc;
  });
  const Vector& ld = coarse.log_density();
  const double top = ld.maxCoeff();
  std::vector<double> lo(search.size(), 1e300), hi(search.size(), -1e300);
  for (std::size_t k = 0; k < coarse.cells(); ++k) {
    if (ld(static_cast<Eigen::Index>(k)) < top - drop) continue;
    for (std::size_t a = 0; a < search.size(); ++a) {
      const double x = coarse.point(k)(static_cast<Eigen::Index>(a));
      lo[a] = std::min(lo[a], x - 0.5 * search[a].width());
      hi[a] = std::max(hi[a], x + 0.5 * search[a].width());
    }
  }
  std::vector<Axis> out;
  for (std::size_t a = 0; a < search.size(); ++a) {
    const double pad = inflate * (hi[a] - lo[a]);
    out.push_back({lo[a] - pad, hi[a] + pad, n_points});
  }
  return out;
}

inline Vector evaluate_on_grid(const GridOracle& oracle, const LogDensityFn& log_q) {
  Vector out(static_cast<Eigen::Index>(oracle.cells()));
  for (std::size_t k = 0; k < oracle.cells(); ++k) out(static_cast<Eigen::Index>(k)) = log_q(oracle.point(k));
  return out;
}

/// 1/2 sum |p*_cell - q_cell| with q integrated per cell by the midpoint rule and
/// renormalized over the grid.
inline double total_variation(const GridOracle& oracle, const Vector& log_q_on_grid) {
  const Vector p = oracle.cell_mass();
  const Vector q = simplex_weights(log_q_on_grid);
  return std::min(1.0, 0.5 * (p - q).cwiseAbs().sum());
}

inline double total_variation(const GridOracle& oracle, const LogDensityFn& log_q) {
  return total_variation(oracle, evaluate_on_grid(oracle, log_q));
}

/// -sum p*_cell log q(theta_cell), q floored at 1e-300.
inline double cross_entropy(const GridOracle& oracle, const Vector& log_q_on_grid) {
  static const double floor = std::log(1e-300);
  const Vector p = oracle.cell_mass();
  double acc = 0.0;
  for (Eigen::Index k = 0; k < p.size(); ++k) acc -= p(k) * std::max(log_q_on_grid(k), floor);
  return acc;
}

inline double cross_entropy(const GridOracle& oracle, const LogDensityFn& log_q) {
  return cross_entropy(oracle, evaluate_on_grid(oracle, log_q));
}

/// KL(p* || q) = cross entropy - entropy of the oracle.
inline double kl_divergence(const GridOracle& oracle, const Vector& log_q_on_grid) {
  return cross_entropy(oracle, log_q_on_grid) - oracle.entropy();
}

inline double kl_divergence(const GridOracle& oracle, const LogDensityFn& log_q) {
  return kl_divergence(oracle, evaluate_on_grid(oracle, log_q));
}

inline LogDensityFn log_density_fn(const KdeDensity& kde) {
  return [&kde](VecRef theta) { return kde.log_density(theta); };
}

/// Grid L1 distance sum |p - q| dV between two densities given on the same grid.
inline double grid_l1(const GridOracle& grid, const Vector& log_p, const Vector& log_q) {
  return (exp_of(log_p) - exp_of(log_q)).cwiseAbs().sum() * grid.cell_volume();
}

/// Coordinates followed by the oracle density, one row per cell.
inline void write_grid_csv(std::ostream& os, const GridOracle& oracle) {
  os.precision(17);
  for (std::size_t a = 0; a < oracle.dim(); ++a) os << "theta_" << (a + 1) << ',';
  os << "density\n";
  for (std::size_t k = 0; k < oracle.cells(); ++k) {
    const auto p = oracle.point(k);
    for (Eigen::Index a = 0; a < p.size(); ++a) os << p(a) << ',';
    os << std::exp(oracle.log_density()(static_cast<Eigen::Index>(k))) << '\n';
  }
}

struct GaussianPosterior {
  Vector mean;
  double var = 0.0;
};

/// Closed-form posterior of N(prior_mean, prior_var I) under x ~ N(theta, obs_var I).
inline GaussianPosterior conjugate_gaussian_posterior(const Vector& prior_mean, double prior_var, double obs_var,
                                                      const Matrix& data) {
  const double n = static_cast<double>(data.rows());
  const double precision = 1.0 / prior_var + n / obs_var;
  Vector sum = Vector::Zero(prior_mean.size());
  if (data.rows() > 0) sum = data.colwise().sum().transpose();
  return {(prior_mean / prior_var + sum / obs_var) / precision, 1.0 / precision};
}

/// Least-squares slope of log(error) against log(size).
inline double rate_fit(std::span<const double> sizes, std::span<const double> errors) {
  if (sizes.size() != errors.size()) throw Error(ErrorKind::InvalidArgument, "rate_fit needs matched sequences");
  if (sizes.size() < 3) throw Error(ErrorKind::InvalidArgument, "rate_fit needs at least three points");
  const auto n = static_cast<Eigen::Index>(sizes.size());
  Vector x(n), y(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto k = static_cast<std::size_t>(i);
    if (!(sizes[k] > 0.0) || !(errors[k] > 0.0)) throw Error(ErrorKind::InvalidArgument, "rate_fit inputs must be positive");
    x(i) = std::log(sizes[k]);
    y(i) = std::log(errors[k]);
  }
  const double xm = x.mean();
  const double ym = y.mean();
  const double sxx = (x.array() - xm).square().sum();
  if (sxx == 0.0) throw Error(ErrorKind::InvalidArgument, "rate_fit needs at least two distinct sizes");
  return ((x.array() - xm) * (y.array() - ym)).sum() / sxx;
}

/// Objective L(q) = -sum_n int q log p(x_n|.) + KL(q || p) and its functional
/// gradient, by quadrature on a grid. Densities are given as values at the grid
/// points, `log_lik_sum` = sum_n log p(x_n|theta) and `log_prior` likewise.
struct GridObjective {
  Vector log_prior;
  Vector log_lik_sum;
  double cell_volume = 1.0;

  double value(const Vector& q) const {
    double acc = 0.0;
    for (Eigen::Index k = 0; k < q.size(); ++k)
      if (q(k) > 0.0) acc += q(k) * (std::log(q(k)) - log_prior(k) - log_lik_sum(k));
    return acc * cell_volume;
  }

  Vector gradient(const Vector& q) const {
    return (q.array().log() - log_prior.array() - log_lik_sum.array() + 1.0).matrix();
  }

  /// L(q1) - L(q2) - <q1 - q2, grad L(q2)>.
  double bregman_gap(const Vector& q1, const Vector& q2) const {
    return value(q1) - value(q2) - (q1 - q2).dot(gradient(q2)) * cell_volume;
  }
};

inline double grid_kl(const Vector& q1, const Vector& q2, double cell_volume) {
  double acc = 0.0;
  for (Eigen::Index k = 0; k < q1.size(); ++k)
    if (q1(k) > 0.0) acc += q1(k) * (std::log(q1(k)) - std::log(q2(k)));
  return acc * cell_volume;
}

/// Posterior predictive accuracy of a logistic-regression posterior estimate:
/// predict y = +1 when sum_i alpha_i sigmoid(w_i . x) >= 1/2.
inline double predictive_accuracy(const Matrix& weights_points, const Vector& log_weights, const Dataset& test) {
  if (!test.has_labels) throw Error(ErrorKind::InvalidData, "predictive accuracy needs labelled data");
  const auto d = static_cast<Eigen::Index>(test.feature_dim());
  const Vector alpha = simplex_weights(log_weights);
  std::size_t correct = 0;
  for (std::size_t n = 0; n < test.size(); ++n) {
    const VecRef row = test.row(n);
    const Vector margins = weights_points * row.head(d);
    double p = 0.0;
    for (Eigen::Index i = 0; i < margins.size(); ++i) p += alpha(i) * detail::sigmoid(margins(i));
    const double y = row(d);
    if ((p >= 0.5 ? 1.0 : -1.0) == y) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(test.size());
}

inline double predictive_accuracy(const DensityState& state, const Dataset& test) {
  if (const auto* kde = std::get_if<KdeDensity>(&state)) return predictive_accuracy(kde->centers(), kde->log_weights(), test);
  const auto& cloud = std::get<ParticleCloud>(state);
  return predictive_accuracy(cloud.points, cloud.log_weights, test);
}

/// MAP weights of the logistic posterior by damped Newton iterations.
inline Vector map_logistic(const LogisticModel& model, std::size_t max_iter = 100, double tol = 1e-10) {
  const auto d = static_cast<Eigen::Index>(model.dim());
  const Dataset& data = model.data();
  const auto log_post = [&](const Vector& w) {
    double acc = model.log_prior(w);
    for (std::size_t n = 0; n < data.size(); ++n) acc += model.log_lik(data.row(n), w);
    return acc;
  };
  Vector w = Vector::Zero(d);
  double current = log_post(w);
  for (std::size_t it = 0; it < max_iter; ++it) {
    Vector grad = -w / model.prior_var();
    Eigen::MatrixXd hess = -Eigen::MatrixXd::Identity(d, d) / model.prior_var();
    for (std::size_t n = 0; n < data.size(); ++n) {
      const VecRef row = data.row(n);
      const auto x = row.head(d);
      const double y = row(d);
      const double s = detail::sigmoid(-y * x.dot(w));
      grad += y * s * x;
      hess -= s * (1.0 - s) * (x * x.transpose());
    }
    const Vector step = hess.ldlt().solve(-grad);
    double scale = 1.0;
    Vector next = w + step;
    double value = log_post(next);
    while (value < current && scale > 1e-8) {
      scale *= 0.5;
      next = w + scale * step;
      value = log_post(next);
    }
    w = next;
    current = value;
    if ((scale * step).norm() < tol) break;
  }
  return w;
}

inline double accuracy_of(const Vector& w, const Dataset& test) {
  return predictive_accuracy(w.transpose(), Vector::Zero(1), test);
}

}  // namespace pmd
