#pragma once

#include <algorithm>
#include <cmath>
#include <type_traits>
#include <variant>

#include "pmd/common.hpp"

namespace pmd {

/// gamma_t = eta / t.
struct EtaOverT {
  double eta = 1.0;
};

/// gamma_t = min{2/(t+1), delta / (M m_t^{beta/(d+2beta)})}.
struct CappedHarmonic {
  double grad_bound = 10.0;  // M
  double density_floor = 1.0;  // Delta
  double beta = 2.0;
};

/// gamma_t = eta / (offset + t^kappa); EtaOverT is offset 0, kappa 1.
struct EtaOverOffsetPower {
  double eta = 1.0;
  double offset = 0.0;
  double kappa = 1.0;
};

using StepSchedule = std::variant<EtaOverT, CappedHarmonic, EtaOverOffsetPower>;

inline void validate(const StepSchedule& schedule) {
  if (const auto* s = std::get_if<EtaOverT>(&schedule)) {
    if (!(s->eta > 0.0)) throw Error(ErrorKind::InvalidParameter, "eta must be positive");
  } else if (const auto* o = std::get_if<EtaOverOffsetPower>(&schedule)) {
    if (!(o->eta > 0.0) || !(o->offset >= 0.0) || !(o->kappa > 0.0))
      throw Error(ErrorKind::InvalidParameter, "eta and kappa must be positive, offset nonnegative");
  } else {
    const auto& f = std::get<CappedHarmonic>(schedule);
    if (!(f.grad_bound > 0.0) || !(f.density_floor > 0.0) || !(f.beta > 0.0))
      throw Error(ErrorKind::InvalidParameter, "M, Delta and beta must be positive");
  }
}

/// Step size for iteration t >= 1, clamped to (0, 1] so that 1 - gamma stays a
/// valid interpolation exponent.
inline double stepsize(const StepSchedule& schedule, std::size_t t, std::size_t m_t, std::size_t d) {
  if (t < 1) throw Error(ErrorKind::InvalidArgument, "iterations are numbered from 1");
  const double tt = static_cast<double>(t);
  double gamma = 0.0;
  if (const auto* s = std::get_if<EtaOverT>(&schedule)) {
    gamma = s->eta / tt;
  } else if (const auto* o = std::get_if<EtaOverOffsetPower>(&schedule)) {
    gamma = o->eta / (o->offset + std::pow(tt, o->kappa));
  } else {
    const auto& f = std::get<CappedHarmonic>(schedule);
    const double expo = f.beta / (static_cast<double>(d) + 2.0 * f.beta);
    gamma = std::min(2.0 / (tt + 1.0), f.density_floor / (f.grad_bound * std::pow(static_cast<double>(m_t), expo)));
  }
  return std::min(gamma, 1.0);
}

struct FixedCount {
  std::size_t m = 1000;
};

/// m_t = m0 * t.
struct LinearCount {
  std::size_t m0 = 100;
};

/// m_t = ceil(m0 * t^exponent).
struct PowerCount {
  double m0 = 100.0;
  double exponent = 1.0;
};

using ParticleSchedule = std::variant<FixedCount, LinearCount, PowerCount>;

inline void validate(const ParticleSchedule& schedule) {
  std::visit(
      [](const auto& s) {
        using S = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<S, FixedCount>) {
          if (s.m < 1) throw Error(ErrorKind::InvalidParameter, "particle count must be positive");
        } else if constexpr (std::is_same_v<S, LinearCount>) {
          if (s.m0 < 1) throw Error(ErrorKind::InvalidParameter, "m0 must be positive");
        } else {
          if (!(s.m0 > 0.0) || !(s.exponent >= 0.0))
            throw Error(ErrorKind::InvalidParameter, "power schedule needs m0 > 0 and exponent >= 0");
        }
      },
      schedule);
}

inline std::size_t particle_count(const ParticleSchedule& schedule, std::size_t t) {
  if (t < 1) throw Error(ErrorKind::InvalidArgument, "iterations are numbered from 1");
  return std::visit(
      [t](const auto& s) -> std::size_t {
        using S = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<S, FixedCount>) {
          return s.m;
        } else if constexpr (std::is_same_v<S, LinearCount>) {
          return s.m0 * t;
        } else {
          const double m = std::ceil(s.m0 * std::pow(static_cast<double>(t), s.exponent));
          return std::max<std::size_t>(1, static_cast<std::size_t>(m));
        }
      },
      schedule);
}

}  // namespace pmd
