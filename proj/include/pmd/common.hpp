#pragma once

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace pmd {

using Vector = Eigen::VectorXd;
/// Row-major so that a single particle (or datum) is a contiguous row.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using VecRef = Eigen::Ref<const Vector>;

using Rng = std::mt19937_64;

enum class ErrorKind {
  InvalidParameter,
  InvalidData,
  InvalidArgument,
  DegenerateWeights,
  GradientUnavailable,
  ConfigMismatch,
  MassLeak,
  Parse,
  Io,
};

inline const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::InvalidParameter: return "invalid-parameter";
    case ErrorKind::InvalidData: return "invalid-data";
    case ErrorKind::InvalidArgument: return "invalid-argument";
    case ErrorKind::DegenerateWeights: return "degenerate-weights";
    case ErrorKind::GradientUnavailable: return "gradient-unavailable";
    case ErrorKind::ConfigMismatch: return "config-mismatch";
    case ErrorKind::MassLeak: return "mass-leak";
    case ErrorKind::Parse: return "parse";
    case ErrorKind::Io: return "io";
  }
  return "unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

/// SplitMix64 finalizer. Used to derive independent seeds from (seed, counter).
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t counter) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (counter + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

inline Rng make_rng(std::uint64_t seed, std::uint64_t stream = 0) {
  return Rng(mix_seed(seed, stream));
}

inline constexpr double kLogTwoPi = 1.8378770664093454835606594728112;

}  // namespace pmd
