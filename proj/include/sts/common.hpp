#ifndef STS_COMMON_HPP
#define STS_COMMON_HPP

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace sts {

using MatF = Eigen::MatrixXf;
using MatD = Eigen::MatrixXd;
using VecF = Eigen::VectorXf;
using VecD = Eigen::VectorXd;

/// Data or contract violation (bad shapes, broken invariants, inconsistent files).
class ValidationError : public std::runtime_error {
 public:
  explicit ValidationError(const std::string& msg) : std::runtime_error(msg) {}
};

/// File-format error carrying a 1-based line number.
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& msg, int line)
      : std::runtime_error(msg + " (line " + std::to_string(line) + ")"), line_(line) {}
  int line() const { return line_; }

 private:
  int line_;
};

/// Invalid run configuration (unknown key, missing data, bad value).
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

// Seeded generator used everywhere randomness is needed. mt19937_64 output is
// pinned by the standard, so a seed reproduces bit-identical streams on any
// conforming implementation. The helpers below avoid std::uniform_*_distribution,
// whose draw sequences differ between standard libraries.
using Rng = std::mt19937_64;

inline double uniform_real(Rng& rng, double lo, double hi) {
  return lo + (hi - lo) * (static_cast<double>(rng() >> 11) * 0x1.0p-53);
}

/// Uniform integer in [lo, hi], inclusive.
inline std::int64_t uniform_int(Rng& rng, std::int64_t lo, std::int64_t hi) {
  const std::uint64_t span = static_cast<std::uint64_t>(hi - lo) + 1;
  return lo + static_cast<std::int64_t>(rng() % span);
}

/// FNV-1a, used for config fingerprints.
inline std::uint64_t fnv1a64(const std::string& s) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

}  // namespace sts

#endif  // STS_COMMON_HPP
