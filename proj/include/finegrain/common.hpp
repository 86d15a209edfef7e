#pragma once

#include <cstdint>
#include <cstdio>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace finegrain {

// ---------------------------------------------------------------------------
// Error taxonomy. ValidationError maps to CLI exit code 1, anything else to 2.
// ---------------------------------------------------------------------------

class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad configuration (schema, rule table, hyperparameters).
class ConfigError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

// Caller violated an operation's precondition.
class ContractError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

// Shape mismatch between tensors; message names both shapes.
class DimError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

// ---------------------------------------------------------------------------
// Logging to stderr, gated by FINEGRAIN_LOG={error|info|debug}.
// ---------------------------------------------------------------------------

enum class LogLevel { kError = 0, kInfo = 1, kDebug = 2 };

LogLevel log_level();
void log_line(LogLevel lv, const std::string& msg);

inline void log_error(const std::string& msg) { log_line(LogLevel::kError, msg); }
inline void log_info(const std::string& msg) { log_line(LogLevel::kInfo, msg); }
inline void log_debug(const std::string& msg) { log_line(LogLevel::kDebug, msg); }

// ---------------------------------------------------------------------------
// Deterministic RNG. All sampling goes through hand-rolled transforms so the
// same seed produces the same stream on every platform and every rerun.
// ---------------------------------------------------------------------------

uint64_t splitmix64(uint64_t x);

class Rng {
 public:
  explicit Rng(uint64_t seed) : eng_(seed) {}

  uint64_t u64() { return eng_(); }

  // Unbiased integer in [0, n).
  uint64_t below(uint64_t n);

  // [0, 1) with 53 random bits.
  double unit() { return static_cast<double>(u64() >> 11) * 0x1.0p-53; }

  double uniform(double a, double b) { return a + (b - a) * unit(); }

  // Inclusive integer range.
  int range(int lo, int hi) {
    return lo + static_cast<int>(below(static_cast<uint64_t>(hi - lo) + 1));
  }

  bool bernoulli(double p) { return unit() < p; }

  template <class T>
  void shuffle(std::vector<T>& v) {
    for (size_t i = v.size(); i > 1; --i) {
      std::swap(v[i - 1], v[below(i)]);
    }
  }

  // Stream derivation for counter-based per-item randomness.
  static Rng derive(uint64_t seed, uint64_t stream) {
    return Rng(splitmix64(seed + 0x9E3779B97F4A7C15ULL * (stream + 1)));
  }

 private:
  std::mt19937_64 eng_;
};

// ---------------------------------------------------------------------------
// Hashing and small string helpers.
// ---------------------------------------------------------------------------

uint64_t fnv1a64(std::string_view s);
std::string hex64(uint64_t v);

std::vector<std::string> utf8_codepoints(std::string_view s);
std::vector<std::string> split_whitespace(std::string_view s);
std::string collapse_spaces(std::string_view s);

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& content);

}  // namespace finegrain
