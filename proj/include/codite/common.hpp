#pragma once

// ============================================================================
// common: shared aliases, errors, deterministic RNG, and thread utilities
// ============================================================================

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>

namespace codite {

inline constexpr const char* kVersion = "0.1.0";

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using IntVector = Eigen::VectorXi;

// ----------------------------------------------------------------------------
// Errors.  ArgumentError / DataError / DegenerateInputError map to CLI exit
// code 2 (validation), NumericError to exit code 3 (numeric failure).
// ----------------------------------------------------------------------------

// Invalid arguments or configuration (bad sizes, non-finite inputs, bad flags).
class ArgumentError : public std::invalid_argument {
public:
    explicit ArgumentError(const std::string& msg) : std::invalid_argument(msg) {}
};

// Malformed or inconsistent data (CSV schema, parse failures, file I/O).
class DataError : public std::runtime_error {
public:
    explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

// Structurally valid input on which the requested quantity is undefined
// (all points identical, single-class labels, ...).
class DegenerateInputError : public std::runtime_error {
public:
    explicit DegenerateInputError(const std::string& msg) : std::runtime_error(msg) {}
};

// Numeric failure (factorization breakdown, divergence, non-finite results).
class NumericError : public std::runtime_error {
public:
    explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

// ----------------------------------------------------------------------------
// Deterministic RNG.  mt19937_64 is bit-exact across platforms; the variate
// transforms below are our own, so streams do not depend on the C++ runtime's
// distribution implementations.
// ----------------------------------------------------------------------------

namespace rng {

inline std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

// Seed for a named substream of `seed`.  Streams for distinct (tag, index)
// pairs are independent for all practical purposes.
inline std::uint64_t substream(std::uint64_t seed, std::uint64_t tag, std::uint64_t index = 0) {
    std::uint64_t s = seed;
    std::uint64_t a = splitmix64(s);
    s ^= tag * 0xD6E8FEB86659FD93ULL;
    std::uint64_t b = splitmix64(s);
    s ^= index * 0xA3B195354A39B70DULL;
    return a ^ splitmix64(s) ^ (b << 1);
}

// Substream tags used across the library (values are arbitrary but frozen).
inline constexpr std::uint64_t kTagCovariates  = 1;
inline constexpr std::uint64_t kTagNoise       = 2;
inline constexpr std::uint64_t kTagAssignment  = 3;
inline constexpr std::uint64_t kTagPermutation = 4;
inline constexpr std::uint64_t kTagRepetition  = 5;
inline constexpr std::uint64_t kTagCoefficients = 6;

}  // namespace rng

class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t raw() { return engine_(); }

    // Uniform on [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    // Uniform on (0, 1]; safe as a log argument.
    double uniform_pos() { return static_cast<double>((engine_() >> 11) + 1) * 0x1.0p-53; }

    // Standard normal via Box-Muller; the paired variate is cached.
    double normal();

    bool bernoulli(double p) { return uniform() < p; }

    // Uniform integer on [0, n).
    std::uint64_t below(std::uint64_t n);

private:
    std::mt19937_64 engine_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

// ----------------------------------------------------------------------------
// Threading.  Worker count is capped by the CODITE_THREADS environment
// variable (default: hardware concurrency).  Chunks are assigned statically,
// so any parallel loop whose chunks write disjoint outputs is deterministic.
// ----------------------------------------------------------------------------

int thread_budget();

// Shortest round-trip decimal rendering (deterministic across runs).
std::string format_double(double value);

// Invokes fn(begin, end) over a static partition of [0, n), possibly from
// multiple threads.  fn must only write state owned by its index range.
void parallel_for(std::int64_t n, const std::function<void(std::int64_t, std::int64_t)>& fn,
                  int max_threads = -1);

}  // namespace codite
