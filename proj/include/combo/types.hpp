#ifndef COMBO_TYPES_HPP
#define COMBO_TYPES_HPP

#include <Eigen/Dense>

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace combo {

using Scalar = double;
using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using RowVector = Eigen::RowVectorXd;

// Bad configuration (CLI exit code 1).
class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

// Bad or inconsistent data (CLI exit code 2).
class DataError : public std::runtime_error {
public:
    explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

// A mathematical invariant the algorithm guarantees was observed broken
// (CLI exit code 3).
class InvariantViolation : public std::runtime_error {
public:
    explicit InvariantViolation(const std::string& msg) : std::runtime_error(msg) {}
};

// Compensated summation; keeps long reductions accurate to a few ulps.
template <typename T = Scalar>
class KahanSum {
public:
    void add(T x) {
        T y = x - carry_;
        T t = sum_ + y;
        carry_ = (t - sum_) - y;
        sum_ = t;
    }
    T value() const { return sum_; }

private:
    T sum_ = T(0);
    T carry_ = T(0);
};

// SplitMix64: seedable, splittable generator with a portable bit-exact
// sequence. Run r of an experiment draws from split(r).
class SplitMix64 {
public:
    explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

    static std::uint64_t mix(std::uint64_t x) {
        x += 0x9e3779b97f4a7c15ULL;
        x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
        x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
        return x ^ (x >> 31);
    }

    std::uint64_t next() {
        state_ += 0x9e3779b97f4a7c15ULL;
        std::uint64_t x = state_;
        x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
        x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
        return x ^ (x >> 31);
    }

    // Unbiased draw from [0, n) by rejection.
    std::uint64_t uniform_below(std::uint64_t n) {
        if (n == 0) throw std::invalid_argument("uniform_below: n must be positive");
        const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
        std::uint64_t x;
        do {
            x = next();
        } while (x >= limit);
        return x % n;
    }

    // Independent stream derived from (state, stream id).
    SplitMix64 split(std::uint64_t stream) const {
        return SplitMix64(mix(state_ ^ mix(stream + 0x517cc1b727220a95ULL)));
    }

private:
    std::uint64_t state_;
};

// Fisher-Yates with the portable generator above; std::shuffle is
// implementation-defined and would break cross-platform determinism.
template <typename T>
void deterministic_shuffle(std::vector<T>& v, SplitMix64& rng) {
    for (std::size_t i = v.size(); i > 1; --i) {
        std::size_t j = static_cast<std::size_t>(rng.uniform_below(i));
        std::swap(v[i - 1], v[j]);
    }
}

// FNV-1a over bytes; used for schema fingerprints.
inline std::uint64_t fnv1a(const std::string& s, std::uint64_t h = 0xcbf29ce484222325ULL) {
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

} // namespace combo

#endif // COMBO_TYPES_HPP
