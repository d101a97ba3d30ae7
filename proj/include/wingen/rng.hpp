#pragma once

#include <cstdint>

#include "wingen/dense_array.hpp"

namespace wingen {

/// Counter-based generator: output i is splitmix64(seed + (i + 1) * 0x9E3779B97F4A7C15).
///
/// The whole state is (seed, counter), so a stream can be replayed from any point and
/// child streams derived with fork() never overlap their parent in a correlated way.
/// Gaussian draws use the Box-Muller transform on two 53-bit uniforms; both outputs of a
/// pair are used, cosine branch first.
class Rng {
public:
    explicit Rng(std::uint64_t seed = 0) : seed_(seed) {}

    std::uint64_t seed() const { return seed_; }
    std::uint64_t counter() const { return counter_; }

    std::uint64_t next_u64();
    /// Uniform on [0, 1).
    double uniform();
    /// Uniform on (0, 1).
    double uniform_open();
    /// Uniform integer on [0, n).
    std::uint64_t below(std::uint64_t n);
    double normal();
    bool bernoulli(double p) { return uniform() < p; }

    DenseArray normal_array(const Shape& shape, Precision p = Precision::single, double stddev = 1.0);

    /// Independent child stream keyed by `stream`; does not advance this generator.
    Rng fork(std::uint64_t stream) const;

private:
    std::uint64_t seed_;
    std::uint64_t counter_ = 0;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

std::uint64_t splitmix64(std::uint64_t x);

}  // namespace wingen
