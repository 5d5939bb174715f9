#pragma once

#include <cstdint>
#include <vector>

namespace tsmoco {

// Deterministic PRNG used everywhere in the project. Wraps a 64-bit
// splitmix-seeded xoshiro-style core with hand-rolled distributions so that
// results are bit-reproducible across platforms and standard-library
// versions (std::normal_distribution is implementation-defined).
class Rng {
   public:
    explicit Rng(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next_u64();

    // Uniform in [0, 1).
    double uniform();

    // Uniform in [lo, hi).
    double uniform(double lo, double hi);

    // Uniform integer in {0, ..., n-1}; n >= 1.
    std::uint64_t uniform_int(std::uint64_t n);

    // Standard normal via Box-Muller (no cached spare, one value per call).
    double normal();
    double normal(double mean, double stddev);

    // Fisher-Yates shuffle.
    template <typename T>
    void shuffle(std::vector<T>& v) {
        if (v.empty()) return;
        for (std::size_t i = v.size() - 1; i > 0; --i) {
            const std::size_t j = static_cast<std::size_t>(uniform_int(i + 1));
            std::swap(v[i], v[j]);
        }
    }

    // Independent generator for a named sub-stream. Derivation is a hash of
    // (root seed, stream id), so call order does not affect other streams.
    Rng derive(std::uint64_t stream) const;

   private:
    std::uint64_t state_;
};

}  // namespace tsmoco
