#pragma once

#include <cstdint>

#include "tsmoco/rng.hpp"
#include "tsmoco/tensor.hpp"

namespace tsmoco {

// Parameters of the window-wise temporal masking augmentation.
struct MaskSpec {
    double p_m = 0.5;        // masked fraction of the window
    std::uint64_t seed = 0;  // stream seed for mask placement

    void validate() const;
};

// Zeroes one contiguous run of round(p_m * T) timesteps (all channels) of a
// [T x C] window; the start index is uniform over the feasible range and all
// unmasked entries are returned bit-identical. The input is not mutated.
Tensor window_mask(const Tensor& x, double p_m, Rng& rng);

}  // namespace tsmoco
