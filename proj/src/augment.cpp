#include "tsmoco/augment.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace tsmoco {

void MaskSpec::validate() const {
    if (!(p_m >= 0.0 && p_m <= 1.0)) {
        throw std::invalid_argument("mask fraction p_M must lie in [0,1], got " +
                                    std::to_string(p_m));
    }
}

Tensor window_mask(const Tensor& x, double p_m, Rng& rng) {
    if (x.rank() != 2 || x.rows() < 1) {
        throw ShapeError("window_mask: expects a [T x C] window, got " + shape_str(x.shape()));
    }
    MaskSpec{p_m, 0}.validate();
    const int t_len = x.rows();
    const int channels = x.cols();
    // Round half up; p_m == 1 masks the whole window.
    const int w = static_cast<int>(std::floor(p_m * t_len + 0.5));
    Tensor out = x.detach();
    if (w == 0) return out;
    const int start = static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(t_len - w + 1)));
    auto v = out.values_mut();
    for (int t = start; t < start + w; ++t)
        for (int c = 0; c < channels; ++c)
            v[static_cast<std::size_t>(t) * channels + c] = 0.0;
    return out;
}

}  // namespace tsmoco
