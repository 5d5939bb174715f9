#pragma once

#include <string>
#include <utility>
#include <vector>

#include "tsmoco/rng.hpp"
#include "tsmoco/tensor.hpp"

namespace tsmoco {

// Single-layer GRU reconstruction head. The hidden width equals the encoder
// output width D, so the context vector serves directly as initial hidden
// state; the output projection maps hidden states back to signal channels.
struct ReconParams {
    int channels = 0;
    int d_model = 0;
    Tensor wz, wr, wh;  // input weights  [C x D]
    Tensor uz, ur, uh;  // hidden weights [D x D]
    Tensor bz, br, bh;  // gate biases    [D]
    Tensor w_out;       // projection     [D x C]
    Tensor b_out;       // projection bias [C]

    std::vector<std::pair<std::string, Tensor>> named_params();
    std::vector<Tensor> trainable();
    ReconParams clone() const;
    void copy_values_from(const ReconParams& src);
};

ReconParams init_recon(int channels, int d_model, Rng& rng);

// One GRU step. x_t: [1 x C], h_prev: [1 x D] -> new hidden [1 x D].
//   z = sigmoid(x W_z + h U_z + b_z)
//   r = sigmoid(x W_r + h U_r + b_r)
//   hcand = tanh(x W_h + (r . h) U_h + b_h)
//   h' = (1 - z) . h + z . hcand
Tensor gru_cell(const Tensor& x_t, const Tensor& h_prev, const ReconParams& params);

// Rolls the GRU K steps under teacher forcing and projects each hidden state
// to a predicted timestep. h_0 = c; step 1 consumes x_last (the final past
// ground-truth sample), step j > 1 consumes the true x_future[j-2].
// Returns the [K x C] prediction.
Tensor reconstruct_future(const Tensor& context, const Tensor& x_future, const Tensor& x_last,
                          const ReconParams& params);

}  // namespace tsmoco
