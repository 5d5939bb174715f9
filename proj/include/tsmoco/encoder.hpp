#pragma once

#include <string>
#include <utility>
#include <vector>

#include "tsmoco/rng.hpp"
#include "tsmoco/tensor.hpp"

namespace tsmoco {

struct EncoderDims {
    int channels = 0;  // input channels per timestep
    int d_model = 32;  // token embedding width D
    int d_ff = 64;     // feed-forward hidden width
    int n_heads = 4;   // attention heads (must divide d_model)
    int depth = 2;     // transformer blocks

    void validate() const;
};

// One pre-norm transformer block: h + MHA(LN(h)), then + FFN(LN(.)).
struct BlockParams {
    Tensor wq, wk, wv, wo;      // [D x D]
    Tensor w1, w2;              // [D x D_ff], [D_ff x D]
    Tensor ln1_gamma, ln1_beta; // [D]
    Tensor ln2_gamma, ln2_beta; // [D]
};

// All learnable parameters of the feature encoder: tokenizer, CLS embedding,
// the transformer stack and the closing layer norm of the pre-norm stack.
// Student and teacher hold two instances of the same schema.
struct EncoderParams {
    EncoderDims dims;
    Tensor tokenizer_w;  // [C x D]
    Tensor tokenizer_b;  // [D]
    Tensor cls;          // [1 x D], learned, random-initialized
    std::vector<BlockParams> blocks;
    Tensor ln_out_gamma, ln_out_beta;  // [D]; absent from the forward pass at depth 0

    std::vector<std::pair<std::string, Tensor>> named_params();
    std::vector<Tensor> trainable();
    void set_requires_grad(bool b);

    // Deep copy; the copy's tensors share nothing with the source.
    EncoderParams clone() const;
    // Copies values elementwise from src (schemas must match).
    void copy_values_from(const EncoderParams& src);
};

EncoderParams init_encoder(const EncoderDims& dims, Rng& rng);

// Per-timestep affine embedding of a [L x C] signal into [L x D].
Tensor tokenize(const Tensor& x, const EncoderParams& params);

// Prepends the CLS row: output row 0 is cls, rows 1..L are h1.
Tensor prepend_cls(const Tensor& h1, const Tensor& cls);

// Sinusoidal position matrix [L x D]; D must be even.
Tensor positional_encoding(int len, int d_model);

// h2 + alpha * P, alpha in {0,1}.
Tensor apply_positional(const Tensor& h2, int alpha);

// One block forward; when attn_probe is given, the per-head post-softmax
// attention matrices are appended to it.
Tensor transformer_block(const Tensor& h, const BlockParams& blk, int n_heads,
                         std::vector<Tensor>* attn_probe = nullptr);

// Full encoder: context vector c = CLS-position output of the depth-d stack
// over prepend_cls(tokenize(x)) + alpha * P. Returns a [1 x D] tensor.
Tensor encode(const Tensor& x, const EncoderParams& params, int alpha,
              std::vector<Tensor>* attn_probe = nullptr);

}  // namespace tsmoco
