#include "tsmoco/encoder.hpp"

#include <cmath>
#include <stdexcept>

namespace tsmoco {

namespace {

constexpr double kLayerNormEps = 1e-5;

// Extra gain on the query/key projections at init. At the plain 1/sqrt(fan_in)
// scale the initial attention logits are so small that every attention map
// starts out uniform, i.e. a flat average that cancels any oscillatory
// structure in the tokens; the gain makes the initial heads act as
// content-sensitive filters instead.
constexpr double kAttnLogitGain = 4.0;

Tensor uniform_init(std::vector<int> shape, int fan_in, Rng& rng, double gain = 1.0) {
    const double bound = gain / std::sqrt(static_cast<double>(fan_in));
    Tensor t = Tensor::zeros(std::move(shape), /*requires_grad=*/true);
    for (double& v : t.values_mut()) v = rng.uniform(-bound, bound);
    return t;
}

}  // namespace

void EncoderDims::validate() const {
    if (channels < 1) throw std::invalid_argument("encoder: channels must be >= 1");
    if (d_model < 2 || d_model % 2 != 0) {
        throw std::invalid_argument("encoder: D must be even and >= 2, got " +
                                    std::to_string(d_model));
    }
    if (d_ff < 1) throw std::invalid_argument("encoder: D_ff must be >= 1");
    if (n_heads < 1 || d_model % n_heads != 0) {
        throw std::invalid_argument("encoder: n_heads (" + std::to_string(n_heads) +
                                    ") must divide D (" + std::to_string(d_model) + ")");
    }
    if (depth < 0) throw std::invalid_argument("encoder: depth must be >= 0");
}

std::vector<std::pair<std::string, Tensor>> EncoderParams::named_params() {
    std::vector<std::pair<std::string, Tensor>> out;
    out.emplace_back("tokenizer_w", tokenizer_w);
    out.emplace_back("tokenizer_b", tokenizer_b);
    out.emplace_back("cls", cls);
    for (std::size_t b = 0; b < blocks.size(); ++b) {
        const std::string p = "block" + std::to_string(b) + ".";
        out.emplace_back(p + "wq", blocks[b].wq);
        out.emplace_back(p + "wk", blocks[b].wk);
        out.emplace_back(p + "wv", blocks[b].wv);
        out.emplace_back(p + "wo", blocks[b].wo);
        out.emplace_back(p + "w1", blocks[b].w1);
        out.emplace_back(p + "w2", blocks[b].w2);
        out.emplace_back(p + "ln1_gamma", blocks[b].ln1_gamma);
        out.emplace_back(p + "ln1_beta", blocks[b].ln1_beta);
        out.emplace_back(p + "ln2_gamma", blocks[b].ln2_gamma);
        out.emplace_back(p + "ln2_beta", blocks[b].ln2_beta);
    }
    out.emplace_back("ln_out_gamma", ln_out_gamma);
    out.emplace_back("ln_out_beta", ln_out_beta);
    return out;
}

std::vector<Tensor> EncoderParams::trainable() {
    std::vector<Tensor> out;
    for (auto& [name, t] : named_params()) out.push_back(t);
    return out;
}

void EncoderParams::set_requires_grad(bool b) {
    for (auto& [name, t] : named_params()) t.set_requires_grad(b);
}

EncoderParams EncoderParams::clone() const {
    EncoderParams out;
    out.dims = dims;
    out.tokenizer_w = tokenizer_w.detach();
    out.tokenizer_b = tokenizer_b.detach();
    out.cls = cls.detach();
    for (const BlockParams& b : blocks) {
        out.blocks.push_back(BlockParams{b.wq.detach(), b.wk.detach(), b.wv.detach(),
                                         b.wo.detach(), b.w1.detach(), b.w2.detach(),
                                         b.ln1_gamma.detach(), b.ln1_beta.detach(),
                                         b.ln2_gamma.detach(), b.ln2_beta.detach()});
    }
    out.ln_out_gamma = ln_out_gamma.detach();
    out.ln_out_beta = ln_out_beta.detach();
    return out;
}

void EncoderParams::copy_values_from(const EncoderParams& src) {
    auto dst_named = named_params();
    auto src_named = const_cast<EncoderParams&>(src).named_params();
    if (dst_named.size() != src_named.size()) {
        throw ShapeError("encoder: parameter schemas differ");
    }
    for (std::size_t i = 0; i < dst_named.size(); ++i) {
        if (dst_named[i].second.shape() != src_named[i].second.shape()) {
            throw ShapeError("encoder: shape mismatch on " + dst_named[i].first);
        }
        auto d = dst_named[i].second.values_mut();
        auto s = src_named[i].second.values();
        std::copy(s.begin(), s.end(), d.begin());
    }
}

EncoderParams init_encoder(const EncoderDims& dims, Rng& rng) {
    dims.validate();
    EncoderParams p;
    p.dims = dims;
    p.tokenizer_w = uniform_init({dims.channels, dims.d_model}, dims.channels, rng);
    p.tokenizer_b = Tensor::zeros({dims.d_model}, true);
    p.cls = Tensor::zeros({1, dims.d_model}, true);
    for (double& v : p.cls.values_mut()) v = rng.normal(0.0, 0.02);
    for (int b = 0; b < dims.depth; ++b) {
        BlockParams blk;
        blk.wq = uniform_init({dims.d_model, dims.d_model}, dims.d_model, rng, kAttnLogitGain);
        blk.wk = uniform_init({dims.d_model, dims.d_model}, dims.d_model, rng, kAttnLogitGain);
        blk.wv = uniform_init({dims.d_model, dims.d_model}, dims.d_model, rng);
        blk.wo = uniform_init({dims.d_model, dims.d_model}, dims.d_model, rng);
        blk.w1 = uniform_init({dims.d_model, dims.d_ff}, dims.d_model, rng);
        blk.w2 = uniform_init({dims.d_ff, dims.d_model}, dims.d_ff, rng);
        blk.ln1_gamma = Tensor::full({dims.d_model}, 1.0, true);
        blk.ln1_beta = Tensor::zeros({dims.d_model}, true);
        blk.ln2_gamma = Tensor::full({dims.d_model}, 1.0, true);
        blk.ln2_beta = Tensor::zeros({dims.d_model}, true);
        p.blocks.push_back(std::move(blk));
    }
    p.ln_out_gamma = Tensor::full({dims.d_model}, 1.0, true);
    p.ln_out_beta = Tensor::zeros({dims.d_model}, true);
    return p;
}

Tensor tokenize(const Tensor& x, const EncoderParams& params) {
    if (x.rank() != 2 || x.cols() != params.dims.channels) {
        throw ShapeError("tokenize: signal " + shape_str(x.shape()) + " does not match " +
                         std::to_string(params.dims.channels) + " input channels");
    }
    return add_rowvec(matmul(x, params.tokenizer_w), params.tokenizer_b);
}

Tensor prepend_cls(const Tensor& h1, const Tensor& cls) {
    return concat_rows({cls, h1});
}

Tensor positional_encoding(int len, int d_model) {
    if (d_model % 2 != 0) {
        throw ShapeError("positional_encoding: D must be even, got " + std::to_string(d_model));
    }
    std::vector<double> v(static_cast<std::size_t>(len) * d_model);
    for (int pos = 0; pos < len; ++pos) {
        for (int i = 0; i < d_model / 2; ++i) {
            const double rate = std::pow(10000.0, 2.0 * i / static_cast<double>(d_model));
            const double angle = pos / rate;
            v[static_cast<std::size_t>(pos) * d_model + 2 * i] = std::sin(angle);
            v[static_cast<std::size_t>(pos) * d_model + 2 * i + 1] = std::cos(angle);
        }
    }
    return Tensor::from(std::move(v), {len, d_model});
}

Tensor apply_positional(const Tensor& h2, int alpha) {
    if (alpha == 0) return h2;
    return add(h2, positional_encoding(h2.rows(), h2.cols()));
}

Tensor transformer_block(const Tensor& h, const BlockParams& blk, int n_heads,
                         std::vector<Tensor>* attn_probe) {
    const int d_model = h.cols();
    const int head_dim = d_model / n_heads;
    const double att_scale = 1.0 / std::sqrt(static_cast<double>(head_dim));

    // Multi-head self-attention on the pre-normed input.
    Tensor hn = layer_norm(h, blk.ln1_gamma, blk.ln1_beta, kLayerNormEps);
    Tensor q = matmul(hn, blk.wq);
    Tensor k = matmul(hn, blk.wk);
    Tensor v = matmul(hn, blk.wv);
    std::vector<Tensor> heads;
    heads.reserve(static_cast<std::size_t>(n_heads));
    for (int head = 0; head < n_heads; ++head) {
        const int c0 = head * head_dim;
        const int c1 = c0 + head_dim;
        Tensor qh = slice_cols(q, c0, c1);
        Tensor kh = slice_cols(k, c0, c1);
        Tensor vh = slice_cols(v, c0, c1);
        Tensor scores = scale(matmul(qh, transpose(kh)), att_scale);
        Tensor attn = softmax(scores, 1);
        if (attn_probe != nullptr) attn_probe->push_back(attn);
        heads.push_back(matmul(attn, vh));
    }
    Tensor mha = matmul(concat_cols(heads), blk.wo);
    Tensor h_mid = add(h, mha);

    // Position-wise feed-forward, again pre-normed.
    Tensor hn2 = layer_norm(h_mid, blk.ln2_gamma, blk.ln2_beta, kLayerNormEps);
    Tensor ffn = matmul(relu(matmul(hn2, blk.w1)), blk.w2);
    return add(h_mid, ffn);
}

Tensor encode(const Tensor& x, const EncoderParams& params, int alpha,
              std::vector<Tensor>* attn_probe) {
    if (x.rank() != 2 || x.rows() < 1) {
        throw ShapeError("encode: expects a [L x C] signal with L >= 1, got " +
                         shape_str(x.shape()));
    }
    if (alpha != 0 && alpha != 1) {
        throw std::invalid_argument("encode: alpha must be 0 or 1");
    }
    Tensor h = apply_positional(prepend_cls(tokenize(x, params), params.cls), alpha);
    for (const BlockParams& blk : params.blocks)
        h = transformer_block(h, blk, params.dims.n_heads, attn_probe);
    Tensor context = slice_rows(h, 0, 1);
    // Closing norm of the pre-norm stack. It also pins the context scale,
    // which the cosine contrast needs: an unnormalized residual stream can
    // grow a dominant shared direction that zeroes the contrast gradient.
    // Depth 0 is a degenerate testing mode and stays un-normalized.
    if (!params.blocks.empty()) {
        context = layer_norm(context, params.ln_out_gamma, params.ln_out_beta, kLayerNormEps);
    }
    return context;
}

}  // namespace tsmoco
