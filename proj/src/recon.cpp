#include "tsmoco/recon.hpp"

#include <cmath>

namespace tsmoco {

namespace {

Tensor uniform_init(std::vector<int> shape, int fan_in, Rng& rng) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    Tensor t = Tensor::zeros(std::move(shape), /*requires_grad=*/true);
    for (double& v : t.values_mut()) v = rng.uniform(-bound, bound);
    return t;
}

}  // namespace

std::vector<std::pair<std::string, Tensor>> ReconParams::named_params() {
    return {{"wz", wz}, {"wr", wr}, {"wh", wh}, {"uz", uz},       {"ur", ur},
            {"uh", uh}, {"bz", bz}, {"br", br}, {"bh", bh},       {"w_out", w_out},
            {"b_out", b_out}};
}

std::vector<Tensor> ReconParams::trainable() {
    std::vector<Tensor> out;
    for (auto& [name, t] : named_params()) out.push_back(t);
    return out;
}

ReconParams ReconParams::clone() const {
    ReconParams out;
    out.channels = channels;
    out.d_model = d_model;
    out.wz = wz.detach();
    out.wr = wr.detach();
    out.wh = wh.detach();
    out.uz = uz.detach();
    out.ur = ur.detach();
    out.uh = uh.detach();
    out.bz = bz.detach();
    out.br = br.detach();
    out.bh = bh.detach();
    out.w_out = w_out.detach();
    out.b_out = b_out.detach();
    return out;
}

void ReconParams::copy_values_from(const ReconParams& src) {
    auto dst_named = named_params();
    auto src_named = const_cast<ReconParams&>(src).named_params();
    for (std::size_t i = 0; i < dst_named.size(); ++i) {
        if (dst_named[i].second.shape() != src_named[i].second.shape()) {
            throw ShapeError("recon: shape mismatch on " + dst_named[i].first);
        }
        auto d = dst_named[i].second.values_mut();
        auto s = src_named[i].second.values();
        std::copy(s.begin(), s.end(), d.begin());
    }
}

ReconParams init_recon(int channels, int d_model, Rng& rng) {
    ReconParams p;
    p.channels = channels;
    p.d_model = d_model;
    p.wz = uniform_init({channels, d_model}, channels, rng);
    p.wr = uniform_init({channels, d_model}, channels, rng);
    p.wh = uniform_init({channels, d_model}, channels, rng);
    p.uz = uniform_init({d_model, d_model}, d_model, rng);
    p.ur = uniform_init({d_model, d_model}, d_model, rng);
    p.uh = uniform_init({d_model, d_model}, d_model, rng);
    p.bz = Tensor::zeros({d_model}, true);
    p.br = Tensor::zeros({d_model}, true);
    p.bh = Tensor::zeros({d_model}, true);
    p.w_out = uniform_init({d_model, channels}, d_model, rng);
    p.b_out = Tensor::zeros({channels}, true);
    return p;
}

Tensor gru_cell(const Tensor& x_t, const Tensor& h_prev, const ReconParams& params) {
    if (x_t.rank() != 2 || x_t.rows() != 1 || x_t.cols() != params.channels) {
        throw ShapeError("gru_cell: input " + shape_str(x_t.shape()) + " must be [1 x " +
                         std::to_string(params.channels) + "]");
    }
    if (h_prev.rank() != 2 || h_prev.rows() != 1 || h_prev.cols() != params.d_model) {
        throw ShapeError("gru_cell: hidden " + shape_str(h_prev.shape()) + " must be [1 x " +
                         std::to_string(params.d_model) + "]");
    }
    Tensor z = sigmoid(add_rowvec(add(matmul(x_t, params.wz), matmul(h_prev, params.uz)), params.bz));
    Tensor r = sigmoid(add_rowvec(add(matmul(x_t, params.wr), matmul(h_prev, params.ur)), params.br));
    Tensor hcand =
        tanh(add_rowvec(add(matmul(x_t, params.wh), matmul(mul(r, h_prev), params.uh)), params.bh));
    Tensor keep = add_scalar(scale(z, -1.0), 1.0);  // 1 - z
    return add(mul(keep, h_prev), mul(z, hcand));
}

Tensor reconstruct_future(const Tensor& context, const Tensor& x_future, const Tensor& x_last,
                          const ReconParams& params) {
    if (x_future.rank() != 2 || x_future.rows() < 1 || x_future.cols() != params.channels) {
        throw ShapeError("reconstruct_future: target " + shape_str(x_future.shape()) +
                         " must be [K x " + std::to_string(params.channels) + "] with K >= 1");
    }
    const int horizon = x_future.rows();
    Tensor h = context;
    Tensor x_in = x_last;
    std::vector<Tensor> predicted;
    predicted.reserve(static_cast<std::size_t>(horizon));
    for (int j = 0; j < horizon; ++j) {
        h = gru_cell(x_in, h, params);
        predicted.push_back(add_rowvec(matmul(h, params.w_out), params.b_out));
        if (j + 1 < horizon) x_in = row(x_future, j);  // teacher forcing
    }
    return concat_rows(predicted);
}

}  // namespace tsmoco
