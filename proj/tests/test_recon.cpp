#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "tsmoco/encoder.hpp"
#include "tsmoco/optim.hpp"
#include "tsmoco/recon.hpp"

using namespace tsmoco;

namespace {

Tensor random_matrix(int r, int c, Rng& rng) {
    Tensor x = Tensor::zeros({r, c});
    for (double& v : x.values_mut()) v = rng.normal();
    return x;
}

void zero_all(ReconParams& p) {
    for (auto& [name, t] : p.named_params())
        for (double& v : t.values_mut()) v = 0.0;
}

// Scalar-loop oracle for one GRU step.
std::vector<double> gru_oracle(const std::vector<double>& x, const std::vector<double>& h,
                               const ReconParams& p) {
    const int c = p.channels, d = p.d_model;
    auto affine = [&](const Tensor& w_in, const Tensor& u_h, const Tensor& bias) {
        std::vector<double> out(static_cast<std::size_t>(d));
        for (int j = 0; j < d; ++j) {
            double s = bias.at(j);
            for (int i = 0; i < c; ++i) s += x[static_cast<std::size_t>(i)] * w_in.at(i, j);
            for (int i = 0; i < d; ++i) s += h[static_cast<std::size_t>(i)] * u_h.at(i, j);
            out[static_cast<std::size_t>(j)] = s;
        }
        return out;
    };
    auto zs = affine(p.wz, p.uz, p.bz);
    auto rs = affine(p.wr, p.ur, p.br);
    // r gates the previous hidden state elementwise before U_h.
    std::vector<double> rgated(static_cast<std::size_t>(d));
    for (int i = 0; i < d; ++i) {
        const double ri = 1.0 / (1.0 + std::exp(-rs[static_cast<std::size_t>(i)]));
        rgated[static_cast<std::size_t>(i)] = ri * h[static_cast<std::size_t>(i)];
    }
    std::vector<double> out(static_cast<std::size_t>(d));
    for (int j = 0; j < d; ++j) {
        double hc = p.bh.at(j);
        for (int i = 0; i < c; ++i) hc += x[static_cast<std::size_t>(i)] * p.wh.at(i, j);
        for (int i = 0; i < d; ++i) hc += rgated[static_cast<std::size_t>(i)] * p.uh.at(i, j);
        const double z = 1.0 / (1.0 + std::exp(-zs[static_cast<std::size_t>(j)]));
        out[static_cast<std::size_t>(j)] =
            (1.0 - z) * h[static_cast<std::size_t>(j)] + z * std::tanh(hc);
    }
    return out;
}

}  // namespace

TEST_CASE("gru_cell at all-zero parameters and state is zero") {
    Rng rng(1);
    ReconParams p = init_recon(2, 4, rng);
    zero_all(p);
    Tensor x = random_matrix(1, 2, rng);
    Tensor h0 = Tensor::zeros({1, 4});
    Tensor h1 = gru_cell(x, h0, p);
    // z = 0.5, r = 0.5, hcand = 0 -> h' = 0.5*0 + 0.5*0 = 0.
    for (double v : h1.values()) CHECK(v == 0.0);
}

TEST_CASE("closed update gate keeps the previous hidden state") {
    Rng rng(2);
    ReconParams p = init_recon(2, 4, rng);
    for (double& v : p.bz.values_mut()) v = -40.0;  // z ~ 0
    Tensor x = random_matrix(1, 2, rng);
    Tensor h0 = random_matrix(1, 4, rng);
    Tensor h1 = gru_cell(x, h0, p);
    for (int j = 0; j < 4; ++j) CHECK(h1.at(0, j) == doctest::Approx(h0.at(0, j)).epsilon(1e-12));
}

TEST_CASE("gru_cell matches the scalar-loop oracle") {
    Rng rng(3);
    ReconParams p = init_recon(3, 5, rng);
    Tensor x = random_matrix(1, 3, rng);
    Tensor h0 = random_matrix(1, 5, rng);
    Tensor h1 = gru_cell(x, h0, p);
    const std::vector<double> xs(x.values().begin(), x.values().end());
    const std::vector<double> hs(h0.values().begin(), h0.values().end());
    const auto expect = gru_oracle(xs, hs, p);
    for (int j = 0; j < 5; ++j) CHECK(std::fabs(h1.at(0, j) - expect[static_cast<std::size_t>(j)]) < 1e-12);
}

TEST_CASE("gru_cell rejects mismatched dimensions") {
    Rng rng(4);
    ReconParams p = init_recon(3, 5, rng);
    CHECK_THROWS_AS(gru_cell(Tensor::zeros({1, 2}), Tensor::zeros({1, 5}), p), ShapeError);
    CHECK_THROWS_AS(gru_cell(Tensor::zeros({1, 3}), Tensor::zeros({1, 4}), p), ShapeError);
}

TEST_CASE("reconstruct_future K=1 is one cell step plus projection") {
    Rng rng(5);
    ReconParams p = init_recon(2, 4, rng);
    Tensor c = random_matrix(1, 4, rng);
    Tensor x_last = random_matrix(1, 2, rng);
    Tensor x_future = random_matrix(1, 2, rng);
    Tensor got = reconstruct_future(c, x_future, x_last, p);
    Tensor h1 = gru_cell(x_last, c, p);
    Tensor expect = add_rowvec(matmul(h1, p.w_out), p.b_out);
    CHECK(got.rows() == 1);
    for (int j = 0; j < 2; ++j) CHECK(got.at(0, j) == expect.at(0, j));
}

TEST_CASE("all-zero parameters predict zeros") {
    Rng rng(6);
    ReconParams p = init_recon(2, 4, rng);
    zero_all(p);
    Tensor c = random_matrix(1, 4, rng);
    Tensor out = reconstruct_future(c, random_matrix(3, 2, rng), random_matrix(1, 2, rng), p);
    CHECK(out.rows() == 3);
    CHECK(out.cols() == 2);
    // Hidden state decays toward 0 through the 0.5 update gate; the zero
    // output projection maps every state to exactly 0.
    for (double v : out.values()) CHECK(v == 0.0);
}

TEST_CASE("K=3 unrolled oracle") {
    Rng rng(7);
    ReconParams p = init_recon(3, 6, rng);
    Tensor c = random_matrix(1, 6, rng);
    Tensor x_last = random_matrix(1, 3, rng);
    Tensor x_future = random_matrix(3, 3, rng);
    Tensor got = reconstruct_future(c, x_future, x_last, p);

    Tensor h = c;
    Tensor x_in = x_last;
    for (int step = 0; step < 3; ++step) {
        h = gru_cell(x_in, h, p);
        Tensor pred = add_rowvec(matmul(h, p.w_out), p.b_out);
        for (int j = 0; j < 3; ++j) CHECK(got.at(step, j) == pred.at(0, j));
        if (step + 1 < 3) x_in = row(x_future, step);
    }
}

TEST_CASE("teacher forcing causality: future inputs cannot reach earlier outputs") {
    Rng rng(8);
    ReconParams p = init_recon(2, 4, rng);
    Tensor c = random_matrix(1, 4, rng);
    Tensor x_last = random_matrix(1, 2, rng);
    Tensor x_future = random_matrix(5, 2, rng);
    Tensor base = reconstruct_future(c, x_future, x_last, p);
    for (int j = 0; j < 5; ++j) {
        Tensor perturbed = x_future.detach();
        perturbed.values_mut()[static_cast<std::size_t>(j) * 2] += 0.5;
        Tensor out = reconstruct_future(c, perturbed, x_last, p);
        // Outputs up to and including index j are unchanged; j+1 onward may move.
        for (int i = 0; i <= j; ++i)
            for (int ch = 0; ch < 2; ++ch) CHECK(out.at(i, ch) == base.at(i, ch));
        if (j + 1 < 5) {
            double moved = 0.0;
            for (int i = j + 1; i < 5; ++i)
                for (int ch = 0; ch < 2; ++ch) moved += std::fabs(out.at(i, ch) - base.at(i, ch));
            CHECK(moved > 0.0);
        }
    }
}

TEST_CASE("outputs stay finite for bounded inputs") {
    Rng rng(9);
    ReconParams p = init_recon(2, 4, rng);
    Tensor c = random_matrix(1, 4, rng);
    Tensor out = reconstruct_future(c, random_matrix(24, 2, rng), random_matrix(1, 2, rng), p);
    for (double v : out.values()) CHECK(std::isfinite(v));
}

TEST_CASE("gradients flow into recon params and the context") {
    Rng rng(10);
    ReconParams p = init_recon(2, 4, rng);
    Tensor c = Tensor::zeros({1, 4}, true);
    for (double& v : c.values_mut()) v = rng.normal();
    Tensor x_future = random_matrix(3, 2, rng);
    Tensor x_last = random_matrix(1, 2, rng);
    Tape tape;
    {
        Tape::Scope scope(tape);
        Tensor out = reconstruct_future(c, x_future, x_last, p);
        Tensor d = sub(out, x_future);
        tape.backward(mean(mul(d, d)));
    }
    REQUIRE(c.has_grad());
    double cn = 0.0;
    for (double g : c.grad()) cn += g * g;
    CHECK(cn > 0.0);
    for (auto& [name, t] : p.named_params()) {
        REQUIRE(t.has_grad());
        double n = 0.0;
        for (double g : t.grad()) n += g * g;
        if (name != "b_out" && name != "bz" && name != "br" && name != "bh") CHECK(n > 0.0);
    }

    // Finite-difference fidelity through the unrolled recurrence.
    auto params = p.trainable();
    params.push_back(c);
    zero_grads(params);
    auto build = [&]() {
        Tensor out = reconstruct_future(c, x_future, x_last, p);
        Tensor d = sub(out, x_future);
        return mean(mul(d, d));
    };
    CHECK(check_gradients(build, params, 1e-5) < 1e-4);
}
