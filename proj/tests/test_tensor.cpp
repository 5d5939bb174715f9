#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "tsmoco/optim.hpp"
#include "tsmoco/rng.hpp"
#include "tsmoco/tensor.hpp"

using namespace tsmoco;

namespace {

Tensor random_tensor(std::vector<int> shape, Rng& rng, bool requires_grad = false,
                     double lo = -1.0, double hi = 1.0) {
    Tensor t = Tensor::zeros(std::move(shape), requires_grad);
    for (double& v : t.values_mut()) v = rng.uniform(lo, hi);
    return t;
}

// Independent naive oracle for the matrix product.
std::vector<double> matmul_oracle(const Tensor& a, const Tensor& b) {
    const int m = a.rows(), k = a.cols(), n = b.cols();
    std::vector<double> out(static_cast<std::size_t>(m) * n, 0.0);
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j) {
            double s = 0.0;
            for (int kk = 0; kk < k; ++kk) s += a.at(i, kk) * b.at(kk, j);
            out[static_cast<std::size_t>(i) * n + j] = s;
        }
    return out;
}

}  // namespace

TEST_CASE("matmul identity and hand products") {
    Tensor eye = Tensor::from({1, 0, 0, 1}, {2, 2});
    Tensor m = Tensor::from({1, 2, 3, 4}, {2, 2});
    Tensor r = matmul(eye, m);
    for (int i = 0; i < 4; ++i) CHECK(r.values()[i] == m.values()[i]);

    Tensor a = Tensor::from({1, 2}, {1, 2});
    Tensor b = Tensor::from({3, 4}, {2, 1});
    CHECK(matmul(a, b).item() == 11.0);
}

TEST_CASE("matmul matches triple-loop oracle exactly") {
    Rng rng(11);
    Tensor a = random_tensor({3, 4}, rng);
    Tensor b = random_tensor({4, 2}, rng);
    Tensor r = matmul(a, b);
    const auto expected = matmul_oracle(a, b);
    REQUIRE(r.values().size() == expected.size());
    for (std::size_t i = 0; i < expected.size(); ++i) CHECK(r.values()[i] == expected[i]);
}

TEST_CASE("matmul shape mismatch names both shapes") {
    Tensor a = Tensor::zeros({2, 3});
    Tensor b = Tensor::zeros({2, 3});
    CHECK_THROWS_WITH_AS(matmul(a, b),
                         "matmul: inner dimensions disagree, [2x3] x [2x3]", ShapeError);
}

TEST_CASE("elementwise activations at reference points") {
    Tensor x = Tensor::from({0.0}, {1});
    CHECK(sigmoid(x).at(0) == 0.5);
    CHECK(tanh(x).at(0) == 0.0);
    CHECK(relu(Tensor::from({-3.2}, {1})).at(0) == 0.0);
    CHECK(relu(Tensor::from({3.2}, {1})).at(0) == 3.2);
}

TEST_CASE("binary elementwise rejects mismatched shapes") {
    CHECK_THROWS_AS(add(Tensor::zeros({2}), Tensor::zeros({3})), ShapeError);
    CHECK_THROWS_AS(mul(Tensor::zeros({2, 2}), Tensor::zeros({4})), ShapeError);
}

TEST_CASE("reductions") {
    CHECK(mean(Tensor::from({1, 2, 3}, {3})).item() == 2.0);
    CHECK(sum(Tensor::zeros({4, 5})).item() == 0.0);

    Tensor m = Tensor::from({1, 2, 3, 4}, {2, 2});
    Tensor r = mean(m, 0);
    CHECK(r.shape() == std::vector<int>{2});
    CHECK(r.at(0) == 2.0);
    CHECK(r.at(1) == 3.0);

    CHECK_THROWS_AS(sum(m, 2), ShapeError);
}

TEST_CASE("softmax reference values and stability") {
    Tensor s = softmax(Tensor::from({0, 0}, {2}), 0);
    CHECK(s.at(0) == doctest::Approx(0.5).epsilon(1e-14));
    CHECK(s.at(1) == doctest::Approx(0.5).epsilon(1e-14));

    Tensor big = softmax(Tensor::from({1000, 1000}, {2}), 0);
    CHECK(std::isfinite(big.at(0)));
    CHECK(big.at(0) == doctest::Approx(0.5).epsilon(1e-14));

    Tensor t = softmax(Tensor::from({0.0, std::log(3.0)}, {2}), 0);
    CHECK(t.at(0) == doctest::Approx(0.25).epsilon(1e-12));
    CHECK(t.at(1) == doctest::Approx(0.75).epsilon(1e-12));
}

TEST_CASE("softmax rows sum to one and shift invariance") {
    Rng rng(5);
    for (int trial = 0; trial < 20; ++trial) {
        Tensor m = random_tensor({4, 7}, rng, false, -30.0, 30.0);
        Tensor s = softmax(m, 1);
        for (int i = 0; i < 4; ++i) {
            double row = 0.0;
            for (int j = 0; j < 7; ++j) row += s.at(i, j);
            CHECK(std::fabs(row - 1.0) <= 1e-12);
        }
    }
    // With exactly representable inputs the max-subtraction makes the shift
    // cancel bit-for-bit.
    for (int trial = 0; trial < 20; ++trial) {
        Tensor m = Tensor::zeros({3, 5});
        for (double& v : m.values_mut()) v = static_cast<double>(rng.uniform_int(17)) - 8.0;
        const double c = static_cast<double>(rng.uniform_int(9)) - 4.0;
        Tensor shifted = add_scalar(m, c);
        Tensor s0 = softmax(m, 1);
        Tensor s1 = softmax(shifted, 1);
        for (std::size_t i = 0; i < s0.values().size(); ++i)
            CHECK(s0.values()[i] == s1.values()[i]);
    }
}

TEST_CASE("layer_norm reference cases") {
    Tensor gamma = Tensor::full({4}, 1.0);
    Tensor beta = Tensor::zeros({4});

    Tensor constant = Tensor::full({4}, 3.7);
    Tensor r = layer_norm(constant, gamma, beta, 1e-5);
    for (int j = 0; j < 4; ++j) CHECK(r.at(j) == 0.0);

    Tensor two = Tensor::from({1, -1}, {2});
    Tensor g2 = Tensor::full({2}, 1.0);
    Tensor b2 = Tensor::zeros({2});
    Tensor n = layer_norm(two, g2, b2, 0.0);
    CHECK(n.at(0) == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(n.at(1) == doctest::Approx(-1.0).epsilon(1e-15));
}

TEST_CASE("layer_norm output statistics on random input") {
    Rng rng(3);
    // Input variance >> eps so the eps bias stays below the tolerance.
    Tensor x = Tensor::zeros({6, 16});
    for (double& v : x.values_mut()) v = rng.normal(0.0, 10.0);
    Tensor gamma = Tensor::full({16}, 1.0);
    Tensor beta = Tensor::zeros({16});
    Tensor y = layer_norm(x, gamma, beta, 1e-5);
    for (int i = 0; i < 6; ++i) {
        double mu = 0.0, var = 0.0;
        for (int j = 0; j < 16; ++j) mu += y.at(i, j);
        mu /= 16.0;
        for (int j = 0; j < 16; ++j) var += (y.at(i, j) - mu) * (y.at(i, j) - mu);
        var /= 16.0;
        CHECK(std::fabs(mu) < 1e-6);
        CHECK(std::fabs(var - 1.0) < 1e-6);
    }
}

TEST_CASE("backward: sum gives all-ones, mse at minimum gives zeros") {
    Tensor w = Tensor::from({0.3, -0.7, 1.1, 2.0}, {2, 2}, true);
    {
        Tape tape;
        Tape::Scope scope(tape);
        tape.backward(sum(w));
        for (double g : w.grad()) CHECK(g == 1.0);
        w.zero_grad();
    }
    {
        Tensor target = w.detach();
        Tape tape;
        Tape::Scope scope(tape);
        Tensor d = sub(w, target);
        tape.backward(mean(mul(d, d)));
        for (double g : w.grad()) CHECK(g == 0.0);
    }
}

TEST_CASE("backward rejects non-scalar loss and double traversal") {
    Tensor w = Tensor::from({1, 2}, {2}, true);
    Tape tape;
    Tape::Scope scope(tape);
    Tensor y = scale(w, 2.0);
    CHECK_THROWS_AS(tape.backward(y), GraphError);
    Tensor l = sum(y);
    tape.backward(l);
    CHECK_THROWS_AS(tape.backward(l), GraphError);
}

TEST_CASE("gradient accumulation across reuse: d(w.w)/dw == 2w") {
    Tensor w = Tensor::from({0.5, -1.5, 2.5}, {3}, true);
    Tape tape;
    Tape::Scope scope(tape);
    tape.backward(sum(mul(w, w)));
    for (int i = 0; i < 3; ++i) CHECK(w.grad()[i] == doctest::Approx(2.0 * w.at(i)).epsilon(1e-15));
}

TEST_CASE("composite graph gradients match finite differences") {
    Rng rng(17);
    Tensor w = random_tensor({3, 4}, rng, true);
    Tensor u = random_tensor({4, 2}, rng, true);
    Tensor x = random_tensor({2, 3}, rng);
    auto build = [&]() {
        Tensor h = tanh(matmul(x, w));
        Tensor y = sigmoid(matmul(h, u));
        Tensor sm = softmax(y, 1);
        return mean(mul(sm, sm));
    };
    CHECK(check_gradients(build, {w, u}, 1e-5) < 1e-4);
}

TEST_CASE("per-op gradient fidelity on randomized tensors") {
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        Rng rng(seed);
        Tensor a = random_tensor({3, 4}, rng, true, -2.0, 2.0);
        Tensor b = random_tensor({3, 4}, rng, true, 0.5, 2.0);  // positive: safe for div/sqrt
        Tensor m = random_tensor({4, 3}, rng, true, -1.0, 1.0);
        Tensor v = random_tensor({4}, rng, true, -1.0, 1.0);
        Tensor gamma = random_tensor({4}, rng, true, 0.5, 1.5);
        Tensor beta = random_tensor({4}, rng, true, -0.5, 0.5);

        auto fd = [&](auto make, double tol) {
            CHECK(check_gradients(make, {a, b, m, v, gamma, beta}, 1e-5) < tol);
        };
        fd([&]() { return sum(add(a, b)); }, 1e-6);
        fd([&]() { return sum(mul(sub(a, b), a)); }, 1e-6);
        fd([&]() { return sum(div(a, b)); }, 1e-6);
        fd([&]() { return mean(sigmoid(a)); }, 1e-6);
        fd([&]() { return mean(tanh(matmul(a, m))); }, 1e-6);
        fd([&]() { return sum(sqrt(b)); }, 1e-6);
        fd([&]() { return sum(relu(a)); }, 1e-4);
        fd([&]() { return sum(softmax(a, 1)); }, 1e-6);
        fd([&]() { return mean(mul(log_softmax(a, 1), log_softmax(a, 1))); }, 1e-6);
        fd([&]() { return sum(layer_norm(a, gamma, beta, 1e-5)); }, 1e-6);
        fd([&]() { return sum(add_rowvec(a, v)); }, 1e-6);
        fd([&]() { return sum(mul(transpose(a), transpose(a))); }, 1e-6);
        fd([&]() { return sum(mean(a, 0)); }, 1e-6);
        fd([&]() { return sum(sum(a, 1)); }, 1e-6);
        fd([&]() { return sum(slice_rows(a, 1, 3)); }, 1e-6);
        fd([&]() { return sum(slice_cols(a, 0, 2)); }, 1e-6);
        fd([&]() { return sum(concat_rows({a, scale(a, 2.0)})); }, 1e-6);
        fd([&]() { return sum(concat_cols({a, a})); }, 1e-6);
        fd([&]() { return sum(pick(a, {0, 3, 1})); }, 1e-6);
    }
}

TEST_CASE("check_gradients on a quadratic is exact to rounding") {
    Tensor w = Tensor::from({1.0, -2.0, 0.5}, {3}, true);
    auto build = [&]() { return sum(mul(w, w)); };
    CHECK(check_gradients(build, {w}, 1e-5) < 1e-8);
}

TEST_CASE("adam: zero gradients leave parameters unchanged") {
    Tensor w = Tensor::from({1.0, 2.0}, {2}, true);
    {
        Tape tape;
        Tape::Scope scope(tape);
        tape.backward(sum(scale(w, 0.0)));
    }
    std::vector<Tensor> params{w};
    AdamState st;
    adam_step(params, st, AdamConfig{0.1, 0.9, 0.999, 1e-8});
    CHECK(w.at(0) == 1.0);
    CHECK(w.at(1) == 2.0);
    CHECK(st.step == 1);
}

TEST_CASE("adam: first-step magnitude equals lr") {
    Tensor w = Tensor::from({5.0}, {}, true);
    {
        Tape tape;
        Tape::Scope scope(tape);
        tape.backward(sum(w));
    }
    std::vector<Tensor> params{w};
    AdamState st;
    adam_step(params, st, AdamConfig{0.1, 0.9, 0.999, 1e-8});
    CHECK(std::fabs((5.0 - w.item()) - 0.1) < 1e-8);
}

TEST_CASE("adam: 100 steps on (w-3)^2 converge near 3") {
    Tensor w = Tensor::from({0.0}, {}, true);
    std::vector<Tensor> params{w};
    AdamState st;
    const AdamConfig cfg{0.1, 0.9, 0.999, 1e-8};
    for (int i = 0; i < 100; ++i) {
        Tape tape;
        Tape::Scope scope(tape);
        Tensor d = add_scalar(w, -3.0);
        tape.backward(mul(d, d));
        adam_step(params, st, cfg);
        zero_grads(params);
    }
    CHECK(std::fabs(w.item() - 3.0) < 0.1);
}

TEST_CASE("adam: missing gradient is a contract violation") {
    Tensor w = Tensor::from({1.0}, {}, true);
    std::vector<Tensor> params{w};
    AdamState st;
    CHECK_THROWS_AS(adam_step(params, st, AdamConfig{}), GraphError);
}

TEST_CASE("determinism: identical seeds give bit-identical values and grads") {
    auto run = [](std::uint64_t seed) {
        Rng rng(seed);
        Tensor w = random_tensor({4, 4}, rng, true);
        Tensor x = random_tensor({2, 4}, rng);
        Tape tape;
        Tape::Scope scope(tape);
        Tensor loss = mean(sigmoid(matmul(x, w)));
        const double lv = loss.item();
        tape.backward(loss);
        std::vector<double> g(w.grad().begin(), w.grad().end());
        return std::make_pair(lv, g);
    };
    auto [l1, g1] = run(123);
    auto [l2, g2] = run(123);
    CHECK(l1 == l2);
    REQUIRE(g1.size() == g2.size());
    for (std::size_t i = 0; i < g1.size(); ++i) CHECK(g1[i] == g2[i]);
}

TEST_CASE("operations off-tape do not record") {
    Tensor w = Tensor::from({1.0, 2.0}, {2}, true);
    Tape tape;
    {
        Tape::Scope scope(tape);
        NoGrad ng;
        Tensor y = scale(w, 3.0);
        CHECK(y.node() == -1);
    }
    CHECK(tape.num_ops() == 0);
}
