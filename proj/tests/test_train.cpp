#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "tsmoco/augment.hpp"
#include "tsmoco/gradcheck.hpp"
#include "tsmoco/objective.hpp"
#include "tsmoco/optim.hpp"
#include "tsmoco/train.hpp"

using namespace tsmoco;

namespace {

TrainConfig tiny_config() {
    TrainConfig cfg;
    cfg.d_model = 16;
    cfg.d_ff = 32;
    cfg.n_heads = 2;
    cfg.depth = 1;
    cfg.horizon = 4;
    cfg.batch_size = 16;
    cfg.pretrain_epochs = 2;
    cfg.lineval_epochs = 10;
    cfg.early_stop_patience = 3;
    cfg.seed = 7;
    return cfg;
}

Dataset tiny_synth(int n_per_class = 20, std::uint64_t seed = 5) {
    return synth_generate(n_per_class, 3, 32, 2, 0.1, seed);
}

std::vector<double> all_values(EncoderParams& p) {
    std::vector<double> out;
    for (auto& [name, t] : p.named_params())
        out.insert(out.end(), t.values().begin(), t.values().end());
    return out;
}

Dataset shuffle_labels(const Dataset& ds, std::uint64_t seed) {
    Dataset out = ds;
    Rng rng(seed);
    rng.shuffle(out.labels);
    return out;
}

}  // namespace

TEST_CASE("tau=0 keeps teacher bitwise equal to the student after every step") {
    Dataset ds = tiny_synth(8);
    TrainConfig cfg = tiny_config();
    cfg.tau = 0.0;

    Rng rng(1);
    EncoderDims dims{ds.channels, cfg.d_model, cfg.d_ff, cfg.n_heads, cfg.depth};
    EncoderParams student = init_encoder(dims, rng);
    EncoderParams teacher = student.clone();
    ReconParams recon = init_recon(ds.channels, cfg.d_model, rng);
    std::vector<Tensor> params = student.trainable();
    auto rp = recon.trainable();
    params.insert(params.end(), rp.begin(), rp.end());
    AdamState adam;
    Rng mask_rng(2);
    for (int step = 0; step < 6; ++step) {
        Tape tape;
        {
            Tape::Scope scope(tape);
            Tensor loss = ss_window_loss(ds.window(step), student, teacher, recon, cfg, mask_rng);
            tape.backward(loss);
        }
        adam_step(params, adam, AdamConfig{cfg.lr, cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps});
        zero_grads(params);
        ema_update(teacher, student, cfg.tau);
        const auto sv = all_values(student);
        const auto tv = all_values(teacher);
        REQUIRE(sv.size() == tv.size());
        for (std::size_t i = 0; i < sv.size(); ++i) CHECK(sv[i] == tv[i]);
    }
}

TEST_CASE("tau=1 never moves the teacher; teacher grads stay absent") {
    Dataset ds = tiny_synth(8);
    TrainConfig cfg = tiny_config();
    cfg.tau = 1.0;

    Rng rng(3);
    EncoderDims dims{ds.channels, cfg.d_model, cfg.d_ff, cfg.n_heads, cfg.depth};
    EncoderParams student = init_encoder(dims, rng);
    EncoderParams teacher = student.clone();
    ReconParams recon = init_recon(ds.channels, cfg.d_model, rng);
    const auto frozen = all_values(teacher);
    std::vector<Tensor> params = student.trainable();
    auto rp = recon.trainable();
    params.insert(params.end(), rp.begin(), rp.end());
    AdamState adam;
    Rng mask_rng(4);
    for (int step = 0; step < 6; ++step) {
        Tape tape;
        {
            Tape::Scope scope(tape);
            Tensor loss = ss_window_loss(ds.window(step), student, teacher, recon, cfg, mask_rng);
            tape.backward(loss);
        }
        for (auto& [name, t] : teacher.named_params()) CHECK_FALSE(t.has_grad());
        adam_step(params, adam, AdamConfig{cfg.lr, cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps});
        zero_grads(params);
        ema_update(teacher, student, cfg.tau);
    }
    const auto after = all_values(teacher);
    for (std::size_t i = 0; i < frozen.size(); ++i) CHECK(after[i] == frozen[i]);
    // The student must have moved, or the check above is vacuous.
    bool student_moved = false;
    const auto sv = all_values(student);
    for (std::size_t i = 0; i < sv.size(); ++i)
        if (sv[i] != frozen[i]) student_moved = true;
    CHECK(student_moved);
}

TEST_CASE("lambda=0: teacher values cannot influence student gradients") {
    Dataset ds = tiny_synth(4);
    TrainConfig cfg = tiny_config();
    cfg.lambda = 0.0;

    Rng rng(5);
    EncoderDims dims{ds.channels, cfg.d_model, cfg.d_ff, cfg.n_heads, cfg.depth};
    EncoderParams student = init_encoder(dims, rng);
    EncoderParams teacher = student.clone();
    ReconParams recon = init_recon(ds.channels, cfg.d_model, rng);

    auto grads_with_teacher = [&](EncoderParams& t_params) {
        auto params = student.trainable();
        auto rp = recon.trainable();
        params.insert(params.end(), rp.begin(), rp.end());
        zero_grads(params);
        Rng mask_rng(6);
        Tape tape;
        {
            Tape::Scope scope(tape);
            Tensor loss = ss_window_loss(ds.window(0), student, t_params, recon, cfg, mask_rng);
            tape.backward(loss);
        }
        std::vector<double> out;
        for (Tensor& p : params) out.insert(out.end(), p.grad().begin(), p.grad().end());
        return out;
    };

    const auto g1 = grads_with_teacher(teacher);
    for (auto& [name, t] : teacher.named_params())
        for (double& v : t.values_mut()) v += 0.37;
    const auto g2 = grads_with_teacher(teacher);
    REQUIRE(g1.size() == g2.size());
    for (std::size_t i = 0; i < g1.size(); ++i) CHECK(g1[i] == g2[i]);
}

TEST_CASE("full combined-loss gradient check at toy dimensions") {
    GradCheckReport report = full_model_gradcheck(1e-5, 7, 1e-4);
    for (const auto& g : report.groups) {
        INFO(g.name, " max_rel_err=", g.max_rel_err);
        CHECK(g.max_rel_err < 1e-4);
    }
    CHECK(report.passed());
}

TEST_CASE("gradcheck flags an injected wrong backward rule") {
    GradCheckReport report = full_model_gradcheck(1e-5, 7, 1e-4, /*inject_fault=*/true);
    CHECK_FALSE(report.passed());
    CHECK_FALSE(report.failing().empty());
}

TEST_CASE("frozen-probe loss: classifier grads check out, encoder grads stay absent") {
    Dataset ds = tiny_synth(4);
    Rng rng(8);
    EncoderDims dims{ds.channels, 8, 16, 2, 1};
    EncoderParams enc = init_encoder(dims, rng);

    // Frozen contexts as plain data, exactly like the probe consumes them.
    std::vector<double> feat;
    {
        NoGrad ng;
        for (int i = 0; i < 6; ++i) {
            Tensor c = encode(ds.window(i), enc, 1);
            feat.insert(feat.end(), c.values().begin(), c.values().end());
        }
    }
    Tensor features = Tensor::from(std::move(feat), {6, 8});
    std::vector<int> labels;
    for (int i = 0; i < 6; ++i) labels.push_back(ds.label(i));

    Tensor w = Tensor::zeros({8, 3}, true);
    for (double& v : w.values_mut()) v = rng.normal(0.0, 0.3);
    Tensor b = Tensor::zeros({3}, true);

    auto build = [&]() { return loss_linear_eval(add_rowvec(matmul(features, w), b), labels); };
    CHECK(check_gradients(build, {w, b}, 1e-5) < 1e-6);

    {
        Tape tape;
        Tape::Scope scope(tape);
        tape.backward(build());
    }
    for (auto& [name, t] : enc.named_params()) CHECK_FALSE(t.has_grad());
}

TEST_CASE("pretrain decreases the training loss and records history") {
    Dataset ds = tiny_synth(20);
    TrainConfig cfg = tiny_config();
    cfg.pretrain_epochs = 8;
    PretrainResult res = pretrain(ds, cfg);
    REQUIRE(res.history.size() == 8);
    for (const MetricsRecord& r : res.history) {
        CHECK(r.phase == "pretrain");
        CHECK(std::isfinite(r.train_loss));
        CHECK(std::isfinite(r.val_loss));
        CHECK_FALSE(r.val_accuracy.has_value());
    }
    CHECK(res.history.back().train_loss < res.history.front().train_loss);
}

TEST_CASE("pretrain never reads labels") {
    Dataset ds = tiny_synth(10);
    TrainConfig cfg = tiny_config();
    PretrainResult a = pretrain(ds, cfg);
    PretrainResult b = pretrain(shuffle_labels(ds, 99), cfg);
    REQUIRE(a.history.size() == b.history.size());
    for (std::size_t i = 0; i < a.history.size(); ++i) {
        CHECK(a.history[i].train_loss == b.history[i].train_loss);
        CHECK(a.history[i].val_loss == b.history[i].val_loss);
    }
    const auto va = all_values(a.student);
    const auto vb = all_values(b.student);
    for (std::size_t i = 0; i < va.size(); ++i) CHECK(va[i] == vb[i]);
}

TEST_CASE("pretrain is deterministic per seed") {
    Dataset ds = tiny_synth(10);
    TrainConfig cfg = tiny_config();
    PretrainResult a = pretrain(ds, cfg);
    PretrainResult b = pretrain(ds, cfg);
    for (std::size_t i = 0; i < a.history.size(); ++i) {
        CHECK(a.history[i].train_loss == b.history[i].train_loss);
        CHECK(a.history[i].val_loss == b.history[i].val_loss);
    }
    cfg.seed = 8;
    PretrainResult c = pretrain(ds, cfg);
    CHECK(c.history.front().train_loss != a.history.front().train_loss);
}

TEST_CASE("linear_eval freezes the encoder bitwise and early-stops correctly") {
    Dataset ds = tiny_synth(30);
    TrainConfig cfg = tiny_config();
    cfg.lineval_epochs = 60;
    cfg.early_stop_patience = 4;

    Rng rng(9);
    EncoderDims dims{ds.channels, cfg.d_model, cfg.d_ff, cfg.n_heads, cfg.depth};
    EncoderParams enc = init_encoder(dims, rng);
    const auto before = all_values(enc);

    LinearEvalResult res = linear_eval(enc, ds, cfg);
    const auto after = all_values(enc);
    for (std::size_t i = 0; i < before.size(); ++i) CHECK(after[i] == before[i]);

    REQUIRE(!res.history.empty());
    int best_epoch = 0;
    double best = res.history[0].val_loss;
    for (std::size_t i = 1; i < res.history.size(); ++i) {
        if (res.history[i].val_loss < best) {
            best = res.history[i].val_loss;
            best_epoch = static_cast<int>(i);
        }
    }
    const int last_epoch = res.history.back().epoch;
    if (static_cast<int>(res.history.size()) < cfg.lineval_epochs) {
        CHECK(last_epoch - best_epoch == cfg.early_stop_patience);
    }

    // Restored weights reproduce the best recorded validation loss exactly.
    const SplitIndices si = split(ds, 0.6, 0.2, cfg.seed);
    const ChannelStats stats = ChannelStats::fit(ds, si.train);
    std::vector<double> feat;
    std::vector<int> y_val;
    {
        NoGrad ng;
        for (int i : si.val) {
            Tensor c = encode(stats.apply(ds.window(i)), enc, cfg.alpha);
            feat.insert(feat.end(), c.values().begin(), c.values().end());
            y_val.push_back(ds.label(i));
        }
    }
    Tensor x_val = Tensor::from(std::move(feat), {static_cast<int>(y_val.size()), cfg.d_model});
    const double val_loss =
        loss_linear_eval(add_rowvec(matmul(x_val, res.classifier_w), res.classifier_b), y_val)
            .item();
    CHECK(val_loss == best);
}

TEST_CASE("probe on shuffled labels scores near chance") {
    // Test split of 120 windows keeps the chance-level band meaningful.
    Dataset ds = shuffle_labels(tiny_synth(200, 21), 22);
    TrainConfig cfg = tiny_config();
    cfg.lineval_epochs = 30;
    const double acc = random_encoder_probe(ds, cfg);
    CHECK(acc >= 1.0 / 3.0 - 0.1);
    CHECK(acc <= 1.0 / 3.0 + 0.1);
}

TEST_CASE("random_classifier closed forms") {
    std::vector<int> uniform3;
    for (int i = 0; i < 999; ++i) uniform3.push_back(i % 3);
    const double acc3 = random_classifier(uniform3, uniform3, 31, 10000);
    CHECK(std::fabs(acc3 - 1.0 / 3.0) < 0.02);

    // Priors (0.8, 0.2) with a matching test distribution: 0.64 + 0.04.
    std::vector<int> train_bi, test_bi;
    for (int i = 0; i < 1000; ++i) train_bi.push_back(i < 800 ? 0 : 1);
    for (int i = 0; i < 1000; ++i) test_bi.push_back(i < 800 ? 0 : 1);
    const double acc_bi = random_classifier(train_bi, test_bi, 32, 20000);
    CHECK(std::fabs(acc_bi - 0.68) < 0.02);

    std::vector<int> uniform6;
    for (int i = 0; i < 600; ++i) uniform6.push_back(i % 6);
    const double acc6 = random_classifier(uniform6, uniform6, 33, 20000);
    CHECK(std::fabs(acc6 - 1.0 / 6.0) < 0.02);

    CHECK_THROWS_AS(random_classifier({}, {0}, 1), std::invalid_argument);
}

TEST_CASE("supervised baseline on a single-class dataset is perfect") {
    Dataset ds = tiny_synth(10);
    for (auto& y : ds.labels) y = 0;
    ds.num_classes = 1;
    TrainConfig cfg = tiny_config();
    cfg.pretrain_epochs = 2;
    SupervisedResult res = supervised_train(ds, cfg);
    CHECK(res.test_accuracy == 1.0);
}

TEST_CASE("supervised with zero epochs stays near chance") {
    Dataset ds = tiny_synth(60, 23);
    TrainConfig cfg = tiny_config();
    cfg.pretrain_epochs = 0;
    SupervisedResult res = supervised_train(ds, cfg);
    CHECK(res.history.empty());
    CHECK(res.test_accuracy >= 1.0 / 3.0 - 0.25);
    CHECK(res.test_accuracy <= 1.0 / 3.0 + 0.25);
}

TEST_CASE("sweep row construction follows the one-at-a-time pattern") {
    Dataset ds = tiny_synth(6);
    TrainConfig base = tiny_config();
    base.pretrain_epochs = 1;
    base.lineval_epochs = 2;
    base.tau = 0.9;
    base.lambda = 1.0;
    base.horizon = 6;
    base.p_m = 0.5;
    base.alpha = 0;

    SUBCASE("empty grid runs the base row only") {
        auto rows = ablation_sweep(ds, base, {}, 1, 1);
        REQUIRE(rows.size() == 1);
        CHECK(rows[0].varied == "base");
        CHECK_FALSE(rows[0].failed);
        CHECK(std::isfinite(rows[0].mean_accuracy));
    }
    SUBCASE("row count is 1 + sum of per-dimension variants") {
        std::vector<SweepDimension> grid = {
            {"kappa", {0.7, 0.9, 0.99}},  // 0.9 equals the base -> 2 variants
            {"lambda", {100.0, 0.01}},
            {"alpha", {0.0, 1.0}},  // 0 equals the base -> 1 variant
        };
        auto rows = ablation_sweep(ds, base, grid, 1, 2);
        REQUIRE(rows.size() == 1 + 2 + 2 + 1);
        CHECK(rows[0].varied == "base");
        CHECK(rows[1].varied == "kappa=0.7");
        CHECK(rows[2].varied == "kappa=0.99");
        CHECK(rows[3].varied == "lambda=100");
        CHECK(rows[4].varied == "lambda=0.01");
        CHECK(rows[5].varied == "alpha=1");
        for (const auto& row : rows) CHECK_FALSE(row.failed);
    }
    SUBCASE("a failing configuration marks its row and the sweep continues") {
        std::vector<SweepDimension> grid = {{"K", {80.0}}};  // > T-1, must fail
        auto rows = ablation_sweep(ds, base, grid, 1, 1);
        REQUIRE(rows.size() == 2);
        CHECK_FALSE(rows[0].failed);
        CHECK(rows[1].failed);
        CHECK_FALSE(rows[1].error.empty());
    }
    SUBCASE("unknown dimension name throws before any run") {
        CHECK_THROWS_AS(apply_hyperparameter(base, "p_mask", 0.5), ConfigError);
    }
}

TEST_CASE("sweep results do not depend on worker count") {
    Dataset ds = tiny_synth(6);
    TrainConfig base = tiny_config();
    base.pretrain_epochs = 1;
    base.lineval_epochs = 2;
    std::vector<SweepDimension> grid = {{"lambda", {0.0, 2.0}}};
    auto serial = ablation_sweep(ds, base, grid, 2, 1);
    auto parallel = ablation_sweep(ds, base, grid, 2, 4);
    REQUIRE(serial.size() == parallel.size());
    for (std::size_t i = 0; i < serial.size(); ++i) {
        REQUIRE(serial[i].accuracies.size() == parallel[i].accuracies.size());
        for (std::size_t s = 0; s < serial[i].accuracies.size(); ++s)
            CHECK(serial[i].accuracies[s] == parallel[i].accuracies[s]);
    }
}
