#include "tsmoco/train.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "tsmoco/augment.hpp"
#include "tsmoco/objective.hpp"
#include "tsmoco/optim.hpp"

namespace tsmoco {

namespace {

// Rng sub-stream ids; fixed so the draw order of one phase can never shift
// another phase's randomness.
constexpr std::uint64_t kStreamStudentInit = 1;
constexpr std::uint64_t kStreamReconInit = 2;
constexpr std::uint64_t kStreamShuffle = 3;
constexpr std::uint64_t kStreamMask = 4;
constexpr std::uint64_t kStreamValMask = 5;
constexpr std::uint64_t kStreamProbeInit = 6;
constexpr std::uint64_t kStreamProbeShuffle = 7;
constexpr std::uint64_t kStreamSupervisedInit = 8;
constexpr std::uint64_t kStreamSupervisedShuffle = 9;
constexpr std::uint64_t kStreamRandomEncoder = 10;

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point t0) {
    return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

Tensor uniform_init(std::vector<int> shape, int fan_in, Rng& rng) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    Tensor t = Tensor::zeros(std::move(shape), /*requires_grad=*/true);
    for (double& v : t.values_mut()) v = rng.uniform(-bound, bound);
    return t;
}

std::vector<std::vector<double>> snapshot_values(const std::vector<Tensor>& params) {
    std::vector<std::vector<double>> out;
    out.reserve(params.size());
    for (const Tensor& p : params) out.emplace_back(p.values().begin(), p.values().end());
    return out;
}

void restore_values(std::vector<Tensor>& params, const std::vector<std::vector<double>>& snap) {
    for (std::size_t i = 0; i < params.size(); ++i) {
        auto v = params[i].values_mut();
        std::copy(snap[i].begin(), snap[i].end(), v.begin());
    }
}

struct EarlyStopper {
    int patience;
    double best = std::numeric_limits<double>::infinity();
    int best_epoch = -1;

    bool improved(double val_loss, int epoch) {
        if (val_loss < best) {
            best = val_loss;
            best_epoch = epoch;
            return true;
        }
        return false;
    }
    bool should_stop(int epoch) const { return epoch - best_epoch >= patience; }
};

double accuracy_from_logits(const Tensor& logits, const std::vector<int>& labels) {
    int correct = 0;
    for (int i = 0; i < logits.rows(); ++i) {
        int arg = 0;
        for (int j = 1; j < logits.cols(); ++j)
            if (logits.at(i, j) > logits.at(i, arg)) arg = j;
        if (arg == labels[static_cast<std::size_t>(i)]) ++correct;
    }
    return static_cast<double>(correct) / logits.rows();
}

// Features of the listed windows as one [n x D] data matrix (no tape).
Tensor encode_feature_matrix(const Dataset& ds, const std::vector<int>& idx,
                             const EncoderParams& enc, int alpha, const ChannelStats& stats) {
    NoGrad ng;
    const int d = enc.dims.d_model;
    std::vector<double> rows;
    rows.reserve(idx.size() * static_cast<std::size_t>(d));
    for (int i : idx) {
        Tensor c = encode(stats.apply(ds.window(i)), enc, alpha);
        rows.insert(rows.end(), c.values().begin(), c.values().end());
    }
    return Tensor::from(std::move(rows), {static_cast<int>(idx.size()), d});
}

std::vector<int> gather_labels(const Dataset& ds, const std::vector<int>& idx) {
    std::vector<int> out;
    out.reserve(idx.size());
    for (int i : idx) out.push_back(ds.label(i));
    return out;
}

Tensor rows_from(const Tensor& m, const std::vector<int>& which) {
    const int c = m.cols();
    std::vector<double> v;
    v.reserve(which.size() * static_cast<std::size_t>(c));
    for (int r : which)
        for (int j = 0; j < c; ++j) v.push_back(m.at(r, j));
    return Tensor::from(std::move(v), {static_cast<int>(which.size()), c});
}

}  // namespace

ChannelStats ChannelStats::fit(const Dataset& ds, const std::vector<int>& indices) {
    ChannelStats s;
    const int c = ds.channels;
    s.mean.assign(static_cast<std::size_t>(c), 0.0);
    s.stddev.assign(static_cast<std::size_t>(c), 0.0);
    const std::size_t stride = static_cast<std::size_t>(ds.timesteps) * c;
    const std::int64_t n = static_cast<std::int64_t>(indices.size()) * ds.timesteps;
    for (int i : indices) {
        const float* w = ds.values.data() + static_cast<std::size_t>(i) * stride;
        for (int t = 0; t < ds.timesteps; ++t)
            for (int ch = 0; ch < c; ++ch)
                s.mean[static_cast<std::size_t>(ch)] += w[static_cast<std::size_t>(t) * c + ch];
    }
    for (double& m : s.mean) m /= static_cast<double>(n);
    for (int i : indices) {
        const float* w = ds.values.data() + static_cast<std::size_t>(i) * stride;
        for (int t = 0; t < ds.timesteps; ++t)
            for (int ch = 0; ch < c; ++ch) {
                const double d = w[static_cast<std::size_t>(t) * c + ch] -
                                 s.mean[static_cast<std::size_t>(ch)];
                s.stddev[static_cast<std::size_t>(ch)] += d * d;
            }
    }
    for (double& v : s.stddev) v = std::max(std::sqrt(v / static_cast<double>(n)), 1e-8);
    return s;
}

Tensor ChannelStats::apply(const Tensor& window) const {
    if (mean.empty()) return window;
    const int c = window.cols();
    Tensor out = window.detach();
    auto v = out.values_mut();
    for (int t = 0; t < window.rows(); ++t)
        for (int ch = 0; ch < c; ++ch) {
            auto& x = v[static_cast<std::size_t>(t) * c + ch];
            x = (x - mean[static_cast<std::size_t>(ch)]) / stddev[static_cast<std::size_t>(ch)];
        }
    return out;
}

Tensor ss_window_loss(const Tensor& window, const EncoderParams& student,
                      const EncoderParams& teacher, const ReconParams& recon,
                      const TrainConfig& cfg, Rng& mask_rng) {
    PastFuture pf = past_future_split(window, cfg.horizon);
    Tensor masked = window_mask(pf.past, cfg.p_m, mask_rng);
    Tensor c_teacher;
    {
        NoGrad ng;
        c_teacher = encode(pf.past, teacher, cfg.alpha);
    }
    Tensor c_student = encode(masked, student, cfg.alpha);
    Tensor x_hat = reconstruct_future(c_student, pf.future, pf.last, recon);
    Tensor l_rec = loss_rec(pf.future, x_hat, cfg.rec_loss_form);
    Tensor l_mc = loss_mc(c_student, c_teacher);
    return loss_ss(l_rec, l_mc, cfg.lambda);
}

PretrainResult pretrain(const Dataset& ds, const TrainConfig& cfg) {
    cfg.validate_for(ds.timesteps);
    const SplitIndices si = split(ds, 0.6, 0.2, cfg.seed);
    const ChannelStats stats =
        cfg.normalize ? ChannelStats::fit(ds, si.train) : ChannelStats{};
    const UnlabeledWindows view(ds, stats);

    const Rng root(cfg.seed);
    Rng init_enc = root.derive(kStreamStudentInit);
    Rng init_rec = root.derive(kStreamReconInit);
    Rng shuffle_rng = root.derive(kStreamShuffle);
    Rng mask_rng = root.derive(kStreamMask);
    const Rng val_mask_root = root.derive(kStreamValMask);

    EncoderDims dims{ds.channels, cfg.d_model, cfg.d_ff, cfg.n_heads, cfg.depth};
    EncoderParams student = init_encoder(dims, init_enc);
    EncoderParams teacher = student.clone();  // exact copy at step 0, no grads
    ReconParams recon = init_recon(ds.channels, cfg.d_model, init_rec);

    std::vector<Tensor> params = student.trainable();
    {
        auto rp = recon.trainable();
        params.insert(params.end(), rp.begin(), rp.end());
    }
    AdamState adam;
    const AdamConfig acfg{cfg.lr, cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps};

    std::vector<int> order = si.train;
    std::vector<MetricsRecord> history;
    std::vector<double> recent;
    int step = 0;
    for (int epoch = 0; epoch < cfg.pretrain_epochs; ++epoch) {
        const auto t0 = Clock::now();
        shuffle_rng.shuffle(order);
        double loss_sum = 0.0;
        for (std::size_t off = 0; off < order.size(); off += cfg.batch_size) {
            const std::size_t end = std::min(order.size(), off + cfg.batch_size);
            Tape tape;
            Tape::Scope scope(tape);
            Tensor acc;
            for (std::size_t k = off; k < end; ++k) {
                Tensor l = ss_window_loss(view.window(order[k]), student, teacher, recon, cfg,
                                          mask_rng);
                acc = acc.defined() ? add(acc, l) : l;
            }
            Tensor batch_loss = scale(acc, 1.0 / static_cast<double>(end - off));
            const double lv = batch_loss.item();
            recent.push_back(lv);
            if (recent.size() > 5) recent.erase(recent.begin());
            if (!std::isfinite(lv)) {
                std::ostringstream msg;
                msg << "pretrain: non-finite loss at step " << step << " (lr=" << cfg.lr
                    << "), recent losses:";
                for (double r : recent) msg << " " << r;
                throw TrainAbortError(step, cfg.lr, recent, msg.str());
            }
            tape.backward(batch_loss);
            adam_step(params, adam, acfg);
            zero_grads(params);
            ema_update(teacher, student, cfg.tau);
            loss_sum += lv * static_cast<double>(end - off);
            ++step;
        }
        const double train_loss = loss_sum / static_cast<double>(order.size());

        // Validation under the same objective; the mask stream restarts each
        // epoch so the val loss is comparable across epochs.
        double val_loss = 0.0;
        if (!si.val.empty()) {
            Rng vrng = val_mask_root;
            for (int i : si.val)
                val_loss += ss_window_loss(view.window(i), student, teacher, recon, cfg, vrng)
                                .item();
            val_loss /= static_cast<double>(si.val.size());
        }
        history.push_back(
            {"pretrain", epoch, train_loss, val_loss, std::nullopt, ms_since(t0)});
    }
    return {std::move(student), std::move(teacher), std::move(recon), std::move(history)};
}

LinearEvalResult linear_eval(const EncoderParams& encoder, const Dataset& ds,
                             const TrainConfig& cfg) {
    cfg.validate_for(ds.timesteps);
    const SplitIndices si = split(ds, 0.6, 0.2, cfg.seed);
    const ChannelStats stats =
        cfg.normalize ? ChannelStats::fit(ds, si.train) : ChannelStats{};

    // Frozen-encoder contexts of the full, non-augmented windows, computed
    // once up front.
    const Tensor x_train = encode_feature_matrix(ds, si.train, encoder, cfg.alpha, stats);
    const Tensor x_val = encode_feature_matrix(ds, si.val, encoder, cfg.alpha, stats);
    const Tensor x_test = encode_feature_matrix(ds, si.test, encoder, cfg.alpha, stats);
    const std::vector<int> y_train = gather_labels(ds, si.train);
    const std::vector<int> y_val = gather_labels(ds, si.val);
    const std::vector<int> y_test = gather_labels(ds, si.test);

    const Rng root(cfg.seed);
    Rng init = root.derive(kStreamProbeInit);
    Rng shuffle_rng = root.derive(kStreamProbeShuffle);
    Tensor w = uniform_init({encoder.dims.d_model, ds.num_classes}, encoder.dims.d_model, init);
    Tensor b = Tensor::zeros({ds.num_classes}, true);
    std::vector<Tensor> params = {w, b};
    AdamState adam;
    const AdamConfig acfg{cfg.lr, cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps};

    std::vector<int> order(y_train.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[static_cast<std::size_t>(i)] = static_cast<int>(i);

    EarlyStopper stopper{cfg.early_stop_patience};
    auto best = snapshot_values(params);
    std::vector<MetricsRecord> history;
    for (int epoch = 0; epoch < cfg.lineval_epochs; ++epoch) {
        const auto t0 = Clock::now();
        shuffle_rng.shuffle(order);
        double loss_sum = 0.0;
        for (std::size_t off = 0; off < order.size(); off += cfg.batch_size) {
            const std::size_t end = std::min(order.size(), off + cfg.batch_size);
            const std::vector<int> batch(order.begin() + static_cast<std::ptrdiff_t>(off),
                                         order.begin() + static_cast<std::ptrdiff_t>(end));
            std::vector<int> yb;
            yb.reserve(batch.size());
            for (int r : batch) yb.push_back(y_train[static_cast<std::size_t>(r)]);
            Tape tape;
            Tape::Scope scope(tape);
            Tensor logits = add_rowvec(matmul(rows_from(x_train, batch), w), b);
            Tensor loss = loss_linear_eval(logits, yb);
            loss_sum += loss.item() * static_cast<double>(batch.size());
            tape.backward(loss);
            adam_step(params, adam, acfg);
            zero_grads(params);
        }
        const double train_loss = loss_sum / static_cast<double>(order.size());
        const Tensor val_logits = add_rowvec(matmul(x_val, w), b);
        const double val_loss = loss_linear_eval(val_logits, y_val).item();
        const double val_acc = accuracy_from_logits(val_logits, y_val);
        history.push_back({"linear_eval", epoch, train_loss, val_loss, val_acc, ms_since(t0)});
        if (stopper.improved(val_loss, epoch)) best = snapshot_values(params);
        if (stopper.should_stop(epoch)) break;
    }
    restore_values(params, best);

    LinearEvalResult res;
    res.classifier_w = w;
    res.classifier_b = b;
    res.test_accuracy = accuracy_from_logits(add_rowvec(matmul(x_test, w), b), y_test);
    res.history = std::move(history);
    return res;
}

SupervisedResult supervised_train(const Dataset& ds, const TrainConfig& cfg) {
    cfg.validate_for(ds.timesteps);
    const SplitIndices si = split(ds, 0.6, 0.2, cfg.seed);
    const ChannelStats stats =
        cfg.normalize ? ChannelStats::fit(ds, si.train) : ChannelStats{};

    const Rng root(cfg.seed);
    Rng init = root.derive(kStreamSupervisedInit);
    Rng shuffle_rng = root.derive(kStreamSupervisedShuffle);
    EncoderDims dims{ds.channels, cfg.d_model, cfg.d_ff, cfg.n_heads, cfg.depth};
    EncoderParams enc = init_encoder(dims, init);
    Tensor w = uniform_init({cfg.d_model, ds.num_classes}, cfg.d_model, init);
    Tensor b = Tensor::zeros({ds.num_classes}, true);

    std::vector<Tensor> params = enc.trainable();
    params.push_back(w);
    params.push_back(b);
    AdamState adam;
    const AdamConfig acfg{cfg.lr, cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps};

    const std::vector<int> y_val = gather_labels(ds, si.val);
    const std::vector<int> y_test = gather_labels(ds, si.test);

    auto split_logits = [&](const std::vector<int>& idx) {
        NoGrad ng;
        Tensor feats = encode_feature_matrix(ds, idx, enc, cfg.alpha, stats);
        return add_rowvec(matmul(feats, w), b);
    };

    std::vector<int> order = si.train;
    EarlyStopper stopper{cfg.early_stop_patience};
    auto best = snapshot_values(params);
    std::vector<MetricsRecord> history;
    std::vector<double> recent;
    int step = 0;
    for (int epoch = 0; epoch < cfg.pretrain_epochs; ++epoch) {
        const auto t0 = Clock::now();
        shuffle_rng.shuffle(order);
        double loss_sum = 0.0;
        for (std::size_t off = 0; off < order.size(); off += cfg.batch_size) {
            const std::size_t end = std::min(order.size(), off + cfg.batch_size);
            std::vector<int> yb;
            Tape tape;
            Tape::Scope scope(tape);
            std::vector<Tensor> ctx_rows;
            for (std::size_t k = off; k < end; ++k) {
                const int i = order[k];
                ctx_rows.push_back(encode(stats.apply(ds.window(i)), enc, cfg.alpha));
                yb.push_back(ds.label(i));
            }
            Tensor logits = add_rowvec(matmul(concat_rows(ctx_rows), w), b);
            Tensor loss = loss_linear_eval(logits, yb);
            const double lv = loss.item();
            recent.push_back(lv);
            if (recent.size() > 5) recent.erase(recent.begin());
            if (!std::isfinite(lv)) {
                std::ostringstream msg;
                msg << "supervised: non-finite loss at step " << step << " (lr=" << cfg.lr
                    << "), recent losses:";
                for (double r : recent) msg << " " << r;
                throw TrainAbortError(step, cfg.lr, recent, msg.str());
            }
            loss_sum += lv * static_cast<double>(end - off);
            tape.backward(loss);
            adam_step(params, adam, acfg);
            zero_grads(params);
            ++step;
        }
        const double train_loss = loss_sum / static_cast<double>(order.size());
        const Tensor val_logits = split_logits(si.val);
        const double val_loss = loss_linear_eval(val_logits, y_val).item();
        const double val_acc = accuracy_from_logits(val_logits, y_val);
        history.push_back({"supervised", epoch, train_loss, val_loss, val_acc, ms_since(t0)});
        if (stopper.improved(val_loss, epoch)) best = snapshot_values(params);
        if (stopper.should_stop(epoch)) break;
    }
    restore_values(params, best);

    SupervisedResult res;
    res.test_accuracy = accuracy_from_logits(split_logits(si.test), y_test);
    res.encoder = std::move(enc);
    res.classifier_w = w;
    res.classifier_b = b;
    res.history = std::move(history);
    return res;
}

double random_classifier(const std::vector<int>& train_labels,
                         const std::vector<int>& test_labels, std::uint64_t seed,
                         int min_draws) {
    if (train_labels.empty() || test_labels.empty()) {
        throw std::invalid_argument("random_classifier: label lists must be non-empty");
    }
    int num_classes = 0;
    for (int y : train_labels) num_classes = std::max(num_classes, y + 1);
    std::vector<double> cdf(static_cast<std::size_t>(num_classes), 0.0);
    for (int y : train_labels) cdf[static_cast<std::size_t>(y)] += 1.0;
    double acc = 0.0;
    for (double& c : cdf) {
        acc += c / static_cast<double>(train_labels.size());
        c = acc;
    }
    Rng rng(seed);
    std::int64_t correct = 0, total = 0;
    while (total < min_draws) {
        for (int y : test_labels) {
            const double u = rng.uniform();
            int pred = 0;
            while (pred < num_classes - 1 && cdf[static_cast<std::size_t>(pred)] <= u) ++pred;
            if (pred == y) ++correct;
            ++total;
        }
    }
    return static_cast<double>(correct) / static_cast<double>(total);
}

double random_encoder_probe(const Dataset& ds, const TrainConfig& cfg) {
    const Rng root(cfg.seed);
    Rng init = root.derive(kStreamRandomEncoder);
    EncoderDims dims{ds.channels, cfg.d_model, cfg.d_ff, cfg.n_heads, cfg.depth};
    const EncoderParams enc = init_encoder(dims, init);
    return linear_eval(enc, ds, cfg).test_accuracy;
}

void apply_hyperparameter(TrainConfig& cfg, const std::string& name, double value) {
    if (name == "kappa" || name == "tau") {
        cfg.tau = value;
    } else if (name == "lambda") {
        cfg.lambda = value;
    } else if (name == "K") {
        cfg.horizon = static_cast<int>(std::llround(value));
    } else if (name == "p_M") {
        cfg.p_m = value;
    } else if (name == "alpha") {
        cfg.alpha = static_cast<int>(std::llround(value));
    } else {
        throw ConfigError("unknown hyperparameter \"" + name + "\" in sweep grid");
    }
}

namespace {

double base_value(const TrainConfig& cfg, const std::string& name) {
    if (name == "kappa" || name == "tau") return cfg.tau;
    if (name == "lambda") return cfg.lambda;
    if (name == "K") return static_cast<double>(cfg.horizon);
    if (name == "p_M") return cfg.p_m;
    if (name == "alpha") return static_cast<double>(cfg.alpha);
    throw ConfigError("unknown hyperparameter \"" + name + "\" in sweep grid");
}

std::string format_value(double v) {
    std::ostringstream os;
    os << v;
    return os.str();
}

}  // namespace

std::vector<SweepDimension> load_sweep_grid(const std::string& path, int& num_seeds) {
    std::ifstream f(path);
    if (!f) throw ConfigError("cannot open grid file " + path);
    nlohmann::ordered_json j;
    try {
        f >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("grid file " + path + " is not valid JSON: " + e.what());
    }
    num_seeds = 1;
    if (j.contains("seeds")) num_seeds = j["seeds"].get<int>();
    if (num_seeds < 1) throw ConfigError("grid: seeds must be >= 1");
    for (auto it = j.begin(); it != j.end(); ++it) {
        if (it.key() != "seeds" && it.key() != "vary") {
            throw ConfigError("grid: unknown key \"" + it.key() + "\"");
        }
    }
    std::vector<SweepDimension> grid;
    if (j.contains("vary")) {
        TrainConfig probe;
        for (auto it = j["vary"].begin(); it != j["vary"].end(); ++it) {
            SweepDimension dim;
            dim.name = it.key();
            for (const auto& v : it.value()) dim.values.push_back(v.get<double>());
            for (double v : dim.values) apply_hyperparameter(probe, dim.name, v);
            grid.push_back(std::move(dim));
        }
    }
    return grid;
}

std::vector<SweepRow> ablation_sweep(const Dataset& ds, const TrainConfig& base,
                                     const std::vector<SweepDimension>& grid, int num_seeds,
                                     int max_workers) {
    std::vector<SweepRow> rows;
    rows.push_back({"base", base, {}, 0.0, false, ""});
    for (const SweepDimension& dim : grid) {
        const double bv = base_value(base, dim.name);
        for (double v : dim.values) {
            if (v == bv) continue;  // one-at-a-time: the base row covers it
            TrainConfig cfg = base;
            apply_hyperparameter(cfg, dim.name, v);
            rows.push_back({dim.name + "=" + format_value(v), cfg, {}, 0.0, false, ""});
        }
    }

    struct Job {
        std::size_t row;
        int seed_index;
    };
    std::vector<Job> jobs;
    for (std::size_t r = 0; r < rows.size(); ++r) {
        rows[r].accuracies.assign(static_cast<std::size_t>(num_seeds),
                                  std::numeric_limits<double>::quiet_NaN());
        for (int s = 0; s < num_seeds; ++s) jobs.push_back({r, s});
    }

    std::vector<std::string> errors(jobs.size());
    std::atomic<std::size_t> next{0};
    const int workers =
        std::max(1, std::min<int>(max_workers, static_cast<int>(jobs.size())));
    auto worker = [&]() {
        for (;;) {
            const std::size_t j = next.fetch_add(1);
            if (j >= jobs.size()) return;
            const Job job = jobs[j];
            TrainConfig cfg = rows[job.row].cfg;
            cfg.seed = base.seed + static_cast<std::uint64_t>(job.row) *
                                       static_cast<std::uint64_t>(num_seeds) +
                       static_cast<std::uint64_t>(job.seed_index);
            try {
                PretrainResult pre = pretrain(ds, cfg);
                LinearEvalResult lin = linear_eval(pre.student, ds, cfg);
                rows[job.row].accuracies[static_cast<std::size_t>(job.seed_index)] =
                    lin.test_accuracy;
            } catch (const std::exception& e) {
                errors[j] = e.what();
            }
        }
    };
    if (workers == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(static_cast<std::size_t>(workers));
        for (int i = 0; i < workers; ++i) pool.emplace_back(worker);
        for (std::thread& t : pool) t.join();
    }

    for (std::size_t j = 0; j < jobs.size(); ++j) {
        if (!errors[j].empty()) {
            rows[jobs[j].row].failed = true;
            if (!rows[jobs[j].row].error.empty()) rows[jobs[j].row].error += "; ";
            rows[jobs[j].row].error += errors[j];
        }
    }
    for (SweepRow& row : rows) {
        if (row.failed) {
            row.mean_accuracy = std::numeric_limits<double>::quiet_NaN();
            continue;
        }
        double s = 0.0;
        for (double a : row.accuracies) s += a;
        row.mean_accuracy = s / static_cast<double>(row.accuracies.size());
    }
    return rows;
}

}  // namespace tsmoco
