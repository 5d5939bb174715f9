#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <thread>

#include <CLI11.hpp>
#include <json.hpp>

#include "tsmoco/checkpoint.hpp"
#include "tsmoco/config.hpp"
#include "tsmoco/dataset.hpp"
#include "tsmoco/gradcheck.hpp"
#include "tsmoco/run_io.hpp"
#include "tsmoco/train.hpp"

namespace {

namespace fs = std::filesystem;
using namespace tsmoco;

constexpr int kExitOk = 0;
constexpr int kExitConfig = 1;
constexpr int kExitData = 2;
constexpr int kExitNan = 3;
constexpr int kExitGradcheck = 4;

int sweep_workers() {
    if (const char* env = std::getenv("TSMOCO_THREADS")) {
        const int n = std::atoi(env);
        if (n >= 1) return n;
    }
    const unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : static_cast<int>(hw);
}

struct CommonArgs {
    std::string data_path;
    std::string config_path;
    std::string out_dir;
    std::int64_t seed_override = -1;
    bool timings = false;
};

TrainConfig resolve_config(const CommonArgs& args) {
    TrainConfig cfg = args.config_path.empty() ? TrainConfig{} : load_config(args.config_path);
    if (args.seed_override >= 0) cfg.seed = static_cast<std::uint64_t>(args.seed_override);
    cfg.validate();
    return cfg;
}

void prepare_out_dir(const std::string& out) { fs::create_directories(out); }

RunManifest make_manifest(const std::string& command, const CommonArgs& args,
                          const TrainConfig& cfg) {
    RunManifest m;
    m.artifact_version = artifact_version();
    m.command = command;
    m.dataset_path = args.data_path;
    m.dataset_fingerprint = fingerprint_file(args.data_path);
    m.config = cfg;
    m.seed = cfg.seed;
    m.created_unix_ms = now_unix_ms();
    return m;
}

int cmd_pretrain(const CommonArgs& args) {
    TrainConfig cfg = resolve_config(args);
    Dataset ds = load_dataset(args.data_path);
    cfg.validate_for(ds.timesteps);
    prepare_out_dir(args.out_dir);
    write_manifest(make_manifest("pretrain", args, cfg), args.out_dir + "/manifest.json");
    MetricsWriter metrics(args.out_dir + "/metrics.jsonl", args.timings);

    PretrainResult res = pretrain(ds, cfg);
    metrics.append_all(res.history);

    Checkpoint ck;
    pack_encoder(ck, "student", res.student);
    pack_encoder(ck, "teacher", res.teacher);
    pack_recon(ck, res.recon);
    save_checkpoint(ck, args.out_dir + "/checkpoint.bin");

    double total_ms = 0.0;
    for (const MetricsRecord& r : res.history) total_ms += r.wall_ms;
    std::printf("pretrain: %d epochs, final train_loss=%.6f val_loss=%.6f (%.1f s)\n",
                static_cast<int>(res.history.size()),
                res.history.empty() ? 0.0 : res.history.back().train_loss,
                res.history.empty() ? 0.0 : res.history.back().val_loss, total_ms / 1000.0);
    return kExitOk;
}

int cmd_eval(const CommonArgs& args, const std::string& mode,
             const std::string& checkpoint_path) {
    TrainConfig cfg = resolve_config(args);
    Dataset ds = load_dataset(args.data_path);
    cfg.validate_for(ds.timesteps);
    prepare_out_dir(args.out_dir);
    write_manifest(make_manifest("eval:" + mode, args, cfg), args.out_dir + "/manifest.json");
    MetricsWriter metrics(args.out_dir + "/metrics.jsonl", args.timings);

    if (mode == "linear") {
        if (checkpoint_path.empty()) {
            std::fprintf(stderr, "eval: --mode linear requires --checkpoint\n");
            return kExitData;
        }
        Checkpoint ck = load_checkpoint(checkpoint_path);
        EncoderParams enc = unpack_encoder(ck, "student");
        LinearEvalResult res = linear_eval(enc, ds, cfg);
        metrics.append_all(res.history);
        metrics.append_result("linear_eval", res.test_accuracy);
        Checkpoint out_ck;
        pack_encoder(out_ck, "student", enc);
        pack_classifier(out_ck, res.classifier_w, res.classifier_b);
        save_checkpoint(out_ck, args.out_dir + "/checkpoint.bin");
        std::printf("linear probe: test_accuracy=%.4f (%d epochs)\n", res.test_accuracy,
                    static_cast<int>(res.history.size()));
    } else if (mode == "random-encoder") {
        const double acc = random_encoder_probe(ds, cfg);
        metrics.append_result("random_encoder", acc);
        std::printf("random-encoder probe: test_accuracy=%.4f\n", acc);
    } else if (mode == "random-classifier") {
        SplitIndices si = split(ds, 0.6, 0.2, cfg.seed);
        std::vector<int> y_train, y_test;
        for (int i : si.train) y_train.push_back(ds.label(i));
        for (int i : si.test) y_test.push_back(ds.label(i));
        const double acc = random_classifier(y_train, y_test, cfg.seed, 10000);
        metrics.append_result("random_classifier", acc);
        std::printf("random classifier: test_accuracy=%.4f\n", acc);
    } else if (mode == "supervised") {
        SupervisedResult res = supervised_train(ds, cfg);
        metrics.append_all(res.history);
        metrics.append_result("supervised", res.test_accuracy);
        Checkpoint out_ck;
        pack_encoder(out_ck, "student", res.encoder);
        pack_classifier(out_ck, res.classifier_w, res.classifier_b);
        save_checkpoint(out_ck, args.out_dir + "/checkpoint.bin");
        std::printf("supervised: test_accuracy=%.4f (%d epochs)\n", res.test_accuracy,
                    static_cast<int>(res.history.size()));
    } else {
        std::fprintf(stderr, "eval: unknown mode \"%s\"\n", mode.c_str());
        return kExitConfig;
    }
    return kExitOk;
}

int cmd_sweep(const CommonArgs& args, const std::string& grid_path) {
    TrainConfig base = resolve_config(args);
    Dataset ds = load_dataset(args.data_path);
    base.validate_for(ds.timesteps);

    int num_seeds = 1;
    std::vector<SweepDimension> grid = load_sweep_grid(grid_path, num_seeds);

    prepare_out_dir(args.out_dir);
    write_manifest(make_manifest("sweep", args, base), args.out_dir + "/manifest.json");

    const int workers = sweep_workers();
    std::vector<SweepRow> rows = ablation_sweep(ds, base, grid, num_seeds, workers);

    const std::string csv_path = args.out_dir + "/results.csv";
    std::ofstream csv(csv_path, std::ios::trunc);
    csv << "kappa,lambda,K,p_M,alpha";
    for (int s = 0; s < num_seeds; ++s) csv << ",accuracy_seed_" << s;
    csv << ",mean\n";
    int failed_rows = 0;
    for (const SweepRow& row : rows) {
        csv << row.cfg.tau << "," << row.cfg.lambda << "," << row.cfg.horizon << ","
            << row.cfg.p_m << "," << row.cfg.alpha;
        for (double a : row.accuracies) {
            csv << ",";
            if (std::isfinite(a)) csv << a;
        }
        if (row.failed) {
            csv << ",FAILED\n";
            ++failed_rows;
            std::fprintf(stderr, "sweep row %s FAILED: %s\n", row.varied.c_str(),
                         row.error.c_str());
        } else {
            csv << "," << row.mean_accuracy << "\n";
            std::printf("sweep %-14s mean_accuracy=%.4f\n", row.varied.c_str(),
                        row.mean_accuracy);
        }
    }
    std::printf("sweep: %d rows -> %s\n", static_cast<int>(rows.size()), csv_path.c_str());
    return failed_rows == static_cast<int>(rows.size()) ? kExitConfig : kExitOk;
}

int cmd_gradcheck(double eps, std::uint64_t seed, bool inject_fault) {
    GradCheckReport report = full_model_gradcheck(eps, seed, 1e-4, inject_fault);
    for (const auto& g : report.groups) {
        std::printf("%-24s max_rel_err=%.3e %s\n", g.name.c_str(), g.max_rel_err,
                    g.max_rel_err < report.tolerance ? "ok" : "FAIL");
    }
    if (!report.passed()) {
        std::fprintf(stderr, "gradcheck FAILED for:");
        for (const std::string& name : report.failing()) std::fprintf(stderr, " %s", name.c_str());
        std::fprintf(stderr, "\n");
        return kExitGradcheck;
    }
    std::printf("gradcheck passed (%d groups < %.0e)\n", static_cast<int>(report.groups.size()),
                report.tolerance);
    return kExitOk;
}

int cmd_synth(const std::string& out, int n_per_class, int classes, int timesteps, int channels,
              double sigma, std::uint64_t seed, double base_freq) {
    Dataset ds = synth_generate(n_per_class, classes, timesteps, channels, sigma, seed, base_freq);
    save_dataset(ds, out);
    std::printf("synth: wrote %d windows (T=%d, C_ch=%d, C=%d) to %s\n", ds.num_windows,
                ds.timesteps, ds.channels, ds.num_classes, out.c_str());
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"tsmoco - momentum-contrast self-supervised learning for time series"};
    app.require_subcommand(1);

    CommonArgs args;

    CLI::App* pre = app.add_subcommand("pretrain", "self-supervised pretraining");
    pre->add_option("--data", args.data_path, "TSD1 dataset")->required();
    pre->add_option("--config", args.config_path, "JSON config file");
    pre->add_option("--out", args.out_dir, "output directory")->required();
    pre->add_option("--seed", args.seed_override, "seed override");
    pre->add_flag("--timings", args.timings, "write measured wall_ms into metrics.jsonl");

    std::string mode, checkpoint_path;
    CLI::App* ev = app.add_subcommand("eval", "evaluate a representation or baseline");
    ev->add_option("--mode", mode, "linear | random-encoder | random-classifier | supervised")
        ->required()
        ->check(CLI::IsMember({"linear", "random-encoder", "random-classifier", "supervised"}));
    ev->add_option("--data", args.data_path, "TSD1 dataset")->required();
    ev->add_option("--config", args.config_path, "JSON config file");
    ev->add_option("--checkpoint", checkpoint_path, "checkpoint for --mode linear");
    ev->add_option("--out", args.out_dir, "output directory")->required();
    ev->add_option("--seed", args.seed_override, "seed override");
    ev->add_flag("--timings", args.timings, "write measured wall_ms into metrics.jsonl");

    std::string grid_path;
    CLI::App* sw = app.add_subcommand("sweep", "one-at-a-time hyperparameter sweep");
    sw->add_option("--data", args.data_path, "TSD1 dataset")->required();
    sw->add_option("--config", args.config_path, "base JSON config file");
    sw->add_option("--grid", grid_path, "grid JSON file")->required();
    sw->add_option("--out", args.out_dir, "output directory")->required();
    sw->add_option("--seed", args.seed_override, "seed override");

    double gc_eps = 1e-5;
    std::uint64_t gc_seed = 7;
    bool gc_fault = false;
    CLI::App* gc = app.add_subcommand("gradcheck", "finite-difference check of the full model");
    gc->add_option("--eps", gc_eps, "central-difference step");
    gc->add_option("--seed", gc_seed, "seed");
    gc->add_flag("--inject-fault", gc_fault, "corrupt one backward rule (must fail)")
        ->group("");  // hidden; exists to prove a broken rule is caught

    std::string synth_out;
    int sy_n = 200, sy_c = 3, sy_t = 64, sy_ch = 4;
    double sy_sigma = 0.1, sy_freq = 2.0;
    std::uint64_t sy_seed = 7;
    CLI::App* sy = app.add_subcommand("synth", "generate a synthetic TSD1 dataset");
    sy->add_option("--out", synth_out, "output .tsd1 path")->required();
    sy->add_option("--n-per-class", sy_n, "windows per class");
    sy->add_option("--classes", sy_c, "number of classes");
    sy->add_option("--timesteps", sy_t, "timesteps per window");
    sy->add_option("--channels", sy_ch, "channels");
    sy->add_option("--sigma", sy_sigma, "additive noise sigma");
    sy->add_option("--seed", sy_seed, "seed");
    sy->add_option("--base-freq", sy_freq, "class-1 frequency in cycles per window");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << e.what() << "\n\n" << app.help() << "\n";
        return kExitConfig;
    }

    try {
        if (pre->parsed()) return cmd_pretrain(args);
        if (ev->parsed()) return cmd_eval(args, mode, checkpoint_path);
        if (sw->parsed()) return cmd_sweep(args, grid_path);
        if (gc->parsed()) return cmd_gradcheck(gc_eps, gc_seed, gc_fault);
        if (sy->parsed())
            return cmd_synth(synth_out, sy_n, sy_c, sy_t, sy_ch, sy_sigma, sy_seed, sy_freq);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const std::invalid_argument& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return kExitData;
    } catch (const CheckpointError& e) {
        std::cerr << "checkpoint error: " << e.what() << "\n";
        return kExitData;
    } catch (const TrainAbortError& e) {
        std::cerr << "training aborted: " << e.what() << "\n";
        return kExitNan;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitConfig;
    }
    return kExitOk;
}
