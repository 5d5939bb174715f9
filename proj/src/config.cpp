#include "tsmoco/config.hpp"

#include <fstream>
#include <set>

#include <json.hpp>

namespace tsmoco {

void TrainConfig::validate() const {
    if (!(lambda >= 0.0)) throw ConfigError("lambda must be >= 0");
    if (!(tau >= 0.0 && tau <= 1.0)) throw ConfigError("tau must lie in [0,1]");
    if (horizon < 1) throw ConfigError("K must be >= 1");
    if (!(p_m >= 0.0 && p_m <= 1.0)) throw ConfigError("p_M must lie in [0,1]");
    if (alpha != 0 && alpha != 1) throw ConfigError("alpha must be 0 or 1");
    if (depth < 0) throw ConfigError("depth must be >= 0");
    if (d_model < 2 || d_model % 2 != 0) throw ConfigError("D must be even and >= 2");
    if (d_ff < 1) throw ConfigError("D_ff must be >= 1");
    if (n_heads < 1 || d_model % n_heads != 0) throw ConfigError("n_heads must divide D");
    if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
    if (!(lr > 0.0)) throw ConfigError("lr must be > 0");
    if (!(adam_beta1 >= 0.0 && adam_beta1 < 1.0)) throw ConfigError("adam_beta1 must lie in [0,1)");
    if (!(adam_beta2 >= 0.0 && adam_beta2 < 1.0)) throw ConfigError("adam_beta2 must lie in [0,1)");
    if (!(adam_eps > 0.0)) throw ConfigError("adam_eps must be > 0");
    if (pretrain_epochs < 0) throw ConfigError("pretrain_epochs must be >= 0");
    if (lineval_epochs < 0) throw ConfigError("lineval_epochs must be >= 0");
    if (early_stop_patience < 1) throw ConfigError("early_stop_patience must be >= 1");
}

void TrainConfig::validate_for(int timesteps) const {
    validate();
    if (horizon > timesteps - 1) {
        throw ConfigError("K=" + std::to_string(horizon) + " must be <= T-1=" +
                          std::to_string(timesteps - 1));
    }
}

TrainConfig load_config(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw ConfigError("cannot open config file " + path);
    nlohmann::json j;
    try {
        f >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("config " + path + " is not valid JSON: " + e.what());
    }
    if (!j.is_object()) throw ConfigError("config must be a JSON object");

    static const std::set<std::string> known = {
        "lambda",        "tau",           "kappa",         "K",
        "p_M",           "alpha",         "depth",         "D",
        "D_ff",          "n_heads",       "batch_size",    "lr",
        "adam_beta1",    "adam_beta2",    "adam_eps",      "pretrain_epochs",
        "lineval_epochs", "early_stop_patience", "seed",   "normalize",
        "rec_loss_form"};
    for (auto it = j.begin(); it != j.end(); ++it) {
        if (!known.count(it.key())) {
            throw ConfigError("unknown config key \"" + it.key() + "\"");
        }
    }
    if (j.contains("tau") && j.contains("kappa")) {
        throw ConfigError("config sets both \"tau\" and its alias \"kappa\"");
    }

    TrainConfig c;
    try {
        if (j.contains("lambda")) c.lambda = j["lambda"].get<double>();
        if (j.contains("tau")) c.tau = j["tau"].get<double>();
        if (j.contains("kappa")) c.tau = j["kappa"].get<double>();
        if (j.contains("K")) c.horizon = j["K"].get<int>();
        if (j.contains("p_M")) c.p_m = j["p_M"].get<double>();
        if (j.contains("alpha")) c.alpha = j["alpha"].get<int>();
        if (j.contains("depth")) c.depth = j["depth"].get<int>();
        if (j.contains("D")) c.d_model = j["D"].get<int>();
        if (j.contains("D_ff")) c.d_ff = j["D_ff"].get<int>();
        if (j.contains("n_heads")) c.n_heads = j["n_heads"].get<int>();
        if (j.contains("batch_size")) c.batch_size = j["batch_size"].get<int>();
        if (j.contains("lr")) c.lr = j["lr"].get<double>();
        if (j.contains("adam_beta1")) c.adam_beta1 = j["adam_beta1"].get<double>();
        if (j.contains("adam_beta2")) c.adam_beta2 = j["adam_beta2"].get<double>();
        if (j.contains("adam_eps")) c.adam_eps = j["adam_eps"].get<double>();
        if (j.contains("pretrain_epochs")) c.pretrain_epochs = j["pretrain_epochs"].get<int>();
        if (j.contains("lineval_epochs")) c.lineval_epochs = j["lineval_epochs"].get<int>();
        if (j.contains("early_stop_patience"))
            c.early_stop_patience = j["early_stop_patience"].get<int>();
        if (j.contains("seed")) c.seed = j["seed"].get<std::uint64_t>();
        if (j.contains("normalize")) c.normalize = j["normalize"].get<bool>();
        if (j.contains("rec_loss_form")) {
            const std::string form = j["rec_loss_form"].get<std::string>();
            if (form == "mean") {
                c.rec_loss_form = RecLossForm::mean;
            } else if (form == "sum") {
                c.rec_loss_form = RecLossForm::sum;
            } else {
                throw ConfigError("rec_loss_form must be \"mean\" or \"sum\"");
            }
        }
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("config " + path + ": " + e.what());
    }
    c.validate();
    return c;
}

std::string config_to_json(const TrainConfig& cfg) {
    nlohmann::ordered_json j;
    j["lambda"] = cfg.lambda;
    j["tau"] = cfg.tau;
    j["K"] = cfg.horizon;
    j["p_M"] = cfg.p_m;
    j["alpha"] = cfg.alpha;
    j["depth"] = cfg.depth;
    j["D"] = cfg.d_model;
    j["D_ff"] = cfg.d_ff;
    j["n_heads"] = cfg.n_heads;
    j["batch_size"] = cfg.batch_size;
    j["lr"] = cfg.lr;
    j["adam_beta1"] = cfg.adam_beta1;
    j["adam_beta2"] = cfg.adam_beta2;
    j["adam_eps"] = cfg.adam_eps;
    j["pretrain_epochs"] = cfg.pretrain_epochs;
    j["lineval_epochs"] = cfg.lineval_epochs;
    j["early_stop_patience"] = cfg.early_stop_patience;
    j["seed"] = cfg.seed;
    j["normalize"] = cfg.normalize;
    j["rec_loss_form"] = cfg.rec_loss_form == RecLossForm::mean ? "mean" : "sum";
    return j.dump(2);
}

}  // namespace tsmoco
