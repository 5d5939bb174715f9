#include "tsmoco/run_io.hpp"

#include <chrono>
#include <cstdio>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

namespace tsmoco {

std::string artifact_version() { return "tsmoco 0.1.0"; }

std::string fingerprint_file(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("fingerprint: cannot open " + path);
    std::uint64_t h = 0xcbf29ce484222325ULL;
    char buf[1 << 14];
    while (f) {
        f.read(buf, sizeof(buf));
        const std::streamsize n = f.gcount();
        for (std::streamsize i = 0; i < n; ++i) {
            h ^= static_cast<unsigned char>(buf[i]);
            h *= 0x100000001b3ULL;
        }
    }
    char hex[17];
    std::snprintf(hex, sizeof(hex), "%016llx", static_cast<unsigned long long>(h));
    return std::string(hex);
}

void write_manifest(const RunManifest& m, const std::string& path) {
    nlohmann::ordered_json j;
    j["artifact_version"] = m.artifact_version;
    j["command"] = m.command;
    j["dataset"] = {{"path", m.dataset_path}, {"fingerprint", m.dataset_fingerprint}};
    j["config"] = nlohmann::ordered_json::parse(config_to_json(m.config));
    j["seed"] = m.seed;
    j["created_unix_ms"] = m.created_unix_ms;
    std::ofstream f(path, std::ios::trunc);
    if (!f) throw std::runtime_error("cannot write manifest " + path);
    f << j.dump(2) << "\n";
}

MetricsWriter::MetricsWriter(const std::string& path, bool include_timings)
    : path_(path), include_timings_(include_timings) {}

void MetricsWriter::append(const MetricsRecord& rec) {
    nlohmann::ordered_json j;
    j["phase"] = rec.phase;
    j["epoch"] = rec.epoch;
    j["train_loss"] = rec.train_loss;
    j["val_loss"] = rec.val_loss;
    if (rec.val_accuracy.has_value()) {
        j["val_accuracy"] = *rec.val_accuracy;
    } else {
        j["val_accuracy"] = nullptr;
    }
    j["wall_ms"] = include_timings_ ? rec.wall_ms : 0.0;
    std::ofstream f(path_, std::ios::app);
    if (!f) throw std::runtime_error("cannot append to metrics file " + path_);
    f << j.dump() << "\n";
}

void MetricsWriter::append_all(const std::vector<MetricsRecord>& recs) {
    for (const MetricsRecord& r : recs) append(r);
}

void MetricsWriter::append_result(const std::string& phase, double test_accuracy) {
    nlohmann::ordered_json j;
    j["phase"] = phase;
    j["test_accuracy"] = test_accuracy;
    std::ofstream f(path_, std::ios::app);
    if (!f) throw std::runtime_error("cannot append to metrics file " + path_);
    f << j.dump() << "\n";
}

std::int64_t now_unix_ms() {
    return std::chrono::duration_cast<std::chrono::milliseconds>(
               std::chrono::system_clock::now().time_since_epoch())
        .count();
}

}  // namespace tsmoco
