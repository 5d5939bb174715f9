#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "tsmoco/config.hpp"
#include "tsmoco/train.hpp"

namespace tsmoco {

// FNV-1a over the file bytes, printed as 16 hex digits.
std::string fingerprint_file(const std::string& path);

// Self-description written into every run directory before training starts.
struct RunManifest {
    std::string artifact_version;
    std::string command;
    std::string dataset_path;
    std::string dataset_fingerprint;
    TrainConfig config;
    std::uint64_t seed = 0;
    std::int64_t created_unix_ms = 0;
};

void write_manifest(const RunManifest& m, const std::string& path);

// Append-only JSON-lines metrics sink, one record per epoch per phase plus
// one result record per evaluation. Keys are fixed:
//   {phase, epoch, train_loss, val_loss, val_accuracy, wall_ms}
// wall_ms is written as 0 unless include_timings is set, so that two runs
// with the same seed, config and dataset produce byte-identical files;
// measured timings stay available in the in-memory records and on stderr.
class MetricsWriter {
   public:
    MetricsWriter(const std::string& path, bool include_timings = false);
    void append(const MetricsRecord& rec);
    void append_all(const std::vector<MetricsRecord>& recs);
    void append_result(const std::string& phase, double test_accuracy);
    const std::string& path() const { return path_; }

   private:
    std::string path_;
    bool include_timings_;
};

std::string artifact_version();
std::int64_t now_unix_ms();

}  // namespace tsmoco
