#pragma once

#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "tsmoco/encoder.hpp"
#include "tsmoco/recon.hpp"

namespace tsmoco {

struct CheckpointError : std::runtime_error {
    explicit CheckpointError(const std::string& msg) : std::runtime_error(msg) {}
};

// Checkpoint layout (little-endian):
//   magic "TSMC", u32 version (1), u32 section count, then per section a
//   length-prefixed name, u32 array count, and per array a length-prefixed
//   name, u32 rank, u32 dims[rank], float64 data. Round trips are bit-exact.
struct Checkpoint {
    struct Array {
        std::vector<int> shape;
        std::vector<double> data;
    };
    using Section = std::map<std::string, Array>;
    std::map<std::string, Section> sections;

    void put(const std::string& section, const std::string& name, const Tensor& t);
    Tensor get(const std::string& section, const std::string& name) const;
    bool has_section(const std::string& section) const { return sections.count(section) > 0; }
};

void save_checkpoint(const Checkpoint& ck, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

// Encoder/recon params <-> checkpoint sections. Dimensions travel in a
// "meta" section so the loader can rebuild the schema without a config.
void pack_encoder(Checkpoint& ck, const std::string& section, EncoderParams& params);
EncoderParams unpack_encoder(const Checkpoint& ck, const std::string& section);
void pack_recon(Checkpoint& ck, ReconParams& params);
ReconParams unpack_recon(const Checkpoint& ck);
void pack_classifier(Checkpoint& ck, const Tensor& w, const Tensor& b);
std::optional<std::pair<Tensor, Tensor>> unpack_classifier(const Checkpoint& ck);

}  // namespace tsmoco
