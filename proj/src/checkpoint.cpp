#include "tsmoco/checkpoint.hpp"

#include <cstring>
#include <fstream>

namespace tsmoco {

namespace {

constexpr char kMagic[4] = {'T', 'S', 'M', 'C'};
constexpr std::uint32_t kVersion = 1;

void put_u32(std::string& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_str(std::string& out, const std::string& s) {
    put_u32(out, static_cast<std::uint32_t>(s.size()));
    out.append(s);
}

void put_f64(std::string& out, double d) {
    std::uint64_t u;
    std::memcpy(&u, &d, 8);
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((u >> (8 * i)) & 0xff));
}

struct Reader {
    const unsigned char* p;
    std::size_t remaining;
    const std::string& path;

    void need(std::size_t n) const {
        if (remaining < n) {
            throw CheckpointError(path + ": truncated checkpoint (need " + std::to_string(n) +
                                  " more bytes, have " + std::to_string(remaining) + ")");
        }
    }
    std::uint32_t u32() {
        need(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(p[i]) << (8 * i);
        p += 4;
        remaining -= 4;
        return v;
    }
    std::string str() {
        const std::uint32_t n = u32();
        need(n);
        std::string s(reinterpret_cast<const char*>(p), n);
        p += n;
        remaining -= n;
        return s;
    }
    double f64() {
        need(8);
        std::uint64_t u = 0;
        for (int i = 0; i < 8; ++i) u |= static_cast<std::uint64_t>(p[i]) << (8 * i);
        p += 8;
        remaining -= 8;
        double d;
        std::memcpy(&d, &u, 8);
        return d;
    }
};

}  // namespace

void Checkpoint::put(const std::string& section, const std::string& name, const Tensor& t) {
    Array a;
    a.shape = t.shape();
    a.data.assign(t.values().begin(), t.values().end());
    sections[section][name] = std::move(a);
}

Tensor Checkpoint::get(const std::string& section, const std::string& name) const {
    auto sit = sections.find(section);
    if (sit == sections.end()) {
        throw CheckpointError("checkpoint has no section \"" + section + "\"");
    }
    auto ait = sit->second.find(name);
    if (ait == sit->second.end()) {
        throw CheckpointError("checkpoint section \"" + section + "\" has no array \"" + name +
                              "\"");
    }
    return Tensor::from(ait->second.data, ait->second.shape);
}

void save_checkpoint(const Checkpoint& ck, const std::string& path) {
    std::string out;
    out.append(kMagic, 4);
    put_u32(out, kVersion);
    put_u32(out, static_cast<std::uint32_t>(ck.sections.size()));
    for (const auto& [sname, arrays] : ck.sections) {
        put_str(out, sname);
        put_u32(out, static_cast<std::uint32_t>(arrays.size()));
        for (const auto& [aname, arr] : arrays) {
            put_str(out, aname);
            put_u32(out, static_cast<std::uint32_t>(arr.shape.size()));
            for (int d : arr.shape) put_u32(out, static_cast<std::uint32_t>(d));
            for (double v : arr.data) put_f64(out, v);
        }
    }
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw CheckpointError("cannot write " + path);
    f.write(out.data(), static_cast<std::streamsize>(out.size()));
    if (!f) throw CheckpointError("short write to " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw CheckpointError("cannot open " + path);
    std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(f)),
                                     std::istreambuf_iterator<char>());
    if (bytes.size() < 12 || std::memcmp(bytes.data(), kMagic, 4) != 0) {
        throw CheckpointError(path + ": not a TSMC checkpoint (bad or short magic)");
    }
    Reader r{bytes.data() + 4, bytes.size() - 4, path};
    const std::uint32_t version = r.u32();
    if (version != kVersion) {
        throw CheckpointError(path + ": unsupported checkpoint version " +
                              std::to_string(version));
    }
    Checkpoint ck;
    const std::uint32_t n_sections = r.u32();
    for (std::uint32_t s = 0; s < n_sections; ++s) {
        const std::string sname = r.str();
        const std::uint32_t n_arrays = r.u32();
        for (std::uint32_t a = 0; a < n_arrays; ++a) {
            const std::string aname = r.str();
            const std::uint32_t rank = r.u32();
            Checkpoint::Array arr;
            std::uint64_t count = 1;
            for (std::uint32_t d = 0; d < rank; ++d) {
                const std::uint32_t dim = r.u32();
                arr.shape.push_back(static_cast<int>(dim));
                count *= dim;
            }
            arr.data.reserve(count);
            for (std::uint64_t i = 0; i < count; ++i) arr.data.push_back(r.f64());
            ck.sections[sname][aname] = std::move(arr);
        }
    }
    if (r.remaining != 0) {
        throw CheckpointError(path + ": " + std::to_string(r.remaining) +
                              " trailing bytes after last section");
    }
    return ck;
}

void pack_encoder(Checkpoint& ck, const std::string& section, EncoderParams& params) {
    for (auto& [name, t] : params.named_params()) ck.put(section, name, t);
    Checkpoint::Section& meta = ck.sections["meta"];
    const EncoderDims& d = params.dims;
    meta["channels"] = {{}, {static_cast<double>(d.channels)}};
    meta["d_model"] = {{}, {static_cast<double>(d.d_model)}};
    meta["d_ff"] = {{}, {static_cast<double>(d.d_ff)}};
    meta["n_heads"] = {{}, {static_cast<double>(d.n_heads)}};
    meta["depth"] = {{}, {static_cast<double>(d.depth)}};
}

EncoderParams unpack_encoder(const Checkpoint& ck, const std::string& section) {
    EncoderDims dims;
    dims.channels = static_cast<int>(ck.get("meta", "channels").item());
    dims.d_model = static_cast<int>(ck.get("meta", "d_model").item());
    dims.d_ff = static_cast<int>(ck.get("meta", "d_ff").item());
    dims.n_heads = static_cast<int>(ck.get("meta", "n_heads").item());
    dims.depth = static_cast<int>(ck.get("meta", "depth").item());
    dims.validate();
    EncoderParams p;
    p.dims = dims;
    p.tokenizer_w = ck.get(section, "tokenizer_w");
    p.tokenizer_b = ck.get(section, "tokenizer_b");
    p.cls = ck.get(section, "cls");
    for (int b = 0; b < dims.depth; ++b) {
        const std::string pre = "block" + std::to_string(b) + ".";
        BlockParams blk;
        blk.wq = ck.get(section, pre + "wq");
        blk.wk = ck.get(section, pre + "wk");
        blk.wv = ck.get(section, pre + "wv");
        blk.wo = ck.get(section, pre + "wo");
        blk.w1 = ck.get(section, pre + "w1");
        blk.w2 = ck.get(section, pre + "w2");
        blk.ln1_gamma = ck.get(section, pre + "ln1_gamma");
        blk.ln1_beta = ck.get(section, pre + "ln1_beta");
        blk.ln2_gamma = ck.get(section, pre + "ln2_gamma");
        blk.ln2_beta = ck.get(section, pre + "ln2_beta");
        p.blocks.push_back(std::move(blk));
    }
    p.ln_out_gamma = ck.get(section, "ln_out_gamma");
    p.ln_out_beta = ck.get(section, "ln_out_beta");
    return p;
}

void pack_recon(Checkpoint& ck, ReconParams& params) {
    for (auto& [name, t] : params.named_params()) ck.put("recon", name, t);
}

ReconParams unpack_recon(const Checkpoint& ck) {
    ReconParams p;
    p.wz = ck.get("recon", "wz");
    p.wr = ck.get("recon", "wr");
    p.wh = ck.get("recon", "wh");
    p.uz = ck.get("recon", "uz");
    p.ur = ck.get("recon", "ur");
    p.uh = ck.get("recon", "uh");
    p.bz = ck.get("recon", "bz");
    p.br = ck.get("recon", "br");
    p.bh = ck.get("recon", "bh");
    p.w_out = ck.get("recon", "w_out");
    p.b_out = ck.get("recon", "b_out");
    p.channels = p.wz.rows();
    p.d_model = p.wz.cols();
    return p;
}

void pack_classifier(Checkpoint& ck, const Tensor& w, const Tensor& b) {
    ck.put("classifier", "w", w);
    ck.put("classifier", "b", b);
}

std::optional<std::pair<Tensor, Tensor>> unpack_classifier(const Checkpoint& ck) {
    if (!ck.has_section("classifier")) return std::nullopt;
    return std::make_pair(ck.get("classifier", "w"), ck.get("classifier", "b"));
}

}  // namespace tsmoco
