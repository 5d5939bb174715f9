#include "tsmoco/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>

namespace tsmoco {

namespace {

constexpr char kMagic[4] = {'T', 'S', 'D', '1'};

void put_u32(std::vector<unsigned char>& out, std::uint32_t v) {
    out.push_back(static_cast<unsigned char>(v & 0xff));
    out.push_back(static_cast<unsigned char>((v >> 8) & 0xff));
    out.push_back(static_cast<unsigned char>((v >> 16) & 0xff));
    out.push_back(static_cast<unsigned char>((v >> 24) & 0xff));
}

std::uint32_t get_u32(const unsigned char* p) {
    return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
           (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

std::uint32_t float_bits(float f) {
    std::uint32_t u;
    std::memcpy(&u, &f, 4);
    return u;
}

float bits_float(std::uint32_t u) {
    float f;
    std::memcpy(&f, &u, 4);
    return f;
}

}  // namespace

Tensor Dataset::window(int i) const {
    const std::size_t stride = static_cast<std::size_t>(timesteps) * channels;
    std::vector<double> v(stride);
    const float* src = values.data() + static_cast<std::size_t>(i) * stride;
    for (std::size_t k = 0; k < stride; ++k) v[k] = static_cast<double>(src[k]);
    return Tensor::from(std::move(v), {timesteps, channels});
}

std::vector<int> Dataset::class_counts() const {
    std::vector<int> counts(static_cast<std::size_t>(num_classes), 0);
    for (std::uint32_t y : labels) counts[y] += 1;
    return counts;
}

Dataset load_dataset(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw DataError(DataError::Kind::io, "cannot open " + path);
    std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(f)),
                                     std::istreambuf_iterator<char>());
    if (bytes.size() < 4 || std::memcmp(bytes.data(), kMagic, 4) != 0) {
        throw DataError(DataError::Kind::bad_magic,
                        path + ": not a TSD1 file (bad or short magic)");
    }
    if (bytes.size() < 20) {
        throw DataError(DataError::Kind::size_mismatch,
                        path + ": expected at least 20 header bytes, found " +
                            std::to_string(bytes.size()));
    }
    Dataset ds;
    const std::uint32_t n = get_u32(bytes.data() + 4);
    const std::uint32_t t = get_u32(bytes.data() + 8);
    const std::uint32_t c_ch = get_u32(bytes.data() + 12);
    const std::uint32_t c = get_u32(bytes.data() + 16);
    if (t == 0 || c_ch == 0 || c == 0) {
        throw DataError(DataError::Kind::bad_header,
                        path + ": header requires T, C_ch and C >= 1 (got T=" +
                            std::to_string(t) + ", C_ch=" + std::to_string(c_ch) +
                            ", C=" + std::to_string(c) + ")");
    }
    const std::uint64_t n_vals = static_cast<std::uint64_t>(n) * t * c_ch;
    const std::uint64_t expected = 20 + 4 * n_vals + 4ULL * n;
    if (bytes.size() != expected) {
        throw DataError(DataError::Kind::size_mismatch,
                        path + ": expected " + std::to_string(expected) + " bytes, found " +
                            std::to_string(bytes.size()));
    }
    ds.num_windows = static_cast<int>(n);
    ds.timesteps = static_cast<int>(t);
    ds.channels = static_cast<int>(c_ch);
    ds.num_classes = static_cast<int>(c);
    ds.values.resize(n_vals);
    const unsigned char* p = bytes.data() + 20;
    for (std::uint64_t i = 0; i < n_vals; ++i, p += 4) ds.values[i] = bits_float(get_u32(p));
    ds.labels.resize(n);
    for (std::uint32_t i = 0; i < n; ++i, p += 4) {
        ds.labels[i] = get_u32(p);
        if (ds.labels[i] >= c) {
            throw DataError(DataError::Kind::bad_label,
                            path + ": window " + std::to_string(i) + " has label " +
                                std::to_string(ds.labels[i]) + " >= C=" + std::to_string(c));
        }
    }
    const std::size_t slash = path.find_last_of("/\\");
    ds.name = slash == std::string::npos ? path : path.substr(slash + 1);
    return ds;
}

void save_dataset(const Dataset& ds, const std::string& path) {
    std::vector<unsigned char> bytes;
    bytes.reserve(20 + 4 * ds.values.size() + 4 * ds.labels.size());
    bytes.insert(bytes.end(), kMagic, kMagic + 4);
    put_u32(bytes, static_cast<std::uint32_t>(ds.num_windows));
    put_u32(bytes, static_cast<std::uint32_t>(ds.timesteps));
    put_u32(bytes, static_cast<std::uint32_t>(ds.channels));
    put_u32(bytes, static_cast<std::uint32_t>(ds.num_classes));
    for (float v : ds.values) put_u32(bytes, float_bits(v));
    for (std::uint32_t y : ds.labels) put_u32(bytes, y);
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw DataError(DataError::Kind::io, "cannot write " + path);
    f.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
    if (!f) throw DataError(DataError::Kind::io, "short write to " + path);
}

SplitIndices split(const Dataset& ds, double train_frac, double val_frac, std::uint64_t seed) {
    if (ds.num_windows < 5) {
        throw std::invalid_argument("split: need at least 5 windows, got " +
                                    std::to_string(ds.num_windows));
    }
    std::vector<int> idx(static_cast<std::size_t>(ds.num_windows));
    std::iota(idx.begin(), idx.end(), 0);
    Rng rng(seed);
    rng.shuffle(idx);
    const int n = ds.num_windows;
    const int cut1 = static_cast<int>(std::floor(train_frac * n));
    const int cut2 = static_cast<int>(std::floor((train_frac + val_frac) * n));
    SplitIndices s;
    s.train.assign(idx.begin(), idx.begin() + cut1);
    s.val.assign(idx.begin() + cut1, idx.begin() + cut2);
    s.test.assign(idx.begin() + cut2, idx.end());
    return s;
}

Dataset undersample(const Dataset& ds, Rng& rng) {
    std::vector<int> counts = ds.class_counts();
    for (int k = 0; k < ds.num_classes; ++k) {
        if (counts[static_cast<std::size_t>(k)] == 0) {
            throw std::invalid_argument("undersample: class " + std::to_string(k) +
                                        " has no samples");
        }
    }
    const int target = *std::min_element(counts.begin(), counts.end());
    std::vector<int> keep;
    for (int k = 0; k < ds.num_classes; ++k) {
        std::vector<int> members;
        for (int i = 0; i < ds.num_windows; ++i)
            if (ds.label(i) == k) members.push_back(i);
        rng.shuffle(members);
        members.resize(static_cast<std::size_t>(target));
        keep.insert(keep.end(), members.begin(), members.end());
    }
    std::sort(keep.begin(), keep.end());
    Dataset out;
    out.num_windows = static_cast<int>(keep.size());
    out.timesteps = ds.timesteps;
    out.channels = ds.channels;
    out.num_classes = ds.num_classes;
    out.name = ds.name;
    out.sample_rate_hz = ds.sample_rate_hz;
    const std::size_t stride = static_cast<std::size_t>(ds.timesteps) * ds.channels;
    out.values.reserve(keep.size() * stride);
    out.labels.reserve(keep.size());
    for (int i : keep) {
        const float* src = ds.values.data() + static_cast<std::size_t>(i) * stride;
        out.values.insert(out.values.end(), src, src + stride);
        out.labels.push_back(ds.labels[static_cast<std::size_t>(i)]);
    }
    return out;
}

Dataset synth_generate(int n_per_class, int num_classes, int timesteps, int channels,
                       double noise_sigma, std::uint64_t seed, double base_freq) {
    if (num_classes < 2) {
        throw std::invalid_argument("synth_generate: need at least 2 classes");
    }
    Dataset ds;
    ds.num_windows = n_per_class * num_classes;
    ds.timesteps = timesteps;
    ds.channels = channels;
    ds.num_classes = num_classes;
    ds.name = "synthetic";
    ds.values.reserve(static_cast<std::size_t>(ds.num_windows) * timesteps * channels);
    ds.labels.reserve(static_cast<std::size_t>(ds.num_windows));
    Rng rng(seed);
    for (int k = 0; k < num_classes; ++k) {
        const double freq = (k + 1) * base_freq;  // cycles per window
        for (int w = 0; w < n_per_class; ++w) {
            std::vector<double> phase(static_cast<std::size_t>(channels));
            for (double& p : phase) p = rng.uniform(0.0, 2.0 * M_PI);
            for (int t = 0; t < timesteps; ++t) {
                for (int c = 0; c < channels; ++c) {
                    double v = std::sin(2.0 * M_PI * freq * t / timesteps +
                                        phase[static_cast<std::size_t>(c)]);
                    if (noise_sigma > 0.0) v += rng.normal(0.0, noise_sigma);
                    ds.values.push_back(static_cast<float>(v));
                }
            }
            ds.labels.push_back(static_cast<std::uint32_t>(k));
        }
    }
    return ds;
}

PastFuture past_future_split(const Tensor& x, int horizon) {
    if (x.rank() != 2) {
        throw ShapeError("past_future_split: expects [T x C], got " + shape_str(x.shape()));
    }
    const int t_len = x.rows();
    if (horizon < 1 || horizon > t_len - 1) {
        throw std::invalid_argument("past_future_split: K=" + std::to_string(horizon) +
                                    " outside [1," + std::to_string(t_len - 1) + "]");
    }
    PastFuture pf;
    pf.past = slice_rows(x, 0, t_len - horizon);
    pf.future = slice_rows(x, t_len - horizon, t_len);
    pf.last = slice_rows(x, t_len - horizon - 1, t_len - horizon);
    return pf;
}

}  // namespace tsmoco
