#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "tsmoco/rng.hpp"
#include "tsmoco/tensor.hpp"

namespace tsmoco {

// Errors raised while reading a .tsd1 file, tagged with the failure category
// so callers (and the corruption tests) can tell them apart.
struct DataError : std::runtime_error {
    enum class Kind { io, bad_magic, bad_header, size_mismatch, bad_label };
    Kind kind;
    DataError(Kind k, const std::string& msg) : std::runtime_error(msg), kind(k) {}
};

// Labeled multivariate time-series windows, shape [N x T x C] with labels in
// {0..num_classes-1}. Window values are stored as float32 (the on-disk
// precision); tensors handed to the models are float64 views of them.
// Immutable after construction.
struct Dataset {
    int num_windows = 0;  // N
    int timesteps = 0;    // T
    int channels = 0;     // C_ch
    int num_classes = 0;  // C
    std::vector<float> values;        // N*T*C, row-major [window][time][channel]
    std::vector<std::uint32_t> labels;  // N entries
    std::string name;                   // informational
    double sample_rate_hz = 0.0;        // informational

    int label(int i) const { return static_cast<int>(labels[static_cast<std::size_t>(i)]); }
    // The i-th window as a [T x C] tensor.
    Tensor window(int i) const;
    std::vector<int> class_counts() const;
};

// TSD1 binary layout (little-endian):
//   magic "TSD1"; u32 N, T, C_ch, C; N*T*C_ch float32 values; N u32 labels.
Dataset load_dataset(const std::string& path);
void save_dataset(const Dataset& ds, const std::string& path);

struct SplitIndices {
    std::vector<int> train, val, test;
};

// Seeded permutation cut at floor(r0*N) and floor((r0+r1)*N).
SplitIndices split(const Dataset& ds, double train_frac, double val_frac, std::uint64_t seed);

// Reduces every class to the minority-class count by uniform sampling
// without replacement; window order is otherwise preserved.
Dataset undersample(const Dataset& ds, Rng& rng);

// Synthetic classification task: class k windows are multichannel sinusoids
// at base frequency (k+1)*base_freq cycles per window with a random phase
// per channel, plus Gaussian noise.
Dataset synth_generate(int n_per_class, int num_classes, int timesteps, int channels,
                       double noise_sigma, std::uint64_t seed, double base_freq = 2.0);

struct PastFuture {
    Tensor past;    // [(T-K) x C]
    Tensor future;  // [K x C]
    Tensor last;    // [1 x C], final past timestep
};

// Splits off the final K timesteps; 1 <= K <= T-1.
PastFuture past_future_split(const Tensor& x, int horizon);

}  // namespace tsmoco
