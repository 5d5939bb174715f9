#pragma once

#include <stdexcept>
#include <vector>

#include "tsmoco/encoder.hpp"
#include "tsmoco/tensor.hpp"

namespace tsmoco {

// Raised when both context vectors have (numerically) zero norm, i.e. the
// representation has collapsed and the contrast loss is undefined.
struct DegenerateRepresentationError : std::runtime_error {
    explicit DegenerateRepresentationError(const std::string& msg) : std::runtime_error(msg) {}
};

enum class RecLossForm { mean, sum };

// Reconstruction loss between true and predicted future timesteps. The
// default is the mean over all K*C elements so the loss weight keeps the same
// scale across horizons; the plain sum of squares is available via `form`.
Tensor loss_rec(const Tensor& x_future, const Tensor& x_hat, RecLossForm form = RecLossForm::mean);

// Momentum-contrast loss 1 - cos(c_student, c_teacher). The teacher vector is
// detached internally, so gradients reach the student side only.
Tensor loss_mc(const Tensor& c_student, const Tensor& c_teacher);

// Combined self-supervised loss l_rec + lambda * l_mc.
Tensor loss_ss(const Tensor& l_rec, const Tensor& l_mc, double lambda);

// Teacher <- tau * teacher + (1 - tau) * student, elementwise over every
// encoder parameter. tau = 1 leaves the teacher bit-identical; tau = 0 copies
// the student exactly.
void ema_update(EncoderParams& teacher, const EncoderParams& student, double tau);

// Mean cross-entropy of logits [B x C] against integer labels in {0..C-1}.
Tensor loss_linear_eval(const Tensor& logits, const std::vector<int>& labels);

}  // namespace tsmoco
