#include "tsmoco/objective.hpp"

#include <cmath>

namespace tsmoco {

Tensor loss_rec(const Tensor& x_future, const Tensor& x_hat, RecLossForm form) {
    if (x_future.shape() != x_hat.shape()) {
        throw ShapeError("loss_rec: shape mismatch " + shape_str(x_future.shape()) + " vs " +
                         shape_str(x_hat.shape()));
    }
    Tensor diff = sub(x_future, x_hat);
    Tensor sq = mul(diff, diff);
    return form == RecLossForm::mean ? mean(sq) : sum(sq);
}

Tensor loss_mc(const Tensor& c_student, const Tensor& c_teacher) {
    if (c_student.size() != c_teacher.size()) {
        throw ShapeError("loss_mc: context sizes differ, " + shape_str(c_student.shape()) +
                         " vs " + shape_str(c_teacher.shape()));
    }
    Tensor ct = c_teacher.detach();
    double ns = 0.0, nt = 0.0;
    for (double v : c_student.values()) ns += v * v;
    for (double v : ct.values()) nt += v * v;
    if (std::sqrt(ns) <= 1e-12 && std::sqrt(nt) <= 1e-12) {
        throw DegenerateRepresentationError(
            "loss_mc: both context vectors have near-zero norm; representation collapsed");
    }
    // The 1e-30 inside the square roots is below one ulp for any norm above
    // the degeneracy threshold; it only keeps the half-degenerate case (one
    // zero vector) finite instead of 0/0.
    Tensor dot = sum(mul(c_student, ct));
    Tensor norm_s = sqrt(add_scalar(sum(mul(c_student, c_student)), 1e-30));
    Tensor norm_t = sqrt(add_scalar(sum(mul(ct, ct)), 1e-30));
    Tensor cosine = div(dot, mul(norm_s, norm_t));
    return add_scalar(scale(cosine, -1.0), 1.0);
}

Tensor loss_ss(const Tensor& l_rec, const Tensor& l_mc, double lambda) {
    return add(l_rec, scale(l_mc, lambda));
}

void ema_update(EncoderParams& teacher, const EncoderParams& student, double tau) {
    if (!(tau >= 0.0 && tau <= 1.0)) {
        throw std::invalid_argument("ema_update: tau must lie in [0,1]");
    }
    if (tau == 1.0) return;  // fixed point, keep teacher bit-identical
    auto t_named = teacher.named_params();
    auto s_named = const_cast<EncoderParams&>(student).named_params();
    if (t_named.size() != s_named.size()) {
        throw ShapeError("ema_update: parameter schemas differ");
    }
    for (std::size_t i = 0; i < t_named.size(); ++i) {
        if (t_named[i].second.shape() != s_named[i].second.shape()) {
            throw ShapeError("ema_update: shape mismatch on " + t_named[i].first);
        }
        auto tv = t_named[i].second.values_mut();
        auto sv = s_named[i].second.values();
        if (tau == 0.0) {
            std::copy(sv.begin(), sv.end(), tv.begin());
        } else {
            for (std::size_t k = 0; k < tv.size(); ++k)
                tv[k] = tau * tv[k] + (1.0 - tau) * sv[k];
        }
    }
}

Tensor loss_linear_eval(const Tensor& logits, const std::vector<int>& labels) {
    if (logits.rank() != 2 || static_cast<int>(labels.size()) != logits.rows()) {
        throw ShapeError("loss_linear_eval: logits " + shape_str(logits.shape()) +
                         " need one label per row, got " + std::to_string(labels.size()));
    }
    for (int y : labels) {
        if (y < 0 || y >= logits.cols()) {
            throw std::out_of_range("loss_linear_eval: label " + std::to_string(y) +
                                    " outside {0.." + std::to_string(logits.cols() - 1) + "}");
        }
    }
    Tensor log_probs = log_softmax(logits, 1);
    return scale(mean(pick(log_probs, labels)), -1.0);
}

}  // namespace tsmoco
