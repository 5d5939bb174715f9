#include "tsmoco/gradcheck.hpp"

#include "tsmoco/optim.hpp"
#include "tsmoco/train.hpp"

namespace tsmoco {

bool GradCheckReport::passed() const {
    for (const Group& g : groups)
        if (!(g.max_rel_err < tolerance)) return false;
    return true;
}

std::vector<std::string> GradCheckReport::failing() const {
    std::vector<std::string> out;
    for (const Group& g : groups)
        if (!(g.max_rel_err < tolerance)) out.push_back(g.name);
    return out;
}

GradCheckReport full_model_gradcheck(double h, std::uint64_t seed, double tolerance,
                                     bool inject_fault) {
    // Toy dimensions keep the finite-difference sweep fast while exercising
    // every operation of the combined loss.
    TrainConfig cfg;
    cfg.d_model = 4;
    cfg.d_ff = 8;
    cfg.n_heads = 2;
    cfg.depth = 1;
    cfg.horizon = 2;
    cfg.p_m = 0.5;
    cfg.alpha = 1;
    cfg.lambda = 1.0;
    const int timesteps = 8;
    const int channels = 2;
    const int batch = 2;

    Rng root(seed);
    Rng init_enc = root.derive(101);
    Rng init_rec = root.derive(102);
    Rng data_rng = root.derive(103);
    const std::uint64_t mask_seed = root.derive(104).next_u64();

    EncoderDims dims{channels, cfg.d_model, cfg.d_ff, cfg.n_heads, cfg.depth};
    EncoderParams student = init_encoder(dims, init_enc);
    EncoderParams teacher = student.clone();
    // Nudge the teacher so the contrast loss is not at its degenerate
    // self-similarity minimum (where gradients vanish).
    {
        Rng nudge = root.derive(105);
        for (auto& [name, t] : teacher.named_params())
            for (double& v : t.values_mut()) v += 0.1 * nudge.normal();
    }
    ReconParams recon = init_recon(channels, cfg.d_model, init_rec);

    std::vector<Tensor> windows;
    for (int wdw = 0; wdw < batch; ++wdw) {
        std::vector<double> v(static_cast<std::size_t>(timesteps) * channels);
        for (double& x : v) x = data_rng.normal();
        windows.push_back(Tensor::from(std::move(v), {timesteps, channels}));
    }

    // Deterministic loss: the mask stream restarts on every rebuild so the
    // finite-difference evaluations see the exact same augmentation.
    auto build_loss = [&]() {
        Rng mask_rng(mask_seed);
        Tensor acc;
        for (const Tensor& wdw : windows) {
            Tensor l = ss_window_loss(wdw, student, teacher, recon, cfg, mask_rng);
            acc = acc.defined() ? add(acc, l) : l;
        }
        Tensor loss = scale(acc, 1.0 / batch);
        if (inject_fault) loss = faulty_identity(loss, 2.0);
        return loss;
    };

    GradCheckReport report;
    report.tolerance = tolerance;
    for (auto& [name, t] : student.named_params()) {
        report.groups.push_back({"student." + name, check_gradients(build_loss, {t}, h)});
    }
    for (auto& [name, t] : recon.named_params()) {
        report.groups.push_back({"recon." + name, check_gradients(build_loss, {t}, h)});
    }
    return report;
}

}  // namespace tsmoco
