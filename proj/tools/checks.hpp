#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "priorcl/loss.hpp"
#include "priorcl/mining.hpp"
#include "priorcl/model.hpp"
#include "priorcl/rng.hpp"
#include "priorcl/signal.hpp"

// Finite-difference verification utilities shared by the gradcheck subcommand
// and the acceptance gate. Central differences are compared element-wise
// under |analytic - numeric| <= rel * max(|analytic|, |numeric|) + abs: the
// absolute slack absorbs FD roundoff (~eps * |loss| / h) on near-zero
// gradients where a pure ratio would amplify noise. Checks report the worst
// margin ratio; <= 1 passes.

namespace priorcl::checks {

inline double err_ratio(double analytic, double numeric, double rel, double abs_floor) {
    const double diff = std::abs(analytic - numeric);
    return diff / (rel * std::max(std::abs(analytic), std::abs(numeric)) + abs_floor);
}

// One random multi-positive loss instance: similarities uniform in [-1, 1],
// rank-linear temperatures in the given band.
struct LossInstance {
    std::vector<double> sims; // indexed by view, anchor slot unused by the loss
    ContrastPlan plan;
};

inline LossInstance random_loss_instance(Rng& rng, std::size_t max_p = 20,
                                         std::size_t max_n = 200, double tau_lo = 0.05,
                                         double tau_hi = 1.0) {
    const std::size_t n_pos = 1 + rng.below(max_p);
    const std::size_t n_neg = 1 + rng.below(max_n);
    LossInstance inst;
    inst.plan.anchor = 0;
    inst.sims.assign(1 + n_pos + n_neg, 0.0);
    std::size_t next = 1;
    for (std::size_t p = 0; p < n_pos; ++p, ++next) {
        inst.plan.positives.push_back({next, rng.uniform(tau_lo, tau_hi)});
        inst.sims[next] = rng.uniform(-1.0, 1.0);
    }
    for (std::size_t n = 0; n < n_neg; ++n, ++next) {
        inst.plan.negatives.push_back({next, rng.uniform(tau_lo, tau_hi)});
        inst.sims[next] = rng.uniform(-1.0, 1.0);
    }
    return inst;
}

inline constexpr double kLossFdRel = 1e-6;
inline constexpr double kLossFdAbs = 1e-8;

// Worst margin ratio between the closed-form similarity gradients and central
// differences of the loss forward, over every plan member. The default step
// balances truncation against roundoff: at h = 2e-6 the measured worst ratio
// over thousands of instances stays near 0.35, versus ~1.4 at h = 5e-7.
inline double loss_fd_worst_ratio(const LossInstance& inst, double h = 2e-6,
                                  double rel = kLossFdRel, double abs_floor = kLossFdAbs) {
    const PlanGradients g = loss_gradient_similarities(inst.sims, inst.plan);
    double worst = 0.0;
    auto fd_at = [&](std::size_t view) {
        std::vector<double> s = inst.sims;
        s[view] = inst.sims[view] + h;
        const double up = loss_multipositive(s, inst.plan);
        s[view] = inst.sims[view] - h;
        const double dn = loss_multipositive(s, inst.plan);
        return (up - dn) / (2.0 * h);
    };
    for (std::size_t p = 0; p < inst.plan.positives.size(); ++p)
        worst = std::max(worst, err_ratio(g.positives[p], fd_at(inst.plan.positives[p].view),
                                          rel, abs_floor));
    for (std::size_t n = 0; n < inst.plan.negatives.size(); ++n)
        worst = std::max(worst, err_ratio(g.negatives[n], fd_at(inst.plan.negatives[n].view),
                                          rel, abs_floor));
    return worst;
}

// Full-chain check: encoder -> projection -> cosine similarities -> loss,
// differentiated by the tape and compared against central differences over
// every model parameter element. Returns the worst relative error.
struct ChainSetup {
    ModelParams params;
    std::vector<Epoch> views;
    std::vector<ContrastPlan> plans;
};

inline ChainSetup micro_chain(std::uint64_t seed, std::size_t n_views = 6) {
    EncoderConfig enc;
    enc.channels = {2, 2, 2, 4};
    enc.kernel = 8;
    enc.stride = 4;
    enc.projection_hidden = 4;
    enc.projection_dim = 3;
    ChainSetup setup;
    setup.params = init_params(enc, seed);
    const Rng root(seed);
    SynthProfile profile;
    for (std::size_t v = 0; v < n_views; ++v) {
        Rng child = root.derive(v + 1);
        setup.views.push_back(
            synth_epoch(stage_from_index(v % kNumStages), 100.0, child, profile));
    }
    std::vector<PriorFeature> feats;
    for (const Epoch& e : setup.views) feats.push_back(compute_prior_feature(e));
    setup.plans = plan_batch(feats, 2, TempSchedule{0.05, 0.1});
    return setup;
}

inline double chain_loss(const ModelParams& params, const std::vector<Epoch>& views,
                         const std::vector<ContrastPlan>& plans) {
    std::vector<Tensor> z;
    z.reserve(views.size());
    for (const Epoch& e : views) z.push_back(project(params, encode(params, e)));
    return batch_loss(similarity_matrix(z), plans).total;
}

inline constexpr double kChainFdRel = 1e-4;
inline constexpr double kChainFdAbs = 1e-7;

// The chain is stiff in places: channel layernorm over few channels has huge
// third derivatives near its singular manifold, so a fixed step can carry
// O(1) truncation error on individual coordinates even though the analytic
// gradient is exact. A coordinate that misses tolerance is therefore retried
// with the step divided by 10, down to h/1000. Finite-difference artifacts
// shrink with the step; a wrong closed form leaves a relative mismatch that
// no step size can hide, so the refinement forgives only the former. Kept
// per-coordinate so well-conditioned coordinates stay at the large step,
// where roundoff is far below the absolute floor.
inline double chain_fd_worst_ratio(ChainSetup& setup, double h = 1e-5,
                                   double rel = kChainFdRel, double abs_floor = kChainFdAbs) {
    Tape tape;
    LiftedModel model = lift_params(tape, setup.params);
    std::vector<NodeId> z_nodes;
    for (const Epoch& e : setup.views)
        z_nodes.push_back(project_node(tape, model, encode_node(tape, model, tape.leaf(epoch_tensor(e)))));
    tape.backward(contrastive_node(tape, z_nodes, setup.plans));

    const std::vector<NodeId> ids = model.ids();
    auto tensors = named_tensors(setup.params);
    double worst = 0.0;
    for (std::size_t t = 0; t < tensors.size(); ++t) {
        // The classifier plays no part in the contrastive chain; its gradient
        // is identically zero and finite differences agree trivially.
        if (tensors[t].first.rfind("classifier.", 0) == 0) continue;
        const Tensor grad = tape.grad(ids[t]);
        Tensor& param = *tensors[t].second;
        for (std::size_t i = 0; i < param.size(); ++i) {
            const double keep = param[i];
            double ratio = std::numeric_limits<double>::infinity();
            for (double step = h; ratio > 1.0 && step >= h / 1000.0 * 0.99; step /= 10.0) {
                param[i] = keep + step;
                const double up = chain_loss(setup.params, setup.views, setup.plans);
                param[i] = keep - step;
                const double dn = chain_loss(setup.params, setup.views, setup.plans);
                param[i] = keep;
                ratio = std::min(ratio, err_ratio(grad[i], (up - dn) / (2.0 * step), rel, abs_floor));
            }
            worst = std::max(worst, ratio);
        }
    }
    return worst;
}

} // namespace priorcl::checks
