#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <vector>

#include "priorcl/autodiff.hpp"
#include "priorcl/errors.hpp"
#include "priorcl/mining.hpp"
#include "priorcl/tensor.hpp"

namespace priorcl {

// Contrastive objectives. Everything runs in the log domain: scaled
// similarities s/tau can reach the thousands at extreme temperatures, so
// denominators exist only as log-sum-exp values and ratios only as sigmoids
// of log-space differences. Sums always run in member order so results are
// bit-reproducible.

namespace detail {

inline double stable_sigmoid(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

// log(exp(a) + exp(b)) with either argument possibly -inf.
inline double log_add_exp(double a, double b) {
    if (a == -std::numeric_limits<double>::infinity()) return b;
    if (b == -std::numeric_limits<double>::infinity()) return a;
    const double m = std::max(a, b);
    return m + std::log(std::exp(a - m) + std::exp(b - m));
}

} // namespace detail

// ---------------------------------------------------------------------------
// Cosine similarity with closed-form pullback. Norms are guarded by +1e-12 so
// a zero vector yields 0 similarity instead of NaN.
// ---------------------------------------------------------------------------

inline constexpr double kNormGuard = 1e-12;

inline double cosine_similarity(const Tensor& z_i, const Tensor& z_j) {
    require_shape(z_j, z_i.shape(), "cosine rhs");
    double dot = 0.0, sq_i = 0.0, sq_j = 0.0;
    for (std::size_t k = 0; k < z_i.size(); ++k) {
        dot += z_i[k] * z_j[k];
        sq_i += z_i[k] * z_i[k];
        sq_j += z_j[k] * z_j[k];
    }
    return dot / ((std::sqrt(sq_i) + kNormGuard) * (std::sqrt(sq_j) + kNormGuard));
}

struct CosineGrad {
    double value = 0.0;
    Tensor d_zi;
    Tensor d_zj;
};

inline CosineGrad cosine_similarity_grad(const Tensor& z_i, const Tensor& z_j) {
    require_shape(z_j, z_i.shape(), "cosine rhs");
    double dot = 0.0, sq_i = 0.0, sq_j = 0.0;
    for (std::size_t k = 0; k < z_i.size(); ++k) {
        dot += z_i[k] * z_j[k];
        sq_i += z_i[k] * z_i[k];
        sq_j += z_j[k] * z_j[k];
    }
    const double r_i = std::sqrt(sq_i), r_j = std::sqrt(sq_j);
    const double g_i = r_i + kNormGuard, g_j = r_j + kNormGuard;
    CosineGrad out;
    out.value = dot / (g_i * g_j);
    out.d_zi = Tensor(z_i.shape());
    out.d_zj = Tensor(z_j.shape());
    // d s / d z_i = z_j/(g_i g_j) - s * z_i/(r_i g_i); the r factors are the
    // derivative of the unguarded norm inside the guarded denominator.
    const double ks_i = out.value / (std::max(r_i, kNormGuard) * g_i);
    const double ks_j = out.value / (std::max(r_j, kNormGuard) * g_j);
    for (std::size_t k = 0; k < z_i.size(); ++k) {
        out.d_zi[k] = z_j[k] / (g_i * g_j) - ks_i * z_i[k];
        out.d_zj[k] = z_i[k] / (g_i * g_j) - ks_j * z_j[k];
    }
    return out;
}

inline void validate_similarity_row(const std::vector<double>& sims) {
    for (double s : sims)
        if (!(std::abs(s) <= 1.0 + 1e-12))
            throw DomainError("similarity " + std::to_string(s) + " outside [-1, 1]");
}

// ---------------------------------------------------------------------------
// All-pairs similarities for one batch of projections.
// ---------------------------------------------------------------------------

struct SimilarityMatrix {
    std::size_t views = 0;
    std::vector<double> s; // row-major views x views, diagonal ~1

    double at(std::size_t i, std::size_t j) const { return s[i * views + j]; }
    std::vector<double> row(std::size_t i) const {
        return std::vector<double>(s.begin() + static_cast<std::ptrdiff_t>(i * views),
                                   s.begin() + static_cast<std::ptrdiff_t>((i + 1) * views));
    }
};

inline SimilarityMatrix similarity_matrix(const std::vector<Tensor>& z) {
    if (z.size() < 2) throw DomainError("similarity matrix needs at least 2 views");
    const std::size_t v = z.size();
    SimilarityMatrix m;
    m.views = v;
    m.s.assign(v * v, 1.0);
    for (std::size_t i = 0; i < v; ++i) {
        for (std::size_t j = i + 1; j < v; ++j) {
            const double sij = cosine_similarity(z[i], z[j]);
            m.s[i * v + j] = sij;
            m.s[j * v + i] = sij;
        }
    }
    return m;
}

// ---------------------------------------------------------------------------
// Single-positive InfoNCE: the anchor's one positive against every other
// view as a negative, all at one temperature.
// ---------------------------------------------------------------------------

inline double loss_simclr(const std::vector<double>& sims, std::size_t anchor,
                          std::size_t positive, double tau) {
    if (tau <= 0.0) throw DomainError("temperature must be positive");
    if (anchor >= sims.size() || positive >= sims.size() || anchor == positive)
        throw DomainError("anchor/positive indices invalid for this row");
    const double t_p = sims[positive] / tau;
    double m = t_p;
    for (std::size_t i = 0; i < sims.size(); ++i) {
        if (i == anchor || i == positive) continue;
        m = std::max(m, sims[i] / tau);
    }
    double denom = std::exp(t_p - m);
    for (std::size_t i = 0; i < sims.size(); ++i) {
        if (i == anchor || i == positive) continue;
        denom += std::exp(sims[i] / tau - m);
    }
    return -(t_p - m - std::log(denom));
}

// ---------------------------------------------------------------------------
// Multi-positive adaptive-temperature loss. Each positive competes against
// itself plus every negative; other positives never enter its denominator.
// ---------------------------------------------------------------------------

namespace detail {

// log sum_n exp(s_n / tau_n) over the plan's negatives, member order, with
// max-subtraction; -inf when there are none.
inline double log_negative_mass(const std::vector<double>& sims, const ContrastPlan& plan) {
    if (plan.negatives.empty()) return -std::numeric_limits<double>::infinity();
    double m = -std::numeric_limits<double>::infinity();
    for (const PlanMember& n : plan.negatives) m = std::max(m, sims[n.view] / n.temperature);
    double acc = 0.0;
    for (const PlanMember& n : plan.negatives) acc += std::exp(sims[n.view] / n.temperature - m);
    return m + std::log(acc);
}

} // namespace detail

inline double loss_multipositive(const std::vector<double>& sims, const ContrastPlan& plan) {
    if (plan.positives.empty()) throw DomainError("loss needs at least one positive");
    for (const PlanMember& p : plan.positives)
        if (p.temperature <= 0.0) throw DomainError("positive temperature must be positive");
    for (const PlanMember& n : plan.negatives)
        if (n.temperature <= 0.0) throw DomainError("negative temperature must be positive");
    const double log_d = detail::log_negative_mass(sims, plan);
    double acc = 0.0;
    for (const PlanMember& p : plan.positives) {
        const double t_p = sims[p.view] / p.temperature;
        // log( exp(t_p) / (exp(t_p) + D) ) = t_p - logaddexp(t_p, log D)
        acc += t_p - detail::log_add_exp(t_p, log_d);
    }
    return -acc / static_cast<double>(plan.positives.size());
}

// Gradients of loss_multipositive with respect to each member's similarity,
// aligned with the plan's member order.
struct PlanGradients {
    std::vector<double> positives;
    std::vector<double> negatives;
};

inline PlanGradients loss_gradient_similarities(const std::vector<double>& sims,
                                                const ContrastPlan& plan) {
    if (plan.positives.empty()) throw DomainError("loss needs at least one positive");
    const double log_d = detail::log_negative_mass(sims, plan);
    const auto p_count = static_cast<double>(plan.positives.size());
    PlanGradients out;
    out.positives.reserve(plan.positives.size());
    out.negatives.reserve(plan.negatives.size());

    // d L / d s_p = -(1/(tau_p |P|)) * D / (exp(s_p/tau_p) + D)
    double shared = 0.0; // sum over positives of D / (exp(t_p) + D), reused below
    for (const PlanMember& p : plan.positives) {
        const double ratio = detail::stable_sigmoid(log_d - sims[p.view] / p.temperature);
        out.positives.push_back(-ratio / (p.temperature * p_count));
        shared += ratio;
    }
    // d L / d s_n = (1/(tau_n |P|)) * sum_p exp(s_n/tau_n) / (exp(s_p/tau_p) + D)
    //             = (1/(tau_n |P|)) * exp(s_n/tau_n - log D) * shared
    for (const PlanMember& n : plan.negatives) {
        const double w = std::exp(sims[n.view] / n.temperature - log_d);
        out.negatives.push_back(w * shared / (n.temperature * p_count));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Batch-level aggregation: mean loss over anchors plus everything the
// backward pass needs.
// ---------------------------------------------------------------------------

struct LossBreakdown {
    double total = 0.0;
    std::vector<double> per_anchor;
    std::vector<PlanGradients> grad_wrt_similarities; // per anchor, plan-aligned
};

inline LossBreakdown batch_loss(const SimilarityMatrix& sims,
                                const std::vector<ContrastPlan>& plans) {
    if (plans.empty()) throw DomainError("batch loss needs at least one plan");
    LossBreakdown out;
    out.per_anchor.reserve(plans.size());
    out.grad_wrt_similarities.reserve(plans.size());
    double acc = 0.0;
    for (const ContrastPlan& plan : plans) {
        const std::vector<double> row = sims.row(plan.anchor);
        out.per_anchor.push_back(loss_multipositive(row, plan));
        out.grad_wrt_similarities.push_back(loss_gradient_similarities(row, plan));
        acc += out.per_anchor.back();
    }
    out.total = acc / static_cast<double>(plans.size());
    return out;
}

// Pushes the batch-mean loss gradient through every cosine edge back onto the
// projection vectors: d total / d z_v for every view v.
inline std::vector<Tensor> backward_to_views(const std::vector<Tensor>& z,
                                             const std::vector<ContrastPlan>& plans,
                                             const LossBreakdown& breakdown,
                                             double upstream = 1.0) {
    std::vector<Tensor> dz;
    dz.reserve(z.size());
    for (const Tensor& t : z) dz.emplace_back(t.shape());
    const double inv_anchors = upstream / static_cast<double>(plans.size());

    // Guarded norms once per view; ks folds the norm-correction factors.
    const std::size_t dim = z.front().size();
    std::vector<double> g(z.size()), ks(z.size());
    for (std::size_t i = 0; i < z.size(); ++i) {
        double sq = 0.0;
        for (std::size_t k = 0; k < dim; ++k) sq += z[i][k] * z[i][k];
        const double r = std::sqrt(sq);
        g[i] = r + kNormGuard;
        ks[i] = 1.0 / (std::max(r, kNormGuard) * g[i]);
    }

    auto push_pair = [&](std::size_t a, std::size_t b, double w) {
        // s_ab = z_a . z_b / (g_a g_b); ds/dz_a = z_b/(g_a g_b) - s z_a/(r_a g_a).
        const double inv_ab = 1.0 / (g[a] * g[b]);
        double s = 0.0;
        for (std::size_t k = 0; k < dim; ++k) s += z[a][k] * z[b][k];
        s *= inv_ab;
        const double ca = s * ks[a];
        const double cb = s * ks[b];
        for (std::size_t k = 0; k < dim; ++k) {
            dz[a][k] += w * (z[b][k] * inv_ab - ca * z[a][k]);
            dz[b][k] += w * (z[a][k] * inv_ab - cb * z[b][k]);
        }
    };

    for (std::size_t i = 0; i < plans.size(); ++i) {
        const ContrastPlan& plan = plans[i];
        const PlanGradients& gr = breakdown.grad_wrt_similarities[i];
        for (std::size_t p = 0; p < plan.positives.size(); ++p)
            push_pair(plan.anchor, plan.positives[p].view, inv_anchors * gr.positives[p]);
        for (std::size_t n = 0; n < plan.negatives.size(); ++n)
            push_pair(plan.anchor, plan.negatives[n].view, inv_anchors * gr.negatives[n]);
    }
    return dz;
}

// Registers the whole batch objective as one fused tape node over the
// projection outputs, so a single tape.backward() differentiates the full
// encoder-to-loss chain.
inline NodeId contrastive_node(Tape& tape, const std::vector<NodeId>& z_nodes,
                               std::vector<ContrastPlan> plans) {
    std::vector<Tensor> z;
    z.reserve(z_nodes.size());
    for (NodeId id : z_nodes) z.push_back(tape.value(id));
    const LossBreakdown breakdown = batch_loss(similarity_matrix(z), plans);
    return tape.custom(
        z_nodes, Tensor::scalar(breakdown.total),
        [plans = std::move(plans)](const Tensor& grad_out, const std::vector<Tensor>& inputs) {
            const LossBreakdown bd = batch_loss(similarity_matrix(inputs), plans);
            return backward_to_views(inputs, plans, bd, grad_out[0]);
        });
}

// ---------------------------------------------------------------------------
// Gradient curves: sweep one member's similarity at several of its
// temperatures while everything else stays pinned, and record the closed-form
// gradient. Mirrors the hard/easy-sample analysis setups.
// ---------------------------------------------------------------------------

struct GradientCurveConfig {
    std::size_t p_count = 10;
    std::size_t n_count = 100;
    double other_positive_s = 0.5; // similarity of non-swept positives
    double other_negative_s = 0.0; // similarity of non-swept negatives
    double other_tau = 0.1;        // temperature of every non-swept member
    bool sweep_positive = true;    // false: sweep one negative instead
    std::vector<double> taus = {0.05, 0.07, 0.1, 1.0};
    double s_lo = -1.0;
    double s_hi = 1.0;
    std::size_t points = 81;
};

struct GradientCurvePoint {
    double tau = 0.0;
    double s = 0.0;
    double grad = 0.0;
};

inline std::vector<GradientCurvePoint> gradient_curve(const GradientCurveConfig& cfg) {
    if (cfg.p_count < 1 || cfg.points < 2) throw DomainError("curve needs p_count >= 1, points >= 2");
    if (cfg.n_count < 1) throw DomainError("curve needs at least one negative");
    if (cfg.other_tau <= 0.0) throw DomainError("other_tau must be positive");
    for (double t : cfg.taus)
        if (t <= 0.0) throw DomainError("swept tau must be positive");

    // View layout: 0 = anchor, 1 = swept member's slot, then the rest.
    const std::size_t views = 1 + cfg.p_count + cfg.n_count;
    ContrastPlan plan;
    plan.anchor = 0;
    std::vector<double> sims(views, 0.0);
    std::size_t next = 1;
    const std::size_t swept_slot = next;
    for (std::size_t p = 0; p < cfg.p_count; ++p, ++next) {
        const bool is_swept = cfg.sweep_positive && p == 0;
        plan.positives.push_back({next, cfg.other_tau});
        sims[next] = is_swept ? 0.0 : cfg.other_positive_s;
    }
    for (std::size_t n = 0; n < cfg.n_count; ++n, ++next) {
        const bool is_swept = !cfg.sweep_positive && n == 0;
        plan.negatives.push_back({next, cfg.other_tau});
        sims[next] = is_swept ? 0.0 : cfg.other_negative_s;
    }
    const std::size_t swept_member =
        cfg.sweep_positive ? swept_slot : swept_slot + cfg.p_count;

    std::vector<GradientCurvePoint> out;
    out.reserve(cfg.taus.size() * cfg.points);
    for (double tau : cfg.taus) {
        ContrastPlan cur = plan;
        if (cfg.sweep_positive)
            cur.positives[0].temperature = tau;
        else
            cur.negatives[0].temperature = tau;
        for (std::size_t i = 0; i < cfg.points; ++i) {
            const double s = cfg.s_lo + (cfg.s_hi - cfg.s_lo) * static_cast<double>(i) /
                                            static_cast<double>(cfg.points - 1);
            sims[swept_member] = s;
            const PlanGradients g = loss_gradient_similarities(sims, cur);
            out.push_back({tau, s, cfg.sweep_positive ? g.positives[0] : g.negatives[0]});
        }
    }
    return out;
}

// Gradient of the swept member at a single point; convenience for the
// temperature-ordering checks.
inline double gradient_at(const GradientCurveConfig& cfg, double tau, double s) {
    GradientCurveConfig one = cfg;
    one.taus = {tau};
    one.s_lo = s;
    one.s_hi = s;
    one.points = 2; // both ends collapse onto s
    return gradient_curve(one)[0].grad;
}

} // namespace priorcl
