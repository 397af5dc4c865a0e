#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

#include "priorcl/errors.hpp"
#include "priorcl/prior.hpp"
#include "priorcl/signal.hpp"

namespace priorcl {

// ---------------------------------------------------------------------------
// Adaptive temperature bounds. With tau_min == tau_max the whole mechanism
// degenerates to a fixed temperature.
// ---------------------------------------------------------------------------

struct TempSchedule {
    double tau_min = 0.05;
    double tau_max = 0.1;
};

inline void validate(const TempSchedule& s) {
    if (!(s.tau_min > 0.0) || !(s.tau_min <= s.tau_max))
        throw DomainError("temperature schedule needs 0 < tau_min <= tau_max, got [" +
                          std::to_string(s.tau_min) + ", " + std::to_string(s.tau_max) + "]");
}

// ---------------------------------------------------------------------------
// Per-anchor contrast plan: who is pulled, who is pushed, and how hot.
// Members are stored in ascending dissimilarity rank, which also fixes the
// summation order used by the loss.
// ---------------------------------------------------------------------------

struct PlanMember {
    std::size_t view = 0;
    double temperature = 0.0;
};

struct ContrastPlan {
    std::size_t anchor = 0;
    std::vector<PlanMember> positives;
    std::vector<PlanMember> negatives;
};

// Full invariant sweep; tests and debug paths call this after construction.
inline void validate(const ContrastPlan& plan, const TempSchedule& schedule,
                     std::size_t batch_views) {
    if (plan.positives.empty()) throw ContractError("plan has no positives");
    if (plan.positives.size() + plan.negatives.size() != batch_views - 1)
        throw ContractError("plan does not partition the batch");
    std::vector<bool> seen(batch_views, false);
    seen[plan.anchor] = true;
    for (const auto& group : {plan.positives, plan.negatives}) {
        for (const PlanMember& m : group) {
            if (m.view >= batch_views || seen[m.view])
                throw ContractError("plan member repeated or out of range");
            seen[m.view] = true;
            if (m.temperature < schedule.tau_min - 1e-15 ||
                m.temperature > schedule.tau_max + 1e-15)
                throw ContractError("temperature outside schedule bounds");
        }
    }
    for (std::size_t i = 1; i < plan.positives.size(); ++i)
        if (plan.positives[i].temperature < plan.positives[i - 1].temperature)
            throw ContractError("positive temperatures must be non-decreasing in rank");
    for (std::size_t i = 1; i < plan.negatives.size(); ++i)
        if (plan.negatives[i].temperature > plan.negatives[i - 1].temperature)
            throw ContractError("negative temperatures must be non-increasing in rank");
}

// ---------------------------------------------------------------------------
// Ranking and plan construction
// ---------------------------------------------------------------------------

// All indices except the anchor, ascending by dissimilarity to the anchor,
// ties broken toward the lower index so results never depend on sort
// internals.
inline std::vector<std::size_t> rank_candidates(const PriorFeature& anchor_feature,
                                                const std::vector<PriorFeature>& batch_features,
                                                std::size_t anchor_index,
                                                double eps = kDissimilarityEps) {
    if (batch_features.size() < 2)
        throw DomainError("ranking needs at least 2 views in the batch");
    if (anchor_index >= batch_features.size())
        throw DomainError("anchor index out of range");
    std::vector<std::pair<double, std::size_t>> order;
    order.reserve(batch_features.size() - 1);
    for (std::size_t i = 0; i < batch_features.size(); ++i) {
        if (i == anchor_index) continue;
        order.emplace_back(dissimilarity(anchor_feature, batch_features[i], eps), i);
    }
    std::sort(order.begin(), order.end());
    std::vector<std::size_t> ranked;
    ranked.reserve(order.size());
    for (const auto& [d, i] : order) ranked.push_back(i);
    return ranked;
}

// Positive count from a mining ratio: K = max(1, round(ratio * count)).
inline std::size_t k_from_ratio(std::size_t count, double ratio) {
    if (!(ratio > 0.0) || !(ratio < 1.0))
        throw DomainError("mining ratio must lie in (0, 1), got " + std::to_string(ratio));
    const auto k = static_cast<std::size_t>(
        std::llround(ratio * static_cast<double>(count)));
    return std::max<std::size_t>(1, k);
}

// Splits a ranking into top-k positives and remaining negatives, assigning
// rank-linear temperatures: the most similar positive gets exactly tau_min,
// the most similar negative exactly tau_max (ranks are zero-based).
inline ContrastPlan build_plan(const std::vector<std::size_t>& ranking, std::size_t k,
                               const TempSchedule& schedule, std::size_t anchor) {
    validate(schedule);
    if (k < 1 || k >= ranking.size())
        throw DomainError("positive count " + std::to_string(k) + " must lie in [1, " +
                          std::to_string(ranking.size()) + ") for this batch");
    ContrastPlan plan;
    plan.anchor = anchor;
    const double span = schedule.tau_max - schedule.tau_min;
    const std::size_t n_neg = ranking.size() - k;
    plan.positives.reserve(k);
    plan.negatives.reserve(n_neg);
    for (std::size_t r = 0; r < k; ++r) {
        const double tau =
            schedule.tau_min + static_cast<double>(r) * span / static_cast<double>(k);
        plan.positives.push_back({ranking[r], tau});
    }
    for (std::size_t r = 0; r < n_neg; ++r) {
        const double tau =
            schedule.tau_max - static_cast<double>(r) * span / static_cast<double>(n_neg);
        plan.negatives.push_back({ranking[k + r], tau});
    }
    return plan;
}

// One plan per view as anchor.
inline std::vector<ContrastPlan> plan_batch(const std::vector<PriorFeature>& features,
                                            std::size_t k, const TempSchedule& schedule,
                                            double eps = kDissimilarityEps) {
    if (features.size() < k + 2)
        throw DomainError("batch of " + std::to_string(features.size()) +
                          " views cannot mine " + std::to_string(k) +
                          " positives plus a negative");
    std::vector<ContrastPlan> plans;
    plans.reserve(features.size());
    for (std::size_t a = 0; a < features.size(); ++a)
        plans.push_back(build_plan(rank_candidates(features[a], features, a, eps), k, schedule, a));
    return plans;
}

// Ground-truth plans: positives are exactly the other views sharing the
// anchor's label, in index order, all at one fixed temperature.
inline std::vector<ContrastPlan> label_plans(const std::vector<SleepStage>& view_labels,
                                             double fixed_tau) {
    if (fixed_tau <= 0.0) throw DomainError("fixed temperature must be positive");
    std::vector<ContrastPlan> plans;
    plans.reserve(view_labels.size());
    for (std::size_t a = 0; a < view_labels.size(); ++a) {
        ContrastPlan plan;
        plan.anchor = a;
        for (std::size_t i = 0; i < view_labels.size(); ++i) {
            if (i == a) continue;
            if (view_labels[i] == view_labels[a])
                plan.positives.push_back({i, fixed_tau});
            else
                plan.negatives.push_back({i, fixed_tau});
        }
        if (plan.positives.empty())
            throw DomainError("view " + std::to_string(a) +
                              " has no same-label partner in the batch");
        plans.push_back(std::move(plan));
    }
    return plans;
}

// Fraction of mined positives whose view label matches the anchor's.
inline double positive_label_precision(const std::vector<ContrastPlan>& plans,
                                       const std::vector<SleepStage>& view_labels) {
    std::size_t hits = 0, total = 0;
    for (const ContrastPlan& plan : plans) {
        for (const PlanMember& m : plan.positives) {
            hits += view_labels[m.view] == view_labels[plan.anchor] ? 1 : 0;
            ++total;
        }
    }
    return total == 0 ? 0.0 : static_cast<double>(hits) / static_cast<double>(total);
}

} // namespace priorcl
