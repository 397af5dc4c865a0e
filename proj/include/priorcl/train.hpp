#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <numeric>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "priorcl/autodiff.hpp"
#include "priorcl/detail/bytes.hpp"
#include "priorcl/errors.hpp"
#include "priorcl/loss.hpp"
#include "priorcl/mining.hpp"
#include "priorcl/model.hpp"
#include "priorcl/prior.hpp"
#include "priorcl/rng.hpp"
#include "priorcl/signal.hpp"

namespace priorcl {

// Training loops and evaluation protocols. Every run is a pure function of
// (dataset, config, seed): sub-streams are derived from the seed by fixed
// labels, containers iterate in deterministic order, and reductions always
// run in member order, so repeated runs are bit-identical.

enum class TrainMode { priorcl, basic, basic_feature, unbiased, supervised, finetune };

inline const char* to_string(TrainMode m) {
    switch (m) {
        case TrainMode::priorcl: return "priorcl";
        case TrainMode::basic: return "basic";
        case TrainMode::basic_feature: return "basic_feature";
        case TrainMode::unbiased: return "unbiased";
        case TrainMode::supervised: return "supervised";
        case TrainMode::finetune: return "finetune";
    }
    throw ContractError("unknown training mode");
}

inline TrainMode train_mode_from_string(const std::string& s) {
    if (s == "priorcl") return TrainMode::priorcl;
    if (s == "basic") return TrainMode::basic;
    if (s == "basic_feature") return TrainMode::basic_feature;
    if (s == "unbiased") return TrainMode::unbiased;
    if (s == "supervised") return TrainMode::supervised;
    if (s == "finetune") return TrainMode::finetune;
    throw ConfigError("unknown training mode '" + s +
                      "' (expected priorcl, basic, basic_feature, unbiased, supervised, "
                      "finetune)");
}

struct TrainConfig {
    TrainMode mode = TrainMode::priorcl;
    std::size_t batch_size = 128;
    double lr = 1e-4;
    double momentum = 0.9;
    std::size_t pretrain_epochs = 100;
    std::size_t eval_epochs = 50;
    double k_ratio = 0.4;
    TempSchedule schedule;       // adaptive range for mined plans
    double fixed_tau = 0.1;      // flat temperature for basic/basic_feature/unbiased
    std::vector<std::uint64_t> seeds = {1, 2, 3, 4, 5};
    double train_fraction = 0.9; // subject-level split
    std::size_t finetune_recordings = 1;
    AugmentConfig augment;
};

// Small-footprint settings for desk-scale smoke runs; the struct defaults
// above stay the documented full protocol.
inline TrainConfig desk_profile() {
    TrainConfig cfg;
    cfg.batch_size = 32;
    cfg.pretrain_epochs = 20;
    cfg.eval_epochs = 20;
    return cfg;
}

inline void validate(const TrainConfig& cfg) {
    if (cfg.batch_size < 2) throw ConfigError("batch_size must be >= 2");
    if (!(cfg.lr > 0.0)) throw ConfigError("lr must be positive");
    if (cfg.momentum < 0.0 || cfg.momentum >= 1.0)
        throw ConfigError("momentum must lie in [0, 1)");
    if (cfg.pretrain_epochs < 1 || cfg.eval_epochs < 1)
        throw ConfigError("epoch counts must be >= 1");
    if (!(cfg.k_ratio > 0.0) || !(cfg.k_ratio < 1.0))
        throw ConfigError("k_ratio must lie in (0, 1)");
    validate(cfg.schedule);
    if (!(cfg.fixed_tau > 0.0)) throw ConfigError("fixed_tau must be positive");
    if (cfg.seeds.empty()) throw ConfigError("at least one seed is required");
    if (!(cfg.train_fraction > 0.0) || !(cfg.train_fraction < 1.0))
        throw ConfigError("train_fraction must lie in (0, 1)");
    if (cfg.finetune_recordings < 1) throw ConfigError("finetune_recordings must be >= 1");
    validate(cfg.augment);
}

// ---------------------------------------------------------------------------
// Metrics.
// ---------------------------------------------------------------------------

struct Metrics {
    double accuracy = 0.0;
    double macro_f1 = 0.0;
    std::array<double, kNumStages> per_class_f1{};
    std::array<std::array<std::uint64_t, kNumStages>, kNumStages> confusion{}; // [truth][pred]
};

inline Metrics compute_metrics(const std::vector<SleepStage>& predictions,
                               const std::vector<SleepStage>& labels) {
    if (predictions.size() != labels.size())
        throw DomainError("predictions and labels differ in length: " +
                          std::to_string(predictions.size()) + " vs " +
                          std::to_string(labels.size()));
    if (predictions.empty()) throw DomainError("metrics need at least one prediction");
    Metrics m;
    std::uint64_t hits = 0;
    for (std::size_t i = 0; i < predictions.size(); ++i) {
        const auto t = static_cast<std::size_t>(labels[i]);
        const auto p = static_cast<std::size_t>(predictions[i]);
        ++m.confusion[t][p];
        if (t == p) ++hits;
    }
    m.accuracy = static_cast<double>(hits) / static_cast<double>(predictions.size());
    double f1_sum = 0.0;
    for (std::size_t c = 0; c < kNumStages; ++c) {
        std::uint64_t row = 0, col = 0;
        for (std::size_t j = 0; j < kNumStages; ++j) {
            row += m.confusion[c][j];
            col += m.confusion[j][c];
        }
        const std::uint64_t tp = m.confusion[c][c];
        const double precision = col == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(col);
        const double recall = row == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(row);
        m.per_class_f1[c] =
            precision + recall == 0.0 ? 0.0 : 2.0 * precision * recall / (precision + recall);
        f1_sum += m.per_class_f1[c];
    }
    m.macro_f1 = f1_sum / static_cast<double>(kNumStages);
    return m;
}

// ---------------------------------------------------------------------------
// Heavy-ball SGD over named parameter tensors.
// ---------------------------------------------------------------------------

inline void sgd_step(std::vector<std::pair<std::string, Tensor*>>& params,
                     const std::vector<Tensor>& grads, std::vector<Tensor>& velocity, double lr,
                     double momentum) {
    if (params.size() != grads.size())
        throw ContractError("sgd_step got " + std::to_string(grads.size()) + " gradients for " +
                            std::to_string(params.size()) + " parameters");
    if (velocity.empty())
        for (const auto& [name, t] : params) velocity.emplace_back(t->shape());
    if (velocity.size() != params.size())
        throw ContractError("velocity count does not match parameter count");
    for (std::size_t i = 0; i < params.size(); ++i) {
        Tensor& p = *params[i].second;
        const Tensor& g = grads[i];
        require_shape(g, p.shape(), ("gradient for " + params[i].first).c_str());
        require_shape(velocity[i], p.shape(), ("velocity for " + params[i].first).c_str());
        for (std::size_t k = 0; k < g.size(); ++k)
            if (!std::isfinite(g[k]))
                throw DomainError("non-finite gradient in " + params[i].first + " at element " +
                                  std::to_string(k));
        Tensor& v = velocity[i];
        for (std::size_t k = 0; k < p.size(); ++k) {
            v[k] = momentum * v[k] + g[k];
            p[k] -= lr * v[k];
        }
    }
}

// Channel layernorm has a gradient singularity at exactly-constant channel
// columns (1/sqrt(eps) amplification); zero-masked segments hit it at the
// zero-bias init, so raw first-layer bias gradients can reach 1e4 and one
// momentum step would collapse the representations. The training loops cap
// each tensor's gradient norm before the update; one bounded step leaves the
// singular manifold and the cap never binds in ordinary training.
inline constexpr double kGradClipNorm = 10.0;

inline void clip_gradients(std::vector<Tensor>& grads, double max_norm = kGradClipNorm) {
    for (Tensor& g : grads) {
        double sq = 0.0;
        for (std::size_t i = 0; i < g.size(); ++i) sq += g[i] * g[i];
        const double norm = std::sqrt(sq);
        if (norm > max_norm) {
            const double s = max_norm / norm;
            for (std::size_t i = 0; i < g.size(); ++i) g[i] *= s;
        }
    }
}

// FNV-1a over the encoder tensors' raw bit patterns; the frozen-encoder
// guarantee in linear evaluation is asserted with this.
inline std::uint64_t encoder_checksum(const ModelParams& p) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (const LayerParams& l : p.encoder)
        for (const Tensor* t : {&l.weight, &l.bias, &l.gain, &l.offset})
            h = detail::fnv1a(t->data(), t->size() * sizeof(double), h);
    return h;
}

// ---------------------------------------------------------------------------
// Per-batch plan construction. Exposed so the reduction identities between
// modes can be checked directly at the plan level.
// ---------------------------------------------------------------------------

inline std::vector<ContrastPlan> mode_plans(TrainMode mode,
                                            const std::vector<PriorFeature>& view_features,
                                            const std::vector<SleepStage>& view_labels,
                                            std::size_t k, const TempSchedule& schedule,
                                            double fixed_tau) {
    const TempSchedule flat{fixed_tau, fixed_tau};
    switch (mode) {
        case TrainMode::priorcl: return plan_batch(view_features, k, schedule);
        case TrainMode::basic_feature: return plan_batch(view_features, k, flat);
        case TrainMode::basic: return plan_batch(view_features, 1, flat);
        case TrainMode::unbiased: return label_plans(view_labels, fixed_tau);
        default:
            throw ContractError(std::string("mode ") + to_string(mode) +
                                " does not build contrastive plans");
    }
}

// ---------------------------------------------------------------------------
// Pretraining.
// ---------------------------------------------------------------------------

namespace detail {

// Fixed stream labels deriving every random decision from the run seed.
inline constexpr std::uint64_t kStreamInit = 0;
inline constexpr std::uint64_t kStreamShuffle = 1;
inline constexpr std::uint64_t kStreamAugment = 2;
inline constexpr std::uint64_t kStreamSplit = 3;
inline constexpr std::uint64_t kStreamEvalShuffle = 4;
inline constexpr std::uint64_t kStreamHeadInit = 5;
inline constexpr std::uint64_t kStreamSubset = 6;

inline std::vector<std::size_t> shuffled_indices(std::size_t n, Rng rng) {
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    rng.shuffle(idx);
    return idx;
}

} // namespace detail

struct PretrainResult {
    ModelParams params;
    std::vector<double> loss_history; // mean batch loss per epoch
};

inline PretrainResult pretrain(const Dataset& ds, const EncoderConfig& enc,
                               const TrainConfig& cfg, std::uint64_t seed) {
    validate(cfg);
    validate(enc);
    if (cfg.mode == TrainMode::supervised || cfg.mode == TrainMode::finetune)
        throw ConfigError(std::string("mode ") + to_string(cfg.mode) +
                          " is a supervised protocol, not a pretraining mode");
    const std::size_t min_epochs =
        cfg.mode == TrainMode::priorcl ? 2 * cfg.batch_size : cfg.batch_size;
    if (ds.size() < min_epochs)
        throw ConfigError("pretraining in mode " + std::string(to_string(cfg.mode)) + " needs " +
                          std::to_string(min_epochs) + " epochs, dataset has " +
                          std::to_string(ds.size()));
    const std::size_t views = 2 * cfg.batch_size;
    const std::size_t k = k_from_ratio(cfg.batch_size, cfg.k_ratio);
    if (cfg.mode != TrainMode::unbiased && views < k + 2)
        throw ConfigError("batch of " + std::to_string(cfg.batch_size) +
                          " raw epochs yields " + std::to_string(views) +
                          " views, too few for k = " + std::to_string(k));
    if (cfg.mode == TrainMode::unbiased)
        for (const Epoch& e : ds.epochs())
            if (!e.label)
                throw ConfigError("unbiased pretraining needs ground-truth labels on every epoch");

    const Rng root(seed);
    PretrainResult result;
    result.params = init_params(enc, Rng(root.derive(detail::kStreamInit)).next_u64());
    auto tensors = named_tensors(result.params);
    std::vector<Tensor> velocity;

    // Prior features depend only on the raw parent epoch, so they are
    // computed once up front.
    std::vector<PriorFeature> raw_features(ds.size());
    if (cfg.mode != TrainMode::unbiased)
        for (std::size_t i = 0; i < ds.size(); ++i)
            raw_features[i] = compute_prior_feature(ds.epochs()[i]);

    const std::size_t batches = ds.size() / cfg.batch_size;
    result.loss_history.reserve(cfg.pretrain_epochs);
    for (std::size_t epoch = 0; epoch < cfg.pretrain_epochs; ++epoch) {
        const std::vector<std::size_t> order = detail::shuffled_indices(
            ds.size(), root.derive(detail::kStreamShuffle).derive(epoch));
        double loss_sum = 0.0;
        for (std::size_t b = 0; b < batches; ++b) {
            Tape tape;
            LiftedModel model = lift_params(tape, result.params);
            std::vector<NodeId> z_nodes;
            std::vector<PriorFeature> view_features;
            std::vector<SleepStage> view_labels;
            z_nodes.reserve(views);
            view_features.reserve(views);
            for (std::size_t m = 0; m < cfg.batch_size; ++m) {
                const std::size_t raw = order[b * cfg.batch_size + m];
                Rng draw = root.derive(detail::kStreamAugment).derive(epoch).derive(raw);
                auto [va, vb] = two_views(ds.epochs()[raw], cfg.augment, draw);
                for (const Epoch* view : {&va, &vb}) {
                    NodeId h = encode_node(tape, model, tape.leaf(epoch_tensor(*view)));
                    z_nodes.push_back(project_node(tape, model, h));
                    view_features.push_back(raw_features[raw]);
                    if (ds.epochs()[raw].label) view_labels.push_back(*ds.epochs()[raw].label);
                }
            }
            const std::vector<ContrastPlan> plans =
                mode_plans(cfg.mode, view_features, view_labels, k, cfg.schedule, cfg.fixed_tau);
            const NodeId loss = contrastive_node(tape, z_nodes, plans);
            loss_sum += tape.scalar(loss);
            tape.backward(loss);
            std::vector<Tensor> grads;
            grads.reserve(tensors.size());
            for (NodeId id : model.ids()) grads.push_back(tape.grad(id));
            clip_gradients(grads);
            sgd_step(tensors, grads, velocity, cfg.lr, cfg.momentum);
        }
        result.loss_history.push_back(loss_sum / static_cast<double>(batches));
    }
    return result;
}

// ---------------------------------------------------------------------------
// Supervised cross-entropy training of (encoder +) classifier.
// ---------------------------------------------------------------------------

namespace detail {

inline void require_labeled(const Dataset& ds, const char* what) {
    if (ds.empty()) throw ConfigError(std::string(what) + " dataset is empty");
    for (const Epoch& e : ds.epochs())
        if (!e.label) throw ConfigError(std::string(what) + " dataset has unlabeled epochs");
}

// Jointly trains encoder and classifier with softmax cross-entropy.
inline void train_joint(ModelParams& params, const Dataset& train, const TrainConfig& cfg,
                        const Rng& root) {
    auto all = named_tensors(params);
    // Everything except the discarded projection head.
    std::vector<std::pair<std::string, Tensor*>> trained;
    std::vector<bool> keep;
    for (auto& [name, t] : all) {
        keep.push_back(name.rfind("projection.", 0) != 0);
        if (keep.back()) trained.emplace_back(name, t);
    }
    std::vector<Tensor> velocity;
    const std::size_t batch = std::min(cfg.batch_size, train.size());
    const std::size_t batches = train.size() / batch;
    for (std::size_t epoch = 0; epoch < cfg.eval_epochs; ++epoch) {
        const std::vector<std::size_t> order =
            shuffled_indices(train.size(), root.derive(kStreamEvalShuffle).derive(epoch));
        for (std::size_t b = 0; b < batches; ++b) {
            Tape tape;
            LiftedModel model = lift_params(tape, params);
            NodeId total = 0;
            bool first = true;
            for (std::size_t m = 0; m < batch; ++m) {
                const Epoch& e = train.epochs()[order[b * batch + m]];
                NodeId h = encode_node(tape, model, tape.leaf(epoch_tensor(e)));
                NodeId ce = tape.softmax_cross_entropy(
                    classify_node(tape, model, h), static_cast<std::size_t>(*e.label));
                total = first ? ce : tape.add(total, ce);
                first = false;
            }
            tape.backward(tape.scale(total, 1.0 / static_cast<double>(batch)));
            std::vector<Tensor> grads;
            grads.reserve(trained.size());
            const std::vector<NodeId> ids = model.ids();
            for (std::size_t i = 0; i < ids.size(); ++i)
                if (keep[i]) grads.push_back(tape.grad(ids[i]));
            clip_gradients(grads);
            sgd_step(trained, grads, velocity, cfg.lr, cfg.momentum);
        }
    }
}

inline Metrics evaluate(const ModelParams& params, const Dataset& test) {
    require_labeled(test, "test");
    std::vector<SleepStage> pred, truth;
    pred.reserve(test.size());
    truth.reserve(test.size());
    for (const Epoch& e : test.epochs()) {
        pred.push_back(predicted_stage(classify(params, encode(params, e))));
        truth.push_back(*e.label);
    }
    return compute_metrics(pred, truth);
}

} // namespace detail

// Trains only the linear head on frozen representations; the encoder is
// checksummed before and after as a hard guarantee.
inline Metrics linear_eval(ModelParams& params, const Dataset& train, const Dataset& test,
                           const TrainConfig& cfg, std::uint64_t seed) {
    validate(cfg);
    detail::require_labeled(train, "train");
    detail::require_labeled(test, "test");
    require_disjoint_subjects(train, test);
    const Rng root(seed);
    const std::uint64_t before = encoder_checksum(params);

    // Fresh head, then representations once: the encoder is frozen.
    Rng head(root.derive(detail::kStreamHeadInit));
    detail::fill_uniform(params.cls_w,
                         1.0 / std::sqrt(static_cast<double>(representation_dim(params.config))),
                         head);
    params.cls_b.fill(0.0);
    std::vector<Tensor> reps;
    std::vector<std::size_t> labels;
    reps.reserve(train.size());
    for (const Epoch& e : train.epochs()) {
        reps.push_back(encode(params, e));
        labels.push_back(static_cast<std::size_t>(*e.label));
    }

    std::vector<std::pair<std::string, Tensor*>> head_params;
    head_params.emplace_back("classifier.weight", &params.cls_w);
    head_params.emplace_back("classifier.bias", &params.cls_b);
    std::vector<Tensor> velocity;
    const std::size_t batch = std::min(cfg.batch_size, reps.size());
    const std::size_t batches = reps.size() / batch;
    for (std::size_t epoch = 0; epoch < cfg.eval_epochs; ++epoch) {
        const std::vector<std::size_t> order = detail::shuffled_indices(
            reps.size(), root.derive(detail::kStreamEvalShuffle).derive(epoch));
        for (std::size_t b = 0; b < batches; ++b) {
            Tape tape;
            NodeId w = tape.leaf(params.cls_w), bias = tape.leaf(params.cls_b);
            NodeId total = 0;
            bool first = true;
            for (std::size_t m = 0; m < batch; ++m) {
                const std::size_t i = order[b * batch + m];
                NodeId ce = tape.softmax_cross_entropy(
                    tape.dense(tape.leaf(reps[i]), w, bias), labels[i]);
                total = first ? ce : tape.add(total, ce);
                first = false;
            }
            tape.backward(tape.scale(total, 1.0 / static_cast<double>(batch)));
            std::vector<Tensor> grads = {tape.grad(w), tape.grad(bias)};
            clip_gradients(grads);
            sgd_step(head_params, grads, velocity, cfg.lr, cfg.momentum);
        }
    }

    if (encoder_checksum(params) != before)
        throw ContractError("linear evaluation modified the frozen encoder");
    return detail::evaluate(params, test);
}

// Seeded recording subset shared by the fine-tune protocol and its paired
// supervised baseline, so both see exactly the same labeled budget.
inline Dataset select_recordings(const Dataset& ds, std::size_t n_recordings,
                                 std::uint64_t seed) {
    std::vector<std::string> recordings;
    for (const Epoch& e : ds.epochs())
        if (std::find(recordings.begin(), recordings.end(), e.source_id) == recordings.end())
            recordings.push_back(e.source_id);
    if (n_recordings > recordings.size())
        throw ConfigError("requested " + std::to_string(n_recordings) +
                          " recordings but the training split has " +
                          std::to_string(recordings.size()));
    Rng pick(Rng(seed).derive(detail::kStreamSubset));
    pick.shuffle(recordings);
    recordings.resize(n_recordings);

    Dataset subset;
    for (const auto& [rec, subj] : ds.subjects()) subset.set_subject(rec, subj);
    for (const Epoch& e : ds.epochs())
        if (std::find(recordings.begin(), recordings.end(), e.source_id) != recordings.end())
            subset.add(e);
    return subset;
}

// Seeded subset of recordings, then joint encoder+classifier training.
inline Metrics finetune(const ModelParams& pretrained, const Dataset& train, const Dataset& test,
                        std::size_t n_recordings, const TrainConfig& cfg, std::uint64_t seed) {
    validate(cfg);
    detail::require_labeled(train, "train");
    detail::require_labeled(test, "test");
    require_disjoint_subjects(train, test);

    const Dataset subset = select_recordings(train, n_recordings, seed);
    ModelParams params = pretrained;
    detail::train_joint(params, subset, cfg, Rng(seed));
    return detail::evaluate(params, test);
}

// Supervised baseline: same joint loop from randomly initialized weights on
// every recording.
inline Metrics train_supervised(const Dataset& train, const Dataset& test,
                                const EncoderConfig& enc, const TrainConfig& cfg,
                                std::uint64_t seed) {
    validate(cfg);
    validate(enc);
    detail::require_labeled(train, "train");
    detail::require_labeled(test, "test");
    require_disjoint_subjects(train, test);
    const Rng root(seed);
    ModelParams params = init_params(enc, Rng(root.derive(detail::kStreamInit)).next_u64());
    detail::train_joint(params, train, cfg, root);
    return detail::evaluate(params, test);
}

// ---------------------------------------------------------------------------
// KNN over prior features (the "Feature" baseline): majority vote among the
// k nearest band-energy vectors; ties go to the smallest summed distance,
// then the lowest stage index.
// ---------------------------------------------------------------------------

struct LabeledFeature {
    PriorFeature feature;
    SleepStage label = SleepStage::W;
};

inline SleepStage knn_predict(const std::vector<LabeledFeature>& train, const PriorFeature& query,
                              std::size_t k_neighbors) {
    if (train.empty()) throw DomainError("KNN needs a non-empty training set");
    if (k_neighbors < 1) throw DomainError("KNN needs k >= 1");
    std::vector<std::pair<double, std::size_t>> dist;
    dist.reserve(train.size());
    const auto q = query.as_array();
    for (std::size_t i = 0; i < train.size(); ++i) {
        const auto t = train[i].feature.as_array();
        double sq = 0.0;
        for (std::size_t d = 0; d < q.size(); ++d) sq += (q[d] - t[d]) * (q[d] - t[d]);
        dist.emplace_back(std::sqrt(sq), i);
    }
    const std::size_t k = std::min(k_neighbors, train.size());
    std::sort(dist.begin(), dist.end());
    std::array<std::size_t, kNumStages> votes{};
    std::array<double, kNumStages> summed{};
    for (std::size_t i = 0; i < k; ++i) {
        const auto c = static_cast<std::size_t>(train[dist[i].second].label);
        ++votes[c];
        summed[c] += dist[i].first;
    }
    std::size_t best = kNumStages;
    for (std::size_t c = 0; c < kNumStages; ++c) {
        if (votes[c] == 0) continue;
        if (best == kNumStages || votes[c] > votes[best] ||
            (votes[c] == votes[best] && summed[c] < summed[best]))
            best = c;
    }
    return stage_from_index(best);
}

inline Metrics knn_prior_baseline(const std::vector<LabeledFeature>& train,
                                  const std::vector<LabeledFeature>& test,
                                  std::size_t k_neighbors) {
    if (test.empty()) throw DomainError("KNN needs a non-empty test set");
    std::vector<SleepStage> pred, truth;
    pred.reserve(test.size());
    for (const LabeledFeature& t : test) {
        pred.push_back(knn_predict(train, t.feature, k_neighbors));
        truth.push_back(t.label);
    }
    return compute_metrics(pred, truth);
}

inline std::vector<LabeledFeature> labeled_features(const Dataset& ds) {
    detail::require_labeled(ds, "feature");
    std::vector<LabeledFeature> out;
    out.reserve(ds.size());
    for (const Epoch& e : ds.epochs()) out.push_back({compute_prior_feature(e), *e.label});
    return out;
}

} // namespace priorcl
