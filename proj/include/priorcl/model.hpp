#pragma once

#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "priorcl/autodiff.hpp"
#include "priorcl/detail/bytes.hpp"
#include "priorcl/errors.hpp"
#include "priorcl/rng.hpp"
#include "priorcl/signal.hpp"
#include "priorcl/tensor.hpp"

namespace priorcl {

// The three networks: encoder f (conv stack to a pooled representation h),
// projection head g (used only while pretraining), linear classifier c.
// Evaluation paths never consult g, so corrupting it after pretraining cannot
// change downstream results.

struct EncoderConfig {
    std::vector<std::size_t> channels = {8, 16, 32, 64}; // one entry per conv layer
    std::size_t kernel = 8;
    std::size_t stride = 4;
    std::size_t projection_hidden = 64;
    std::size_t projection_dim = 32;
    std::size_t num_classes = kNumStages;
};

inline void validate(const EncoderConfig& cfg) {
    if (cfg.channels.size() != 4)
        throw DomainError("encoder takes exactly 4 conv layers, got " +
                          std::to_string(cfg.channels.size()));
    for (std::size_t c : cfg.channels)
        if (c < 1) throw DomainError("conv channel widths must be >= 1");
    if (cfg.kernel < 1 || cfg.stride < 1) throw DomainError("kernel and stride must be >= 1");
    if (cfg.projection_hidden < 1 || cfg.projection_dim < 1)
        throw DomainError("projection dims must be >= 1");
    if (cfg.num_classes < 2) throw DomainError("classifier needs at least 2 classes");
}

inline std::size_t representation_dim(const EncoderConfig& cfg) { return cfg.channels.back(); }

// Shortest input the conv stack accepts: unrolling T_out = (T - k)/s + 1 >= 1
// backwards through every layer.
inline std::size_t min_input_length(const EncoderConfig& cfg) {
    std::size_t need = 1;
    for (std::size_t l = 0; l < cfg.channels.size(); ++l)
        need = cfg.kernel + cfg.stride * (need - 1);
    return need;
}

// Temporal lengths after each conv layer; throws with the minimal-length
// arithmetic when the input is too short.
inline std::vector<std::size_t> conv_output_lengths(const EncoderConfig& cfg, std::size_t n) {
    const std::size_t need = min_input_length(cfg);
    if (n < need)
        throw ShapeError("input length " + std::to_string(n) + " is shorter than the " +
                         std::to_string(need) + " samples needed by " +
                         std::to_string(cfg.channels.size()) + " valid convs with kernel " +
                         std::to_string(cfg.kernel) + ", stride " + std::to_string(cfg.stride));
    std::vector<std::size_t> out;
    out.reserve(cfg.channels.size());
    std::size_t t = n;
    for (std::size_t l = 0; l < cfg.channels.size(); ++l) {
        t = (t - cfg.kernel) / cfg.stride + 1;
        out.push_back(t);
    }
    return out;
}

struct LayerParams {
    Tensor weight; // {c_out, c_in, kernel}
    Tensor bias;   // {c_out}
    Tensor gain;   // {c_out} layernorm scale
    Tensor offset; // {c_out} layernorm shift
};

struct ModelParams {
    EncoderConfig config;
    std::vector<LayerParams> encoder;
    Tensor proj_w1, proj_b1; // h -> hidden
    Tensor proj_w2, proj_b2; // hidden -> z
    Tensor cls_w, cls_b;     // h -> logits
};

// Canonical tensor order; everything that walks parameters (init, optimizer,
// checkpoints) iterates this list so streams and files stay aligned.
inline std::vector<std::pair<std::string, Tensor*>> named_tensors(ModelParams& p) {
    std::vector<std::pair<std::string, Tensor*>> out;
    for (std::size_t l = 0; l < p.encoder.size(); ++l) {
        const std::string base = "encoder." + std::to_string(l) + ".";
        out.emplace_back(base + "weight", &p.encoder[l].weight);
        out.emplace_back(base + "bias", &p.encoder[l].bias);
        out.emplace_back(base + "gain", &p.encoder[l].gain);
        out.emplace_back(base + "offset", &p.encoder[l].offset);
    }
    out.emplace_back("projection.hidden.weight", &p.proj_w1);
    out.emplace_back("projection.hidden.bias", &p.proj_b1);
    out.emplace_back("projection.out.weight", &p.proj_w2);
    out.emplace_back("projection.out.bias", &p.proj_b2);
    out.emplace_back("classifier.weight", &p.cls_w);
    out.emplace_back("classifier.bias", &p.cls_b);
    return out;
}

inline std::vector<std::pair<std::string, const Tensor*>> named_tensors(const ModelParams& p) {
    std::vector<std::pair<std::string, const Tensor*>> out;
    for (auto& [name, t] : named_tensors(const_cast<ModelParams&>(p))) out.emplace_back(name, t);
    return out;
}

inline void validate(const ModelParams& p) {
    validate(p.config);
    const EncoderConfig& c = p.config;
    if (p.encoder.size() != c.channels.size())
        throw ShapeError("params carry " + std::to_string(p.encoder.size()) +
                         " conv layers, config wants " + std::to_string(c.channels.size()));
    for (std::size_t l = 0; l < p.encoder.size(); ++l) {
        const std::size_t c_in = l == 0 ? 1 : c.channels[l - 1];
        require_shape(p.encoder[l].weight, {c.channels[l], c_in, c.kernel}, "conv weight");
        require_shape(p.encoder[l].bias, {c.channels[l]}, "conv bias");
        require_shape(p.encoder[l].gain, {c.channels[l]}, "norm gain");
        require_shape(p.encoder[l].offset, {c.channels[l]}, "norm offset");
    }
    const std::size_t h = representation_dim(c);
    require_shape(p.proj_w1, {c.projection_hidden, h}, "projection hidden weight");
    require_shape(p.proj_b1, {c.projection_hidden}, "projection hidden bias");
    require_shape(p.proj_w2, {c.projection_dim, c.projection_hidden}, "projection out weight");
    require_shape(p.proj_b2, {c.projection_dim}, "projection out bias");
    require_shape(p.cls_w, {c.num_classes, h}, "classifier weight");
    require_shape(p.cls_b, {c.num_classes}, "classifier bias");
    for (auto& [name, t] : named_tensors(p))
        for (std::size_t i = 0; i < t->size(); ++i)
            if (!std::isfinite((*t)[i]))
                throw DomainError("non-finite value in parameter tensor " + name);
}

namespace detail {
inline void fill_uniform(Tensor& t, double bound, Rng& r) {
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = r.uniform(-bound, bound);
}
} // namespace detail

// Weights uniform in +-1/sqrt(fan_in), biases and norm offsets zero, norm
// gains one. Draw order follows the canonical tensor order, so init is a pure
// function of (config, seed).
inline ModelParams init_params(const EncoderConfig& cfg, std::uint64_t seed) {
    validate(cfg);
    ModelParams p;
    p.config = cfg;
    Rng r(seed);
    for (std::size_t l = 0; l < cfg.channels.size(); ++l) {
        const std::size_t c_in = l == 0 ? 1 : cfg.channels[l - 1];
        LayerParams layer;
        layer.weight = Tensor({cfg.channels[l], c_in, cfg.kernel});
        detail::fill_uniform(layer.weight, 1.0 / std::sqrt(static_cast<double>(c_in * cfg.kernel)),
                             r);
        layer.bias = Tensor({cfg.channels[l]});
        layer.gain = Tensor({cfg.channels[l]});
        layer.gain.fill(1.0);
        layer.offset = Tensor({cfg.channels[l]});
        p.encoder.push_back(std::move(layer));
    }
    const std::size_t h = representation_dim(cfg);
    p.proj_w1 = Tensor({cfg.projection_hidden, h});
    detail::fill_uniform(p.proj_w1, 1.0 / std::sqrt(static_cast<double>(h)), r);
    p.proj_b1 = Tensor({cfg.projection_hidden});
    p.proj_w2 = Tensor({cfg.projection_dim, cfg.projection_hidden});
    detail::fill_uniform(p.proj_w2, 1.0 / std::sqrt(static_cast<double>(cfg.projection_hidden)),
                         r);
    p.proj_b2 = Tensor({cfg.projection_dim});
    p.cls_w = Tensor({cfg.num_classes, h});
    detail::fill_uniform(p.cls_w, 1.0 / std::sqrt(static_cast<double>(h)), r);
    p.cls_b = Tensor({cfg.num_classes});
    return p;
}

// One epoch's samples as the {1, N} single-channel layout the conv stack eats.
inline Tensor epoch_tensor(const Epoch& e) {
    Tensor t({1, e.samples.size()});
    for (std::size_t i = 0; i < e.samples.size(); ++i) t[i] = e.samples[i];
    return t;
}

// ---------------------------------------------------------------------------
// Tape assembly. lift_params leafs every tensor onto a tape; the *_node
// builders wire the forward graphs; ids() hands the optimizer the leaves in
// canonical order.
// ---------------------------------------------------------------------------

struct LiftedModel {
    EncoderConfig config;
    struct Layer {
        NodeId weight, bias, gain, offset;
    };
    std::vector<Layer> encoder;
    NodeId proj_w1 = 0, proj_b1 = 0, proj_w2 = 0, proj_b2 = 0;
    NodeId cls_w = 0, cls_b = 0;

    std::vector<NodeId> ids() const {
        std::vector<NodeId> out;
        for (const Layer& l : encoder) {
            out.push_back(l.weight);
            out.push_back(l.bias);
            out.push_back(l.gain);
            out.push_back(l.offset);
        }
        out.push_back(proj_w1);
        out.push_back(proj_b1);
        out.push_back(proj_w2);
        out.push_back(proj_b2);
        out.push_back(cls_w);
        out.push_back(cls_b);
        return out;
    }
};

inline LiftedModel lift_params(Tape& tape, const ModelParams& p) {
    validate(p);
    LiftedModel m;
    m.config = p.config;
    for (const LayerParams& l : p.encoder)
        m.encoder.push_back({tape.leaf(l.weight), tape.leaf(l.bias), tape.leaf(l.gain),
                             tape.leaf(l.offset)});
    m.proj_w1 = tape.leaf(p.proj_w1);
    m.proj_b1 = tape.leaf(p.proj_b1);
    m.proj_w2 = tape.leaf(p.proj_w2);
    m.proj_b2 = tape.leaf(p.proj_b2);
    m.cls_w = tape.leaf(p.cls_w);
    m.cls_b = tape.leaf(p.cls_b);
    return m;
}

// conv -> layernorm -> GELU four times, then global average pool to h.
inline NodeId encode_node(Tape& tape, const LiftedModel& m, NodeId input) {
    const Tensor& x = tape.value(input);
    if (x.rank() != 2 || x.dim(0) != 1)
        throw ShapeError("encoder input must be {1, N}, got " + x.shape_str());
    conv_output_lengths(m.config, x.dim(1)); // minimal-length arithmetic in the error
    NodeId cur = input;
    for (const LiftedModel::Layer& l : m.encoder) {
        cur = tape.conv1d(cur, l.weight, l.bias, m.config.stride);
        cur = tape.layernorm(cur, l.gain, l.offset);
        cur = tape.gelu(cur);
    }
    return tape.global_avg_pool(cur);
}

inline NodeId project_node(Tape& tape, const LiftedModel& m, NodeId h) {
    NodeId cur = tape.dense(h, m.proj_w1, m.proj_b1);
    cur = tape.gelu(cur);
    return tape.dense(cur, m.proj_w2, m.proj_b2);
}

inline NodeId classify_node(Tape& tape, const LiftedModel& m, NodeId h) {
    return tape.dense(h, m.cls_w, m.cls_b);
}

// ---------------------------------------------------------------------------
// Forward-only conveniences on a scratch tape.
// ---------------------------------------------------------------------------

// Lifts only the encoder tensors: evaluation must keep working however badly
// the discarded projection head has been corrupted.
inline Tensor encode(const ModelParams& p, const Tensor& samples) {
    validate(p.config);
    if (samples.rank() != 2 || samples.dim(0) != 1)
        throw ShapeError("encoder input must be {1, N}, got " + samples.shape_str());
    conv_output_lengths(p.config, samples.dim(1));
    Tape tape;
    NodeId cur = tape.leaf(samples);
    for (const LayerParams& l : p.encoder) {
        cur = tape.conv1d(cur, tape.leaf(l.weight), tape.leaf(l.bias), p.config.stride);
        cur = tape.layernorm(cur, tape.leaf(l.gain), tape.leaf(l.offset));
        cur = tape.gelu(cur);
    }
    return tape.value(tape.global_avg_pool(cur));
}

inline Tensor encode(const ModelParams& p, const Epoch& e) { return encode(p, epoch_tensor(e)); }

inline Tensor project(const ModelParams& p, const Tensor& h) {
    Tape tape;
    NodeId hid = tape.leaf(h);
    NodeId w1 = tape.leaf(p.proj_w1), b1 = tape.leaf(p.proj_b1);
    NodeId w2 = tape.leaf(p.proj_w2), b2 = tape.leaf(p.proj_b2);
    return tape.value(tape.dense(tape.gelu(tape.dense(hid, w1, b1)), w2, b2));
}

inline Tensor classify(const ModelParams& p, const Tensor& h) {
    Tape tape;
    return tape.value(tape.dense(tape.leaf(h), tape.leaf(p.cls_w), tape.leaf(p.cls_b)));
}

// Lowest index wins ties, matching the stage enum order.
inline SleepStage predicted_stage(const Tensor& logits) {
    require_rank(logits, 1, "logits");
    if (logits.size() < 1) throw ShapeError("logits must be non-empty");
    std::size_t best = 0;
    for (std::size_t i = 1; i < logits.size(); ++i)
        if (logits[i] > logits[best]) best = i;
    if (best >= kNumStages) throw DomainError("logit index exceeds stage count");
    return stage_from_index(best);
}

// ---------------------------------------------------------------------------
// Checkpoints ("PCLM"). Layout, little-endian:
//   magic | u32 version | u64 config hash | config block | u32 tensor count |
//   per tensor: u32 name length, name bytes, u32 rank, u64 dims, f64 values.
// The config hash covers the serialized config block; loading verifies it
// against the file's own block and against the caller's expected config.
// ---------------------------------------------------------------------------

inline constexpr char kCheckpointMagic[4] = {'P', 'C', 'L', 'M'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

namespace detail {

inline void put_encoder_config(std::ostream& os, const EncoderConfig& cfg) {
    put_u32(os, static_cast<std::uint32_t>(cfg.channels.size()));
    for (std::size_t c : cfg.channels) put_u32(os, static_cast<std::uint32_t>(c));
    put_u32(os, static_cast<std::uint32_t>(cfg.kernel));
    put_u32(os, static_cast<std::uint32_t>(cfg.stride));
    put_u32(os, static_cast<std::uint32_t>(cfg.projection_hidden));
    put_u32(os, static_cast<std::uint32_t>(cfg.projection_dim));
    put_u32(os, static_cast<std::uint32_t>(cfg.num_classes));
}

inline EncoderConfig get_encoder_config(std::istream& is) {
    EncoderConfig cfg;
    const std::uint32_t layers = get_u32(is, "config layer count");
    if (layers > 64) throw ParseError("checkpoint config claims an implausible layer count");
    cfg.channels.clear();
    for (std::uint32_t l = 0; l < layers; ++l) cfg.channels.push_back(get_u32(is, "channel"));
    cfg.kernel = get_u32(is, "kernel");
    cfg.stride = get_u32(is, "stride");
    cfg.projection_hidden = get_u32(is, "projection hidden");
    cfg.projection_dim = get_u32(is, "projection dim");
    cfg.num_classes = get_u32(is, "class count");
    return cfg;
}

} // namespace detail

inline std::uint64_t config_hash(const EncoderConfig& cfg) {
    std::ostringstream os(std::ios::binary);
    detail::put_encoder_config(os, cfg);
    const std::string bytes = os.str();
    return detail::fnv1a(bytes.data(), bytes.size());
}

inline void save_checkpoint(std::ostream& os, const ModelParams& p) {
    validate(p);
    detail::put_bytes(os, kCheckpointMagic, 4);
    detail::put_u32(os, kCheckpointVersion);
    detail::put_u64(os, config_hash(p.config));
    detail::put_encoder_config(os, p.config);
    const auto tensors = named_tensors(p);
    detail::put_u32(os, static_cast<std::uint32_t>(tensors.size()));
    for (const auto& [name, t] : tensors) {
        detail::put_u32(os, static_cast<std::uint32_t>(name.size()));
        detail::put_bytes(os, name.data(), name.size());
        detail::put_u32(os, static_cast<std::uint32_t>(t->rank()));
        for (std::size_t d = 0; d < t->rank(); ++d) detail::put_u64(os, t->dim(d));
        for (std::size_t i = 0; i < t->size(); ++i) detail::put_f64(os, (*t)[i]);
    }
    if (!os) throw IoError("checkpoint write failed");
}

inline void save_checkpoint(const std::string& path, const ModelParams& p) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("cannot open checkpoint for writing: " + path);
    save_checkpoint(os, p);
}

inline ModelParams load_checkpoint(std::istream& is,
                                   const std::optional<EncoderConfig>& expected = {}) {
    char magic[4];
    detail::get_bytes(is, magic, 4, "checkpoint magic");
    if (std::memcmp(magic, kCheckpointMagic, 4) != 0)
        throw ParseError("not a model checkpoint (bad magic)");
    const std::uint32_t version = detail::get_u32(is, "checkpoint version");
    if (version != kCheckpointVersion)
        throw ParseError("unsupported checkpoint version " + std::to_string(version));
    const std::uint64_t stored_hash = detail::get_u64(is, "config hash");
    const EncoderConfig cfg = detail::get_encoder_config(is);
    validate(cfg);
    if (config_hash(cfg) != stored_hash)
        throw ParseError("checkpoint config hash does not match its config block");
    if (expected && config_hash(*expected) != stored_hash)
        throw ParseError("checkpoint config hash mismatch: file was written with a different "
                         "model configuration");

    ModelParams p = init_params(cfg, 0);
    const auto tensors = named_tensors(p);
    const std::uint32_t count = detail::get_u32(is, "tensor count");
    if (count != tensors.size())
        throw ParseError("checkpoint holds " + std::to_string(count) + " tensors, expected " +
                         std::to_string(tensors.size()));
    for (const auto& [name, t] : tensors) {
        const std::uint32_t name_len = detail::get_u32(is, "tensor name length");
        if (name_len > 256) throw ParseError("tensor name longer than 256 bytes");
        std::string got(name_len, '\0');
        detail::get_bytes(is, got.data(), name_len, "tensor name");
        if (got != name)
            throw ParseError("tensor order mismatch: expected " + name + ", found " + got);
        const std::uint32_t rank = detail::get_u32(is, "tensor rank");
        if (rank != t->rank())
            throw ParseError("tensor " + name + " rank mismatch");
        for (std::size_t d = 0; d < rank; ++d) {
            const std::uint64_t dim = detail::get_u64(is, "tensor dim");
            if (dim != t->dim(d)) throw ParseError("tensor " + name + " shape mismatch");
        }
        for (std::size_t i = 0; i < t->size(); ++i) (*t)[i] = detail::get_f64(is, "tensor value");
    }
    validate(p);
    return p;
}

inline ModelParams load_checkpoint(const std::string& path,
                                   const std::optional<EncoderConfig>& expected = {}) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open checkpoint: " + path);
    return load_checkpoint(is, expected);
}

} // namespace priorcl
