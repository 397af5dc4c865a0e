#pragma once

#include <algorithm>
#include <charconv>
#include <cstdint>
#include <cstdio>
#include <functional>
#include <sstream>
#include <string>
#include <string_view>
#include <type_traits>
#include <utility>
#include <vector>

#include "priorcl/errors.hpp"
#include "priorcl/prior.hpp"
#include "priorcl/train.hpp"

namespace priorcl {

// Flat dotted key=value run configuration. One document drives every CLI
// subcommand; parsing collects every problem before failing so a bad file is
// reported in full, and serialization emits every key in a fixed order so a
// run directory snapshot reproduces the run bit-exactly.

enum class DataSource { synth, cache, edf };

inline const char* to_string(DataSource s) {
    switch (s) {
        case DataSource::synth: return "synth";
        case DataSource::cache: return "cache";
        case DataSource::edf: return "edf";
    }
    throw ContractError("unknown data source");
}

struct SynthSpec {
    std::size_t per_class = 100;
    double sample_rate_hz = 100.0;
    std::size_t subjects = 10;
    std::uint64_t seed = 42;
    double noise_scale = 1.0; // multiplies every stage's noise sigma
};

struct EdfSpec {
    std::string path;
    std::string channel;
    std::string labels;          // optional sidecar CSV
    std::size_t wake_trim = 60;  // kept wake epochs around the sleep span
};

struct RunConfig {
    std::uint64_t seed = 1;
    std::string out_dir = "run";
    std::string checkpoint; // input checkpoint for linear-eval / finetune

    DataSource source = DataSource::synth;
    SynthSpec synth;
    std::string cache_path;
    EdfSpec edf;

    TrainConfig train;
    EncoderConfig encoder;
    BandTable bands;

    double eval_lr = 0.1;   // linear-head learning rate for evaluation
    std::size_t knn_k = 5;  // neighbors for the prior-feature baseline

    std::vector<double> sweep_r = {0.01, 0.1, 0.2, 0.4, 0.6};
    std::vector<double> sweep_tau = {0.05, 0.075, 0.1};
};

namespace detail {

inline std::string_view trim_view(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) {
        s.remove_prefix(1);
    }
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) {
        s.remove_suffix(1);
    }
    return s;
}

inline double config_double(const std::string& v) {
    std::size_t used = 0;
    double out = 0.0;
    try {
        out = std::stod(v, &used);
    } catch (const std::exception&) {
        throw ConfigError("'" + v + "' is not a number");
    }
    if (used != v.size()) throw ConfigError("'" + v + "' is not a number");
    return out;
}

inline std::uint64_t config_u64(const std::string& v) {
    std::uint64_t out = 0;
    const char* b = v.data();
    const char* e = b + v.size();
    auto [p, ec] = std::from_chars(b, e, out);
    if (ec != std::errc() || p != e)
        throw ConfigError("'" + v + "' is not a non-negative integer");
    return out;
}

inline std::size_t config_size(const std::string& v) {
    return static_cast<std::size_t>(config_u64(v));
}

template <typename T, typename Parse>
inline std::vector<T> config_list(const std::string& v, Parse parse) {
    std::vector<T> out;
    std::size_t pos = 0;
    while (pos <= v.size()) {
        std::size_t comma = v.find(',', pos);
        if (comma == std::string::npos) comma = v.size();
        const std::string item(trim_view(std::string_view(v).substr(pos, comma - pos)));
        if (item.empty()) throw ConfigError("empty list element");
        out.push_back(parse(item));
        pos = comma + 1;
    }
    return out;
}

inline std::string config_format(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

template <typename T, std::enable_if_t<std::is_unsigned_v<T>, int> = 0>
inline std::string config_format(T v) {
    return std::to_string(v);
}

template <typename T>
inline std::string config_format_list(const std::vector<T>& v) {
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) out += ',';
        out += config_format(v[i]);
    }
    return out;
}

struct ConfigKey {
    std::string name;
    std::function<void(RunConfig&, const std::string&)> set;
    std::function<std::string(const RunConfig&)> get;
};

inline const std::vector<ConfigKey>& config_keys() {
    static const std::vector<ConfigKey> keys = [] {
        std::vector<ConfigKey> k;
        auto add = [&k](std::string name, auto set, auto get) {
            k.push_back({std::move(name), set, get});
        };

        add("run.seed", [](RunConfig& c, const std::string& v) { c.seed = config_u64(v); },
            [](const RunConfig& c) { return config_format(c.seed); });
        add("run.out_dir", [](RunConfig& c, const std::string& v) { c.out_dir = v; },
            [](const RunConfig& c) { return c.out_dir; });
        add("run.checkpoint", [](RunConfig& c, const std::string& v) { c.checkpoint = v; },
            [](const RunConfig& c) { return c.checkpoint; });

        add("data.source",
            [](RunConfig& c, const std::string& v) {
                if (v == "synth") c.source = DataSource::synth;
                else if (v == "cache") c.source = DataSource::cache;
                else if (v == "edf") c.source = DataSource::edf;
                else throw ConfigError("'" + v + "' is not one of synth, cache, edf");
            },
            [](const RunConfig& c) { return std::string(to_string(c.source)); });
        add("data.synth.per_class",
            [](RunConfig& c, const std::string& v) { c.synth.per_class = config_size(v); },
            [](const RunConfig& c) { return config_format(c.synth.per_class); });
        add("data.synth.sample_rate_hz",
            [](RunConfig& c, const std::string& v) { c.synth.sample_rate_hz = config_double(v); },
            [](const RunConfig& c) { return config_format(c.synth.sample_rate_hz); });
        add("data.synth.subjects",
            [](RunConfig& c, const std::string& v) { c.synth.subjects = config_size(v); },
            [](const RunConfig& c) { return config_format(c.synth.subjects); });
        add("data.synth.seed",
            [](RunConfig& c, const std::string& v) { c.synth.seed = config_u64(v); },
            [](const RunConfig& c) { return config_format(c.synth.seed); });
        add("data.synth.noise_scale",
            [](RunConfig& c, const std::string& v) { c.synth.noise_scale = config_double(v); },
            [](const RunConfig& c) { return config_format(c.synth.noise_scale); });
        add("data.cache.path",
            [](RunConfig& c, const std::string& v) { c.cache_path = v; },
            [](const RunConfig& c) { return c.cache_path; });
        add("data.edf.path", [](RunConfig& c, const std::string& v) { c.edf.path = v; },
            [](const RunConfig& c) { return c.edf.path; });
        add("data.edf.channel", [](RunConfig& c, const std::string& v) { c.edf.channel = v; },
            [](const RunConfig& c) { return c.edf.channel; });
        add("data.edf.labels", [](RunConfig& c, const std::string& v) { c.edf.labels = v; },
            [](const RunConfig& c) { return c.edf.labels; });
        add("data.edf.wake_trim",
            [](RunConfig& c, const std::string& v) { c.edf.wake_trim = config_size(v); },
            [](const RunConfig& c) { return config_format(c.edf.wake_trim); });

        add("train.mode",
            [](RunConfig& c, const std::string& v) { c.train.mode = train_mode_from_string(v); },
            [](const RunConfig& c) { return std::string(to_string(c.train.mode)); });
        add("train.batch_size",
            [](RunConfig& c, const std::string& v) { c.train.batch_size = config_size(v); },
            [](const RunConfig& c) { return config_format(c.train.batch_size); });
        add("train.lr", [](RunConfig& c, const std::string& v) { c.train.lr = config_double(v); },
            [](const RunConfig& c) { return config_format(c.train.lr); });
        add("train.momentum",
            [](RunConfig& c, const std::string& v) { c.train.momentum = config_double(v); },
            [](const RunConfig& c) { return config_format(c.train.momentum); });
        add("train.pretrain_epochs",
            [](RunConfig& c, const std::string& v) { c.train.pretrain_epochs = config_size(v); },
            [](const RunConfig& c) { return config_format(c.train.pretrain_epochs); });
        add("train.eval_epochs",
            [](RunConfig& c, const std::string& v) { c.train.eval_epochs = config_size(v); },
            [](const RunConfig& c) { return config_format(c.train.eval_epochs); });
        add("train.k_ratio",
            [](RunConfig& c, const std::string& v) { c.train.k_ratio = config_double(v); },
            [](const RunConfig& c) { return config_format(c.train.k_ratio); });
        add("train.fixed_tau",
            [](RunConfig& c, const std::string& v) { c.train.fixed_tau = config_double(v); },
            [](const RunConfig& c) { return config_format(c.train.fixed_tau); });
        add("train.seeds",
            [](RunConfig& c, const std::string& v) {
                c.train.seeds = config_list<std::uint64_t>(v, config_u64);
            },
            [](const RunConfig& c) { return config_format_list(c.train.seeds); });
        add("train.train_fraction",
            [](RunConfig& c, const std::string& v) { c.train.train_fraction = config_double(v); },
            [](const RunConfig& c) { return config_format(c.train.train_fraction); });
        add("train.finetune_recordings",
            [](RunConfig& c, const std::string& v) {
                c.train.finetune_recordings = config_size(v);
            },
            [](const RunConfig& c) { return config_format(c.train.finetune_recordings); });

        add("schedule.tau_min",
            [](RunConfig& c, const std::string& v) { c.train.schedule.tau_min = config_double(v); },
            [](const RunConfig& c) { return config_format(c.train.schedule.tau_min); });
        add("schedule.tau_max",
            [](RunConfig& c, const std::string& v) { c.train.schedule.tau_max = config_double(v); },
            [](const RunConfig& c) { return config_format(c.train.schedule.tau_max); });

        add("augment.mask_fraction",
            [](RunConfig& c, const std::string& v) {
                c.train.augment.mask_fraction = config_double(v);
            },
            [](const RunConfig& c) { return config_format(c.train.augment.mask_fraction); });
        add("augment.scale_low",
            [](RunConfig& c, const std::string& v) {
                c.train.augment.scale_low = config_double(v);
            },
            [](const RunConfig& c) { return config_format(c.train.augment.scale_low); });
        add("augment.scale_high",
            [](RunConfig& c, const std::string& v) {
                c.train.augment.scale_high = config_double(v);
            },
            [](const RunConfig& c) { return config_format(c.train.augment.scale_high); });

        add("encoder.channels",
            [](RunConfig& c, const std::string& v) {
                c.encoder.channels = config_list<std::size_t>(v, config_size);
            },
            [](const RunConfig& c) { return config_format_list(c.encoder.channels); });
        add("encoder.kernel",
            [](RunConfig& c, const std::string& v) { c.encoder.kernel = config_size(v); },
            [](const RunConfig& c) { return config_format(c.encoder.kernel); });
        add("encoder.stride",
            [](RunConfig& c, const std::string& v) { c.encoder.stride = config_size(v); },
            [](const RunConfig& c) { return config_format(c.encoder.stride); });
        add("encoder.projection_hidden",
            [](RunConfig& c, const std::string& v) {
                c.encoder.projection_hidden = config_size(v);
            },
            [](const RunConfig& c) { return config_format(c.encoder.projection_hidden); });
        add("encoder.projection_dim",
            [](RunConfig& c, const std::string& v) { c.encoder.projection_dim = config_size(v); },
            [](const RunConfig& c) { return config_format(c.encoder.projection_dim); });
        add("encoder.num_classes",
            [](RunConfig& c, const std::string& v) { c.encoder.num_classes = config_size(v); },
            [](const RunConfig& c) { return config_format(c.encoder.num_classes); });

        for (std::size_t b = 0; b < kBandNames.size(); ++b) {
            add(std::string("bands.") + kBandNames[b] + ".low_hz",
                [b](RunConfig& c, const std::string& v) {
                    c.bands.bands[b].low_hz = config_double(v);
                },
                [b](const RunConfig& c) { return config_format(c.bands.bands[b].low_hz); });
            add(std::string("bands.") + kBandNames[b] + ".high_hz",
                [b](RunConfig& c, const std::string& v) {
                    c.bands.bands[b].high_hz = config_double(v);
                },
                [b](const RunConfig& c) { return config_format(c.bands.bands[b].high_hz); });
        }

        add("eval.lr", [](RunConfig& c, const std::string& v) { c.eval_lr = config_double(v); },
            [](const RunConfig& c) { return config_format(c.eval_lr); });
        add("knn.k", [](RunConfig& c, const std::string& v) { c.knn_k = config_size(v); },
            [](const RunConfig& c) { return config_format(c.knn_k); });
        add("sweep.r_values",
            [](RunConfig& c, const std::string& v) {
                c.sweep_r = config_list<double>(v, config_double);
            },
            [](const RunConfig& c) { return config_format_list(c.sweep_r); });
        add("sweep.tau_values",
            [](RunConfig& c, const std::string& v) {
                c.sweep_tau = config_list<double>(v, config_double);
            },
            [](const RunConfig& c) { return config_format_list(c.sweep_tau); });
        return k;
    }();
    return keys;
}

inline const ConfigKey* find_config_key(std::string_view name) {
    for (const ConfigKey& k : config_keys())
        if (name == k.name) return &k;
    return nullptr;
}

} // namespace detail

// key=value lines; '#' starts a comment, blank lines skipped. Later
// assignments win, so overrides can simply be appended.
inline std::vector<std::pair<std::string, std::string>> parse_key_values(std::string_view text) {
    std::vector<std::pair<std::string, std::string>> out;
    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        std::size_t nl = text.find('\n', pos);
        if (nl == std::string_view::npos) nl = text.size();
        std::string_view line = detail::trim_view(text.substr(pos, nl - pos));
        ++line_no;
        pos = nl + 1;
        if (line.empty() || line.front() == '#') continue;
        const std::size_t eq = line.find('=');
        if (eq == std::string_view::npos)
            throw ConfigError("line " + std::to_string(line_no) + ": expected key=value, got '" +
                              std::string(line) + "'");
        const std::string key(detail::trim_view(line.substr(0, eq)));
        const std::string value(detail::trim_view(line.substr(eq + 1)));
        if (key.empty())
            throw ConfigError("line " + std::to_string(line_no) + ": empty key");
        out.emplace_back(key, value);
    }
    return out;
}

// Builds a RunConfig from file text plus command-line overrides. Every
// unknown key, malformed value, and semantic violation is collected and
// reported together in one ConfigError.
inline RunConfig parse_run_config(std::string_view text,
                                  const std::vector<std::pair<std::string, std::string>>&
                                      overrides = {}) {
    RunConfig cfg;
    std::vector<std::string> errors;

    auto assignments = parse_key_values(text);
    assignments.insert(assignments.end(), overrides.begin(), overrides.end());
    for (const auto& [key, value] : assignments) {
        const detail::ConfigKey* k = detail::find_config_key(key);
        if (!k) {
            errors.push_back("unknown key '" + key + "'");
            continue;
        }
        try {
            k->set(cfg, value);
        } catch (const Error& e) {
            errors.push_back(key + ": " + e.what());
        }
    }

    auto add_error = [&errors](const std::string& m) {
        if (std::find(errors.begin(), errors.end(), m) == errors.end()) errors.push_back(m);
    };
    auto check = [&add_error](auto&& fn) {
        try {
            fn();
        } catch (const Error& e) {
            add_error(e.what());
        }
    };
    auto clause = [&add_error](bool ok, const std::string& msg) {
        if (!ok) add_error(msg);
    };

    // Semantic clauses are spelled out one by one (with the library's own
    // messages) so a config with several problems reports all of them in one
    // pass; the library validators run afterwards as a deduplicated backstop.
    const TrainConfig& t = cfg.train;
    clause(t.batch_size >= 2, "batch_size must be >= 2");
    clause(t.lr > 0.0, "lr must be positive");
    clause(t.momentum >= 0.0 && t.momentum < 1.0, "momentum must lie in [0, 1)");
    clause(t.pretrain_epochs >= 1 && t.eval_epochs >= 1, "epoch counts must be >= 1");
    clause(t.k_ratio > 0.0 && t.k_ratio < 1.0, "k_ratio must lie in (0, 1)");
    clause(t.fixed_tau > 0.0, "fixed_tau must be positive");
    clause(!t.seeds.empty(), "at least one seed is required");
    clause(t.train_fraction > 0.0 && t.train_fraction < 1.0,
           "train_fraction must lie in (0, 1)");
    clause(t.finetune_recordings >= 1, "finetune_recordings must be >= 1");
    check([&] { validate(t.schedule); });
    check([&] { validate(t.augment); });
    clause(cfg.encoder.channels.size() == 4,
           "encoder takes exactly 4 conv layers, got " +
               std::to_string(cfg.encoder.channels.size()));
    {
        bool widths_ok = true;
        for (std::size_t c : cfg.encoder.channels) widths_ok = widths_ok && c >= 1;
        clause(widths_ok, "conv channel widths must be >= 1");
    }
    clause(cfg.encoder.kernel >= 1 && cfg.encoder.stride >= 1,
           "kernel and stride must be >= 1");
    clause(cfg.encoder.projection_hidden >= 1 && cfg.encoder.projection_dim >= 1,
           "projection dims must be >= 1");
    clause(cfg.encoder.num_classes >= 2, "classifier needs at least 2 classes");
    check([&] { validate(cfg.train); });
    check([&] { validate(cfg.encoder); });
    check([&] { validate(cfg.bands); });
    check([&] {
        if (!(cfg.eval_lr > 0.0)) throw ConfigError("eval.lr must be positive");
    });
    check([&] {
        if (cfg.knn_k < 1) throw ConfigError("knn.k must be >= 1");
    });
    check([&] {
        if (cfg.sweep_r.empty() || cfg.sweep_tau.empty())
            throw ConfigError("sweep grids must be non-empty");
        for (double r : cfg.sweep_r)
            if (!(r > 0.0) || !(r < 1.0))
                throw ConfigError("sweep.r_values must lie in (0, 1)");
        for (double t : cfg.sweep_tau)
            if (!(t > 0.0)) throw ConfigError("sweep.tau_values must be positive");
    });
    check([&] {
        if (cfg.source == DataSource::cache && cfg.cache_path.empty())
            throw ConfigError("data.source=cache requires data.cache.path");
        if (cfg.source == DataSource::edf) {
            if (cfg.edf.path.empty()) throw ConfigError("data.source=edf requires data.edf.path");
            if (cfg.edf.channel.empty())
                throw ConfigError("data.source=edf requires data.edf.channel");
        }
        if (cfg.source == DataSource::synth) {
            if (cfg.synth.per_class < 1 || cfg.synth.subjects < 1)
                throw ConfigError("data.synth counts must be >= 1");
            if (!(cfg.synth.noise_scale >= 0.0))
                throw ConfigError("data.synth.noise_scale must be >= 0");
        }
    });

    if (!errors.empty()) {
        std::string joined = "invalid configuration:";
        for (const std::string& e : errors) joined += "\n  - " + e;
        throw ConfigError(joined);
    }
    return cfg;
}

// Canonical full snapshot: every key in registration order with the exact
// current value (doubles at %.17g round-trip precision).
inline std::string serialize_run_config(const RunConfig& cfg) {
    std::ostringstream os;
    for (const detail::ConfigKey& k : detail::config_keys())
        os << k.name << " = " << k.get(cfg) << "\n";
    return os.str();
}

} // namespace priorcl
