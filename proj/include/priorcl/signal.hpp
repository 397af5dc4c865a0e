#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "priorcl/detail/bytes.hpp"
#include "priorcl/errors.hpp"
#include "priorcl/rng.hpp"

namespace priorcl {

// ---------------------------------------------------------------------------
// Sleep stages and epochs
// ---------------------------------------------------------------------------

enum class SleepStage : std::uint8_t { W = 0, N1 = 1, N2 = 2, N3 = 3, REM = 4 };

inline constexpr std::size_t kNumStages = 5;
inline constexpr std::array<SleepStage, kNumStages> kAllStages = {
    SleepStage::W, SleepStage::N1, SleepStage::N2, SleepStage::N3, SleepStage::REM};

inline const char* to_string(SleepStage s) {
    switch (s) {
        case SleepStage::W: return "W";
        case SleepStage::N1: return "N1";
        case SleepStage::N2: return "N2";
        case SleepStage::N3: return "N3";
        case SleepStage::REM: return "REM";
    }
    return "?";
}

inline SleepStage stage_from_index(std::size_t i) {
    if (i >= kNumStages) throw DomainError("stage index " + std::to_string(i) + " out of range");
    return static_cast<SleepStage>(i);
}

// One 30-second window of a single-channel recording.
struct Epoch {
    std::vector<double> samples; // microvolts
    double sample_rate_hz = 0.0;
    std::optional<SleepStage> label;
    std::string source_id;               // recording identifier
    std::size_t index_in_recording = 0;
};

inline constexpr double kEpochSeconds = 30.0;

inline std::size_t samples_per_epoch(double sample_rate_hz) {
    return static_cast<std::size_t>(std::llround(kEpochSeconds * sample_rate_hz));
}

inline void validate_epoch(const Epoch& e) {
    if (e.sample_rate_hz <= 0.0) throw DomainError("epoch sample rate must be positive");
    if (e.samples.size() != samples_per_epoch(e.sample_rate_hz)) {
        throw DomainError("epoch has " + std::to_string(e.samples.size()) + " samples, expected " +
                          std::to_string(samples_per_epoch(e.sample_rate_hz)) + " for " +
                          std::to_string(e.sample_rate_hz) + " Hz");
    }
}

// ---------------------------------------------------------------------------
// Dataset: ordered epochs plus the recording -> subject map. All epochs must
// share one sampling rate; mixed-rate data is rejected on insertion because
// band energies are only comparable within a rate.
// ---------------------------------------------------------------------------

class Dataset {
public:
    void add(Epoch e) {
        validate_epoch(e);
        if (!epochs_.empty() && e.sample_rate_hz != epochs_.front().sample_rate_hz) {
            throw DomainError("mixed sampling rates in one dataset: " +
                              std::to_string(e.sample_rate_hz) + " vs " +
                              std::to_string(epochs_.front().sample_rate_hz));
        }
        epochs_.push_back(std::move(e));
    }

    void set_subject(const std::string& recording, const std::string& subject) {
        subjects_[recording] = subject;
    }

    const std::string& subject_of(const std::string& recording) const {
        auto it = subjects_.find(recording);
        if (it == subjects_.end()) {
            throw ContractError("recording '" + recording + "' has no subject mapping");
        }
        return it->second;
    }

    const std::vector<Epoch>& epochs() const { return epochs_; }
    std::vector<Epoch>& epochs() { return epochs_; }
    const std::map<std::string, std::string>& subjects() const { return subjects_; }
    std::size_t size() const { return epochs_.size(); }
    bool empty() const { return epochs_.empty(); }

    double sample_rate_hz() const {
        if (epochs_.empty()) throw DomainError("empty dataset has no sampling rate");
        return epochs_.front().sample_rate_hz;
    }

    // Distinct subjects in first-appearance order over the epoch sequence.
    std::vector<std::string> subject_list() const {
        std::vector<std::string> out;
        for (const auto& e : epochs_) {
            const std::string& s = subject_of(e.source_id);
            if (std::find(out.begin(), out.end(), s) == out.end()) out.push_back(s);
        }
        return out;
    }

private:
    std::vector<Epoch> epochs_;
    std::map<std::string, std::string> subjects_;
};

// ---------------------------------------------------------------------------
// Augmentation: one contiguous zeroed segment plus one global scale factor.
// ---------------------------------------------------------------------------

struct AugmentConfig {
    double mask_fraction = 0.1; // in [0, 1)
    double scale_low = 0.8;
    double scale_high = 1.2;
    std::uint64_t seed = 0; // stream label used by callers that own the rng
};

inline void validate(const AugmentConfig& c) {
    if (c.mask_fraction < 0.0 || c.mask_fraction >= 1.0)
        throw DomainError("mask_fraction must lie in [0, 1)");
    if (c.scale_low <= 0.0 || c.scale_high < c.scale_low)
        throw DomainError("scale range must satisfy 0 < scale_low <= scale_high");
}

// Both random draws happen unconditionally so that the consumed stream layout
// does not depend on the configured magnitudes.
inline Epoch augment(const Epoch& epoch, const AugmentConfig& config, Rng& draw) {
    Epoch out = epoch;
    const std::size_t n = out.samples.size();
    const auto mask_len =
        static_cast<std::size_t>(std::llround(config.mask_fraction * static_cast<double>(n)));
    const std::size_t start = draw.below(n - mask_len + 1);
    const double scale = draw.uniform(config.scale_low, config.scale_high);
    std::fill(out.samples.begin() + static_cast<std::ptrdiff_t>(start),
              out.samples.begin() + static_cast<std::ptrdiff_t>(start + mask_len), 0.0);
    for (double& v : out.samples) v *= scale;
    return out;
}

// Two independent augmented views of one epoch. Each view keeps the parent's
// index_in_recording so sibling relations stay recoverable downstream.
inline std::pair<Epoch, Epoch> two_views(const Epoch& epoch, const AugmentConfig& config,
                                         Rng& draw) {
    Epoch a = augment(epoch, config, draw);
    Epoch b = augment(epoch, config, draw);
    return {std::move(a), std::move(b)};
}

// ---------------------------------------------------------------------------
// Synthetic EEG. Each stage gets one sinusoid per rhythm that dominates it
// clinically (W: alpha+beta, N1: theta+alpha, N2: theta, N3: delta,
// REM: theta+alpha), with:
//   - tone frequencies drawn uniformly over the rhythm band, then snapped to
//     the 1/30 Hz DFT grid of a 30 s window so band energy stays confined,
//   - per-stage amplitude profiles (N1 runs weaker and noisier than REM, which
//     shares its band signature, so the two remain confusable but separable),
//   - white Gaussian noise.
// ---------------------------------------------------------------------------

struct SynthTone {
    double low_hz;
    double high_hz;
    double amplitude; // microvolts
};

struct SynthProfile {
    std::array<std::vector<SynthTone>, kNumStages> tones = {{
        {{8.0, 13.0, 30.0}, {14.0, 30.0, 25.0}}, // W
        {{4.0, 8.0, 18.0}, {8.0, 13.0, 15.0}},   // N1
        {{4.0, 8.0, 40.0}},                      // N2
        {{1.0, 4.0, 60.0}},                      // N3
        {{4.0, 8.0, 30.0}, {8.0, 13.0, 25.0}},   // REM
    }};
    std::array<double, kNumStages> noise_sigma = {3.0, 5.0, 3.0, 3.0, 2.0};
    double amplitude_jitter = 0.1; // per-tone multiplicative jitter, +-10%
};

namespace detail {
// Nearest DFT bin frequency (1/30 Hz grid) inside the half-open band.
inline double snap_to_band_bin(double f, double low_hz, double high_hz) {
    const double grid = 1.0 / kEpochSeconds;
    const auto lo = static_cast<long long>(std::ceil(low_hz / grid - 1e-9));
    const auto hi = static_cast<long long>(std::ceil(high_hz / grid - 1e-9)) - 1;
    long long m = std::llround(f / grid);
    m = std::clamp(m, lo, hi);
    return static_cast<double>(m) * grid;
}
} // namespace detail

inline Epoch synth_epoch(SleepStage stage, double sample_rate_hz, Rng& draw,
                         const SynthProfile& profile = {}) {
    if (sample_rate_hz < 64.0) {
        throw DomainError("synthetic sampling rate must be >= 64 Hz so the 30 Hz beta band is "
                          "representable; got " +
                          std::to_string(sample_rate_hz));
    }
    const std::size_t n = samples_per_epoch(sample_rate_hz);
    Epoch e;
    e.samples.assign(n, 0.0);
    e.sample_rate_hz = sample_rate_hz;
    e.label = stage;
    e.source_id = "synth";

    constexpr double two_pi = 6.283185307179586476925286766559;
    const auto stage_idx = static_cast<std::size_t>(stage);
    for (const SynthTone& tone : profile.tones[stage_idx]) {
        const double f =
            detail::snap_to_band_bin(draw.uniform(tone.low_hz, tone.high_hz), tone.low_hz, tone.high_hz);
        const double phase = draw.uniform(0.0, two_pi);
        const double amp =
            tone.amplitude * (1.0 + profile.amplitude_jitter * draw.uniform(-1.0, 1.0));
        for (std::size_t i = 0; i < n; ++i) {
            e.samples[i] += amp * std::sin(two_pi * f * static_cast<double>(i) / sample_rate_hz + phase);
        }
    }
    const double sigma = profile.noise_sigma[stage_idx];
    if (sigma > 0.0) {
        for (std::size_t i = 0; i < n; ++i) e.samples[i] += sigma * draw.normal();
    }
    return e;
}

// Balanced labeled dataset with epochs assigned round-robin to synthetic
// subjects (one recording per subject). Each epoch draws from its own derived
// stream, so generation is order-independent and parallelizable.
inline Dataset synth_dataset(std::size_t per_class, double sample_rate_hz, std::size_t subjects,
                             std::uint64_t seed, const SynthProfile& profile = {}) {
    if (per_class < 1 || subjects < 1) throw DomainError("per_class and subjects must be >= 1");
    Dataset ds;
    const Rng root(seed);
    std::vector<std::size_t> per_source_count(subjects, 0);
    std::size_t global = 0;
    for (SleepStage stage : kAllStages) {
        for (std::size_t i = 0; i < per_class; ++i, ++global) {
            Rng child = root.derive(global);
            Epoch e = synth_epoch(stage, sample_rate_hz, child, profile);
            const std::size_t subj = global % subjects;
            e.source_id = "rec-" + std::to_string(subj);
            e.index_in_recording = per_source_count[subj]++;
            ds.add(std::move(e));
        }
    }
    for (std::size_t s = 0; s < subjects; ++s) {
        ds.set_subject("rec-" + std::to_string(s), "subj-" + std::to_string(s));
    }
    return ds;
}

// ---------------------------------------------------------------------------
// Binary dataset cache ("PCL1"). Layout, all little-endian:
//   magic "PCL1" | u32 epoch count | f64 sample rate | u32 samples per epoch
//   then per epoch: u8 label (0-4, 255 = unlabeled) | u32 subject id |
//   f64 samples. Subject ids regenerate "rec-<id>"/"subj-<id>" names on read,
//   so read->write round-trips are bit-exact.
// ---------------------------------------------------------------------------

inline constexpr char kCacheMagic[4] = {'P', 'C', 'L', '1'};
inline constexpr std::uint8_t kNoLabelByte = 255;

namespace detail {
inline std::uint32_t subject_id_for_cache(const std::string& subject,
                                          std::map<std::string, std::uint32_t>& dense) {
    // "subj-<k>" keeps its numeric id verbatim; anything else gets a dense id.
    const std::string prefix = "subj-";
    if (subject.rfind(prefix, 0) == 0) {
        const std::string digits = subject.substr(prefix.size());
        if (!digits.empty() && digits.find_first_not_of("0123456789") == std::string::npos &&
            digits.size() <= 9) {
            return static_cast<std::uint32_t>(std::stoul(digits));
        }
    }
    auto [it, inserted] = dense.emplace(subject, static_cast<std::uint32_t>(dense.size()));
    return it->second;
}
} // namespace detail

inline void write_dataset_cache(std::ostream& os, const Dataset& ds) {
    detail::put_bytes(os, kCacheMagic, 4);
    detail::put_u32(os, static_cast<std::uint32_t>(ds.size()));
    const double rate = ds.empty() ? 0.0 : ds.sample_rate_hz();
    detail::put_f64(os, rate);
    detail::put_u32(os, ds.empty() ? 0u : static_cast<std::uint32_t>(samples_per_epoch(rate)));
    std::map<std::string, std::uint32_t> dense;
    for (const Epoch& e : ds.epochs()) {
        detail::put_u8(os, e.label ? static_cast<std::uint8_t>(*e.label) : kNoLabelByte);
        detail::put_u32(os, detail::subject_id_for_cache(ds.subject_of(e.source_id), dense));
        for (double v : e.samples) detail::put_f64(os, v);
    }
    if (!os) throw IoError("failed writing dataset cache");
}

inline void write_dataset_cache(const std::string& path, const Dataset& ds) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("cannot open '" + path + "' for writing");
    write_dataset_cache(os, ds);
}

inline Dataset read_dataset_cache(std::istream& is) {
    char magic[4];
    detail::get_bytes(is, magic, 4, "cache magic");
    if (std::memcmp(magic, kCacheMagic, 4) != 0) throw ParseError("not a PCL1 dataset cache");
    const std::uint32_t count = detail::get_u32(is, "epoch count");
    const double rate = detail::get_f64(is, "sample rate");
    const std::uint32_t spe = detail::get_u32(is, "samples per epoch");
    if (count > 0) {
        if (rate <= 0.0) throw ParseError("cache declares non-positive sample rate");
        if (spe != samples_per_epoch(rate)) {
            throw ParseError("cache samples-per-epoch " + std::to_string(spe) +
                             " does not equal round(30 * rate) = " +
                             std::to_string(samples_per_epoch(rate)));
        }
    }
    Dataset ds;
    std::map<std::uint32_t, std::size_t> per_subject_count;
    for (std::uint32_t i = 0; i < count; ++i) {
        const std::uint8_t label = detail::get_u8(is, "label byte");
        if (label != kNoLabelByte && label >= kNumStages) {
            throw ParseError("epoch " + std::to_string(i) + " has invalid label byte " +
                             std::to_string(label));
        }
        const std::uint32_t subj = detail::get_u32(is, "subject id");
        Epoch e;
        e.sample_rate_hz = rate;
        e.samples.resize(spe);
        for (std::uint32_t s = 0; s < spe; ++s) e.samples[s] = detail::get_f64(is, "sample");
        if (label != kNoLabelByte) e.label = static_cast<SleepStage>(label);
        e.source_id = "rec-" + std::to_string(subj);
        e.index_in_recording = per_subject_count[subj]++;
        ds.set_subject(e.source_id, "subj-" + std::to_string(subj));
        ds.add(std::move(e));
    }
    return ds;
}

inline Dataset read_dataset_cache(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open '" + path + "' for reading");
    return read_dataset_cache(is);
}

// ---------------------------------------------------------------------------
// Subject-level split. Subjects are shuffled with the given rng; the first
// round(train_fraction * S) of them (clamped so both sides stay non-empty)
// form the training side.
// ---------------------------------------------------------------------------

inline std::pair<Dataset, Dataset> split_by_subject(const Dataset& ds, double train_fraction,
                                                    Rng rng) {
    if (train_fraction <= 0.0 || train_fraction >= 1.0)
        throw DomainError("train_fraction must lie in (0, 1)");
    std::vector<std::string> subjects = ds.subject_list();
    if (subjects.size() < 2)
        throw DomainError("subject split needs at least 2 subjects, have " +
                          std::to_string(subjects.size()));
    rng.shuffle(subjects);
    auto n_train = static_cast<std::size_t>(
        std::llround(train_fraction * static_cast<double>(subjects.size())));
    n_train = std::clamp<std::size_t>(n_train, 1, subjects.size() - 1);
    std::vector<std::string> train_subjects(subjects.begin(),
                                            subjects.begin() + static_cast<std::ptrdiff_t>(n_train));
    Dataset train, test;
    for (const Epoch& e : ds.epochs()) {
        const std::string& subj = ds.subject_of(e.source_id);
        const bool in_train = std::find(train_subjects.begin(), train_subjects.end(), subj) !=
                              train_subjects.end();
        (in_train ? train : test).add(e);
        (in_train ? train : test).set_subject(e.source_id, subj);
    }
    return {std::move(train), std::move(test)};
}

inline void require_disjoint_subjects(const Dataset& a, const Dataset& b) {
    for (const auto& sa : a.subject_list()) {
        for (const auto& sb : b.subject_list()) {
            if (sa == sb)
                throw ContractError("subject '" + sa + "' appears in both train and test splits");
        }
    }
}

} // namespace priorcl
