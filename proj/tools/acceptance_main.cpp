// Acceptance gate. Each check guards one shipped guarantee and prints a
// single [PASS]/[FAIL] line with the measured values; the process exits 0
// only when every check passes. Checks 7-9 share one desk-scale experiment,
// so they run in order and 8/9 report a failed prerequisite instead of
// recomputing it.

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <complex>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <exception>
#include <functional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "checks.hpp"
#include "json.hpp"
#include "priorcl/edf.hpp"
#include "priorcl/prior.hpp"
#include "priorcl/train.hpp"

namespace {

using nlohmann::json;
using namespace priorcl;

std::string fmt(double v, int digits = 4) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.*g", digits, v);
    return buf;
}

std::string fmt_list(const std::vector<double>& vs, int digits = 3) {
    std::string out = "{";
    for (std::size_t i = 0; i < vs.size(); ++i) {
        if (i) out += ", ";
        out += fmt(vs[i], digits);
    }
    return out + "}";
}

struct CheckResult {
    bool pass = false;
    std::string detail;
};

// ---------------------------------------------------------------------------
// 1. Closed-form loss gradients vs central finite differences.
// ---------------------------------------------------------------------------

CheckResult check_loss_gradients() {
    Rng rng(9001);
    double worst = 0.0;
    const std::size_t instances = 1000;
    for (std::size_t i = 0; i < instances; ++i) {
        const checks::LossInstance inst = checks::random_loss_instance(rng);
        worst = std::max(worst, checks::loss_fd_worst_ratio(inst));
    }
    CheckResult r;
    r.pass = worst <= 1.0;
    r.detail = std::to_string(instances) + " random plans, worst margin ratio " + fmt(worst) +
               " (tol " + fmt(checks::kLossFdRel) + " rel + " + fmt(checks::kLossFdAbs) +
               " abs)";
    return r;
}

// ---------------------------------------------------------------------------
// 2. Full encoder -> projection -> cosine -> loss chain vs finite differences.
// ---------------------------------------------------------------------------

CheckResult check_chain_gradients() {
    // Seeds 8 and 13 land near the few-channel layernorm's stiff manifold,
    // where finite differences need the per-coordinate step refinement; they
    // stay in the set so the check covers its hardest known instances.
    const std::vector<std::uint64_t> seeds = {9002, 8, 13};
    double worst = 0.0;
    std::size_t views = 0;
    for (const std::uint64_t seed : seeds) {
        checks::ChainSetup setup = checks::micro_chain(seed);
        views = setup.views.size();
        worst = std::max(worst, checks::chain_fd_worst_ratio(setup));
    }
    CheckResult r;
    r.pass = worst <= 1.0;
    r.detail = std::to_string(seeds.size()) + " micro encoders, " + std::to_string(views) +
               " views each, worst margin ratio " + fmt(worst) +
               " over every parameter (tol " + fmt(checks::kChainFdRel) + " rel + " +
               fmt(checks::kChainFdAbs) + " abs)";
    return r;
}

// ---------------------------------------------------------------------------
// 3. Reduction identities and planner degeneracies.
// ---------------------------------------------------------------------------

// Multi-positive loss under one shared temperature, written the naive way.
double uniform_tau_reference(const std::vector<double>& sims, const ContrastPlan& plan,
                             double tau) {
    double neg_mass = 0.0;
    for (const PlanMember& n : plan.negatives) neg_mass += std::exp(sims[n.view] / tau);
    double acc = 0.0;
    for (const PlanMember& p : plan.positives) {
        const double e = std::exp(sims[p.view] / tau);
        acc += -std::log(e / (e + neg_mass));
    }
    return acc / static_cast<double>(plan.positives.size());
}

bool params_bitwise_equal(const ModelParams& a, const ModelParams& b) {
    const auto ta = named_tensors(a);
    const auto tb = named_tensors(b);
    if (ta.size() != tb.size()) return false;
    for (std::size_t i = 0; i < ta.size(); ++i) {
        if (ta[i].first != tb[i].first) return false;
        const Tensor& x = *ta[i].second;
        const Tensor& y = *tb[i].second;
        if (x.shape() != y.shape()) return false;
        if (std::memcmp(x.data(), y.data(), x.size() * sizeof(double)) != 0) return false;
    }
    return true;
}

CheckResult check_reductions() {
    Rng rng(9003);
    const double cap = 1e-12;

    // Adaptive loss collapses to the single-temperature form when every
    // member shares one tau.
    double worst_uniform = 0.0;
    for (std::size_t i = 0; i < 100; ++i) {
        checks::LossInstance inst = checks::random_loss_instance(rng);
        const double tau = rng.uniform(0.05, 1.0);
        for (PlanMember& p : inst.plan.positives) p.temperature = tau;
        for (PlanMember& n : inst.plan.negatives) n.temperature = tau;
        const double a = loss_multipositive(inst.sims, inst.plan);
        const double b = uniform_tau_reference(inst.sims, inst.plan, tau);
        worst_uniform = std::max(worst_uniform,
                                 std::abs(a - b) / std::max({1.0, std::abs(a), std::abs(b)}));
    }

    // With a single positive whose plan negatives cover the whole row, the
    // single-temperature form is exactly the one-vs-rest contrastive loss.
    double worst_single = 0.0;
    for (std::size_t i = 0; i < 100; ++i) {
        const std::size_t n_neg = 1 + rng.below(200);
        const double tau = rng.uniform(0.05, 1.0);
        std::vector<double> sims(2 + n_neg);
        for (double& s : sims) s = rng.uniform(-1.0, 1.0);
        ContrastPlan plan;
        plan.anchor = 0;
        plan.positives.push_back({1, tau});
        for (std::size_t v = 2; v < sims.size(); ++v) plan.negatives.push_back({v, tau});
        const double a = loss_multipositive(sims, plan);
        const double b = loss_simclr(sims, 0, 1, tau);
        worst_single = std::max(worst_single,
                                std::abs(a - b) / std::max({1.0, std::abs(a), std::abs(b)}));
    }

    // Training-mode lattice: a flat schedule makes the adaptive mode equal
    // the fixed-tau mode bit for bit, and k = 1 makes the fixed-tau mode
    // equal the single-positive mode. Same seed, same data, full runs.
    const Dataset ds = synth_dataset(8, 100.0, 4, 3);
    EncoderConfig enc;
    enc.channels = {4, 4, 4, 8};
    enc.projection_hidden = 8;
    enc.projection_dim = 4;
    TrainConfig cfg;
    cfg.batch_size = 8;
    cfg.lr = 1e-3;
    cfg.pretrain_epochs = 2;
    cfg.eval_epochs = 1;
    cfg.k_ratio = 0.4;
    cfg.schedule = {0.1, 0.1};
    cfg.fixed_tau = 0.1;

    cfg.mode = TrainMode::priorcl;
    const PretrainResult flat_adaptive = pretrain(ds, enc, cfg, 17);
    cfg.mode = TrainMode::basic_feature;
    const PretrainResult fixed_tau = pretrain(ds, enc, cfg, 17);
    const bool adaptive_eq_fixed = params_bitwise_equal(flat_adaptive.params, fixed_tau.params) &&
                                   flat_adaptive.loss_history == fixed_tau.loss_history;

    cfg.k_ratio = 0.1; // k_from_ratio(8, 0.1) = 1
    const PretrainResult top1_mined = pretrain(ds, enc, cfg, 17);
    cfg.mode = TrainMode::basic;
    const PretrainResult top1 = pretrain(ds, enc, cfg, 17);
    const bool mined_eq_basic = params_bitwise_equal(top1_mined.params, top1.params) &&
                                top1_mined.loss_history == top1.loss_history;

    CheckResult r;
    r.pass = worst_uniform <= cap && worst_single <= cap && adaptive_eq_fixed && mined_eq_basic;
    r.detail = "shared-tau identity worst " + fmt(worst_uniform, 3) +
               ", single-positive identity worst " + fmt(worst_single, 3) + " (cap " + fmt(cap) +
               ", 100 plans each); flat-schedule == fixed-tau run: " +
               (adaptive_eq_fixed ? "bitwise equal" : "DIFFERS") +
               ", k=1 == single-positive run: " + (mined_eq_basic ? "bitwise equal" : "DIFFERS");
    return r;
}

// ---------------------------------------------------------------------------
// 4. Temperature response: strong on hard samples, weak on easy ones.
// ---------------------------------------------------------------------------

CheckResult check_temperature_response() {
    GradientCurveConfig cfg; // canonical 10-positive / 100-negative instance
    const std::vector<double>& taus = cfg.taus;

    auto magnitudes = [&taus](const GradientCurveConfig& c, double s) {
        std::vector<double> out;
        for (double tau : taus) out.push_back(std::abs(gradient_at(c, tau, s)));
        return out;
    };
    auto strictly_decreasing = [](const std::vector<double>& v) {
        for (std::size_t i = 1; i < v.size(); ++i)
            if (!(v[i] < v[i - 1])) return false;
        return true;
    };

    const std::vector<double> hard_pos = magnitudes(cfg, -0.5);
    GradientCurveConfig neg = cfg;
    neg.sweep_positive = false;
    const std::vector<double> hard_neg = magnitudes(neg, 0.9);
    const std::vector<double> easy = magnitudes(cfg, 0.999);

    const auto [easy_lo, easy_hi] = std::minmax_element(easy.begin(), easy.end());
    const double easy_ratio = *easy_hi / *easy_lo;
    const double easy_spread = *easy_hi - *easy_lo;
    const auto [hard_lo, hard_hi] = std::minmax_element(hard_pos.begin(), hard_pos.end());
    const double hard_spread = *hard_hi - *hard_lo;

    const bool hard_ordered = strictly_decreasing(hard_pos) && strictly_decreasing(hard_neg);
    const bool easy_flat =
        easy_ratio < 3.0e5 && easy_spread < 0.12 && easy_spread < 0.1 * hard_spread;

    CheckResult r;
    r.pass = hard_ordered && easy_flat;
    r.detail = "|grad| over tau " + fmt_list(taus, 2) + ": hard positive " + fmt_list(hard_pos) +
               " and hard negative " + fmt_list(hard_neg) +
               (hard_ordered ? " both strictly decreasing" : " NOT strictly decreasing") +
               "; easy positive ratio " + fmt(easy_ratio, 3) + " < 3e+05, spread " +
               fmt(easy_spread, 3) + " < 0.12 and < 0.1 x hard spread " + fmt(hard_spread, 3);
    return r;
}

// ---------------------------------------------------------------------------
// 5. Band-energy features and the spectrum math under them.
// ---------------------------------------------------------------------------

std::vector<std::complex<double>> direct_dft(const std::vector<double>& x) {
    const std::size_t n = x.size();
    std::vector<std::complex<double>> out(n);
    const double step = 2.0 * 3.14159265358979323846 / static_cast<double>(n);
    for (std::size_t k = 0; k < n; ++k) {
        std::complex<double> acc(0.0, 0.0);
        for (std::size_t m = 0; m < n; ++m) {
            // (k*m) mod n keeps the angle small; sin/cos of huge arguments
            // would swamp the comparison with their own rounding.
            const std::size_t idx = (k * m) % n;
            acc += x[m] * std::polar(1.0, -step * static_cast<double>(idx));
        }
        out[k] = acc;
    }
    return out;
}

CheckResult check_prior_features() {
    const double rate = 100.0;
    const std::size_t n = samples_per_epoch(rate);

    // One pure tone per rhythm band, each on an exact DFT bin.
    const std::array<double, 4> tone_hz = {2.5, 6.0, 10.0, 20.0};
    double worst_fraction = 1.0;
    for (std::size_t band = 0; band < 4; ++band) {
        Epoch e;
        e.sample_rate_hz = rate;
        e.samples.resize(n);
        for (std::size_t t = 0; t < n; ++t)
            e.samples[t] =
                40.0 * std::sin(2.0 * 3.14159265358979323846 * tone_hz[band] *
                                static_cast<double>(t) / rate);
        const PriorFeature f = compute_prior_feature(e);
        worst_fraction = std::min(worst_fraction, f.as_array()[band] / f.total());
    }

    // Transform against the direct quadratic definition on a random signal.
    Rng rng(9005);
    std::vector<double> x(n);
    for (double& v : x) v = rng.uniform(-1.0, 1.0);
    std::vector<detail::cdouble> cx(n);
    for (std::size_t i = 0; i < n; ++i) cx[i] = detail::cdouble(x[i], 0.0);
    const std::vector<detail::cdouble> fast = detail::dft_complex(cx);
    const std::vector<std::complex<double>> slow = direct_dft(x);
    double worst_abs = 0.0, scale = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
        worst_abs = std::max(worst_abs, std::abs(fast[k] - slow[k]));
        scale = std::max(scale, std::abs(slow[k]));
    }
    const double dft_rel = worst_abs / scale;

    // Energy conservation between the two domains.
    const Spectrum spec = dft_power(x, rate);
    double time_energy = 0.0;
    for (double v : x) time_energy += v * v;
    double freq_energy = 0.0;
    for (double m : spec.magnitudes_sq) freq_energy += m;
    freq_energy /= static_cast<double>(n);
    const double parseval_rel = std::abs(time_energy - freq_energy) / time_energy;

    CheckResult r;
    r.pass = worst_fraction >= 0.99 && dft_rel <= 1e-9 && parseval_rel <= 1e-9;
    r.detail = "worst in-band energy fraction " + fmt(worst_fraction, 6) +
               " (floor 0.99); transform vs direct sum rel err " + fmt(dft_rel, 3) +
               "; energy conservation rel err " + fmt(parseval_rel, 3) + " (caps 1e-09, N = " +
               std::to_string(n) + ")";
    return r;
}

// ---------------------------------------------------------------------------
// 6. Mined positives carry the anchor's label.
// ---------------------------------------------------------------------------

CheckResult check_mining_precision() {
    const std::size_t per_class = 10;
    const std::size_t raws = per_class * kNumStages;
    const std::size_t k = k_from_ratio(raws, 0.4);
    const TempSchedule schedule{0.05, 0.1};
    double precision_sum = 0.0, precision_min = 1.0;
    const std::size_t batches = 10;
    for (std::uint64_t seed = 1001; seed <= 1000 + batches; ++seed) {
        const Rng root(seed);
        std::vector<PriorFeature> view_features;
        std::vector<SleepStage> view_labels;
        view_features.reserve(2 * raws);
        view_labels.reserve(2 * raws);
        for (std::size_t g = 0; g < raws; ++g) {
            const SleepStage stage = stage_from_index(g / per_class);
            Rng child = root.derive(g);
            const Epoch e = synth_epoch(stage, 100.0, child);
            const PriorFeature f = compute_prior_feature(e);
            for (int dup = 0; dup < 2; ++dup) {
                view_features.push_back(f);
                view_labels.push_back(stage);
            }
        }
        const std::vector<ContrastPlan> plans = plan_batch(view_features, k, schedule);
        const double p = positive_label_precision(plans, view_labels);
        precision_sum += p;
        precision_min = std::min(precision_min, p);
    }
    const double mean = precision_sum / static_cast<double>(batches);

    CheckResult r;
    r.pass = mean >= 0.6;
    r.detail = "mean same-label precision " + fmt(mean, 4) + " (worst batch " +
               fmt(precision_min, 4) + ") over " + std::to_string(batches) +
               " balanced batches, k = " + std::to_string(k) + " of " +
               std::to_string(2 * raws) + " views (floor 0.6)";
    return r;
}

// ---------------------------------------------------------------------------
// 7-9. Desk-scale pretraining experiment shared by the last training checks.
// ---------------------------------------------------------------------------

struct Experiment {
    bool ran = false;
    Dataset dataset;
    EncoderConfig encoder;
    TrainConfig train;
    std::vector<std::uint64_t> seeds;
    // Mean linear-eval accuracy per mode, and the per-seed pretrained
    // encoders of the full method for the label-efficiency check.
    double basic = 0.0, basic_feature = 0.0, priorcl = 0.0, unbiased = 0.0;
    std::vector<ModelParams> priorcl_params;
};

Experiment g_experiment;

void run_experiment() {
    Experiment& ex = g_experiment;
    SynthProfile profile;
    for (double& s : profile.noise_sigma) s *= 3.0; // keeps ranking informative, not trivial
    ex.dataset = synth_dataset(100, 100.0, 10, 42, profile);

    ex.train = desk_profile();
    ex.train.lr = 3e-3;
    ex.train.k_ratio = 0.4;
    ex.train.schedule = {0.05, 0.1};
    ex.train.fixed_tau = 0.1;
    ex.seeds = {1, 2, 3, 4, 5};
    TrainConfig eval_cfg = ex.train;
    eval_cfg.lr = 0.1; // linear head only, frozen encoder

    const std::array<TrainMode, 4> modes = {TrainMode::basic, TrainMode::basic_feature,
                                            TrainMode::priorcl, TrainMode::unbiased};
    std::array<double, 4> acc_sum{};
    for (const std::uint64_t seed : ex.seeds) {
        const auto [train, test] =
            split_by_subject(ex.dataset, ex.train.train_fraction, Rng(seed).derive(detail::kStreamSplit));
        for (std::size_t m = 0; m < modes.size(); ++m) {
            TrainConfig cfg = ex.train;
            cfg.mode = modes[m];
            PretrainResult pr = pretrain(train, ex.encoder, cfg, seed);
            if (modes[m] == TrainMode::priorcl) ex.priorcl_params.push_back(pr.params);
            const Metrics metrics = linear_eval(pr.params, train, test, eval_cfg, seed);
            acc_sum[m] += metrics.accuracy;
        }
    }
    const double n = static_cast<double>(ex.seeds.size());
    ex.basic = acc_sum[0] / n;
    ex.basic_feature = acc_sum[1] / n;
    ex.priorcl = acc_sum[2] / n;
    ex.unbiased = acc_sum[3] / n;
    ex.ran = true;
}

CheckResult check_mode_ordering() {
    run_experiment();
    const Experiment& ex = g_experiment;
    const double gap_full = ex.unbiased - ex.priorcl;
    const double gap_basic = ex.unbiased - ex.basic;
    const bool ordered = ex.unbiased >= ex.priorcl && ex.priorcl >= ex.basic;
    const bool margin = ex.priorcl - ex.basic >= 0.03;
    const bool gap_shrinks = gap_full < gap_basic;

    CheckResult r;
    r.pass = ordered && margin && gap_shrinks;
    r.detail = "mean accuracy over 5 seeds: unbiased " + fmt(ex.unbiased) + " >= priorcl " +
               fmt(ex.priorcl) + " >= basic " + fmt(ex.basic) + "; priorcl - basic = " +
               fmt(ex.priorcl - ex.basic, 3) + " (floor 0.03); unbiased gap " + fmt(gap_full, 3) +
               " < " + fmt(gap_basic, 3);
    return r;
}

CheckResult check_adaptive_temperature_gain() {
    const Experiment& ex = g_experiment;
    CheckResult r;
    if (!ex.ran) {
        r.detail = "prerequisite experiment from the mode-ordering check did not run";
        return r;
    }
    r.pass = ex.priorcl >= ex.basic_feature - 0.005;
    r.detail = "adaptive temperatures " + fmt(ex.priorcl) + " vs fixed temperature " +
               fmt(ex.basic_feature) + " mean accuracy (allowed slack 0.005; shares the "
               "mode-ordering run)";
    return r;
}

CheckResult check_label_efficiency() {
    const Experiment& ex = g_experiment;
    if (!ex.ran) {
        CheckResult r;
        r.detail = "prerequisite experiment from the mode-ordering check did not run";
        return r;
    }
    double ft_sum = 0.0, sup_sum = 0.0;
    std::size_t wins = 0;
    for (std::size_t i = 0; i < ex.seeds.size(); ++i) {
        const std::uint64_t seed = ex.seeds[i];
        const auto [train, test] = split_by_subject(ex.dataset, ex.train.train_fraction,
                                                    Rng(seed).derive(detail::kStreamSplit));
        const Metrics ft =
            finetune(ex.priorcl_params[i], train, test, ex.train.finetune_recordings, ex.train, seed);
        // The supervised baseline sees exactly the recordings finetuning
        // selects, so the comparison is paired on the labeled budget.
        const Dataset subset =
            select_recordings(train, ex.train.finetune_recordings, seed);
        const Metrics sup = train_supervised(subset, test, ex.encoder, ex.train, seed);
        ft_sum += ft.accuracy;
        sup_sum += sup.accuracy;
        wins += ft.accuracy >= sup.accuracy ? 1 : 0;
    }
    const double n = static_cast<double>(ex.seeds.size());
    const double ft_mean = ft_sum / n, sup_mean = sup_sum / n;

    CheckResult r;
    r.pass = ft_mean >= sup_mean;
    r.detail = "1 labeled recording: finetuned " + fmt(ft_mean) +
               " vs supervised from scratch " + fmt(sup_mean) + " mean accuracy, " +
               std::to_string(wins) + "/" + std::to_string(ex.seeds.size()) + " paired seeds";
    return r;
}

// ---------------------------------------------------------------------------
// 10. Recording container: byte-exact round-trips and fuzz resilience.
// ---------------------------------------------------------------------------

std::string random_token(Rng& rng, std::size_t lo, std::size_t hi) {
    static const char alphabet[] =
        "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789_-";
    const std::size_t len = lo + rng.below(hi - lo + 1);
    std::string out;
    for (std::size_t i = 0; i < len; ++i) out += alphabet[rng.below(sizeof(alphabet) - 1)];
    return out;
}

EdfFile random_edf(Rng& rng) {
    EdfFile f;
    f.header.version = "0";
    f.header.patient = random_token(rng, 1, 24);
    f.header.recording = random_token(rng, 1, 24);
    f.header.start_date = "05.08.26";
    f.header.start_time = "23.41.07";
    f.header.reserved = random_token(rng, 0, 12);
    f.header.n_records = rng.below(5);
    const std::array<double, 4> durations = {1.0, 2.5, 30.0, 0.5};
    f.header.record_duration_s = durations[rng.below(durations.size())];
    const std::size_t ns = 1 + rng.below(4);
    for (std::size_t i = 0; i < ns; ++i) {
        EdfSignal s;
        s.label = random_token(rng, 1, 16);
        s.transducer = random_token(rng, 0, 20);
        s.dimension = random_token(rng, 0, 8);
        s.physical_min = -static_cast<double>(1 + rng.below(500));
        s.physical_max = static_cast<double>(1 + rng.below(500));
        s.digital_min = -static_cast<int>(1 + rng.below(2048));
        s.digital_max = static_cast<int>(rng.below(2048));
        s.prefiltering = random_token(rng, 0, 20);
        s.samples_per_record = 1 + rng.below(64);
        s.reserved = random_token(rng, 0, 12);
        f.header.signals.push_back(s);
        std::vector<std::int16_t> data(f.header.n_records * s.samples_per_record);
        for (std::int16_t& v : data)
            v = static_cast<std::int16_t>(static_cast<std::uint16_t>(rng.next_u64() & 0xffff));
        f.digital.push_back(std::move(data));
    }
    return f;
}

CheckResult check_edf_robustness() {
    Rng rng(9010);
    std::size_t roundtrips_ok = 0;
    const std::size_t files = 50;
    std::vector<std::string> bases;
    for (std::size_t i = 0; i < files; ++i) {
        const EdfFile f = random_edf(rng);
        const std::string bytes = write_edf(f);
        const EdfFile parsed = parse_edf(bytes);
        const std::string again = write_edf(parsed);
        if (bytes == again) ++roundtrips_ok;
        bases.push_back(bytes);
    }

    const std::size_t cases = 10000;
    std::size_t rejected = 0, accepted = 0, unstructured = 0;
    for (std::size_t i = 0; i < cases; ++i) {
        std::string victim;
        switch (rng.below(4)) {
            case 0: { // truncation
                const std::string& base = bases[rng.below(bases.size())];
                victim = base.substr(0, rng.below(base.size() + 1));
                break;
            }
            case 1: { // byte flips
                victim = bases[rng.below(bases.size())];
                const std::size_t flips = 1 + rng.below(8);
                for (std::size_t k = 0; k < flips && !victim.empty(); ++k)
                    victim[rng.below(victim.size())] =
                        static_cast<char>(rng.next_u64() & 0xff);
                break;
            }
            case 2: { // pure garbage
                victim.resize(rng.below(2048));
                for (char& c : victim) c = static_cast<char>(rng.next_u64() & 0xff);
                break;
            }
            default: { // trailing junk
                victim = bases[rng.below(bases.size())];
                victim.append(1 + rng.below(64), static_cast<char>(rng.next_u64() & 0xff));
                break;
            }
        }
        try {
            (void)parse_edf(victim);
            ++accepted;
        } catch (const Error&) {
            ++rejected; // structured rejection is the expected outcome
        } catch (...) {
            ++unstructured;
        }
    }

    CheckResult r;
    r.pass = roundtrips_ok == files && unstructured == 0;
    r.detail = std::to_string(roundtrips_ok) + "/" + std::to_string(files) +
               " byte-exact write/parse/write round-trips; " + std::to_string(cases) +
               " fuzz cases: " + std::to_string(rejected) + " rejected, " +
               std::to_string(accepted) + " parsed, " + std::to_string(unstructured) +
               " unstructured failures";
    return r;
}

// ---------------------------------------------------------------------------
// 11. Same config + seed twice -> byte-identical checkpoint and metrics.
// ---------------------------------------------------------------------------

std::string metrics_serialized(const Metrics& m) {
    json j;
    j["accuracy"] = m.accuracy;
    j["macro_f1"] = m.macro_f1;
    json per;
    for (std::size_t s = 0; s < kNumStages; ++s)
        per[to_string(stage_from_index(s))] = m.per_class_f1[s];
    j["per_class_f1"] = per;
    j["confusion"] = m.confusion;
    return j.dump();
}

CheckResult check_determinism() {
    const Dataset ds = synth_dataset(20, 100.0, 4, 11);
    EncoderConfig enc;
    enc.channels = {4, 4, 4, 8};
    enc.projection_hidden = 8;
    enc.projection_dim = 4;
    TrainConfig cfg;
    cfg.batch_size = 16;
    cfg.lr = 1e-3;
    cfg.pretrain_epochs = 3;
    cfg.eval_epochs = 5;
    cfg.schedule = {0.05, 0.1};
    TrainConfig eval_cfg = cfg;
    eval_cfg.lr = 0.1;

    auto one_run = [&]() {
        const auto [train, test] =
            split_by_subject(ds, 0.8, Rng(5).derive(detail::kStreamSplit));
        PretrainResult pr = pretrain(train, enc, cfg, 5);
        std::ostringstream checkpoint;
        save_checkpoint(checkpoint, pr.params);
        const Metrics m = linear_eval(pr.params, train, test, eval_cfg, 5);
        return std::pair<std::string, std::string>(checkpoint.str(), metrics_serialized(m));
    };
    const auto [ckpt_a, metrics_a] = one_run();
    const auto [ckpt_b, metrics_b] = one_run();

    CheckResult r;
    r.pass = ckpt_a == ckpt_b && metrics_a == metrics_b;
    r.detail = std::string("repeat run: checkpoint bytes ") +
               (ckpt_a == ckpt_b ? "identical" : "DIFFER") + " (" +
               std::to_string(ckpt_a.size()) + " bytes), metrics " +
               (metrics_a == metrics_b ? "identical" : "DIFFER");
    return r;
}

} // namespace

int main() {
    struct Named {
        const char* name;
        std::function<CheckResult()> run;
    };
    const std::vector<Named> checks = {
        {"loss gradients match finite differences", check_loss_gradients},
        {"encoder chain gradients match finite differences", check_chain_gradients},
        {"loss reductions and planner degeneracies", check_reductions},
        {"temperature response separates hard from easy samples", check_temperature_response},
        {"band-energy features and spectrum math", check_prior_features},
        {"mined positives carry the anchor's label", check_mining_precision},
        {"pretraining mode ordering on held-out subjects", check_mode_ordering},
        {"adaptive temperatures do not trail fixed temperature", check_adaptive_temperature_gain},
        {"pretrained encoder wins the low-label regime", check_label_efficiency},
        {"recording container round-trips and survives fuzzing", check_edf_robustness},
        {"identical runs produce identical artifacts", check_determinism},
    };

    std::size_t passed = 0;
    for (std::size_t i = 0; i < checks.size(); ++i) {
        const auto start = std::chrono::steady_clock::now();
        CheckResult result;
        try {
            result = checks[i].run();
        } catch (const std::exception& e) {
            result.pass = false;
            result.detail = std::string("unexpected exception: ") + e.what();
        }
        const double secs =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        passed += result.pass ? 1 : 0;
        std::printf("[%s] %2zu. %s: %s [%.1f s]\n", result.pass ? "PASS" : "FAIL", i + 1,
                    checks[i].name, result.detail.c_str(), secs);
        std::fflush(stdout);
    }
    std::printf("acceptance: %zu/%zu checks passed\n", passed, checks.size());
    return passed == checks.size() ? 0 : 1;
}
