// priorcl: command-line front end wiring run configurations to the library
// pipelines. Every subcommand writes its artifacts plus a full config
// snapshot into the run directory and prints a one-line JSON summary on
// stdout. Exit codes: 0 success, 1 validation error, 2 numerical-check
// failure, 3 I/O error. On failure, files created by the failed run are
// removed.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <iterator>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "priorcl/config.hpp"
#include "priorcl/edf.hpp"
#include "priorcl/loss.hpp"
#include "priorcl/mining.hpp"
#include "priorcl/model.hpp"
#include "priorcl/prior.hpp"
#include "priorcl/signal.hpp"
#include "priorcl/train.hpp"

#include "checks.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace priorcl;

namespace {

std::string fmt(double v) { return priorcl::detail::config_format(v); }

// Tracks everything a run creates so a failing run leaves no partial output.
class Outputs {
  public:
    Outputs(fs::path dir, bool created_dir) : dir_(std::move(dir)), created_dir_(created_dir) {}

    fs::path path(const std::string& name) {
        fs::path p = dir_ / name;
        created_.push_back(p);
        return p;
    }

    void write_text(const std::string& name, const std::string& text) {
        const fs::path p = path(name);
        std::ofstream os(p);
        if (!os) throw IoError("cannot open " + p.string() + " for writing");
        os << text;
        if (!os) throw IoError("write failed: " + p.string());
    }

    void discard() {
        std::error_code ec;
        for (const fs::path& p : created_) fs::remove(p, ec);
        if (created_dir_) fs::remove(dir_, ec); // only succeeds when empty
    }

    const fs::path& dir() const { return dir_; }

  private:
    fs::path dir_;
    bool created_dir_;
    std::vector<fs::path> created_;
};

// ---------------------------------------------------------------------------
// Dataset plumbing shared across subcommands.
// ---------------------------------------------------------------------------

Dataset ingest_edf_dataset(const RunConfig& cfg) {
    std::ifstream is(cfg.edf.path, std::ios::binary);
    if (!is) throw IoError("cannot open EDF file: " + cfg.edf.path);
    const std::string bytes((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
    const EdfFile file = parse_edf(bytes);
    Dataset ds = extract_channel(file, cfg.edf.channel);
    if (!cfg.edf.labels.empty()) ds = attach_labels(ds, read_label_csv(cfg.edf.labels));
    return trim_wake_padding(ds, cfg.edf.wake_trim);
}

SynthProfile scaled_profile(const RunConfig& cfg) {
    SynthProfile profile;
    for (double& s : profile.noise_sigma) s *= cfg.synth.noise_scale;
    return profile;
}

Dataset load_dataset(const RunConfig& cfg) {
    switch (cfg.source) {
        case DataSource::synth:
            return synth_dataset(cfg.synth.per_class, cfg.synth.sample_rate_hz,
                                 cfg.synth.subjects, cfg.synth.seed, scaled_profile(cfg));
        case DataSource::cache: return read_dataset_cache(cfg.cache_path);
        case DataSource::edf: return ingest_edf_dataset(cfg);
    }
    throw ContractError("unknown data source");
}

std::pair<Dataset, Dataset> split_for_run(const Dataset& ds, const RunConfig& cfg) {
    return split_by_subject(ds, cfg.train.train_fraction,
                            Rng(cfg.seed).derive(priorcl::detail::kStreamSplit));
}

ModelParams load_run_checkpoint(const RunConfig& cfg) {
    if (cfg.checkpoint.empty())
        throw ConfigError("this subcommand needs run.checkpoint to point at a saved encoder");
    return load_checkpoint(cfg.checkpoint, cfg.encoder);
}

std::vector<LabeledFeature> band_features(const Dataset& ds, const BandTable& bands,
                                          const char* what) {
    std::vector<LabeledFeature> out;
    out.reserve(ds.size());
    for (const Epoch& e : ds.epochs()) {
        if (!e.label)
            throw ConfigError(std::string(what) + " needs ground-truth labels on every epoch");
        out.push_back({compute_prior_feature(e, bands), *e.label});
    }
    return out;
}

json metrics_json(const Metrics& m) {
    json j;
    j["accuracy"] = m.accuracy;
    j["macro_f1"] = m.macro_f1;
    json per;
    for (std::size_t c = 0; c < kNumStages; ++c)
        per[to_string(stage_from_index(c))] = m.per_class_f1[c];
    j["per_class_f1"] = per;
    json rows = json::array();
    for (std::size_t t = 0; t < kNumStages; ++t) {
        json row = json::array();
        for (std::size_t p = 0; p < kNumStages; ++p) row.push_back(m.confusion[t][p]);
        rows.push_back(row);
    }
    j["confusion"] = rows;
    return j;
}

void write_metrics(Outputs& out, const Metrics& m) {
    out.write_text("metrics.json", metrics_json(m).dump(2) + "\n");
}

double mean_of(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

double sample_std(const std::vector<double>& v) {
    if (v.size() < 2) return 0.0;
    const double m = mean_of(v);
    double s = 0.0;
    for (double x : v) s += (x - m) * (x - m);
    return std::sqrt(s / static_cast<double>(v.size() - 1));
}

// One pretrain + linear-eval per configured seed. The workhorse behind the
// ablation and sweep grids.
std::vector<Metrics> eval_cells(const Dataset& train, const Dataset& test, const RunConfig& cfg,
                                const TrainConfig& tc) {
    std::vector<Metrics> out;
    out.reserve(tc.seeds.size());
    for (std::uint64_t seed : tc.seeds) {
        PretrainResult res = pretrain(train, cfg.encoder, tc, seed);
        TrainConfig ec = tc;
        ec.lr = cfg.eval_lr;
        out.push_back(linear_eval(res.params, train, test, ec, seed));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Subcommand handlers. Each returns the JSON summary; a handler may override
// the exit code (gradcheck reports numerical failures via code 2).
// ---------------------------------------------------------------------------

json cmd_gen_synth(const RunConfig& cfg, Outputs& out, int&) {
    const Dataset ds = synth_dataset(cfg.synth.per_class, cfg.synth.sample_rate_hz,
                                     cfg.synth.subjects, cfg.synth.seed, scaled_profile(cfg));
    const fs::path p = out.path("dataset.pcl");
    write_dataset_cache(p.string(), ds);
    json j;
    j["epochs"] = ds.size();
    j["subjects"] = ds.subject_list().size();
    j["sample_rate_hz"] = ds.sample_rate_hz();
    j["path"] = p.string();
    return j;
}

json cmd_ingest_edf(const RunConfig& cfg, Outputs& out, int&) {
    std::vector<std::string> missing;
    if (cfg.edf.path.empty()) missing.push_back("data.edf.path");
    if (cfg.edf.channel.empty()) missing.push_back("data.edf.channel");
    if (!missing.empty()) {
        std::string msg = "ingest-edf needs:";
        for (const std::string& m : missing) msg += "\n  - " + m;
        throw ConfigError(msg);
    }
    const Dataset ds = ingest_edf_dataset(cfg);
    if (ds.empty()) throw DomainError("EDF ingestion produced no epochs");
    std::size_t labeled = 0;
    for (const Epoch& e : ds.epochs()) labeled += e.label ? 1 : 0;
    const fs::path p = out.path("dataset.pcl");
    write_dataset_cache(p.string(), ds);
    json j;
    j["epochs"] = ds.size();
    j["labeled"] = labeled;
    j["subjects"] = ds.subject_list().size();
    j["sample_rate_hz"] = ds.sample_rate_hz();
    j["path"] = p.string();
    return j;
}

json cmd_featurize(const RunConfig& cfg, Outputs& out, int&) {
    const Dataset ds = load_dataset(cfg);
    std::string csv = "epoch,recording,stage,delta,theta,alpha,beta\n";
    for (std::size_t i = 0; i < ds.size(); ++i) {
        const Epoch& e = ds.epochs()[i];
        const PriorFeature f = compute_prior_feature(e, cfg.bands);
        csv += std::to_string(i) + "," + e.source_id + "," +
               (e.label ? to_string(*e.label) : "") + "," + fmt(f.e_delta) + "," +
               fmt(f.e_theta) + "," + fmt(f.e_alpha) + "," + fmt(f.e_beta) + "\n";
    }
    out.write_text("features.csv", csv);
    json j;
    j["rows"] = ds.size();
    j["path"] = (out.dir() / "features.csv").string();
    return j;
}

// Reconstructs the exact first pretraining batch (same shuffle and
// augmentation streams) and dumps its contrast plans.
json cmd_plan_dump(const RunConfig& cfg, Outputs& out, int&) {
    const Dataset full = load_dataset(cfg);
    const auto [train, test] = split_for_run(full, cfg);
    (void)test;
    const TrainConfig& tc = cfg.train;
    if (tc.mode == TrainMode::supervised || tc.mode == TrainMode::finetune)
        throw ConfigError(std::string("mode ") + to_string(tc.mode) +
                          " trains on labels directly and has no contrast plans");
    if (train.size() < tc.batch_size)
        throw ConfigError("training split has " + std::to_string(train.size()) +
                          " epochs, need at least one batch of " + std::to_string(tc.batch_size));

    const Rng root(cfg.seed);
    const std::vector<std::size_t> order = priorcl::detail::shuffled_indices(
        train.size(), root.derive(priorcl::detail::kStreamShuffle).derive(0));

    // Plans depend only on the raw parents (features and labels survive
    // augmentation unchanged), so the views themselves need not be built.
    std::vector<PriorFeature> feats;
    std::vector<SleepStage> labels;
    for (std::size_t m = 0; m < tc.batch_size; ++m) {
        const std::size_t raw = order[m];
        const Epoch& parent = train.epochs()[raw];
        if (tc.mode == TrainMode::unbiased) {
            if (!parent.label)
                throw ConfigError("unbiased plans need ground-truth labels on every epoch");
            labels.push_back(*parent.label);
            labels.push_back(*parent.label);
        } else {
            const PriorFeature f = compute_prior_feature(parent, cfg.bands);
            feats.push_back(f);
            feats.push_back(f);
        }
    }
    const std::size_t k = k_from_ratio(tc.batch_size, tc.k_ratio);
    const std::vector<ContrastPlan> plans =
        mode_plans(tc.mode, feats, labels, k, tc.schedule, tc.fixed_tau);

    std::string csv = "anchor,role,rank,view,temperature\n";
    for (const ContrastPlan& plan : plans) {
        for (std::size_t r = 0; r < plan.positives.size(); ++r)
            csv += std::to_string(plan.anchor) + ",positive," + std::to_string(r) + "," +
                   std::to_string(plan.positives[r].view) + "," +
                   fmt(plan.positives[r].temperature) + "\n";
        for (std::size_t r = 0; r < plan.negatives.size(); ++r)
            csv += std::to_string(plan.anchor) + ",negative," + std::to_string(r) + "," +
                   std::to_string(plan.negatives[r].view) + "," +
                   fmt(plan.negatives[r].temperature) + "\n";
    }
    out.write_text("plans.csv", csv);
    json j;
    j["mode"] = to_string(tc.mode);
    j["views"] = 2 * tc.batch_size;
    j["anchors"] = plans.size();
    j["path"] = (out.dir() / "plans.csv").string();
    return j;
}

json cmd_pretrain(const RunConfig& cfg, Outputs& out, int&) {
    const Dataset full = load_dataset(cfg);
    const auto [train, test] = split_for_run(full, cfg);
    (void)test;
    const PretrainResult res = pretrain(train, cfg.encoder, cfg.train, cfg.seed);

    const fs::path ckpt = out.path("encoder.pclm");
    save_checkpoint(ckpt.string(), res.params);
    std::string csv = "epoch,loss\n";
    for (std::size_t e = 0; e < res.loss_history.size(); ++e)
        csv += std::to_string(e) + "," + fmt(res.loss_history[e]) + "\n";
    out.write_text("loss.csv", csv);

    json j;
    j["mode"] = to_string(cfg.train.mode);
    j["train_epochs"] = train.size();
    j["pretrain_epochs"] = res.loss_history.size();
    j["final_loss"] = res.loss_history.empty() ? 0.0 : res.loss_history.back();
    j["checkpoint"] = ckpt.string();
    return j;
}

json cmd_linear_eval(const RunConfig& cfg, Outputs& out, int&) {
    const Dataset full = load_dataset(cfg);
    const auto [train, test] = split_for_run(full, cfg);
    ModelParams params = load_run_checkpoint(cfg);
    TrainConfig ec = cfg.train;
    ec.lr = cfg.eval_lr;
    const Metrics m = linear_eval(params, train, test, ec, cfg.seed);
    write_metrics(out, m);
    json j;
    j["accuracy"] = m.accuracy;
    j["macro_f1"] = m.macro_f1;
    j["test_epochs"] = test.size();
    return j;
}

json cmd_finetune(const RunConfig& cfg, Outputs& out, int&) {
    const Dataset full = load_dataset(cfg);
    const auto [train, test] = split_for_run(full, cfg);
    const ModelParams params = load_run_checkpoint(cfg);
    const Metrics m =
        finetune(params, train, test, cfg.train.finetune_recordings, cfg.train, cfg.seed);
    write_metrics(out, m);
    json j;
    j["accuracy"] = m.accuracy;
    j["macro_f1"] = m.macro_f1;
    j["recordings"] = cfg.train.finetune_recordings;
    return j;
}

json cmd_supervised(const RunConfig& cfg, Outputs& out, int&) {
    const Dataset full = load_dataset(cfg);
    const auto [train, test] = split_for_run(full, cfg);
    const Metrics m = train_supervised(train, test, cfg.encoder, cfg.train, cfg.seed);
    write_metrics(out, m);
    json j;
    j["accuracy"] = m.accuracy;
    j["macro_f1"] = m.macro_f1;
    return j;
}

json cmd_knn_baseline(const RunConfig& cfg, Outputs& out, int&) {
    const Dataset full = load_dataset(cfg);
    const auto [train, test] = split_for_run(full, cfg);
    const Metrics m = knn_prior_baseline(band_features(train, cfg.bands, "knn-baseline"),
                                         band_features(test, cfg.bands, "knn-baseline"),
                                         cfg.knn_k);
    write_metrics(out, m);
    json j;
    j["accuracy"] = m.accuracy;
    j["macro_f1"] = m.macro_f1;
    j["k"] = cfg.knn_k;
    return j;
}

json cmd_gradcheck(const RunConfig& cfg, Outputs& out, int& exit_code) {
    json report = json::array();
    bool all_pass = true;
    auto record = [&](const std::string& name, double worst, double rel, double abs) {
        const bool pass = worst <= 1.0;
        all_pass = all_pass && pass;
        json c;
        c["name"] = name;
        c["worst_margin_ratio"] = worst; // <= 1 means within rel tolerance + abs floor
        c["rel_tolerance"] = rel;
        c["abs_floor"] = abs;
        c["pass"] = pass;
        report.push_back(c);
    };

    Rng rng(cfg.seed);
    double worst = 0.0;
    const std::size_t instances = 200;
    for (std::size_t i = 0; i < instances; ++i) {
        const checks::LossInstance inst = checks::random_loss_instance(rng);
        worst = std::max(worst, checks::loss_fd_worst_ratio(inst));
    }
    record("loss_gradients_vs_fd", worst, checks::kLossFdRel, checks::kLossFdAbs);

    checks::ChainSetup setup = checks::micro_chain(cfg.seed);
    record("encoder_chain_vs_fd", checks::chain_fd_worst_ratio(setup), checks::kChainFdRel,
           checks::kChainFdAbs);

    out.write_text("gradcheck.json", report.dump(2) + "\n");
    exit_code = all_pass ? 0 : 2;
    json j;
    j["passed"] = all_pass;
    j["checks"] = report.size();
    return j;
}

json cmd_gradient_curve(const RunConfig&, Outputs& out, int&) {
    std::string csv = "sweep,tau,s,grad\n";
    std::size_t rows = 0;
    for (bool positive : {true, false}) {
        GradientCurveConfig cc;
        cc.sweep_positive = positive;
        for (const GradientCurvePoint& pt : gradient_curve(cc)) {
            csv += std::string(positive ? "positive" : "negative") + "," + fmt(pt.tau) + "," +
                   fmt(pt.s) + "," + fmt(pt.grad) + "\n";
            ++rows;
        }
    }
    out.write_text("curves.csv", csv);
    json j;
    j["rows"] = rows;
    j["path"] = (out.dir() / "curves.csv").string();
    return j;
}

json cmd_ablation(const RunConfig& cfg, Outputs& out, int&) {
    const Dataset full = load_dataset(cfg);
    const auto [train, test] = split_for_run(full, cfg);

    struct Variant {
        std::string name;
        std::vector<double> acc, f1;
    };
    std::vector<Variant> table;

    auto contrastive_variant = [&](const std::string& name, TrainMode mode) {
        TrainConfig tc = cfg.train;
        tc.mode = mode;
        Variant v{name, {}, {}};
        for (const Metrics& m : eval_cells(train, test, cfg, tc)) {
            v.acc.push_back(m.accuracy);
            v.f1.push_back(m.macro_f1);
        }
        table.push_back(std::move(v));
    };

    contrastive_variant("basic", TrainMode::basic);
    {
        // The feature-only variant classifies on the prior features directly.
        const Metrics m = knn_prior_baseline(band_features(train, cfg.bands, "ablation"),
                                             band_features(test, cfg.bands, "ablation"),
                                             cfg.knn_k);
        Variant v{"feature", {}, {}};
        for (std::size_t i = 0; i < cfg.train.seeds.size(); ++i) {
            v.acc.push_back(m.accuracy);
            v.f1.push_back(m.macro_f1);
        }
        table.push_back(std::move(v));
    }
    contrastive_variant("basic_feature", TrainMode::basic_feature);
    contrastive_variant("priorcl", TrainMode::priorcl);

    std::string runs = "variant,seed,accuracy,macro_f1\n";
    for (const Variant& v : table)
        for (std::size_t i = 0; i < v.acc.size(); ++i)
            runs += v.name + "," + std::to_string(cfg.train.seeds[i]) + "," + fmt(v.acc[i]) +
                    "," + fmt(v.f1[i]) + "\n";
    out.write_text("ablation_runs.csv", runs);

    std::string csv = "variant,accuracy_mean,accuracy_std,macro_f1_mean,macro_f1_std\n";
    json acc;
    for (const Variant& v : table) {
        csv += v.name + "," + fmt(mean_of(v.acc)) + "," + fmt(sample_std(v.acc)) + "," +
               fmt(mean_of(v.f1)) + "," + fmt(sample_std(v.f1)) + "\n";
        acc[v.name] = mean_of(v.acc);
    }
    out.write_text("ablation.csv", csv);

    json j;
    j["rows"] = table.size();
    j["seeds"] = cfg.train.seeds.size();
    j["accuracy"] = acc;
    return j;
}

json cmd_sweep(const RunConfig& cfg, Outputs& out, int&) {
    const Dataset full = load_dataset(cfg);
    const auto [train, test] = split_for_run(full, cfg);

    std::string csv =
        "axis,r,tau_min,tau_max,accuracy_mean,accuracy_std,macro_f1_mean,macro_f1_std\n";
    std::size_t rows = 0;
    double best_acc = -1.0;
    json best;

    auto run_cell = [&](const char* axis, const TrainConfig& tc) {
        std::vector<double> acc, f1;
        for (const Metrics& m : eval_cells(train, test, cfg, tc)) {
            acc.push_back(m.accuracy);
            f1.push_back(m.macro_f1);
        }
        csv += std::string(axis) + "," + fmt(tc.k_ratio) + "," + fmt(tc.schedule.tau_min) + "," +
               fmt(tc.schedule.tau_max) + "," + fmt(mean_of(acc)) + "," + fmt(sample_std(acc)) +
               "," + fmt(mean_of(f1)) + "," + fmt(sample_std(f1)) + "\n";
        ++rows;
        if (mean_of(acc) > best_acc) {
            best_acc = mean_of(acc);
            best = {{"axis", axis},
                    {"r", tc.k_ratio},
                    {"tau_min", tc.schedule.tau_min},
                    {"tau_max", tc.schedule.tau_max},
                    {"accuracy", best_acc}};
        }
    };

    for (double r : cfg.sweep_r) {
        TrainConfig tc = cfg.train;
        tc.mode = TrainMode::priorcl;
        tc.k_ratio = r;
        run_cell("R", tc);
    }
    // Temperature grid: every (tau_min, tau_max) pair with tau_min <= tau_max;
    // the diagonal entries are fixed-temperature runs.
    for (double lo : cfg.sweep_tau) {
        for (double hi : cfg.sweep_tau) {
            if (lo > hi) continue;
            TrainConfig tc = cfg.train;
            tc.mode = TrainMode::priorcl;
            tc.schedule = TempSchedule{lo, hi};
            run_cell("tau", tc);
        }
    }
    out.write_text("sweep.csv", csv);

    json j;
    j["rows"] = rows;
    j["best"] = best;
    j["path"] = (out.dir() / "sweep.csv").string();
    return j;
}

// ---------------------------------------------------------------------------
// Entry point.
// ---------------------------------------------------------------------------

using Handler = std::function<json(const RunConfig&, Outputs&, int&)>;

const std::vector<std::pair<std::string, std::pair<const char*, Handler>>>& handlers() {
    static const std::vector<std::pair<std::string, std::pair<const char*, Handler>>> h = {
        {"gen-synth", {"Synthesize a labeled dataset and cache it", cmd_gen_synth}},
        {"ingest-edf", {"Convert an EDF recording (plus label CSV) into a dataset cache",
                        cmd_ingest_edf}},
        {"featurize", {"Emit per-epoch band-energy features as CSV", cmd_featurize}},
        {"plan-dump", {"Dump the first batch's contrast plans as CSV", cmd_plan_dump}},
        {"pretrain", {"Contrastive pretraining; writes encoder checkpoint and loss curve",
                      cmd_pretrain}},
        {"linear-eval", {"Frozen-encoder linear evaluation of a checkpoint", cmd_linear_eval}},
        {"finetune", {"Fine-tune a checkpoint on a recording subset", cmd_finetune}},
        {"supervised", {"Train the encoder+classifier from scratch on labels", cmd_supervised}},
        {"knn-baseline", {"KNN classification on prior features alone", cmd_knn_baseline}},
        {"gradcheck", {"Verify closed-form gradients against finite differences",
                       cmd_gradcheck}},
        {"gradient-curve", {"Emit per-temperature gradient curves as CSV", cmd_gradient_curve}},
        {"ablation", {"Run the four-variant comparison table", cmd_ablation}},
        {"sweep", {"Run the R x temperature sensitivity grid", cmd_sweep}},
    };
    return h;
}

RunConfig build_config(const std::string& config_path, const std::vector<std::string>& sets,
                       const std::string& seed, const std::string& out_dir,
                       const std::string& checkpoint) {
    std::string text;
    if (!config_path.empty()) {
        std::ifstream is(config_path);
        if (!is) throw IoError("cannot open config file: " + config_path);
        text.assign(std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>());
    }
    std::vector<std::pair<std::string, std::string>> overrides;
    for (const std::string& s : sets) {
        const std::size_t eq = s.find('=');
        if (eq == std::string::npos)
            throw ConfigError("--set needs key=value, got '" + s + "'");
        overrides.emplace_back(s.substr(0, eq), s.substr(eq + 1));
    }
    if (!seed.empty()) overrides.emplace_back("run.seed", seed);
    if (!out_dir.empty()) overrides.emplace_back("run.out_dir", out_dir);
    if (!checkpoint.empty()) overrides.emplace_back("run.checkpoint", checkpoint);
    return parse_run_config(text, overrides);
}

int run(const std::string& command, const RunConfig& cfg) {
    std::error_code ec;
    const bool created_dir = fs::create_directories(cfg.out_dir, ec);
    if (ec) throw IoError("cannot create run directory " + cfg.out_dir + ": " + ec.message());
    Outputs out(cfg.out_dir, created_dir);
    try {
        out.write_text("config.txt", serialize_run_config(cfg));
        int code = 0;
        const Handler& handler = [&]() -> const Handler& {
            for (const auto& [name, entry] : handlers())
                if (name == command) return entry.second;
            throw ContractError("unregistered subcommand " + command);
        }();
        json summary = handler(cfg, out, code);
        summary["command"] = command;
        summary["out_dir"] = cfg.out_dir;
        std::cout << summary.dump() << "\n";
        return code;
    } catch (...) {
        out.discard();
        throw;
    }
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"SleepPriorCL pipelines: prior-guided contrastive learning for sleep staging"};
    app.require_subcommand(1);

    std::string config_path, seed, out_dir, checkpoint;
    std::vector<std::string> sets;
    std::string chosen;
    for (const auto& [name, entry] : handlers()) {
        CLI::App* sub = app.add_subcommand(name, entry.first);
        sub->add_option("--config", config_path, "Run configuration file (key=value lines)");
        sub->add_option("--set", sets, "Override one config key (key=value), repeatable");
        sub->add_option("--seed", seed, "Override run.seed");
        sub->add_option("--out", out_dir, "Override run.out_dir");
        sub->add_option("--checkpoint", checkpoint, "Override run.checkpoint");
        sub->callback([&chosen, n = name] { chosen = n; });
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 1;
    }

    try {
        return run(chosen, build_config(config_path, sets, seed, out_dir, checkpoint));
    } catch (const IoError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const ParseError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const std::filesystem::filesystem_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }
}
