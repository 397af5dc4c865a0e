#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>
#include <sys/wait.h>

#include <catch2/catch_amalgamated.hpp>
#include <json.hpp>

#include "priorcl/edf.hpp"
#include "priorcl/signal.hpp"

// End-to-end tests that drive the installed binary exactly like a user:
// spawn a process, inspect exit code, stdout JSON, stderr, and artifacts.
// The binary path arrives via the PRIORCL_CLI_PATH environment variable.

using namespace priorcl;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct CliResult {
    int code = -1;
    std::string out;
    std::string err;
    json summary; // parsed from the last stdout line when possible
};

std::string read_file(const fs::path& p) {
    std::ifstream is(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>()};
}

const std::string& cli_path() {
    static const std::string path = [] {
        const char* p = std::getenv("PRIORCL_CLI_PATH");
        REQUIRE(p != nullptr);
        return std::string(p);
    }();
    return path;
}

// Scratch directory per test run; tests write all artifacts below it.
fs::path scratch_dir() {
    static const fs::path dir = [] {
        fs::path d = fs::temp_directory_path() /
                     ("priorcl_cli_test_" + std::to_string(::getpid()));
        fs::remove_all(d);
        fs::create_directories(d);
        return d;
    }();
    return dir;
}

CliResult run_cli(const std::string& args) {
    static int counter = 0;
    const fs::path out_file = scratch_dir() / ("stdout." + std::to_string(counter));
    const fs::path err_file = scratch_dir() / ("stderr." + std::to_string(counter));
    ++counter;
    const std::string cmd = "\"" + cli_path() + "\" " + args + " > " + out_file.string() +
                            " 2> " + err_file.string();
    const int raw = std::system(cmd.c_str());
    CliResult r;
    r.code = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
    r.out = read_file(out_file);
    r.err = read_file(err_file);
    if (!r.out.empty() && r.out.front() == '{')
        r.summary = json::parse(r.out, nullptr, false);
    return r;
}

// Small profile shared by the pipeline tests: fast but non-degenerate.
std::string micro_cfg() {
    static const std::string path = [] {
        const fs::path p = scratch_dir() / "micro.cfg";
        std::ofstream os(p);
        os << "data.synth.per_class = 16\n"
              "data.synth.subjects = 5\n"
              "train.batch_size = 8\n"
              "train.lr = 0.001\n"
              "train.pretrain_epochs = 2\n"
              "train.eval_epochs = 8\n"
              "train.seeds = 1,2\n"
              "encoder.channels = 4,4,4,8\n"
              "encoder.projection_hidden = 8\n"
              "encoder.projection_dim = 4\n";
        return p.string();
    }();
    return path;
}

std::string q(const fs::path& p) { return "\"" + p.string() + "\""; }

} // namespace

TEST_CASE("help exits zero and lists every subcommand", "[cli]") {
    const CliResult r = run_cli("--help");
    CHECK(r.code == 0);
    for (const char* sub :
         {"gen-synth", "ingest-edf", "featurize", "plan-dump", "pretrain", "linear-eval",
          "finetune", "supervised", "knn-baseline", "gradcheck", "gradient-curve", "ablation",
          "sweep"})
        CHECK(r.out.find(sub) != std::string::npos);
}

TEST_CASE("unknown subcommands and malformed flags exit 1", "[cli]") {
    CHECK(run_cli("frobnicate").code == 1);
    CHECK(run_cli("pretrain --set onlykey").code == 1);
}

TEST_CASE("invalid config exits 1 and reports every error at once", "[cli]") {
    const fs::path dir = scratch_dir() / "bad_config";
    const CliResult r = run_cli("pretrain --out " + q(dir) +
                                " --set train.lr=-1 --set train.momentum=7 --set no.such=1");
    CHECK(r.code == 1);
    CHECK(r.err.find("lr must be positive") != std::string::npos);
    CHECK(r.err.find("momentum must lie in [0, 1)") != std::string::npos);
    CHECK(r.err.find("unknown key 'no.such'") != std::string::npos);
    CHECK_FALSE(fs::exists(dir));
}

TEST_CASE("missing input files exit 3 and leave no partial outputs", "[cli]") {
    const fs::path dir = scratch_dir() / "io_fail";
    const CliResult r = run_cli("featurize --out " + q(dir) +
                                " --set data.source=cache --set data.cache.path=/no/such.pcl");
    CHECK(r.code == 3);
    CHECK_FALSE(fs::exists(dir));
}

TEST_CASE("gen-synth writes a loadable cache and a config snapshot", "[cli]") {
    const fs::path dir = scratch_dir() / "gen";
    const CliResult r = run_cli("gen-synth --out " + q(dir) +
                                " --set data.synth.per_class=4 --set data.synth.subjects=3");
    REQUIRE(r.code == 0);
    CHECK(r.summary["command"] == "gen-synth");
    CHECK(r.summary["epochs"] == 20);
    CHECK(r.summary["subjects"] == 3);
    REQUIRE(fs::exists(dir / "dataset.pcl"));
    REQUIRE(fs::exists(dir / "config.txt"));

    const Dataset ds = read_dataset_cache((dir / "dataset.pcl").string());
    CHECK(ds.size() == 20);
    CHECK(ds.subject_list().size() == 3);

    // The snapshot records the effective values, overrides included.
    const std::string snapshot = read_file(dir / "config.txt");
    CHECK(snapshot.find("data.synth.per_class = 4") != std::string::npos);
}

TEST_CASE("featurize emits one row per epoch", "[cli]") {
    const fs::path gen = scratch_dir() / "feat_gen";
    REQUIRE(run_cli("gen-synth --out " + q(gen) +
                    " --set data.synth.per_class=3 --set data.synth.subjects=3")
                .code == 0);
    const fs::path dir = scratch_dir() / "feat";
    const CliResult r =
        run_cli("featurize --out " + q(dir) + " --set data.source=cache --set data.cache.path=" +
                (gen / "dataset.pcl").string());
    REQUIRE(r.code == 0);
    const std::string csv = read_file(dir / "features.csv");
    CHECK(csv.rfind("epoch,recording,stage,delta,theta,alpha,beta\n", 0) == 0);
    std::size_t lines = 0;
    for (char c : csv) lines += c == '\n';
    CHECK(lines == 1 + 15);
}

TEST_CASE("plan-dump reproduces the first batch's plan shape", "[cli]") {
    const fs::path dir = scratch_dir() / "plans";
    const CliResult r = run_cli("plan-dump --config " + micro_cfg() + " --out " + q(dir));
    REQUIRE(r.code == 0);
    CHECK(r.summary["views"] == 16);
    CHECK(r.summary["anchors"] == 16);
    const std::string csv = read_file(dir / "plans.csv");
    CHECK(csv.rfind("anchor,role,rank,view,temperature\n", 0) == 0);
    // K = max(1, round(0.4 * 8)) = 3 positives and 16-1-3 = 12 negatives per
    // anchor, one row each, plus the header.
    std::size_t lines = 0;
    for (char c : csv) lines += c == '\n';
    CHECK(lines == 1 + 16 * 15);
    // The top positive sits at tau_min.
    CHECK(csv.find("0,positive,0,") != std::string::npos);
    CHECK(csv.find("0.050000000000000003") != std::string::npos);
}

TEST_CASE("pretrain then linear-eval runs end to end", "[cli]") {
    const fs::path pre = scratch_dir() / "pre";
    const CliResult r1 = run_cli("pretrain --config " + micro_cfg() + " --out " + q(pre));
    REQUIRE(r1.code == 0);
    REQUIRE(fs::exists(pre / "encoder.pclm"));
    REQUIRE(fs::exists(pre / "loss.csv"));
    CHECK(r1.summary["pretrain_epochs"] == 2);

    const fs::path ev = scratch_dir() / "eval";
    const CliResult r2 = run_cli("linear-eval --config " + micro_cfg() + " --out " + q(ev) +
                                 " --checkpoint " + (pre / "encoder.pclm").string());
    REQUIRE(r2.code == 0);
    const json metrics = json::parse(read_file(ev / "metrics.json"));
    const double acc = metrics["accuracy"].get<double>();
    CHECK(acc >= 0.0);
    CHECK(acc <= 1.0);
    CHECK(metrics["confusion"].size() == 5);
    CHECK(r2.summary["accuracy"].get<double>() == acc);
}

TEST_CASE("linear-eval without a checkpoint is a config error", "[cli]") {
    const fs::path dir = scratch_dir() / "eval_nockpt";
    const CliResult r = run_cli("linear-eval --config " + micro_cfg() + " --out " + q(dir));
    CHECK(r.code == 1);
    CHECK(r.err.find("run.checkpoint") != std::string::npos);
    CHECK_FALSE(fs::exists(dir));
}

TEST_CASE("identical seeds give identical artifacts; --seed changes them", "[cli]") {
    const fs::path a = scratch_dir() / "rep_a";
    const fs::path b = scratch_dir() / "rep_b";
    const fs::path c = scratch_dir() / "rep_c";
    REQUIRE(run_cli("pretrain --config " + micro_cfg() + " --out " + q(a)).code == 0);
    REQUIRE(run_cli("pretrain --config " + micro_cfg() + " --out " + q(b)).code == 0);
    REQUIRE(run_cli("pretrain --config " + micro_cfg() + " --out " + q(c) + " --seed 999")
                .code == 0);
    CHECK(read_file(a / "encoder.pclm") == read_file(b / "encoder.pclm"));
    CHECK(read_file(a / "loss.csv") == read_file(b / "loss.csv"));
    CHECK(read_file(a / "encoder.pclm") != read_file(c / "encoder.pclm"));

    // The snapshot alone reproduces the run bit-exactly.
    const fs::path d = scratch_dir() / "rep_d";
    REQUIRE(run_cli("pretrain --config " + (c / "config.txt").string() + " --out " + q(d))
                .code == 0);
    CHECK(read_file(c / "encoder.pclm") == read_file(d / "encoder.pclm"));
}

TEST_CASE("gradcheck passes and writes its report", "[cli]") {
    const fs::path dir = scratch_dir() / "gradcheck";
    const CliResult r = run_cli("gradcheck --out " + q(dir));
    REQUIRE(r.code == 0);
    CHECK(r.summary["passed"] == true);
    const json report = json::parse(read_file(dir / "gradcheck.json"));
    REQUIRE(report.size() == 2);
    for (const json& c : report) CHECK(c["pass"] == true);
}

TEST_CASE("gradient-curve emits both sweeps over the default grid", "[cli]") {
    const fs::path dir = scratch_dir() / "curves";
    const CliResult r = run_cli("gradient-curve --out " + q(dir));
    REQUIRE(r.code == 0);
    const std::string csv = read_file(dir / "curves.csv");
    CHECK(csv.rfind("sweep,tau,s,grad\n", 0) == 0);
    CHECK(csv.find("positive,") != std::string::npos);
    CHECK(csv.find("negative,") != std::string::npos);
    // 2 sweeps x 4 temperatures x 81 points.
    CHECK(r.summary["rows"] == 648);
}

TEST_CASE("ablation reports exactly four variants", "[cli]") {
    const fs::path dir = scratch_dir() / "ablation";
    const CliResult r = run_cli("ablation --config " + micro_cfg() + " --out " + q(dir) +
                                " --set train.seeds=1");
    REQUIRE(r.code == 0);
    CHECK(r.summary["rows"] == 4);
    const std::string csv = read_file(dir / "ablation.csv");
    CHECK(csv.rfind("variant,accuracy_mean,accuracy_std,macro_f1_mean,macro_f1_std\n", 0) == 0);
    std::size_t lines = 0;
    for (char c : csv) lines += c == '\n';
    CHECK(lines == 1 + 4);
    for (const char* variant : {"basic,", "feature,", "basic_feature,", "priorcl,"})
        CHECK(csv.find(variant) != std::string::npos);
}

TEST_CASE("sweep covers the R axis and the temperature grid diagonal", "[cli]") {
    const fs::path dir = scratch_dir() / "sweep";
    const CliResult r = run_cli("sweep --config " + micro_cfg() + " --out " + q(dir) +
                                " --set train.seeds=1 --set sweep.r_values=0.2,0.4" +
                                " --set sweep.tau_values=0.05,0.1");
    REQUIRE(r.code == 0);
    // 2 R cells + 3 temperature cells: (0.05,0.05), (0.05,0.1), (0.1,0.1).
    CHECK(r.summary["rows"] == 5);
    const std::string csv = read_file(dir / "sweep.csv");
    std::size_t diagonal = 0;
    for (std::size_t pos = csv.find("\ntau,"); pos != std::string::npos;
         pos = csv.find("\ntau,", pos + 1)) {
        const std::size_t c1 = csv.find(',', pos + 5);
        const std::size_t c2 = csv.find(',', c1 + 1);
        const std::size_t c3 = csv.find(',', c2 + 1);
        if (csv.substr(c1 + 1, c2 - c1 - 1) == csv.substr(c2 + 1, c3 - c2 - 1)) ++diagonal;
    }
    CHECK(diagonal == 2);
}

TEST_CASE("ingest-edf converts a recording with sidecar labels", "[cli]") {
    // Build a tiny EDF fixture: 3 epochs of 30 s at 100 Hz, one channel.
    EdfFile f;
    f.header.version = "0";
    f.header.patient = "subj-demo";
    f.header.recording = "rec-demo";
    f.header.start_date = "01.02.24";
    f.header.start_time = "22.30.00";
    f.header.n_records = 3;
    f.header.record_duration_s = 30.0;
    EdfSignal eeg;
    eeg.label = "EEG Fpz-Cz";
    eeg.dimension = "uV";
    eeg.physical_min = -250.0;
    eeg.physical_max = 250.0;
    eeg.digital_min = -2048;
    eeg.digital_max = 2047;
    eeg.samples_per_record = 3000;
    f.header.signals = {eeg};
    f.digital.resize(1);
    const Rng root(7);
    const SleepStage stages[3] = {SleepStage::W, SleepStage::N2, SleepStage::REM};
    for (int e = 0; e < 3; ++e) {
        Rng child = root.derive(static_cast<std::uint64_t>(e));
        const Epoch ep = synth_epoch(stages[e], 100.0, child);
        for (double v : ep.samples) {
            const double clamped = std::clamp(v, -250.0, 250.0);
            f.digital[0].push_back(static_cast<std::int16_t>(
                std::llround(-2048.0 + (clamped + 250.0) / 500.0 * 4095.0)));
        }
    }
    const fs::path edf_path = scratch_dir() / "demo.edf";
    write_edf(edf_path.string(), f);
    const fs::path labels_path = scratch_dir() / "demo_labels.csv";
    std::ofstream(labels_path) << "epoch_index,stage\n0,W\n1,N2\n2,REM\n";

    const fs::path dir = scratch_dir() / "ingest";
    const CliResult r = run_cli("ingest-edf --out " + q(dir) +
                                " --set data.edf.path=" + edf_path.string() +
                                " --set \"data.edf.channel=EEG Fpz-Cz\"" +
                                " --set data.edf.labels=" + labels_path.string());
    REQUIRE(r.code == 0);
    CHECK(r.summary["epochs"] == 3);
    CHECK(r.summary["labeled"] == 3);
    const Dataset ds = read_dataset_cache((dir / "dataset.pcl").string());
    REQUIRE(ds.size() == 3);
    CHECK(ds.epochs()[1].label == SleepStage::N2);

    // Without the channel the command must fail fast with a config error.
    const fs::path dir2 = scratch_dir() / "ingest_missing";
    const CliResult r2 =
        run_cli("ingest-edf --out " + q(dir2) + " --set data.edf.path=" + edf_path.string());
    CHECK(r2.code == 1);
    CHECK(r2.err.find("data.edf.channel") != std::string::npos);
}
