#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "flatlens/binary.hpp"
#include "flatlens/cli/config.hpp"
#include "flatlens/cli/manifest.hpp"
#include "flatlens/cli/pipelines.hpp"
#include "flatlens/data/dataset.hpp"
#include "flatlens/data/synthetic.hpp"
#include "flatlens/errors.hpp"
#include "flatlens/hessian/alignment.hpp"

using namespace flatlens;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("flatlens-test-cli-" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

std::string error_message(const std::function<void()>& fn, ErrorKind expected) {
    try {
        fn();
    } catch (const Error& e) {
        CHECK(e.kind() == expected);
        return e.what();
    }
    FAIL("no error raised");
    return {};
}

fs::path mnist_dir() {
    const char* env = std::getenv("FLATLENS_DATA_DIR");
    return env != nullptr ? fs::path(env) : fs::path("data/mnist");
}

bool have_mnist() { return fs::exists(mnist_dir() / "train-images-idx3-ubyte"); }

ExperimentConfig small_config(const fs::path& out) {
    ExperimentConfig c;
    c.dataset.prefix = 200;
    c.optimizer.lr = 0.2;
    c.training.until_exploration = false;
    c.training.steps = 25;
    c.training.accuracy_stride = 5;
    c.sampling.count = 20;
    c.analysis.kind = AnalysisKind::pca_flatness;
    c.analysis.slice = "b1";
    c.analysis.k_top = 5;
    c.seed = 11;
    c.output_dir = out.string();
    return c;
}

int run_cli(const std::string& args) {
    const int status = std::system(("\"" + std::string(FLATLENS_CLI_PATH) + "\" " + args + " >/dev/null 2>&1").c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST_CASE("config text round trip") {
    ExperimentConfig c;
    c.arch = Architecture{{784, 20, 30, 10}, Activation::tanh, {{1, 0.5}}};
    c.optimizer.kind = OptimizerKind::adam;
    c.optimizer.lr = 1e-4;
    c.sampling.kind = SampleKind::gradient;
    c.analysis.kind = AnalysisKind::slice1d;
    c.analysis.checkpoints = {{"drop", "a/checkpoint.fltlns"}, {"plain", "b/checkpoint.fltlns"}};
    c.analysis.flatness.floor_policy = FloorPolicy::error;
    c.seed = 42;
    const std::string text = config_text(c);
    const ExperimentConfig back = parse_config(text);
    CHECK(config_text(back) == text);
    CHECK(back.arch.describe() == c.arch.describe());
    CHECK(back.analysis.checkpoints.size() == 2);

    // Partial files fill the remaining fields from the defaults.
    CHECK(config_text(parse_config("{}")) == config_text(ExperimentConfig{}));
}

TEST_CASE("config errors name the offending field") {
    CHECK(error_message([] { parse_config(R"({"optimizer": {"lr": -1}})"); }, ErrorKind::config)
              .find("optimizer.lr") != std::string::npos);
    CHECK(error_message([] { parse_config(R"({"optimizer": {"learning_rate": 0.1}})"); }, ErrorKind::config)
              .find("optimizer.learning_rate") != std::string::npos);
    CHECK(error_message([] { parse_config(R"({"sampling": {"count": "many"}})"); }, ErrorKind::config)
              .find("sampling.count") != std::string::npos);
    CHECK(error_message([] { parse_config(R"({"architecture": {"dropout": [{"layer": 2, "keep": 1.5}]}})"); },
                        ErrorKind::config)
              .find("keep") != std::string::npos);
    error_message([] { parse_config("{not json"); }, ErrorKind::config);
}

TEST_CASE("sha256 known vectors") {
    CHECK(sha256_hex("") == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
    CHECK(sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST_CASE("manifest round trip and verification") {
    const fs::path dir = scratch("manifest");
    write_file(dir / "a.csv", "x,y\n1,2\n");
    RunManifest m;
    m.command = "flatness";
    m.config_hash = sha256_hex("cfg");
    m.started = utc_now();
    m.finished = utc_now();
    m.add_file(dir, "a.csv");
    m.settings["activation"] = "relu";
    m.results["value"] = 1.5;
    write_manifest(dir / "manifest.json", m);
    const RunManifest back = load_manifest(dir / "manifest.json");
    CHECK(to_json(back) == to_json(m));
    CHECK(back.files.at(0).bytes == 8);
    CHECK(m.started.size() == 20);
    CHECK(m.started.back() == 'Z');
    verify_manifest(back, dir);

    write_file(dir / "a.csv", "x,y\n1,3\n");
    CHECK(error_message([&] { verify_manifest(back, dir); }, ErrorKind::integrity).find("a.csv") != std::string::npos);
    fs::remove(dir / "a.csv");
    error_message([&] { verify_manifest(back, dir); }, ErrorKind::integrity);
    error_message([] { manifest_from_json(nlohmann::ordered_json::array()); }, ErrorKind::parse);
}

TEST_CASE("report") {
    error_message([] { report({}); }, ErrorKind::config);

    const fs::path dir = scratch("report");
    PowerLawFit fit;
    fit.slope = -0.4321;
    fit.intercept = 1.25;
    fit.spearman = -0.875;
    fit.used = 48;
    fit.excluded = 2;
    std::ostringstream csv;
    write_fit_csv(csv, fit);
    write_file(dir / "fit-pca-flatness-trajectory.csv", csv.str());
    RunManifest m;
    m.command = "pca-flatness";
    m.add_file(dir, "fit-pca-flatness-trajectory.csv");
    m.results["acceptance"] = nlohmann::ordered_json::array({{{"criterion", 1}, {"pass", true}}});
    write_manifest(dir / "manifest-pca-flatness.json", m);

    const std::vector<fs::path> one{dir / "manifest-pca-flatness.json"};
    const auto summary = report(one);
    const auto& f = summary["runs"][0]["fits"]["fit-pca-flatness-trajectory.csv"];
    CHECK(f["slope"].get<double>() == -0.4321);
    CHECK(f["spearman"].get<double>() == -0.875);
    CHECK(f["used"].get<std::size_t>() == 48);
    CHECK(summary["acceptance"].size() == 1);

    write_file(dir / "fit-pca-flatness-trajectory.csv", "slope,intercept,spearman,used,excluded\n-1,0,-1,48,2\n");
    error_message([&] { report(one); }, ErrorKind::integrity);
}

TEST_CASE("quadratic fixture keeps the inverse ordering through the analysis") {
    const auto task = synthetic_quadratic_task(5, {16, 8, 4, 2, 1, 0.5}, 1.0);
    PcaScatterOptions opt;
    opt.k_top = 6;
    const PcaFlatnessAnalysis a =
        analyze_pca_flatness(eigh(task.hessian, SpectrumSource::trajectory_covariance), task.objective, task.minimum, opt);
    REQUIRE(a.points.size() == 6);
    for (std::size_t i = 1; i < a.points.size(); ++i) {
        CHECK(a.points[i].flatness.width > a.points[i - 1].flatness.width);
    }
    CHECK(a.fit.spearman == doctest::Approx(-1.0));
    CHECK(a.fit.slope == doctest::Approx(-0.5).epsilon(1e-5));

    std::ostringstream csv;
    write_pca_csv(csv, a.points);
    CHECK(csv.str().rfind("direction_id,provenance,lambda_or_eig,F_v,theta_l,theta_r,L0,flags\n0,pca-0,16,", 0) == 0);
}

TEST_CASE("alignment with an identity Hessian gives unit ratios") {
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        const Matrix sigma = psd_with_spectrum({5, 3, 2, 1, 0.5, 0.1, 0.01}, seed);
        CHECK(alignment_terms(Matrix::identity(7), sigma).ratio == doctest::Approx(1.0).epsilon(1e-14));
    }
}

TEST_CASE("missing prerequisites name the producing subcommand") {
    const fs::path out = scratch("prereq");
    const RunContext ctx{small_config(out), out, mnist_dir(), nullptr};
    CHECK(error_message([&] { run_sample_trajectory(ctx); }, ErrorKind::config).find("train") != std::string::npos);
    CHECK(error_message([&] { run_pca_flatness(ctx); }, ErrorKind::config).find("sample-") != std::string::npos);
}

TEST_CASE("pipelines are deterministic") {
    if (!have_mnist()) {
        MESSAGE("MNIST not found; skipped");
        return;
    }
    // Same config (including the output directory) twice; the first run is set aside.
    const fs::path out = scratch("det");
    const fs::path first = fs::temp_directory_path() / "flatlens-test-cli-det-first";
    fs::remove_all(first);
    for (int pass = 0; pass < 2; ++pass) {
        fs::remove_all(out);
        fs::create_directories(out);
        const RunContext ctx{small_config(out), out, mnist_dir(), nullptr};
        run_experiment(ctx);
        ExperimentConfig g = ctx.config;
        g.sampling.kind = SampleKind::gradient;
        g.analysis.kind = AnalysisKind::hessian_projection;
        run_experiment(RunContext{g, out, mnist_dir(), nullptr});
        if (pass == 0) fs::rename(out, first);
    }
    const std::vector<fs::path> dirs{first, out};
    std::size_t compared = 0;
    for (const auto& entry : fs::directory_iterator(dirs[0])) {
        const std::string name = entry.path().filename().string();
        if (name.rfind("manifest-", 0) == 0) {
            auto a = to_json(load_manifest(entry.path()));
            auto b = to_json(load_manifest(dirs[1] / name));
            for (auto* j : {&a, &b}) {
                j->erase("started");
                j->erase("finished");
            }
            CHECK_MESSAGE(a == b, name);
        } else {
            CHECK_MESSAGE(read_file(entry.path()) == read_file(dirs[1] / name), name);
        }
        ++compared;
    }
    CHECK(compared >= 12);
    CHECK(fs::exists(dirs[0] / "fit-pca-flatness-trajectory.csv"));
    CHECK(fs::exists(dirs[0] / "fit-hessian-projection-gradient.csv"));
}

TEST_CASE("zero learning rate without dropout gives a flat loss curve") {
    if (!have_mnist()) {
        MESSAGE("MNIST not found; skipped");
        return;
    }
    const fs::path out = scratch("lr0");
    ExperimentConfig c = small_config(out);
    c.optimizer.lr = 0.0;
    c.arch = c.arch.with_dropout({});
    run_train(RunContext{c, out, mnist_dir(), nullptr});
    std::istringstream in(read_file(out / artifact::train_curve));
    std::string line, first;
    std::getline(in, line);
    std::size_t rows = 0;
    while (std::getline(in, line)) {
        const std::string loss = line.substr(line.find(',') + 1, line.rfind(',') - line.find(',') - 1);
        if (first.empty()) first = loss;
        CHECK(loss == first);
        ++rows;
    }
    CHECK(rows == 25);
}

TEST_CASE("command-line exit codes") {
    const fs::path dir = scratch("exit");
    CHECK(run_cli("--help") == 0);
    CHECK(run_cli("no-such-command") == 2);
    CHECK(run_cli("report") == 2);
    write_file(dir / "bad.json", R"({"optimizer": {"lr": -1}})");
    CHECK(run_cli("train --config \"" + (dir / "bad.json").string() + "\"") == 2);
    CHECK(run_cli("train --config \"" + (dir / "missing.json").string() + "\"") == 2);

    // Missing checkpoint: a config error pointing at train.
    CHECK(run_cli("flatness --out \"" + (dir / "empty").string() + "\"") == 2);

    write_file(dir / "x.csv", "1\n");
    RunManifest m;
    m.command = "flatness";
    m.add_file(dir, "x.csv");
    write_manifest(dir / "manifest.json", m);
    CHECK(run_cli("report \"" + (dir / "manifest.json").string() + "\"") == 0);
    write_file(dir / "x.csv", "2\n");
    CHECK(run_cli("report \"" + (dir / "manifest.json").string() + "\"") == 4);
}
