// Command-line entry point: one subcommand per pipeline stage.

#include <CLI11.hpp>

#include <cstdint>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "flatlens/binary.hpp"
#include "flatlens/cli/pipelines.hpp"
#include "flatlens/data/dataset.hpp"
#include "flatlens/errors.hpp"

namespace {

using namespace flatlens;

int exit_code(ErrorKind k) {
    switch (k) {
        case ErrorKind::config:
        case ErrorKind::parse:
        case ErrorKind::dimension:
            return 2;
        case ErrorKind::numeric:
        case ErrorKind::degenerate:
        case ErrorKind::timeout:
            return 3;
        case ErrorKind::integrity:
            return 4;
    }
    return 1;
}

struct CommonFlags {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::string out;
    std::string data_dir;
};

void add_common(CLI::App* cmd, CommonFlags& f) {
    cmd->add_option("--config", f.config, "Experiment config (JSON); defaults apply when omitted")
        ->check(CLI::ExistingFile);
    cmd->add_option("--seed", f.seed, "Base seed, overrides the config");
    cmd->add_option("--out", f.out, "Artifact directory, overrides output_dir");
    cmd->add_option("--data-dir", f.data_dir, "MNIST directory (else FLATLENS_DATA_DIR, else data/mnist)");
}

RunContext make_context(const CommonFlags& f) {
    RunContext ctx;
    if (!f.config.empty()) ctx.config = load_config(f.config);
    if (f.seed) ctx.config.seed = *f.seed;
    if (!f.out.empty()) ctx.config.output_dir = f.out;
    ctx.config.validate();
    ctx.out = ctx.config.output_dir;
    ctx.data_dir = resolve_data_dir(f.data_dir);
    ctx.log = &std::cerr;
    return ctx;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"flatlens: dropout noise and loss-landscape geometry toolkit"};
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string(kToolkitVersion));

    using Pipeline = RunManifest (*)(const RunContext&);
    struct Entry {
        const char* name;
        const char* help;
        Pipeline run;
    };
    const std::vector<Entry> entries = {
        {"train", "Train the network; writes a checkpoint and the loss curve", run_train},
        {"sample-trajectory", "Continue training and record N parameter slices", run_sample_trajectory},
        {"sample-gradients", "Sample N slice gradients under independent dropout masks", run_sample_gradients},
        {"flatness", "Interval flatness along random unit directions", run_flatness},
        {"pca-flatness", "PCA spectrum of the samples against interval flatness", run_pca_flatness},
        {"hessian", "Finite-difference Hessian of the slice and its spectrum", run_hessian},
        {"hessian-projection", "Projected sample variance against Hessian eigenvalues", run_hessian_projection},
        {"alignment", "Tr(H Sigma) against the isotropic baseline along a GD run", run_alignment},
        {"slice1d", "Filter-normalized 1-D loss profiles of one or more checkpoints", run_slice1d},
        {"run", "Run config.analysis.kind, producing missing prerequisites", run_experiment},
    };
    std::vector<CommonFlags> flags(entries.size());
    std::vector<CLI::App*> cmds;
    for (std::size_t i = 0; i < entries.size(); ++i) {
        cmds.push_back(app.add_subcommand(entries[i].name, entries[i].help));
        add_common(cmds.back(), flags[i]);
    }

    std::vector<std::string> manifests;
    std::string report_out;
    CLI::App* report_cmd = app.add_subcommand("report", "Verify manifests and print a summary JSON");
    report_cmd->add_option("manifests", manifests, "manifest-*.json files")->check(CLI::ExistingFile);
    report_cmd->add_option("--out", report_out, "Also write the summary to this file");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }

    try {
        if (report_cmd->parsed()) {
            std::vector<std::filesystem::path> paths(manifests.begin(), manifests.end());
            const auto summary = report(paths).dump(2) + "\n";
            std::cout << summary;
            if (!report_out.empty()) write_file(report_out, summary);
            return 0;
        }
        for (std::size_t i = 0; i < entries.size(); ++i) {
            if (!cmds[i]->parsed()) continue;
            const RunContext ctx = make_context(flags[i]);
            const RunManifest m = entries[i].run(ctx);
            std::cout << manifest_path(ctx.out, m).string() << '\n';
            return 0;
        }
    } catch (const Error& e) {
        std::cerr << "flatlens: " << to_string(e.kind()) << " error: " << e.what() << '\n';
        return exit_code(e.kind());
    } catch (const std::exception& e) {
        std::cerr << "flatlens: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
