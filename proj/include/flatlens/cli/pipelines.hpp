#pragma once

#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "flatlens/cli/config.hpp"
#include "flatlens/cli/manifest.hpp"
#include "flatlens/hessian/hessian.hpp"
#include "flatlens/noise/pca.hpp"
#include "flatlens/noise/stats.hpp"

namespace flatlens {

struct RunContext {
    ExperimentConfig config;
    std::filesystem::path out;       // artifact directory
    std::filesystem::path data_dir;  // MNIST IDX files
    std::ostream* log = nullptr;     // progress lines, optional
};

// Artifact names inside the output directory.
namespace artifact {
inline constexpr const char* checkpoint = "checkpoint.fltlns";
inline constexpr const char* optimizer = "optimizer.bin";
inline constexpr const char* train_curve = "train_curve.csv";
inline constexpr const char* train_summary = "train_summary.json";
inline constexpr const char* hessian = "hessian-spectrum.fltlsa";
inline constexpr const char* alignment = "alignment.csv";
inline constexpr const char* flatness = "flatness.csv";
inline constexpr const char* slice1d = "slice1d.csv";
std::string samples(SampleKind k);
std::string spectrum(SampleKind k);
std::string pca_scatter(SampleKind k);
std::string projection_scatter(SampleKind k);
std::string fit(const std::string& analysis, SampleKind k);
}  // namespace artifact

// Each pipeline writes its artifacts plus its manifest (see manifest_path) into
// ctx.out and returns the manifest. A missing prerequisite raises
// Error(config) naming the subcommand that produces it.
RunManifest run_train(const RunContext& ctx);
RunManifest run_sample_trajectory(const RunContext& ctx);
RunManifest run_sample_gradients(const RunContext& ctx);
RunManifest run_flatness(const RunContext& ctx);
RunManifest run_pca_flatness(const RunContext& ctx);
RunManifest run_hessian(const RunContext& ctx);
RunManifest run_hessian_projection(const RunContext& ctx);
RunManifest run_alignment(const RunContext& ctx);
RunManifest run_slice1d(const RunContext& ctx);
// manifest-<command>.json, with a -<kind> suffix for per-sample-kind analyses.
std::filesystem::path manifest_path(const std::filesystem::path& dir, const RunManifest& m);
// Runs the analysis selected by config.analysis.kind.
RunManifest run_experiment(const RunContext& ctx);

// Verifies every manifest's checksums and aggregates fits, accuracies and
// acceptance verdicts. Throws Error(config) for an empty list and
// Error(integrity) on a checksum mismatch.
nlohmann::ordered_json report(std::span<const std::filesystem::path> manifests);

// Building blocks shared with the acceptance harness.
struct PcaFlatnessAnalysis {
    std::vector<VarianceFlatnessPoint> points;
    PowerLawFit fit;  // log F against log lambda(Sigma), finite widths only
};
PcaFlatnessAnalysis analyze_pca_flatness(const Spectrum& sigma, const Objective& f,
                                         std::span<const double> center, const PcaScatterOptions& opt);

struct ProjectionAnalysis {
    std::vector<ProjectionPoint> points;
    PowerLawFit fit;  // log Var against log lambda(H)
};
ProjectionAnalysis analyze_hessian_projection(const Spectrum& h, const Matrix& samples, std::size_t k_top);

void write_pca_csv(std::ostream& out, std::span<const VarianceFlatnessPoint> points);
void write_projection_csv(std::ostream& out, std::span<const ProjectionPoint> points);
void write_fit_csv(std::ostream& out, const PowerLawFit& fit);

// Settings block recorded in every manifest.
nlohmann::ordered_json manifest_settings(const ExperimentConfig& c);

}  // namespace flatlens
