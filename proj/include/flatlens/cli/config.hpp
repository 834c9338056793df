#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "flatlens/hessian/hessian.hpp"
#include "flatlens/landscape/flatness.hpp"
#include "flatlens/nn/architecture.hpp"
#include "flatlens/nn/optimizer.hpp"
#include "flatlens/noise/collect.hpp"
#include "flatlens/noise/sample_set.hpp"

namespace flatlens {

struct DatasetSpec {
    std::string source = "mnist";  // only MNIST is wired to the CLI
    std::size_t prefix = 10000;
};

struct OptimizerSpec {
    OptimizerKind kind = OptimizerKind::gd;
    double lr = 0.1;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;

    OptimizerState make() const;
};

struct TrainingSpec {
    // Stop when the exploration-phase detector fires (true) or after `steps`.
    bool until_exploration = true;
    std::size_t steps = 3000;
    std::size_t max_steps = 20000;
    // Training accuracy is written to the loss curve every this many steps.
    std::size_t accuracy_stride = 1;
};

struct SamplingSpec {
    SampleKind kind = SampleKind::trajectory;
    std::size_t count = 3000;
    // Dropout used for gradient probes; empty means the architecture's own.
    std::vector<DropoutLayer> probe_dropout;
};

enum class AnalysisKind { pca_flatness, hessian_projection, alignment, slice1d };
std::string_view to_string(AnalysisKind k) noexcept;
AnalysisKind parse_analysis(std::string_view s);

struct CheckpointRef {
    std::string label;
    std::string path;
};

struct AnalysisSpec {
    AnalysisKind kind = AnalysisKind::pca_flatness;
    std::string slice = "W1";
    std::size_t k_top = 50;
    double eigen_floor_ratio = 1e-12;
    std::size_t directions = 10;  // random directions for `flatness` and `slice1d`
    FlatnessOptions flatness;
    HessianOptions hessian;
    // alignment
    std::size_t alignment_steps = 100;
    std::size_t alignment_stride = 10;
    std::size_t alignment_samples = 1000;
    // slice1d
    double alpha_min = -1.0;
    double alpha_max = 1.0;
    std::size_t alpha_points = 41;
    std::vector<CheckpointRef> checkpoints;  // empty: the run's own checkpoint
};

struct ExperimentConfig {
    Architecture arch{{784, 50, 50, 10}, Activation::relu, {{2, 0.8}}};
    InitScheme init = InitScheme::xavier;
    DatasetSpec dataset;
    OptimizerSpec optimizer;
    TrainingSpec training;
    PhaseDetectorOptions detector;
    SamplingSpec sampling;
    AnalysisSpec analysis;
    std::uint64_t seed = 0;
    std::string output_dir = "runs/default";

    // Throws Error(config) naming the offending field.
    void validate() const;
    // Probe architecture for gradient sampling.
    Architecture probe_arch() const;
};

// Canonical JSON text. parse_config(config_text(c)) reproduces c exactly,
// and every field is written, defaults included.
std::string config_text(const ExperimentConfig& c);
// Missing keys take defaults; unknown keys are rejected.
ExperimentConfig parse_config(std::string_view text);
ExperimentConfig load_config(const std::filesystem::path& path);
void save_config(const std::filesystem::path& path, const ExperimentConfig& c);

}  // namespace flatlens
