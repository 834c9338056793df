#include "flatlens/cli/config.hpp"

#include <cmath>
#include <set>

#include <json.hpp>

#include "flatlens/binary.hpp"
#include "flatlens/errors.hpp"

namespace flatlens {
namespace {

using json = nlohmann::ordered_json;

// Reads the members of one JSON object, remembering which keys were used so
// that leftovers can be reported as unknown fields.
class Fields {
public:
    Fields(const json& j, std::string path) : j_(j), path_(std::move(path)) {
        require(j.is_object(), ErrorKind::config, name() + ": expected an object");
    }

    template <class T>
    void get(const char* key, T& out) {
        const json* v = find(key);
        if (v == nullptr) return;
        try {
            out = v->get<T>();
        } catch (const json::exception&) {
            fail(ErrorKind::config, field(key) + ": wrong type");
        }
    }

    template <class Enum, class Parse>
    void get_enum(const char* key, Enum& out, Parse parse) {
        std::string s;
        get(key, s);
        if (find(key) != nullptr) out = parse(s);
    }

    const json* find(const char* key) {
        seen_.insert(key);
        const auto it = j_.find(key);
        return it == j_.end() ? nullptr : &*it;
    }

    std::string field(const char* key) const { return path_.empty() ? key : path_ + "." + key; }
    std::string name() const { return path_.empty() ? "config" : path_; }

    void finish() const {
        for (const auto& [key, value] : j_.items()) {
            require(seen_.count(key) > 0, ErrorKind::config, "unknown field " + field(key.c_str()));
        }
    }

private:
    const json& j_;
    std::string path_;
    std::set<std::string> seen_;
};

json dropout_json(const std::vector<DropoutLayer>& spec) {
    json out = json::array();
    for (const auto& d : spec) out.push_back({{"layer", d.layer}, {"keep", d.keep}});
    return out;
}

std::vector<DropoutLayer> dropout_from(const json& j, const std::string& path) {
    require(j.is_array(), ErrorKind::config, path + ": expected an array");
    std::vector<DropoutLayer> out;
    for (std::size_t i = 0; i < j.size(); ++i) {
        Fields f(j[i], path + "[" + std::to_string(i) + "]");
        DropoutLayer d{0, 1.0};
        f.get("layer", d.layer);
        f.get("keep", d.keep);
        f.finish();
        out.push_back(d);
    }
    return out;
}

json flatness_json(const FlatnessOptions& o) {
    return {{"loss_floor", o.loss_floor},
            {"floor_policy", o.floor_policy == FloorPolicy::substitute ? "substitute" : "error"},
            {"initial_step", o.initial_step},
            {"growth", o.growth},
            {"search_radius", o.search_radius},
            {"tol_x", o.tol_x},
            {"tol_f", o.tol_f}};
}

FloorPolicy parse_floor_policy(std::string_view s) {
    if (s == "substitute") return FloorPolicy::substitute;
    if (s == "error") return FloorPolicy::error;
    fail(ErrorKind::config, "analysis.flatness.floor_policy: unknown value '" + std::string(s) + "'");
}

SampleKind parse_sample_kind(std::string_view s) {
    if (s == "trajectory") return SampleKind::trajectory;
    if (s == "gradient") return SampleKind::gradient;
    fail(ErrorKind::config, "sampling.kind: unknown value '" + std::string(s) + "'");
}

DropoutMode parse_mode(std::string_view s) {
    if (s == "off") return DropoutMode::off;
    if (s == "expectation") return DropoutMode::expectation;
    fail(ErrorKind::config, "detector.accuracy_mode: unknown value '" + std::string(s) + "'");
}

void check(bool ok, const std::string& field, const std::string& rule) {
    require(ok, ErrorKind::config, field + ": " + rule);
}

bool positive(double v) { return std::isfinite(v) && v > 0.0; }

}  // namespace

std::string_view to_string(AnalysisKind k) noexcept {
    switch (k) {
        case AnalysisKind::pca_flatness: return "pca-flatness";
        case AnalysisKind::hessian_projection: return "hessian-projection";
        case AnalysisKind::alignment: return "alignment";
        case AnalysisKind::slice1d: return "slice1d";
    }
    return "?";
}

AnalysisKind parse_analysis(std::string_view s) {
    for (auto k : {AnalysisKind::pca_flatness, AnalysisKind::hessian_projection, AnalysisKind::alignment,
                   AnalysisKind::slice1d}) {
        if (to_string(k) == s) return k;
    }
    fail(ErrorKind::config, "analysis.kind: unknown value '" + std::string(s) + "'");
}

OptimizerState OptimizerSpec::make() const {
    return kind == OptimizerKind::gd ? OptimizerState::gd(lr) : OptimizerState::adam(lr, beta1, beta2, eps);
}

Architecture ExperimentConfig::probe_arch() const {
    return sampling.probe_dropout.empty() ? arch : arch.with_dropout(sampling.probe_dropout);
}

void ExperimentConfig::validate() const {
    arch.validate();
    check(dataset.source == "mnist", "dataset.source", "only \"mnist\" is supported");
    check(dataset.prefix >= 1, "dataset.prefix", "must be at least 1");
    optimizer.make().validate();
    check(training.steps >= 1, "training.steps", "must be at least 1");
    check(training.max_steps >= 1, "training.max_steps", "must be at least 1");
    check(training.accuracy_stride >= 1, "training.accuracy_stride", "must be at least 1");
    check(detector.window >= 2 && detector.window % 2 == 0, "detector.window", "must be an even number >= 2");
    check(positive(detector.max_relative_decrease), "detector.max_relative_decrease", "must be positive");
    check(detector.min_accuracy >= 0.0 && detector.min_accuracy <= 1.0, "detector.min_accuracy",
          "must lie in [0, 1]");
    check(detector.accuracy_stride >= 1, "detector.accuracy_stride", "must be at least 1");
    check(sampling.count >= 2, "sampling.count", "must be at least 2");
    if (!sampling.probe_dropout.empty()) {
        try {
            probe_arch().validate();
        } catch (const Error& e) {
            fail(ErrorKind::config, std::string("sampling.probe_dropout: ") + e.what());
        }
    }
    const auto& a = analysis;
    check(a.k_top >= 1, "analysis.k_top", "must be at least 1");
    check(a.eigen_floor_ratio >= 0.0 && a.eigen_floor_ratio < 1.0, "analysis.eigen_floor_ratio",
          "must lie in [0, 1)");
    check(a.directions >= 1, "analysis.directions", "must be at least 1");
    check(positive(a.flatness.loss_floor), "analysis.flatness.loss_floor", "must be positive");
    check(positive(a.flatness.initial_step), "analysis.flatness.initial_step", "must be positive");
    check(std::isfinite(a.flatness.growth) && a.flatness.growth > 1.0, "analysis.flatness.growth",
          "must be greater than 1");
    check(positive(a.flatness.search_radius) && a.flatness.search_radius >= a.flatness.initial_step,
          "analysis.flatness.search_radius", "must be positive and at least initial_step");
    check(positive(a.flatness.tol_x), "analysis.flatness.tol_x", "must be positive");
    check(positive(a.flatness.tol_f), "analysis.flatness.tol_f", "must be positive");
    check(std::isfinite(a.hessian.h) && a.hessian.h >= 0.0, "analysis.hessian.h",
          "must be >= 0 (0 selects the default step)");
    check(a.hessian.max_dim >= 1, "analysis.hessian.max_dim", "must be at least 1");
    check(positive(a.hessian.asymmetry_tol), "analysis.hessian.asymmetry_tol", "must be positive");
    check(a.alignment_steps >= 1, "analysis.alignment.steps", "must be at least 1");
    check(a.alignment_stride >= 1, "analysis.alignment.stride", "must be at least 1");
    check(a.alignment_samples >= 2, "analysis.alignment.samples", "must be at least 2");
    check(std::isfinite(a.alpha_min) && std::isfinite(a.alpha_max) && a.alpha_min < a.alpha_max,
          "analysis.slice1d.alpha_min", "must be finite and below alpha_max");
    check(a.alpha_points >= 2, "analysis.slice1d.points", "must be at least 2");
    for (std::size_t i = 0; i < a.checkpoints.size(); ++i) {
        const std::string f = "analysis.slice1d.checkpoints[" + std::to_string(i) + "]";
        check(!a.checkpoints[i].label.empty(), f + ".label", "must not be empty");
        check(a.checkpoints[i].label.find_first_of(",\n\"") == std::string::npos, f + ".label",
              "must not contain commas, quotes or newlines");
        check(!a.checkpoints[i].path.empty(), f + ".path", "must not be empty");
    }
    check(!output_dir.empty(), "output_dir", "must not be empty");
}

std::string config_text(const ExperimentConfig& c) {
    json checkpoints = json::array();
    for (const auto& r : c.analysis.checkpoints) checkpoints.push_back({{"label", r.label}, {"path", r.path}});
    const json j = {
        {"architecture",
         {{"layer_widths", c.arch.widths},
          {"activation", to_string(c.arch.activation)},
          {"init", to_string(c.init)},
          {"dropout", dropout_json(c.arch.dropout)}}},
        {"dataset", {{"source", c.dataset.source}, {"prefix", c.dataset.prefix}}},
        {"optimizer",
         {{"kind", to_string(c.optimizer.kind)},
          {"lr", c.optimizer.lr},
          {"beta1", c.optimizer.beta1},
          {"beta2", c.optimizer.beta2},
          {"eps", c.optimizer.eps}}},
        {"training",
         {{"until_exploration", c.training.until_exploration},
          {"steps", c.training.steps},
          {"max_steps", c.training.max_steps},
          {"accuracy_stride", c.training.accuracy_stride}}},
        {"detector",
         {{"window", c.detector.window},
          {"max_relative_decrease", c.detector.max_relative_decrease},
          {"min_accuracy", c.detector.min_accuracy},
          {"accuracy_stride", c.detector.accuracy_stride},
          {"accuracy_mode", c.detector.accuracy_mode == DropoutMode::off ? "off" : "expectation"}}},
        {"sampling",
         {{"kind", to_string(c.sampling.kind)},
          {"count", c.sampling.count},
          {"probe_dropout", dropout_json(c.sampling.probe_dropout)}}},
        {"analysis",
         {{"kind", to_string(c.analysis.kind)},
          {"slice", c.analysis.slice},
          {"k_top", c.analysis.k_top},
          {"eigen_floor_ratio", c.analysis.eigen_floor_ratio},
          {"directions", c.analysis.directions},
          {"flatness", flatness_json(c.analysis.flatness)},
          {"hessian",
           {{"h", c.analysis.hessian.h},
            {"max_dim", c.analysis.hessian.max_dim},
            {"asymmetry_tol", c.analysis.hessian.asymmetry_tol},
            {"fail_on_asymmetry", c.analysis.hessian.fail_on_asymmetry}}},
          {"alignment",
           {{"steps", c.analysis.alignment_steps},
            {"stride", c.analysis.alignment_stride},
            {"samples", c.analysis.alignment_samples}}},
          {"slice1d",
           {{"alpha_min", c.analysis.alpha_min},
            {"alpha_max", c.analysis.alpha_max},
            {"points", c.analysis.alpha_points},
            {"checkpoints", checkpoints}}}}},
        {"seed", c.seed},
        {"output_dir", c.output_dir},
    };
    return j.dump(2) + "\n";
}

ExperimentConfig parse_config(std::string_view text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        fail(ErrorKind::config, std::string("config is not valid JSON: ") + e.what());
    }
    ExperimentConfig c;
    Fields root(j, "");
    if (const json* a = root.find("architecture")) {
        Fields f(*a, "architecture");
        f.get("layer_widths", c.arch.widths);
        f.get_enum("activation", c.arch.activation, parse_activation);
        f.get_enum("init", c.init, parse_init);
        if (const json* d = f.find("dropout")) c.arch.dropout = dropout_from(*d, "architecture.dropout");
        f.finish();
    }
    if (const json* d = root.find("dataset")) {
        Fields f(*d, "dataset");
        f.get("source", c.dataset.source);
        f.get("prefix", c.dataset.prefix);
        f.finish();
    }
    if (const json* o = root.find("optimizer")) {
        Fields f(*o, "optimizer");
        f.get_enum("kind", c.optimizer.kind, parse_optimizer);
        f.get("lr", c.optimizer.lr);
        f.get("beta1", c.optimizer.beta1);
        f.get("beta2", c.optimizer.beta2);
        f.get("eps", c.optimizer.eps);
        f.finish();
    }
    if (const json* t = root.find("training")) {
        Fields f(*t, "training");
        f.get("until_exploration", c.training.until_exploration);
        f.get("steps", c.training.steps);
        f.get("max_steps", c.training.max_steps);
        f.get("accuracy_stride", c.training.accuracy_stride);
        f.finish();
    }
    if (const json* d = root.find("detector")) {
        Fields f(*d, "detector");
        f.get("window", c.detector.window);
        f.get("max_relative_decrease", c.detector.max_relative_decrease);
        f.get("min_accuracy", c.detector.min_accuracy);
        f.get("accuracy_stride", c.detector.accuracy_stride);
        f.get_enum("accuracy_mode", c.detector.accuracy_mode, parse_mode);
        f.finish();
    }
    if (const json* s = root.find("sampling")) {
        Fields f(*s, "sampling");
        f.get_enum("kind", c.sampling.kind, parse_sample_kind);
        f.get("count", c.sampling.count);
        if (const json* p = f.find("probe_dropout")) c.sampling.probe_dropout = dropout_from(*p, "sampling.probe_dropout");
        f.finish();
    }
    if (const json* a = root.find("analysis")) {
        auto& an = c.analysis;
        Fields f(*a, "analysis");
        f.get_enum("kind", an.kind, parse_analysis);
        f.get("slice", an.slice);
        f.get("k_top", an.k_top);
        f.get("eigen_floor_ratio", an.eigen_floor_ratio);
        f.get("directions", an.directions);
        if (const json* fl = f.find("flatness")) {
            Fields g(*fl, "analysis.flatness");
            g.get("loss_floor", an.flatness.loss_floor);
            g.get_enum("floor_policy", an.flatness.floor_policy, parse_floor_policy);
            g.get("initial_step", an.flatness.initial_step);
            g.get("growth", an.flatness.growth);
            g.get("search_radius", an.flatness.search_radius);
            g.get("tol_x", an.flatness.tol_x);
            g.get("tol_f", an.flatness.tol_f);
            g.finish();
        }
        if (const json* h = f.find("hessian")) {
            Fields g(*h, "analysis.hessian");
            g.get("h", an.hessian.h);
            g.get("max_dim", an.hessian.max_dim);
            g.get("asymmetry_tol", an.hessian.asymmetry_tol);
            g.get("fail_on_asymmetry", an.hessian.fail_on_asymmetry);
            g.finish();
        }
        if (const json* al = f.find("alignment")) {
            Fields g(*al, "analysis.alignment");
            g.get("steps", an.alignment_steps);
            g.get("stride", an.alignment_stride);
            g.get("samples", an.alignment_samples);
            g.finish();
        }
        if (const json* s1 = f.find("slice1d")) {
            Fields g(*s1, "analysis.slice1d");
            g.get("alpha_min", an.alpha_min);
            g.get("alpha_max", an.alpha_max);
            g.get("points", an.alpha_points);
            if (const json* cps = g.find("checkpoints")) {
                require(cps->is_array(), ErrorKind::config, "analysis.slice1d.checkpoints: expected an array");
                for (std::size_t i = 0; i < cps->size(); ++i) {
                    Fields r((*cps)[i], "analysis.slice1d.checkpoints[" + std::to_string(i) + "]");
                    CheckpointRef ref;
                    r.get("label", ref.label);
                    r.get("path", ref.path);
                    r.finish();
                    an.checkpoints.push_back(ref);
                }
            }
            g.finish();
        }
        f.finish();
    }
    root.get("seed", c.seed);
    root.get("output_dir", c.output_dir);
    root.finish();
    c.validate();
    return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
    std::string text;
    try {
        text = read_file(path);
    } catch (const Error& e) {
        fail(ErrorKind::config, "cannot read config " + path.string() + ": " + e.what());
    }
    return parse_config(text);
}

void save_config(const std::filesystem::path& path, const ExperimentConfig& c) { write_file(path, config_text(c)); }

}  // namespace flatlens
