#include "flatlens/cli/pipelines.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <random>
#include <sstream>

#include "flatlens/binary.hpp"
#include "flatlens/data/dataset.hpp"
#include "flatlens/errors.hpp"
#include "flatlens/hessian/alignment.hpp"
#include "flatlens/landscape/direction.hpp"
#include "flatlens/nn/checkpoint.hpp"
#include "flatlens/nn/network_objective.hpp"
#include "flatlens/nn/rng.hpp"
#include "flatlens/nn/train.hpp"
#include "flatlens/noise/collect.hpp"
#include "flatlens/simd/kernels.hpp"

namespace flatlens {

using json = nlohmann::ordered_json;
namespace fs = std::filesystem;

namespace artifact {
std::string samples(SampleKind k) { return "samples-" + std::string(to_string(k)) + ".fltlsa"; }
std::string spectrum(SampleKind k) { return "spectrum-" + std::string(to_string(k)) + ".fltlsa"; }
std::string pca_scatter(SampleKind k) { return "pca-flatness-" + std::string(to_string(k)) + ".csv"; }
std::string projection_scatter(SampleKind k) {
    return "hessian-projection-" + std::string(to_string(k)) + ".csv";
}
std::string fit(const std::string& analysis, SampleKind k) {
    return "fit-" + analysis + "-" + std::string(to_string(k)) + ".csv";
}
}  // namespace artifact

namespace {

constexpr std::string_view kOptimizerMagic = "FLTLOP01";

void log(const RunContext& ctx, const std::string& line) {
    if (ctx.log != nullptr) *ctx.log << line << std::endl;
}

void need(const fs::path& p, const char* producer) {
    require(fs::exists(p), ErrorKind::config,
            "missing " + p.string() + "; run the `" + std::string(producer) + "` subcommand first");
}

Dataset train_set(const RunContext& ctx) {
    const fs::path images = ctx.data_dir / "train-images-idx3-ubyte";
    require(fs::exists(images), ErrorKind::config,
            "MNIST not found in " + ctx.data_dir.string() +
                "; run tools/fetch_mnist.sh or pass --data-dir / FLATLENS_DATA_DIR");
    return take_prefix(load_mnist(ctx.data_dir, MnistSplit::train), ctx.config.dataset.prefix);
}

RunManifest begin(const RunContext& ctx, const std::string& command) {
    RunManifest m;
    m.command = command;
    m.started = utc_now();
    const std::string text = config_text(ctx.config);
    m.config_hash = sha256_hex(text);
    m.settings = manifest_settings(ctx.config);
    // Named by hash so runs with different configs can share a directory.
    const std::string name = "config-" + m.config_hash.substr(0, 12) + ".json";
    write_file(ctx.out / name, text);
    m.add_file(ctx.out, name);
    return m;
}

RunManifest finish(const RunContext& ctx, RunManifest m) {
    m.finished = utc_now();
    write_manifest(manifest_path(ctx.out, m), m);
    return m;
}

template <class Fn>
void write_text(const fs::path& p, Fn&& body) {
    std::ostringstream os;
    body(os);
    write_file(p, os.str());
}

std::string encode_optimizer(const OptimizerState& s) {
    ByteWriter w;
    w.raw(kOptimizerMagic);
    w.u8(s.kind == OptimizerKind::gd ? 0 : 1);
    w.f64(s.lr);
    w.f64(s.beta1);
    w.f64(s.beta2);
    w.f64(s.eps);
    w.u64(s.step);
    w.f64_array(s.m);
    w.f64_array(s.v);
    return w.take();
}

OptimizerState decode_optimizer(std::string_view bytes) {
    ByteReader r(bytes);
    require(r.raw(kOptimizerMagic.size(), "magic") == kOptimizerMagic, ErrorKind::parse,
            "optimizer state: bad magic");
    OptimizerState s;
    const auto kind = r.u8("kind");
    require(kind <= 1, ErrorKind::parse, "optimizer state: unknown kind tag");
    s.kind = kind == 0 ? OptimizerKind::gd : OptimizerKind::adam;
    s.lr = r.f64("lr");
    s.beta1 = r.f64("beta1");
    s.beta2 = r.f64("beta2");
    s.eps = r.f64("eps");
    s.step = r.u64("step");
    s.m = r.f64_array("m");
    s.v = r.f64_array("v");
    require(r.done(), ErrorKind::parse, "optimizer state: trailing bytes");
    return s;
}

Checkpoint load_run_checkpoint(const RunContext& ctx) {
    const fs::path p = ctx.out / artifact::checkpoint;
    need(p, "train");
    Checkpoint ck = load_checkpoint(p);
    require(ck.arch.describe() == ctx.config.arch.describe(), ErrorKind::config,
            "checkpoint " + p.string() + " holds " + ck.arch.describe() + " but the config describes " +
                ctx.config.arch.describe());
    return ck;
}

std::size_t trained_steps(const RunContext& ctx) {
    const fs::path p = ctx.out / artifact::train_summary;
    need(p, "train");
    try {
        return json::parse(read_file(p)).at("steps_run").get<std::size_t>();
    } catch (const json::exception& e) {
        fail(ErrorKind::parse, p.string() + ": " + e.what());
    }
}

NetworkObjective deterministic_objective(const Architecture& arch, const ParamVector& params, const Batch& batch,
                                         const std::string& slice) {
    return NetworkObjective(arch.with_dropout({}), params, batch, make_slice(params.layout, slice));
}

SpectrumSource source_for(SampleKind k) {
    return k == SampleKind::trajectory ? SpectrumSource::trajectory_covariance : SpectrumSource::gradient_covariance;
}

const char* producer_for(SampleKind k) {
    return k == SampleKind::trajectory ? "sample-trajectory" : "sample-gradients";
}

SampleSet load_run_samples(const RunContext& ctx) {
    const SampleKind k = ctx.config.sampling.kind;
    const fs::path p = ctx.out / artifact::samples(k);
    need(p, producer_for(k));
    SampleSet s = load_samples(p);
    require(s.kind == k, ErrorKind::integrity, p.string() + " holds samples of the wrong kind");
    require(s.meta.slice == ctx.config.analysis.slice, ErrorKind::config,
            p.string() + " was sampled on slice " + s.meta.slice + ", config selects " + ctx.config.analysis.slice);
    return s;
}

json fit_json(const PowerLawFit& f) {
    return {{"slope", f.slope}, {"intercept", f.intercept}, {"spearman", f.spearman},
            {"used", f.used},   {"excluded", f.excluded}};
}

double median(std::vector<double> v) {
    if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

// Gaussian unit direction on `dim` coordinates.
Direction random_unit(std::size_t dim, std::uint64_t seed, std::string provenance) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal;
    std::vector<double> v(dim);
    for (double& x : v) x = normal(rng);
    return unit_direction(std::move(v), std::move(provenance));
}

json read_fit_csv(const fs::path& p) {
    std::istringstream in(read_file(p));
    std::string header, row;
    std::getline(in, header);
    std::getline(in, row);
    require(header == "slope,intercept,spearman,used,excluded", ErrorKind::parse, p.string() + ": unexpected header");
    std::vector<std::string> cells;
    std::stringstream ss(row);
    for (std::string cell; std::getline(ss, cell, ',');) cells.push_back(cell);
    require(cells.size() == 5, ErrorKind::parse, p.string() + ": expected five values");
    auto num = [&](const std::string& s) {
        char* end = nullptr;
        const double v = std::strtod(s.c_str(), &end);
        require(end != s.c_str() && *end == '\0', ErrorKind::parse, p.string() + ": bad number '" + s + "'");
        return v;
    };
    return {{"slope", num(cells[0])},
            {"intercept", num(cells[1])},
            {"spearman", num(cells[2])},
            {"used", static_cast<std::size_t>(num(cells[3]))},
            {"excluded", static_cast<std::size_t>(num(cells[4]))}};
}

}  // namespace

json manifest_settings(const ExperimentConfig& c) {
    return {
        {"architecture", c.arch.describe()},
        {"activation", to_string(c.arch.activation)},
        {"init", to_string(c.init)},
        {"pixel_scaling", "x/255"},
        {"deterministic_loss", "no mask, no rescaling"},
        {"accuracy_modes", {"off", "expectation (activations scaled by keep probability)"}},
        {"mask_sharing", "one mask per step shared by the whole batch"},
        {"optimizer", {{"kind", to_string(c.optimizer.kind)}, {"lr", c.optimizer.lr}}},
        {"covariance_normalization", "1/(N-1), mean-centred"},
        {"direction_norm", "unit"},
        {"filter_normalization", "per layer, weights and bias together"},
        {"eigen_floor_ratio", c.analysis.eigen_floor_ratio},
        {"flatness",
         {{"loss_floor", c.analysis.flatness.loss_floor},
          {"floor_policy", c.analysis.flatness.floor_policy == FloorPolicy::substitute ? "substitute" : "error"},
          {"initial_step", c.analysis.flatness.initial_step},
          {"growth", c.analysis.flatness.growth},
          {"search_radius", c.analysis.flatness.search_radius},
          {"tol_x", c.analysis.flatness.tol_x},
          {"tol_f", c.analysis.flatness.tol_f}}},
        {"hessian",
         {{"method", "central difference of analytic gradients; columns with a kink within h use the one-sided difference matching the transposed row"},
          {"h", c.analysis.hessian.h > 0.0 ? json(c.analysis.hessian.h) : json("auto: first of 1e-4, 1e-5, 1e-6, 1e-7 times (1+|theta|_inf) within asymmetry_tol")},
          {"asymmetry_tol", c.analysis.hessian.asymmetry_tol}}},
        {"detector",
         {{"window", c.detector.window},
          {"max_relative_decrease", c.detector.max_relative_decrease},
          {"rule", "mean of second half-window vs first half-window"},
          {"min_accuracy", c.detector.min_accuracy},
          {"accuracy_mode", c.detector.accuracy_mode == DropoutMode::off ? "off" : "expectation"}}},
        {"isa", std::string(simd::to_string(simd::active().isa))},
    };
}

PcaFlatnessAnalysis analyze_pca_flatness(const Spectrum& sigma, const Objective& f, std::span<const double> center,
                                         const PcaScatterOptions& opt) {
    PcaFlatnessAnalysis out;
    out.points = pca_flatness_scatter(sigma, f, center, opt);
    std::vector<std::pair<double, double>> pairs;
    for (const auto& p : out.points) pairs.emplace_back(p.variance, p.flatness.width);
    out.fit = powerlaw_fit(pairs);
    return out;
}

ProjectionAnalysis analyze_hessian_projection(const Spectrum& h, const Matrix& samples, std::size_t k_top) {
    ProjectionAnalysis out;
    out.points = hessian_projection_scatter(h, samples, k_top);
    std::vector<std::pair<double, double>> pairs;
    for (const auto& p : out.points) pairs.emplace_back(p.eigenvalue, p.variance);
    out.fit = powerlaw_fit(pairs);
    return out;
}

void write_pca_csv(std::ostream& out, std::span<const VarianceFlatnessPoint> points) {
    std::vector<FlatnessRow> rows;
    for (const auto& p : points) {
        rows.push_back({std::to_string(p.index), "pca-" + std::to_string(p.index), p.variance, p.flatness});
    }
    write_flatness_csv(out, rows);
}

void write_projection_csv(std::ostream& out, std::span<const ProjectionPoint> points) {
    out << "index,lambda_H,projected_variance\n";
    for (const auto& p : points) {
        out << p.index << ',' << format_double(p.eigenvalue) << ',' << format_double(p.variance) << '\n';
    }
}

void write_fit_csv(std::ostream& out, const PowerLawFit& fit) {
    out << "slope,intercept,spearman,used,excluded\n"
        << format_double(fit.slope) << ',' << format_double(fit.intercept) << ',' << format_double(fit.spearman)
        << ',' << fit.used << ',' << fit.excluded << '\n';
}

RunManifest run_train(const RunContext& ctx) {
    const auto& c = ctx.config;
    RunManifest m = begin(ctx, "train");
    const Dataset data = train_set(ctx);
    const Architecture& arch = c.arch;
    OptimizerState opt = c.optimizer.make();
    ParamVector params = initialize(arch, c.init, derive_seed(c.seed, seed_stream::init, 0));

    PhaseDetector detector(arch, data.data, c.detector);
    std::vector<std::tuple<std::size_t, double, double>> curve;
    const std::size_t budget = c.training.until_exploration ? c.training.max_steps : c.training.steps;
    const TrajectoryHook hook = [&](const StepRecord& r) {
        double acc = std::numeric_limits<double>::quiet_NaN();
        if (r.step % c.training.accuracy_stride == 0) acc = accuracy(arch, r.params, data.data, DropoutMode::expectation);
        curve.emplace_back(r.step, r.loss, acc);
        if (r.step % 500 == 0) log(ctx, "train: step " + std::to_string(r.step) + " loss " + format_double(r.loss));
        return c.training.until_exploration ? !detector.observe(r) : true;
    };
    TrainResult result = train(arch, std::move(params), data.data, opt, budget, MaskPolicy::fresh_per_step, c.seed, hook);

    write_text(ctx.out / artifact::train_curve, [&](std::ostream& os) {
        os << "step,loss,train_accuracy\n";
        for (const auto& [step, loss, acc] : curve) {
            os << step << ',' << format_double(loss) << ',';
            if (!std::isnan(acc)) os << format_double(acc);
            os << '\n';
        }
    });
    m.add_file(ctx.out, artifact::train_curve);
    if (c.training.until_exploration && !detector.entered()) {
        finish(ctx, m);
        throw PhaseTimeout("exploration phase not reached within " + std::to_string(budget) +
                               " steps; loss curve written to " + (ctx.out / artifact::train_curve).string(),
                           result.losses);
    }

    save_checkpoint(ctx.out / artifact::checkpoint, arch, result.params);
    write_file(ctx.out / artifact::optimizer, encode_optimizer(opt));
    json summary = {
        {"dataset", data.provenance},
        {"steps_run", result.steps_run},
        {"exploration_entered_at", detector.entered() ? json(*detector.entered_at()) : json(nullptr)},
        {"final_loss", loss(arch, result.params, data.data)},
        {"train_accuracy",
         {{"off", accuracy(arch, result.params, data.data, DropoutMode::off)},
          {"expectation", accuracy(arch, result.params, data.data, DropoutMode::expectation)}}},
        {"test_accuracy", nullptr},
    };
    if (fs::exists(ctx.data_dir / "t10k-images-idx3-ubyte")) {
        const Dataset test = load_mnist(ctx.data_dir, MnistSplit::test);
        summary["test_accuracy"] = {{"off", accuracy(arch, result.params, test.data, DropoutMode::off)},
                                    {"expectation", accuracy(arch, result.params, test.data, DropoutMode::expectation)}};
    }
    write_file(ctx.out / artifact::train_summary, summary.dump(2) + "\n");
    for (const char* f : {artifact::checkpoint, artifact::optimizer, artifact::train_summary}) m.add_file(ctx.out, f);
    m.results = summary;
    log(ctx, "train: " + std::to_string(result.steps_run) + " steps, train accuracy " +
                 format_double(summary["train_accuracy"]["expectation"].get<double>()));
    return finish(ctx, m);
}

RunManifest run_sample_trajectory(const RunContext& ctx) {
    const auto& c = ctx.config;
    RunManifest m = begin(ctx, "sample-trajectory");
    Checkpoint ck = load_run_checkpoint(ctx);
    need(ctx.out / artifact::optimizer, "train");
    const Dataset data = train_set(ctx);
    TrainRun run{ck.arch, std::move(ck.params), decode_optimizer(read_file(ctx.out / artifact::optimizer)), c.seed,
                 trained_steps(ctx), {}};
    const ParamSlice slice = make_slice(run.params.layout, c.analysis.slice);
    SampleSet s = collect_trajectory(run, data.data, slice, c.sampling.count);
    const std::string file = artifact::samples(SampleKind::trajectory);
    save_samples(ctx.out / file, s);
    m.add_file(ctx.out, file);
    m.results = {{"count", s.count()}, {"dim", s.dim()}, {"step_begin", s.meta.step_begin}, {"step_end", s.meta.step_end}};
    return finish(ctx, m);
}

RunManifest run_sample_gradients(const RunContext& ctx) {
    const auto& c = ctx.config;
    RunManifest m = begin(ctx, "sample-gradients");
    const Checkpoint ck = load_run_checkpoint(ctx);
    const Dataset data = train_set(ctx);
    const Architecture probe = c.probe_arch();
    require(!probe.dropout.empty(), ErrorKind::config,
            "sampling.probe_dropout: gradient sampling needs a dropout layer (set it or give the architecture one)");
    const ParamSlice slice = make_slice(ck.params.layout, c.analysis.slice);
    GradientSamples g = sample_gradients(probe, ck.params, data.data, slice, c.sampling.count, c.seed);
    g.set.meta.lr = c.optimizer.lr;
    const std::string file = artifact::samples(SampleKind::gradient);
    save_samples(ctx.out / file, g.set);
    m.add_file(ctx.out, file);
    m.results = {{"count", g.set.count()}, {"dim", g.set.dim()}, {"probe", probe.describe()}};
    if (g.warning) {
        m.results["warning"] = *g.warning;
        log(ctx, "sample-gradients: warning: " + *g.warning);
    }
    return finish(ctx, m);
}

RunManifest run_flatness(const RunContext& ctx) {
    const auto& c = ctx.config;
    RunManifest m = begin(ctx, "flatness");
    const Checkpoint ck = load_run_checkpoint(ctx);
    const Dataset data = train_set(ctx);
    const NetworkObjective obj = deterministic_objective(ck.arch, ck.params, data.data, c.analysis.slice);
    const auto center = obj.center();
    std::vector<FlatnessRow> rows;
    for (std::size_t i = 0; i < c.analysis.directions; ++i) {
        const Direction d = random_unit(obj.dim(), derive_seed(c.seed, seed_stream::direction, i),
                                        "random-" + std::to_string(i));
        rows.push_back({std::to_string(i), d.provenance, std::numeric_limits<double>::quiet_NaN(),
                        interval_flatness(obj, center, d, c.analysis.flatness)});
    }
    write_text(ctx.out / artifact::flatness, [&](std::ostream& os) { write_flatness_csv(os, rows); });
    m.add_file(ctx.out, artifact::flatness);
    m.results = {{"directions", rows.size()}};
    return finish(ctx, m);
}

RunManifest run_pca_flatness(const RunContext& ctx) {
    const auto& c = ctx.config;
    const SampleKind kind = c.sampling.kind;
    RunManifest m = begin(ctx, "pca-flatness");
    const SampleSet s = load_run_samples(ctx);
    const Checkpoint ck = load_run_checkpoint(ctx);
    const Dataset data = train_set(ctx);
    log(ctx, "pca-flatness: covariance and eigendecomposition of " + std::to_string(s.count()) + "x" +
                 std::to_string(s.dim()) + " samples");
    const Spectrum sigma = eigh(covariance(s), source_for(kind));
    save_spectrum(ctx.out / artifact::spectrum(kind), sigma, s.meta);

    const NetworkObjective obj = deterministic_objective(ck.arch, ck.params, data.data, c.analysis.slice);
    PcaScatterOptions opt;
    opt.k_top = c.analysis.k_top;
    opt.eigen_floor_ratio = c.analysis.eigen_floor_ratio;
    opt.flatness = c.analysis.flatness;
    const auto center = obj.center();
    const PcaFlatnessAnalysis a = analyze_pca_flatness(sigma, obj, center, opt);

    const std::string scatter = artifact::pca_scatter(kind);
    const std::string fit = artifact::fit("pca-flatness", kind);
    write_text(ctx.out / scatter, [&](std::ostream& os) { write_pca_csv(os, a.points); });
    write_text(ctx.out / fit, [&](std::ostream& os) { write_fit_csv(os, a.fit); });
    for (const auto& f : {artifact::spectrum(kind), scatter, fit}) m.add_file(ctx.out, f);
    m.results = {{"kind", to_string(kind)}, {"points", a.points.size()}, {"fit", fit_json(a.fit)}};
    log(ctx, "pca-flatness: slope " + format_double(a.fit.slope) + ", spearman " + format_double(a.fit.spearman));
    return finish(ctx, m);
}

RunManifest run_hessian(const RunContext& ctx) {
    const auto& c = ctx.config;
    RunManifest m = begin(ctx, "hessian");
    const Checkpoint ck = load_run_checkpoint(ctx);
    const Dataset data = train_set(ctx);
    const NetworkObjective obj = deterministic_objective(ck.arch, ck.params, data.data, c.analysis.slice);
    const auto center = obj.center();
    log(ctx, "hessian: assembling " + std::to_string(obj.dim()) + " columns");
    const HessianMatrix h = assemble_hessian(obj, center, c.analysis.hessian);
    const Spectrum spec = eigh(h.values, SpectrumSource::hessian);
    SampleMeta meta;
    meta.seed = c.seed;
    meta.lr = c.optimizer.lr;
    meta.keep = ck.arch.dropout.empty() ? 1.0 : ck.arch.dropout.front().keep;
    meta.slice = c.analysis.slice;
    meta.step_end = trained_steps(ctx);
    meta.step_begin = meta.step_end;
    save_spectrum(ctx.out / artifact::hessian, spec, meta);
    m.add_file(ctx.out, artifact::hessian);
    m.results = {{"dim", spec.dim()},
                 {"h", h.h},
                 {"asymmetry", h.asymmetry},
                 {"one_sided_columns", h.one_sided_columns},
                 {"lambda_max", spec.values.front()},
                 {"lambda_min", spec.values.back()},
                 {"trace", trace(h.values)}};
    return finish(ctx, m);
}

RunManifest run_hessian_projection(const RunContext& ctx) {
    const auto& c = ctx.config;
    const SampleKind kind = c.sampling.kind;
    RunManifest m = begin(ctx, "hessian-projection");
    need(ctx.out / artifact::hessian, "hessian");
    const Spectrum h = load_spectrum(ctx.out / artifact::hessian);
    const SampleSet s = load_run_samples(ctx);
    const ProjectionAnalysis a = analyze_hessian_projection(h, s.samples, c.analysis.k_top);
    const std::string scatter = artifact::projection_scatter(kind);
    const std::string fit = artifact::fit("hessian-projection", kind);
    write_text(ctx.out / scatter, [&](std::ostream& os) { write_projection_csv(os, a.points); });
    write_text(ctx.out / fit, [&](std::ostream& os) { write_fit_csv(os, a.fit); });
    for (const auto& f : {scatter, fit}) m.add_file(ctx.out, f);
    m.results = {{"kind", to_string(kind)}, {"points", a.points.size()}, {"fit", fit_json(a.fit)}};
    log(ctx, "hessian-projection: slope " + format_double(a.fit.slope) + ", spearman " + format_double(a.fit.spearman));
    return finish(ctx, m);
}

RunManifest run_alignment(const RunContext& ctx) {
    const auto& c = ctx.config;
    RunManifest m = begin(ctx, "alignment");
    const Dataset data = train_set(ctx);
    const Architecture probe = c.probe_arch();
    require(!probe.dropout.empty(), ErrorKind::config,
            "sampling.probe_dropout: the alignment probe needs a dropout layer");
    AlignmentOptions opt;
    opt.steps = c.analysis.alignment_steps;
    opt.stride = c.analysis.alignment_stride;
    opt.samples = c.analysis.alignment_samples;
    opt.seed = c.seed;
    opt.slice = c.analysis.slice;
    opt.hessian = c.analysis.hessian;
    const ParamVector params = initialize(c.arch, c.init, derive_seed(c.seed, seed_stream::init, 0));
    const AlignmentTrace trace = alignment_trace(c.arch, params, data.data, c.optimizer.make(), probe, opt);
    write_text(ctx.out / artifact::alignment, [&](std::ostream& os) { write_alignment_csv(os, trace); });
    m.add_file(ctx.out, artifact::alignment);

    std::vector<double> ratios;
    std::size_t above = 0;
    json failed = json::array();
    for (const auto& s : trace.steps) {
        if (s.error) {
            failed.push_back({{"step", s.step}, {"error", *s.error}});
            continue;
        }
        ratios.push_back(s.terms.ratio);
        if (s.terms.tr_h_sigma > s.terms.tr_h_sigma_bar) ++above;
    }
    m.results = {{"logged", trace.steps.size()},
                 {"completed", ratios.size()},
                 {"above_isotropic", above},
                 {"median_ratio", median(ratios)},
                 {"failed", failed}};
    return finish(ctx, m);
}

RunManifest run_slice1d(const RunContext& ctx) {
    const auto& c = ctx.config;
    RunManifest m = begin(ctx, "slice1d");
    const Dataset data = train_set(ctx);
    std::vector<std::pair<std::string, Checkpoint>> models;
    if (c.analysis.checkpoints.empty()) {
        models.emplace_back("run", load_run_checkpoint(ctx));
    } else {
        for (const auto& ref : c.analysis.checkpoints) {
            require(fs::exists(ref.path), ErrorKind::config,
                    "analysis.slice1d.checkpoints: " + ref.path + " does not exist; produce it with `train`");
            models.emplace_back(ref.label, load_checkpoint(ref.path));
        }
    }
    std::vector<double> alphas(c.analysis.alpha_points);
    for (std::size_t i = 0; i < alphas.size(); ++i) {
        const double t = static_cast<double>(i) / static_cast<double>(alphas.size() - 1);
        alphas[i] = c.analysis.alpha_min + t * (c.analysis.alpha_max - c.analysis.alpha_min);
    }
    // profiles[d][model][alpha]
    std::vector<std::vector<std::vector<ProfilePoint>>> profiles(c.analysis.directions);
    for (std::size_t d = 0; d < c.analysis.directions; ++d) {
        for (const auto& [label, ck] : models) {
            const NetworkObjective obj = deterministic_objective(ck.arch, ck.params, data.data, "full");
            const auto dir = filter_normalized_direction(ck.params, derive_seed(c.seed, seed_stream::direction, d));
            profiles[d].push_back(slice_1d(obj, ck.params.values, dir.direction, alphas));
        }
    }
    write_text(ctx.out / artifact::slice1d, [&](std::ostream& os) {
        os << "direction,alpha";
        for (const auto& [label, ck] : models) os << ',' << label;
        os << '\n';
        for (std::size_t d = 0; d < profiles.size(); ++d) {
            for (std::size_t i = 0; i < alphas.size(); ++i) {
                os << d << ',' << format_double(alphas[i]);
                for (const auto& prof : profiles[d]) os << ',' << format_double(prof[i].loss);
                os << '\n';
            }
        }
    });
    m.add_file(ctx.out, artifact::slice1d);
    json labels = json::array();
    for (const auto& [label, ck] : models) labels.push_back(label);
    m.results = {{"models", labels}, {"directions", c.analysis.directions}, {"points", alphas.size()}};
    return finish(ctx, m);
}

RunManifest run_experiment(const RunContext& ctx) {
    const auto& c = ctx.config;
    const bool needs_checkpoint = c.analysis.kind != AnalysisKind::alignment &&
                                  !(c.analysis.kind == AnalysisKind::slice1d && !c.analysis.checkpoints.empty());
    if (needs_checkpoint && !fs::exists(ctx.out / artifact::checkpoint)) run_train(ctx);
    auto ensure_samples = [&] {
        if (fs::exists(ctx.out / artifact::samples(c.sampling.kind))) return;
        if (c.sampling.kind == SampleKind::trajectory) {
            run_sample_trajectory(ctx);
        } else {
            run_sample_gradients(ctx);
        }
    };
    switch (c.analysis.kind) {
        case AnalysisKind::pca_flatness:
            ensure_samples();
            return run_pca_flatness(ctx);
        case AnalysisKind::hessian_projection:
            ensure_samples();
            if (!fs::exists(ctx.out / artifact::hessian)) run_hessian(ctx);
            return run_hessian_projection(ctx);
        case AnalysisKind::alignment:
            return run_alignment(ctx);
        case AnalysisKind::slice1d:
            return run_slice1d(ctx);
    }
    fail(ErrorKind::config, "analysis.kind: unhandled value");
}

fs::path manifest_path(const fs::path& dir, const RunManifest& m) {
    std::string name = "manifest-" + m.command;
    if (m.results.contains("kind")) name += "-" + m.results["kind"].get<std::string>();
    return dir / (name + ".json");
}

json report(std::span<const fs::path> manifests) {
    require(!manifests.empty(), ErrorKind::config, "report: no manifests given");
    json runs = json::array();
    json acceptance = json::array();
    for (const auto& path : manifests) {
        require(fs::exists(path), ErrorKind::config, "report: " + path.string() + " does not exist");
        const RunManifest m = load_manifest(path);
        const fs::path dir = path.has_parent_path() ? path.parent_path() : fs::path(".");
        verify_manifest(m, dir);
        json run = {{"manifest", path.string()},
                    {"command", m.command},
                    {"version", m.version},
                    {"config_hash", m.config_hash},
                    {"results", m.results}};
        json fits = json::object();
        for (const auto& f : m.files) {
            if (f.path.rfind("fit-", 0) == 0) fits[f.path] = read_fit_csv(dir / f.path);
        }
        if (!fits.empty()) run["fits"] = fits;
        if (m.results.contains("acceptance")) {
            for (const auto& v : m.results["acceptance"]) acceptance.push_back(v);
        }
        runs.push_back(run);
    }
    json out = {{"version", kToolkitVersion}, {"runs", runs}};
    if (!acceptance.empty()) out["acceptance"] = acceptance;
    return out;
}

}  // namespace flatlens
