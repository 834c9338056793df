// Acceptance harness: one PASS/FAIL line per criterion.
//
// Expensive runs (training, sampling, Hessians) go through the same pipelines
// as the CLI and are cached under --cache; a stage is reused when its
// manifest exists and its checksums verify. Numbers the verdicts depend on
// are recomputed here from the written CSVs with local reference code.

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ctime>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

#include "flatlens/binary.hpp"
#include "flatlens/cli/pipelines.hpp"
#include "flatlens/data/dataset.hpp"
#include "flatlens/errors.hpp"
#include "flatlens/hessian/alignment.hpp"
#include "flatlens/hessian/hessian.hpp"
#include "flatlens/landscape/flatness.hpp"
#include "flatlens/linalg/eigh.hpp"
#include "flatlens/nn/checkpoint.hpp"
#include "flatlens/nn/network_objective.hpp"
#include "flatlens/nn/rng.hpp"

namespace {

using namespace flatlens;
namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

#ifndef FLATLENS_DEFAULT_CACHE
#define FLATLENS_DEFAULT_CACHE "acceptance-cache"
#endif

// Grid shared by the variance-flatness and projection criteria.
constexpr double kGridKeep[] = {0.8, 0.5};
constexpr double kGridLr[] = {0.1, 0.2};
constexpr std::uint64_t kGridSeed = 1;

struct Verdict {
    int criterion;
    bool pass;
    std::string detail;
};

struct Harness {
    fs::path cache;
    fs::path data_dir;
    bool verbose = false;

    std::ostream& log() const { return std::cerr; }

    RunContext context(const ExperimentConfig& c, const fs::path& out) const {
        fs::create_directories(out);
        ExperimentConfig cfg = c;
        cfg.output_dir = out.string();
        return RunContext{cfg, out, data_dir, verbose ? &std::cerr : nullptr};
    }

    // Runs `fn` unless a verified manifest for the stage already exists.
    RunManifest stage(const RunContext& ctx, const std::string& manifest, const std::function<RunManifest()>& fn) const {
        const fs::path p = ctx.out / manifest;
        if (fs::exists(p)) {
            try {
                RunManifest m = load_manifest(p);
                verify_manifest(m, ctx.out);
                return m;
            } catch (const Error& e) {
                log() << "  cache miss for " << p.string() << ": " << e.what() << '\n';
            }
        }
        log() << "  running " << manifest << " in " << ctx.out.string() << std::endl;
        return fn();
    }
};

// ---- local reference statistics -------------------------------------------------

std::vector<double> average_ranks(const std::vector<double>& v) {
    std::vector<double> r(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) {
        double less = 0.0, equal = 0.0;
        for (double w : v) {
            if (w < v[i]) less += 1.0;
            if (w == v[i]) equal += 1.0;
        }
        r[i] = less + (equal + 1.0) / 2.0;
    }
    return r;
}

double pearson_ref(const std::vector<double>& x, const std::vector<double>& y) {
    const double n = static_cast<double>(x.size());
    const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
    const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
        syy += (y[i] - my) * (y[i] - my);
    }
    return sxy / std::sqrt(sxx * syy);
}

struct LogFit {
    double slope = std::numeric_limits<double>::quiet_NaN();
    double spearman = std::numeric_limits<double>::quiet_NaN();
    std::size_t used = 0;
};

// Least squares of log y on log x over finite positive pairs.
LogFit log_fit(const std::vector<double>& x, const std::vector<double>& y) {
    std::vector<double> lx, ly;
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (x[i] > 0.0 && y[i] > 0.0 && std::isfinite(x[i]) && std::isfinite(y[i])) {
            lx.push_back(std::log(x[i]));
            ly.push_back(std::log(y[i]));
        }
    }
    LogFit f;
    f.used = lx.size();
    if (lx.size() < 3) return f;
    const double n = static_cast<double>(lx.size());
    const double mx = std::accumulate(lx.begin(), lx.end(), 0.0) / n;
    const double my = std::accumulate(ly.begin(), ly.end(), 0.0) / n;
    double sxy = 0.0, sxx = 0.0;
    for (std::size_t i = 0; i < lx.size(); ++i) {
        sxy += (lx[i] - mx) * (ly[i] - my);
        sxx += (lx[i] - mx) * (lx[i] - mx);
    }
    f.slope = sxy / sxx;
    f.spearman = pearson_ref(average_ranks(lx), average_ranks(ly));
    return f;
}

std::vector<std::vector<std::string>> read_csv(const fs::path& p) {
    std::istringstream in(read_file(p));
    std::vector<std::vector<std::string>> rows;
    for (std::string line; std::getline(in, line);) {
        std::vector<std::string> cells;
        std::stringstream ss(line);
        for (std::string c; std::getline(ss, c, ',');) cells.push_back(c);
        if (!line.empty() && line.back() == ',') cells.emplace_back();
        rows.push_back(std::move(cells));
    }
    return rows;
}

double num(const std::string& s) {
    if (s == "inf") return std::numeric_limits<double>::infinity();
    if (s == "nan" || s.empty()) return std::numeric_limits<double>::quiet_NaN();
    return std::stod(s);
}

// Two columns of a CSV with a header row.
std::pair<std::vector<double>, std::vector<double>> columns(const fs::path& p, const std::string& a,
                                                            const std::string& b) {
    const auto rows = read_csv(p);
    require(!rows.empty(), ErrorKind::parse, p.string() + ": empty");
    const auto& h = rows.front();
    const auto ia = std::find(h.begin(), h.end(), a) - h.begin();
    const auto ib = std::find(h.begin(), h.end(), b) - h.begin();
    require(ia < std::ssize(h) && ib < std::ssize(h), ErrorKind::parse, p.string() + ": missing columns");
    std::vector<double> x, y;
    for (std::size_t r = 1; r < rows.size(); ++r) {
        x.push_back(num(rows[r][ia]));
        y.push_back(num(rows[r][ib]));
    }
    return {x, y};
}

std::string fmt(double v, int prec = 4) {
    std::ostringstream os;
    os << std::setprecision(prec) << v;
    return os.str();
}

std::time_t parse_utc(const std::string& s) {
    std::tm tm{};
    std::istringstream in(s);
    in >> std::get_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
    return timegm(&tm);
}

// ---- criterion 1 ------------------------------------------------------------------

Verdict oracle_suite() {
    std::vector<std::string> bad;
    std::ostringstream detail;
    std::mt19937_64 rng(2024);
    std::uniform_real_distribution<double> u(-1.0, 1.0);

    // Analytic gradients against central differences, full parameter vector.
    double worst_grad = 0.0;
    for (Activation act : {Activation::relu, Activation::tanh}) {
        const Architecture arch{{784, 50, 50, 10}, act, {}};
        Batch b;
        b.inputs = Matrix(32, 784);
        for (double& x : b.inputs.values()) x = 0.5 * (u(rng) + 1.0);
        for (std::size_t i = 0; i < 32; ++i) b.labels.push_back(static_cast<std::uint32_t>(i % 10));
        const ParamVector p = initialize(arch, InitScheme::xavier, 5);
        const NetworkObjective f(arch, p, b, make_slice(p.layout, "full"));
        const auto x = f.center();
        std::vector<double> g(x.size());
        f.gradient(x, g);
        std::vector<std::size_t> coords;
        for (std::size_t i = 0; i < x.size(); i += 97) coords.push_back(i);
        for (const auto& t : p.layout.tensors()) coords.push_back(t.offset);  // every tensor touched
        double num2 = 0.0, den2 = 0.0;
        std::vector<double> xp = x;
        for (std::size_t i : coords) {
            const double h = 1e-6;
            xp[i] = x[i] + h;
            const double up = f.value(xp);
            xp[i] = x[i] - h;
            const double dn = f.value(xp);
            xp[i] = x[i];
            const double fd = (up - dn) / (2.0 * h);
            num2 += (fd - g[i]) * (fd - g[i]);
            den2 += g[i] * g[i];
        }
        worst_grad = std::max(worst_grad, std::sqrt(num2 / den2));
    }
    detail << "grad rel err " << fmt(worst_grad, 2);
    if (!(worst_grad < 1e-5)) bad.push_back("gradient");

    // Eigendecomposition reconstruction.
    const std::size_t n = 200;
    Matrix a(n, n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j <= i; ++j) a(i, j) = a(j, i) = u(rng);
    }
    const Spectrum sp = eigh(a);
    double worst_eig = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            double s = 0.0;
            for (std::size_t k = 0; k < n; ++k) s += sp.vectors(i, k) * sp.values[k] * sp.vectors(j, k);
            worst_eig = std::max(worst_eig, std::abs(s - a(i, j)));
        }
    }
    detail << ", eigh recon " << fmt(worst_eig, 2);
    if (!(worst_eig < 1e-10)) bad.push_back("eigh");

    // Assembled Hessian of a quadratic with a hand-written gradient.
    const std::size_t d = 12;
    Matrix q(d, d);
    for (std::size_t i = 0; i < d; ++i) {
        for (std::size_t j = 0; j <= i; ++j) q(i, j) = q(j, i) = u(rng);
        q(i, i) += 4.0;
    }
    const FunctionObjective quad(
        d,
        [&](std::span<const double> x) {
            double s = 0.0;
            for (std::size_t i = 0; i < d; ++i) {
                for (std::size_t j = 0; j < d; ++j) s += 0.5 * x[i] * q(i, j) * x[j];
            }
            return s;
        },
        [&](std::span<const double> x, std::span<double> g) {
            double s = 0.0;
            for (std::size_t i = 0; i < d; ++i) {
                g[i] = 0.0;
                for (std::size_t j = 0; j < d; ++j) g[i] += q(i, j) * x[j];
                s += 0.5 * x[i] * g[i];
            }
            return s;
        });
    std::vector<double> at(d);
    for (double& x : at) x = 0.1 * u(rng);
    const HessianMatrix hq = assemble_hessian(quad, at);
    double worst_h = 0.0;
    for (std::size_t i = 0; i < d * d; ++i) worst_h = std::max(worst_h, std::abs(hq.values.values()[i] - q.values()[i]));
    detail << ", hessian " << fmt(worst_h, 2);
    if (!(worst_h < 1e-10)) bad.push_back("hessian");

    // Interval flatness of L0 + a t^2 / 2.
    double worst_f = 0.0;
    for (auto [l0, c] : {std::pair{1.0, 2.0}, {1.0, 8.0}, {0.5, 1.0}}) {
        const FunctionObjective parabola(1, [l0 = l0, c = c](std::span<const double> x) { return l0 + 0.5 * c * x[0] * x[0]; });
        const std::vector<double> zero{0.0};
        const FlatnessResult r = interval_flatness(parabola, zero, Direction{{1.0}, NormConvention::unit, "axis"});
        worst_f = std::max(worst_f, std::abs(r.width - 2.0 * std::sqrt(2.0 * l0 / c)));
    }
    detail << ", flatness " << fmt(worst_f, 2);
    if (!(worst_f < 1e-6)) bad.push_back("flatness");

    // Isotropic-baseline trace identity with an explicit Sigma_bar.
    const std::size_t m = 40;
    Matrix h(m, m), s(m, m);
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j <= i; ++j) {
            h(i, j) = h(j, i) = u(rng);
        }
    }
    Matrix z(m, m);
    for (double& x : z.values()) x = u(rng);
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < m; ++j) {
            for (std::size_t k = 0; k < m; ++k) s(i, j) += z(i, k) * z(j, k);
        }
    }
    double tr_s = 0.0;
    for (std::size_t i = 0; i < m; ++i) tr_s += s(i, i);
    double direct = 0.0;  // Tr(H * (TrS/D) I)
    for (std::size_t i = 0; i < m; ++i) direct += h(i, i) * tr_s / double(m);
    const AlignmentTerms t = alignment_terms(h, s);
    const double rel_bar = std::abs(t.tr_h_sigma_bar - direct) / std::abs(direct);
    detail << ", trace identity " << fmt(rel_bar, 2);
    if (!(rel_bar < 1e-9)) bad.push_back("trace");

    std::string msg = detail.str();
    if (!bad.empty()) {
        msg += " (failed:";
        for (const auto& b : bad) msg += " " + b;
        msg += ")";
    }
    return {1, bad.empty(), msg};
}

// ---- shared runs ------------------------------------------------------------------

ExperimentConfig grid_config(double keep, double lr) {
    ExperimentConfig c;
    c.arch = Architecture{{784, 50, 50, 10}, Activation::relu, {{2, keep}}};
    c.optimizer.lr = lr;
    c.training.until_exploration = true;
    c.training.accuracy_stride = 10;
    c.seed = kGridSeed;
    c.analysis.slice = "W1";
    c.analysis.k_top = 50;
    return c;
}

std::string cell_name(double keep, double lr) {
    return "grid/keep" + fmt(keep) + "-lr" + fmt(lr);
}

// Trains the cell and returns its directory.
fs::path train_cell(const Harness& hz, double keep, double lr) {
    const fs::path dir = hz.cache / cell_name(keep, lr) / "train";
    const RunContext ctx = hz.context(grid_config(keep, lr), dir);
    hz.stage(ctx, "manifest-train.json", [&] { return run_train(ctx); });
    return dir;
}

// A sampling directory seeded with the cell's checkpoint.
RunContext sampling_dir(const Harness& hz, double keep, double lr, std::size_t n) {
    const fs::path train = train_cell(hz, keep, lr);
    ExperimentConfig c = grid_config(keep, lr);
    c.sampling.count = n;
    const RunContext ctx = hz.context(c, hz.cache / cell_name(keep, lr) / ("n" + std::to_string(n)));
    for (const char* f : {artifact::checkpoint, artifact::optimizer, artifact::train_summary}) {
        if (!fs::exists(ctx.out / f) || read_file(ctx.out / f) != read_file(train / f)) {
            fs::copy_file(train / f, ctx.out / f, fs::copy_options::overwrite_existing);
        }
    }
    return ctx;
}

RunContext with_kind(RunContext ctx, SampleKind k, AnalysisKind a) {
    ctx.config.sampling.kind = k;
    ctx.config.analysis.kind = a;
    return ctx;
}

void ensure_samples(const Harness& hz, const RunContext& ctx) {
    if (ctx.config.sampling.kind == SampleKind::trajectory) {
        hz.stage(ctx, "manifest-sample-trajectory.json", [&] { return run_sample_trajectory(ctx); });
    } else {
        hz.stage(ctx, "manifest-sample-gradients.json", [&] { return run_sample_gradients(ctx); });
    }
}

// ---- criterion 2 ------------------------------------------------------------------

Verdict training_reproduction(const Harness& hz) {
    const fs::path dir = train_cell(hz, 0.8, 0.2);
    const RunManifest m = load_manifest(dir / "manifest-train.json");
    const double seconds = std::difftime(parse_utc(m.finished), parse_utc(m.started));
    // Accuracy recomputed from the checkpoint.
    const Checkpoint ck = load_checkpoint(dir / artifact::checkpoint);
    const Dataset data = take_prefix(load_mnist(hz.data_dir, MnistSplit::train), 10000);
    const double acc_exp = accuracy(ck.arch, ck.params, data.data, DropoutMode::expectation);
    const double acc_off = accuracy(ck.arch, ck.params, data.data, DropoutMode::off);
    const bool pass = acc_exp >= 0.99 && seconds <= 1800.0;
    return {2, pass,
            "keep 0.8, lr 0.2, " + std::to_string(m.results["steps_run"].get<std::size_t>()) +
                " steps; train accuracy " + fmt(acc_exp) + " (expectation), " + fmt(acc_off) + " (off); " +
                fmt(seconds, 5) + " s"};
}

// ---- criterion 3 ------------------------------------------------------------------

Verdict flatter_minima(const Harness& hz) {
    constexpr std::size_t kSeeds = 3;
    constexpr std::size_t kSteps = 2000;
    std::ostringstream detail;
    double acc_gap = 0.0;
    bool slices_ok = true;
    for (std::uint64_t seed = 1; seed <= kSeeds; ++seed) {
        const fs::path base = hz.cache / "paired" / ("seed" + std::to_string(seed));
        std::vector<std::pair<std::string, fs::path>> runs;
        double acc[2] = {0.0, 0.0};
        for (int drop = 1; drop >= 0; --drop) {
            ExperimentConfig c;
            c.arch = Architecture{{784, 50, 50, 10}, Activation::relu, {}};
            if (drop != 0) c.arch.dropout = {{2, 0.8}};
            c.optimizer.lr = 0.2;
            c.training.until_exploration = false;
            c.training.steps = kSteps;
            c.training.accuracy_stride = 50;
            c.seed = seed;
            const std::string label = drop != 0 ? "dropout" : "plain";
            const RunContext ctx = hz.context(c, base / label);
            const RunManifest m = hz.stage(ctx, "manifest-train.json", [&] { return run_train(ctx); });
            acc[drop] = m.results["test_accuracy"]["expectation"].get<double>();
            runs.emplace_back(label, ctx.out / artifact::checkpoint);
        }
        acc_gap += (acc[1] - acc[0]) / double(kSeeds);

        ExperimentConfig s;
        s.seed = seed;
        s.analysis.kind = AnalysisKind::slice1d;
        s.analysis.directions = 10;
        s.analysis.alpha_min = -1.0;
        s.analysis.alpha_max = 1.0;
        s.analysis.alpha_points = 41;
        for (const auto& [label, path] : runs) s.analysis.checkpoints.push_back({label, path.string()});
        const RunContext sctx = hz.context(s, base / "slice");
        hz.stage(sctx, "manifest-slice1d.json", [&] { return run_slice1d(sctx); });

        // rise[d] = f(0.5) - f(0) per model
        const auto rows = read_csv(sctx.out / artifact::slice1d);
        std::map<int, std::array<double, 2>> at0, at5;
        for (std::size_t r = 1; r < rows.size(); ++r) {
            const int dir = std::stoi(rows[r][0]);
            const double alpha = num(rows[r][1]);
            if (alpha == 0.0) at0[dir] = {num(rows[r][2]), num(rows[r][3])};
            if (alpha == 0.5) at5[dir] = {num(rows[r][2]), num(rows[r][3])};
        }
        std::size_t flatter = 0;
        for (const auto& [dir, v0] : at0) {
            const auto v5 = at5.at(dir);
            if (v5[0] - v0[0] < v5[1] - v0[1]) ++flatter;
        }
        slices_ok = slices_ok && flatter >= 7;
        detail << "seed " << seed << ": test acc " << fmt(acc[1]) << " vs " << fmt(acc[0]) << ", flatter in "
               << flatter << "/" << at0.size() << "; ";
    }
    detail << "mean accuracy gap " << fmt(acc_gap, 3);
    return {3, acc_gap > 0.0 && slices_ok, detail.str()};
}

// ---- criteria 4 and 5 -------------------------------------------------------------

struct CellResult {
    LogFit fit;
    bool matches_pipeline = true;
};

CellResult check_fit(const fs::path& scatter, const std::string& xcol, const std::string& ycol, const fs::path& fitcsv) {
    const auto [x, y] = columns(scatter, xcol, ycol);
    CellResult r;
    r.fit = log_fit(x, y);
    const auto [slope, rho] = columns(fitcsv, "slope", "spearman");
    r.matches_pipeline = std::abs(slope.at(0) - r.fit.slope) <= 1e-9 * std::max(1.0, std::abs(r.fit.slope)) &&
                         std::abs(rho.at(0) - r.fit.spearman) <= 1e-12;
    return r;
}

// Smallest and largest row-to-row displacement norm of a trajectory.
std::pair<double, double> displacement_range(const SampleSet& s) {
    double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
    for (std::size_t i = 1; i < s.count(); ++i) {
        double sq = 0.0;
        for (std::size_t j = 0; j < s.dim(); ++j) {
            const double d = s.samples(i, j) - s.samples(i - 1, j);
            sq += d * d;
        }
        lo = std::min(lo, std::sqrt(sq));
        hi = std::max(hi, std::sqrt(sq));
    }
    return {lo, hi};
}

Verdict variance_flatness(const Harness& hz) {
    std::ostringstream detail;
    bool pass = true;
    for (SampleKind kind : {SampleKind::trajectory, SampleKind::gradient}) {
        std::size_t good = 0;
        detail << to_string(kind) << ":";
        for (double keep : kGridKeep) {
            for (double lr : kGridLr) {
                const RunContext ctx = with_kind(sampling_dir(hz, keep, lr, 3000), kind, AnalysisKind::pca_flatness);
                ensure_samples(hz, ctx);
                hz.stage(ctx, "manifest-pca-flatness-" + std::string(to_string(kind)) + ".json",
                         [&] { return run_pca_flatness(ctx); });
                const CellResult r = check_fit(ctx.out / artifact::pca_scatter(kind), "lambda_or_eig", "F_v",
                                               ctx.out / artifact::fit("pca-flatness", kind));
                const bool ok = r.matches_pipeline && r.fit.spearman <= -0.5 && r.fit.slope < 0.0;
                good += ok ? 1 : 0;
                detail << " (" << keep << "," << lr << ") rho " << fmt(r.fit.spearman, 3) << " slope "
                       << fmt(r.fit.slope, 3) << (r.matches_pipeline ? "" : " MISMATCH");
                if (kind == SampleKind::trajectory) {
                    const auto [lo, hi] = displacement_range(load_samples(ctx.out / artifact::samples(kind)));
                    detail << " step norms " << fmt(lo, 2) << ".." << fmt(hi, 2);
                }
                detail << ";";
            }
        }
        detail << " " << good << "/4 cells. ";
        pass = pass && good >= 3;
    }
    return {4, pass, detail.str()};
}

Verdict projection_variance(const Harness& hz) {
    std::ostringstream detail;
    bool pass = true;
    for (SampleKind kind : {SampleKind::trajectory, SampleKind::gradient}) {
        std::size_t good = 0;
        detail << to_string(kind) << ":";
        for (double keep : kGridKeep) {
            for (double lr : kGridLr) {
                const RunContext ctx =
                    with_kind(sampling_dir(hz, keep, lr, 1000), kind, AnalysisKind::hessian_projection);
                ensure_samples(hz, ctx);
                hz.stage(ctx, "manifest-hessian.json", [&] { return run_hessian(ctx); });
                hz.stage(ctx, "manifest-hessian-projection-" + std::string(to_string(kind)) + ".json",
                         [&] { return run_hessian_projection(ctx); });
                const CellResult r = check_fit(ctx.out / artifact::projection_scatter(kind), "lambda_H",
                                               "projected_variance",
                                               ctx.out / artifact::fit("hessian-projection", kind));
                const bool ok = r.matches_pipeline && r.fit.spearman >= 0.5;
                good += ok ? 1 : 0;
                detail << " (" << keep << "," << lr << ") rho " << fmt(r.fit.spearman, 3) << " on " << r.fit.used
                       << (r.matches_pipeline ? "" : " MISMATCH") << ";";
            }
        }
        detail << " " << good << "/4 cells. ";
        pass = pass && good >= 3;
    }
    return {5, pass, detail.str()};
}

// ---- criterion 6 ------------------------------------------------------------------

Verdict alignment(const Harness& hz) {
    ExperimentConfig c;
    c.analysis.kind = AnalysisKind::alignment;
    c.optimizer.lr = 0.2;
    c.seed = kGridSeed;
    c.analysis.alignment_steps = 100;
    c.analysis.alignment_stride = 10;
    c.analysis.alignment_samples = 1000;
    const RunContext ctx = hz.context(c, hz.cache / "alignment");
    const RunManifest m = hz.stage(ctx, "manifest-alignment.json", [&] { return run_alignment(ctx); });
    const std::size_t logged = m.results["logged"].get<std::size_t>();

    const auto rows = read_csv(ctx.out / artifact::alignment);
    std::vector<double> ratios;
    std::size_t above = 0;
    for (std::size_t r = 1; r < rows.size(); ++r) {
        const double th = num(rows[r][1]), tbar = num(rows[r][2]);
        ratios.push_back(th / tbar);
        if (th > tbar) ++above;
    }
    std::sort(ratios.begin(), ratios.end());
    const std::size_t k = ratios.size();
    const double med = k == 0 ? 0.0 : (k % 2 == 1 ? ratios[k / 2] : 0.5 * (ratios[k / 2 - 1] + ratios[k / 2]));
    // Skipped steps count against the criterion.
    const double frac = logged == 0 ? 0.0 : double(above) / double(logged);
    std::string detail = std::to_string(above) + "/" + std::to_string(logged) + " logged steps above the isotropic baseline (" +
                         std::to_string(logged - k) + " skipped), median ratio " + fmt(med);
    if (k > 0) detail += ", range [" + fmt(ratios.front()) + ", " + fmt(ratios.back()) + "]";
    return {6, frac >= 0.95 && med > 2.0, detail};
}

// ---- criterion 7 ------------------------------------------------------------------

Verdict determinism(const Harness& hz) {
    ExperimentConfig c;
    c.dataset.prefix = 1000;
    c.optimizer.lr = 0.2;
    c.training.until_exploration = false;
    c.training.steps = 100;
    c.training.accuracy_stride = 10;
    c.sampling.count = 200;
    c.analysis.slice = "b1";
    c.analysis.k_top = 20;
    c.analysis.directions = 3;
    c.analysis.alpha_points = 11;
    c.analysis.alignment_steps = 20;
    c.analysis.alignment_samples = 50;
    c.seed = 17;

    const fs::path out = hz.cache / "determinism" / "run";
    const fs::path first = hz.cache / "determinism" / "first";
    for (int pass = 0; pass < 2; ++pass) {
        fs::remove_all(out);
        const RunContext base = hz.context(c, out);
        run_train(base);
        for (SampleKind k : {SampleKind::trajectory, SampleKind::gradient}) {
            const RunContext ctx = with_kind(base, k, AnalysisKind::pca_flatness);
            k == SampleKind::trajectory ? run_sample_trajectory(ctx) : run_sample_gradients(ctx);
            run_pca_flatness(ctx);
        }
        run_hessian(base);
        for (SampleKind k : {SampleKind::trajectory, SampleKind::gradient}) {
            run_hessian_projection(with_kind(base, k, AnalysisKind::hessian_projection));
        }
        run_flatness(base);
        run_slice1d(base);
        run_alignment(base);
        if (pass == 0) {
            fs::remove_all(first);
            fs::rename(out, first);
        }
    }
    std::size_t compared = 0;
    std::vector<std::string> differ;
    std::set<std::string> names;
    for (const auto& e : fs::directory_iterator(first)) names.insert(e.path().filename().string());
    for (const auto& e : fs::directory_iterator(out)) names.insert(e.path().filename().string());
    for (const auto& name : names) {
        if (!fs::exists(first / name) || !fs::exists(out / name)) {
            differ.push_back(name);
            continue;
        }
        bool same = false;
        if (name.rfind("manifest-", 0) == 0) {
            json a = to_json(load_manifest(first / name)), b = to_json(load_manifest(out / name));
            for (json* j : {&a, &b}) {
                j->erase("started");
                j->erase("finished");
            }
            same = a == b;
        } else {
            same = sha256_file(first / name) == sha256_file(out / name);
        }
        if (!same) differ.push_back(name);
        ++compared;
    }
    std::string detail = std::to_string(compared) + " artifacts compared across two runs";
    for (const auto& d : differ) detail += "; differs: " + d;
    return {7, differ.empty() && compared >= 20, detail};
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"flatlens acceptance harness"};
    Harness hz;
    std::string cache = FLATLENS_DEFAULT_CACHE;
    std::string data_dir;
    std::vector<int> only;
    bool strict = false;
    std::vector<int> required;
    app.add_option("--cache", cache, "Directory for cached runs");
    app.add_option("--data-dir", data_dir, "MNIST directory (else FLATLENS_DATA_DIR, else data/mnist)");
    app.add_option("--only", only, "Criteria to evaluate (default: all)")->check(CLI::Range(1, 7));
    app.add_flag("--strict", strict, "Exit 1 when any criterion fails");
    app.add_option("--require", required, "Exit 1 when one of these criteria fails")->check(CLI::Range(1, 7));
    app.add_flag("-v,--verbose", hz.verbose, "Pipeline progress on stderr");
    CLI11_PARSE(app, argc, argv);
    hz.cache = fs::absolute(cache);
    hz.data_dir = resolve_data_dir(data_dir);
    fs::create_directories(hz.cache);

    using Check = std::function<Verdict()>;
    const std::vector<std::pair<int, Check>> checks = {
        {1, [] { return oracle_suite(); }},
        {2, [&] { return training_reproduction(hz); }},
        {3, [&] { return flatter_minima(hz); }},
        {4, [&] { return variance_flatness(hz); }},
        {5, [&] { return projection_variance(hz); }},
        {6, [&] { return alignment(hz); }},
        {7, [&] { return determinism(hz); }},
    };
    const bool needs_data = only.empty() || std::any_of(only.begin(), only.end(), [](int c) { return c > 1; });
    if (needs_data && !fs::exists(hz.data_dir / "train-images-idx3-ubyte")) {
        std::cerr << "MNIST not found in " << hz.data_dir.string() << "; run tools/fetch_mnist.sh\n";
        return 2;
    }

    RunManifest manifest;
    manifest.command = "acceptance";
    manifest.started = utc_now();
    manifest.settings["grid"] = {{"keep", kGridKeep}, {"lr", kGridLr}, {"seed", kGridSeed}};
    json verdicts = json::array();
    bool all = true;
    bool required_failed = false;
    for (const auto& [id, check] : checks) {
        if (!only.empty() && std::find(only.begin(), only.end(), id) == only.end()) continue;
        const auto t0 = std::chrono::steady_clock::now();
        Verdict v;
        try {
            v = check();
        } catch (const Error& e) {
            v = {id, false, std::string("error (") + to_string(e.kind()) + "): " + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        std::cout << "criterion " << v.criterion << ": " << (v.pass ? "PASS" : "FAIL") << "  " << v.detail << std::endl;
        verdicts.push_back({{"criterion", v.criterion}, {"pass", v.pass}, {"detail", v.detail}, {"seconds", secs}});
        all = all && v.pass;
        if (!v.pass && std::find(required.begin(), required.end(), id) != required.end()) required_failed = true;
    }
    manifest.finished = utc_now();
    manifest.results["acceptance"] = verdicts;
    write_manifest(hz.cache / "manifest-acceptance.json", manifest);
    return (strict && !all) || required_failed ? 1 : 0;
}
