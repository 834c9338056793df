#include <doctest.h>

#include <cmath>
#include <random>

#include "flatlens/data/synthetic.hpp"
#include "flatlens/errors.hpp"
#include "flatlens/linalg/blas.hpp"
#include "flatlens/noise/collect.hpp"
#include "flatlens/noise/pca.hpp"
#include "flatlens/noise/sample_set.hpp"
#include "flatlens/noise/stats.hpp"
#include "flatlens/nn/rng.hpp"

using namespace flatlens;

namespace {

Matrix gaussian_rows(std::size_t n, std::size_t d, double sigma, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> nd(0.0, sigma);
    Matrix m(n, d);
    for (double& x : m.values()) x = nd(rng);
    return m;
}

// Rows with covariance C: x = L z with C = L L^T (here L = Q diag(sqrt(l))).
Matrix correlated_rows(std::size_t n, const Matrix& q, const std::vector<double>& l, std::uint64_t seed) {
    const std::size_t d = l.size();
    Matrix z = gaussian_rows(n, d, 1.0, seed);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < d; ++j) z(i, j) *= std::sqrt(l[j]);
    }
    return matmul(z, q, Trans::no, Trans::yes);
}

Batch tiny_batch(std::size_t n, std::size_t d, std::size_t classes, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    Batch b;
    b.inputs = Matrix(n, d);
    for (double& x : b.inputs.values()) x = u(rng);
    for (std::size_t i = 0; i < n; ++i) b.labels.push_back(static_cast<std::uint32_t>(i % classes));
    return b;
}

}  // namespace

TEST_CASE("covariance hand cases") {
    const Matrix same(4, 3, {1, 2, 3, 1, 2, 3, 1, 2, 3, 1, 2, 3});
    const Matrix c_same = covariance(same);
    for (double x : c_same.values()) CHECK(x == 0.0);

    const std::vector<double> u{1.0, -2.0, 0.5};
    const Matrix pm(2, 3, {1.0, -2.0, 0.5, -1.0, 2.0, -0.5});
    const Matrix c = covariance(pm);
    for (std::size_t i = 0; i < 3; ++i) {
        for (std::size_t j = 0; j < 3; ++j) CHECK(c(i, j) == doctest::Approx(2.0 * u[i] * u[j]).epsilon(1e-15));
    }
    CHECK_THROWS_AS(covariance(Matrix(1, 3)), Error);
}

TEST_CASE("covariance is exactly symmetric, PSD, and obeys the trace identity") {
    const Matrix s = gaussian_rows(200, 30, 1.5, 4);
    const Matrix c = covariance(s);
    CHECK(c == c.transposed());
    const Spectrum sp = eigh(c);
    CHECK(sp.values.back() >= -1e-10 * sp.values.front());
    double per_coord = 0.0;
    for (std::size_t j = 0; j < 30; ++j) {
        std::vector<double> e(30, 0.0);
        e[j] = 1.0;
        per_coord += projected_variance(s, e);
    }
    CHECK(std::abs(trace(c) - per_coord) <= 1e-9 * trace(c));
    double over_basis = 0.0;
    for (std::size_t i = 0; i < 30; ++i) {
        const double v = projected_variance(s, sp.vector(i));
        CHECK(std::abs(v - sp.values[i]) <= 1e-9 * sp.values.front());
        over_basis += v;
    }
    CHECK(std::abs(over_basis - trace(c)) <= 1e-9 * trace(c));
}

TEST_CASE("isotropic Gaussian spectrum sits inside a Marchenko-Pastur-width band") {
    const double sigma = 0.7;
    const Spectrum sp = eigh(covariance(gaussian_rows(10000, 50, sigma, 1)));
    CHECK(sp.values.front() <= 1.2 * sigma * sigma);
    CHECK(sp.values.back() >= 0.8 * sigma * sigma);
}

TEST_CASE("projected variance hand cases") {
    const Matrix same(3, 2, {1, 1, 1, 1, 1, 1});
    CHECK(projected_variance(same, std::vector<double>{1.0, 0.0}) == 0.0);
    const std::vector<double> u{3.0, 4.0};
    const Matrix pm(2, 2, {3.0, 4.0, -3.0, -4.0});
    CHECK(projected_variance(pm, std::vector<double>{0.6, 0.8}) == doctest::Approx(2.0 * 25.0));
    const Matrix s = gaussian_rows(50, 5, 1.0, 2);
    const Matrix c = covariance(s);
    std::vector<double> v{0.1, -0.3, 0.5, 0.2, 0.4};
    const double n = norm2(v);
    for (double& x : v) x /= n;
    double vcv = 0.0;
    for (std::size_t i = 0; i < 5; ++i) {
        for (std::size_t j = 0; j < 5; ++j) vcv += v[i] * c(i, j) * v[j];
    }
    CHECK(std::abs(projected_variance(s, v) - vcv) < 1e-12);
}

TEST_CASE("rotation equivariance of the spectrum") {
    const Matrix s = correlated_rows(500, random_orthogonal(6, 1), {6, 5, 4, 3, 2, 1}, 3);
    const Matrix q = random_orthogonal(6, 9);
    const Matrix rotated = matmul(s, q, Trans::no, Trans::yes);  // rows x -> Q x
    const Spectrum a = eigh(covariance(s)), b = eigh(covariance(rotated));
    for (std::size_t i = 0; i < 6; ++i) {
        CHECK(b.values[i] == doctest::Approx(a.values[i]).epsilon(1e-10));
        const auto va = a.vector(i), vb = b.vector(i);
        std::vector<double> qa(6, 0.0);
        for (std::size_t r = 0; r < 6; ++r) {
            for (std::size_t k = 0; k < 6; ++k) qa[r] += q(r, k) * va[k];
        }
        CHECK(std::abs(std::abs(dot(qa, vb)) - 1.0) < 1e-8);
    }
}

TEST_CASE("ranks and correlations") {
    const std::vector<double> v{3.0, 1.0, 2.0, 2.0};
    CHECK(ranks(v) == std::vector<double>{4.0, 1.0, 2.5, 2.5});
    const std::vector<double> x{1, 2, 3, 4, 5}, y{2, 4, 8, 16, 32}, z{5, 4, 3, 2, 1};
    CHECK(spearman(x, y) == doctest::Approx(1.0));
    CHECK(spearman(x, z) == doctest::Approx(-1.0));
    CHECK(pearson(x, z) == doctest::Approx(-1.0));
}

TEST_CASE("power-law fits") {
    std::vector<std::pair<double, double>> sq, inv;
    for (double x : {0.5, 1.0, 2.0, 3.0, 7.0}) {
        sq.emplace_back(x, 4.0 * x * x);
        inv.emplace_back(x, 3.0 / x);
    }
    const PowerLawFit a = powerlaw_fit(sq);
    CHECK(a.slope == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(a.intercept == doctest::Approx(std::log(4.0)).epsilon(1e-12));
    CHECK(a.spearman == doctest::Approx(1.0));
    const PowerLawFit b = powerlaw_fit(inv);
    CHECK(b.slope == doctest::Approx(-1.0).epsilon(1e-12));
    CHECK(b.spearman == doctest::Approx(-1.0));

    std::mt19937_64 rng(5);
    std::normal_distribution<double> noise(0.0, 0.01);
    std::vector<std::pair<double, double>> noisy;
    for (int i = 1; i <= 100; ++i) {
        const double x = 0.1 * i;
        noisy.emplace_back(x, x * x * (1.0 + noise(rng)));
    }
    const PowerLawFit c = powerlaw_fit(noisy);
    CHECK(c.slope >= 1.9);
    CHECK(c.slope <= 2.1);

    sq.emplace_back(-1.0, 2.0);
    sq.emplace_back(2.0, 0.0);
    sq.emplace_back(2.0, std::numeric_limits<double>::infinity());
    const PowerLawFit d = powerlaw_fit(sq);
    CHECK(d.used == 5);
    CHECK(d.excluded == 3);
    CHECK(d.slope == doctest::Approx(2.0));
    const std::vector<std::pair<double, double>> two{{1, 1}, {2, 2}};
    CHECK_THROWS_AS(powerlaw_fit(two), Error);
}

TEST_CASE("variance-flatness scatter on quadratic fixtures") {
    const std::vector<double> curv{8.0, 4.0, 2.0, 1.0, 0.5};
    const auto task = synthetic_quadratic_task(3, curv, 1.0);
    const Spectrum h = eigh(task.hessian);
    PcaScatterOptions opt;
    opt.k_top = 5;

    // Noise aligned with curvature: larger variance along sharper directions.
    const auto aligned = pca_flatness_scatter(eigh(task.hessian, SpectrumSource::gradient_covariance),
                                              task.objective, task.minimum, opt);
    REQUIRE(aligned.size() == 5);
    for (std::size_t i = 1; i < 5; ++i) {
        CHECK(aligned[i].variance < aligned[i - 1].variance);
        CHECK(aligned[i].flatness.width > aligned[i - 1].flatness.width);
    }
    std::vector<std::pair<double, double>> pairs;
    for (const auto& p : aligned) pairs.emplace_back(p.variance, p.flatness.width);
    const PowerLawFit fit = powerlaw_fit(pairs);
    CHECK(fit.slope == doctest::Approx(-0.5).epsilon(1e-5));
    CHECK(fit.spearman == doctest::Approx(-1.0));

    // Inverse-curvature-shaped noise flips the relation.
    Matrix inv(5, 5);
    for (std::size_t i = 0; i < 5; ++i) {
        const auto v = h.vector(i);
        for (std::size_t r = 0; r < 5; ++r) {
            for (std::size_t c = 0; c < 5; ++c) inv(r, c) += v[r] * v[c] / h.values[i];
        }
    }
    for (std::size_t r = 0; r < 5; ++r) {
        for (std::size_t c = 0; c < r; ++c) inv(r, c) = inv(c, r);
    }
    const auto flipped = pca_flatness_scatter(eigh(inv), task.objective, task.minimum, opt);
    for (std::size_t i = 1; i < 5; ++i) CHECK(flipped[i].flatness.width < flipped[i - 1].flatness.width);

    // Isotropic control: one variance level, many widths.
    Matrix iso = Matrix::identity(5);
    const auto control = pca_flatness_scatter(eigh(iso), task.objective, task.minimum, opt);
    double lo = 1e300, hi = 0.0;
    for (const auto& p : control) {
        CHECK(p.variance == 1.0);
        lo = std::min(lo, p.flatness.width);
        hi = std::max(hi, p.flatness.width);
    }
    CHECK(hi > 1.5 * lo);
}

TEST_CASE("eigenvalue floor trims the null space") {
    const auto task = synthetic_quadratic_task(1, {2.0, 1.0, 1.0}, 1.0, true);
    Matrix sigma(3, 3);
    sigma(0, 0) = 1.0;
    sigma(1, 1) = 1e-20;
    PcaScatterOptions opt;
    opt.k_top = 3;
    CHECK(pca_flatness_scatter(eigh(sigma), task.objective, task.minimum, opt).size() == 1);
}

TEST_CASE("sample archive round trip") {
    SampleSet s;
    s.kind = SampleKind::gradient;
    s.samples = gaussian_rows(7, 4, 1.0, 3);
    s.meta = {99, 0.5, 0.2, 10, 16, "b1"};
    const std::string path = "test_noise_archive.fltlsa";
    save_samples(path, s);
    const SampleSet r = load_samples(path);
    CHECK(r.kind == s.kind);
    CHECK(r.samples == s.samples);
    CHECK(r.meta.seed == 99);
    CHECK(r.meta.keep == 0.5);
    CHECK(r.meta.lr == 0.2);
    CHECK(r.meta.step_begin == 10);
    CHECK(r.meta.step_end == 16);
    CHECK(r.meta.slice == "b1");

    const Spectrum sp = eigh(covariance(s), SpectrumSource::gradient_covariance);
    save_spectrum(path, sp, s.meta);
    const Spectrum back = load_spectrum(path);
    CHECK(back.values == sp.values);
    CHECK(back.vectors == sp.vectors);
    CHECK(back.source == SpectrumSource::gradient_covariance);
    CHECK_THROWS_AS(load_samples(path), Error);
    std::filesystem::remove(path);

    ArchiveRecord rec{"trajectory", s.meta, s.samples};
    const std::string bytes = encode_archive(rec);
    CHECK(bytes.substr(0, 8) == "FLTLSA01");
    CHECK_THROWS_AS(decode_archive(bytes.substr(0, bytes.size() - 1)), Error);
    CHECK_THROWS_AS(decode_archive(bytes + "z"), Error);
}

TEST_CASE("trajectory rows are post-step slices in step order") {
    const Architecture arch{{3, 4, 4, 2}, Activation::relu, {{2, 0.5}}};
    const Batch b = tiny_batch(12, 3, 2, 1);
    TrainRun run{arch, initialize(arch, InitScheme::xavier, 2), OptimizerState::gd(0.1), 5, 3, {}};
    TrainRun copy = run;
    const ParamSlice slice = make_slice(run.params.layout, "W1");
    const SampleSet s = collect_trajectory(run, b, slice, 6);
    CHECK(s.count() == 6);
    CHECK(s.meta.step_begin == 4);
    CHECK(s.meta.step_end == 9);
    CHECK(run.step == 9);
    std::size_t row = 0;
    train(copy.arch, copy.params, b, copy.optimizer, 6, MaskPolicy::fresh_per_step, 5,
          [&](const StepRecord& r) {
              const auto part = slice.extract(r.params.values);
              CHECK(std::equal(part.begin(), part.end(), s.samples.row(row).begin()));
              ++row;
              return true;
          },
          3);
}

TEST_CASE("trajectory degenerate cases give a zero covariance") {
    const Architecture arch{{3, 4, 4, 2}, Activation::relu, {{2, 0.5}}};
    const Batch b = tiny_batch(12, 3, 2, 1);
    TrainRun frozen{arch, initialize(arch, InitScheme::xavier, 2), OptimizerState::gd(0.0), 5, 0, {}};
    const ParamSlice slice = make_slice(frozen.params.layout, "W1");
    const Matrix c_frozen = covariance(collect_trajectory(frozen, b, slice, 5));
    for (double x : c_frozen.values()) CHECK(x == 0.0);

    // Zero weights with balanced labels: an exact stationary point.
    const Architecture plain = arch.with_dropout({});
    TrainRun still{plain, ParamVector(plain), OptimizerState::gd(0.5), 1, 0, {}};
    const Matrix c_still = covariance(collect_trajectory(still, b, slice, 5));
    for (double x : c_still.values()) CHECK(x == 0.0);
}

TEST_CASE("gradient samples") {
    const Architecture arch{{3, 4, 4, 2}, Activation::tanh, {{2, 0.5}}};
    const ParamVector p = initialize(arch, InitScheme::xavier, 3);
    const Batch b = tiny_batch(16, 3, 2, 2);
    const ParamSlice slice = make_slice(p.layout, "W1");

    const GradientSamples keep_all = sample_gradients(arch.with_dropout({{2, 1.0}}), p, b, slice, 5, 1);
    CHECK(keep_all.warning.has_value());
    for (std::size_t i = 1; i < 5; ++i) CHECK(std::equal(keep_all.set.samples.row(i).begin(),
                                                         keep_all.set.samples.row(i).end(),
                                                         keep_all.set.samples.row(0).begin()));

    const GradientSamples two = sample_gradients(arch, p, b, slice, 2, 4);
    CHECK(eigh(covariance(two.set)).values[1] <= 1e-12 * std::max(1e-300, eigh(covariance(two.set)).values[0]));

    // Exact expectation over all 16 masks of the probed layer.
    const SliceEvaluator ev(arch, p, b, slice);
    const auto x = slice.extract(p.values);
    std::vector<double> expect(slice.length, 0.0), g(slice.length);
    for (unsigned bits = 0; bits < 16; ++bits) {
        DropoutMask m{{std::vector<double>(4)}};
        for (unsigned k = 0; k < 4; ++k) m.layers[0][k] = (bits >> k) & 1u;
        ev.gradient(x, &m, g);
        for (std::size_t i = 0; i < g.size(); ++i) expect[i] += g[i] / 16.0;
    }
    const std::size_t n = 2000;
    const GradientSamples a = sample_gradients(arch, p, b, slice, n, 11);
    const GradientSamples c = sample_gradients(arch, p, b, slice, n, 12);
    CHECK_FALSE(a.set.samples == c.set.samples);
    for (const auto* set : {&a.set, &c.set}) {
        const Matrix cov = covariance(*set);
        for (std::size_t j = 0; j < slice.length; ++j) {
            double mean = 0.0;
            for (std::size_t i = 0; i < n; ++i) mean += set->samples(i, j);
            mean /= double(n);
            CHECK(std::abs(mean - expect[j]) <= 3.0 * std::sqrt(cov(j, j) / double(n)) + 1e-15);
        }
    }
}

TEST_CASE("exploration-phase detector") {
    const Architecture arch{{1, 2}, Activation::relu, {}};
    ParamVector good(arch);
    good.values = {1.0, -1.0, 0.0, 0.0};
    Batch b;
    b.inputs = Matrix(2, 1, {1.0, 2.0});
    b.labels = {0, 0};

    PhaseDetector flat(arch, b);
    std::size_t fired = 0;
    for (std::size_t s = 1; s <= 150 && fired == 0; ++s) {
        if (flat.observe(StepRecord{s, good, 0.1})) fired = s;
    }
    CHECK(fired == 100);
    CHECK(flat.entered_at() == std::optional<std::size_t>(100));

    PhaseDetector falling(arch, b);
    bool any = false;
    double l = 1.0;
    for (std::size_t s = 1; s <= 300; ++s) {
        any = any || falling.observe(StepRecord{s, good, l});
        l *= 0.999;  // about 5% per half window
    }
    CHECK_FALSE(any);

    ParamVector bad = good;
    bad.values = {-1.0, 1.0, 0.0, 0.0};
    PhaseDetector inaccurate(arch, b);
    any = false;
    for (std::size_t s = 1; s <= 300; ++s) any = any || inaccurate.observe(StepRecord{s, bad, 0.1});
    CHECK_FALSE(any);
    CHECK(inaccurate.last_accuracy() == 0.0);
}

TEST_CASE("exploration timeout carries the loss curve") {
    const Architecture arch{{3, 4, 4, 2}, Activation::relu, {{2, 0.5}}};
    const Batch b = tiny_batch(12, 3, 2, 1);
    TrainRun run{arch, initialize(arch, InitScheme::xavier, 2), OptimizerState::gd(0.0), 5, 0, {}};
    PhaseDetectorOptions opt;
    opt.min_accuracy = 1.01;  // unreachable
    try {
        train_to_exploration(run, b, 150, opt);
        FAIL("expected a timeout");
    } catch (const PhaseTimeout& e) {
        CHECK(e.kind() == ErrorKind::timeout);
        CHECK(e.losses().size() == 150);
    }
}
