#include <doctest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "flatlens/data/synthetic.hpp"
#include "flatlens/errors.hpp"
#include "flatlens/hessian/alignment.hpp"
#include "flatlens/hessian/hessian.hpp"
#include "flatlens/linalg/blas.hpp"
#include "flatlens/linalg/eigh.hpp"
#include "flatlens/nn/network_objective.hpp"
#include "flatlens/noise/stats.hpp"

using namespace flatlens;

namespace {

std::vector<double> random_vector(std::size_t n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> nd;
    std::vector<double> v(n);
    for (double& x : v) x = nd(rng);
    return v;
}

std::vector<double> matvec(const Matrix& a, std::span<const double> v) {
    std::vector<double> out(a.rows(), 0.0);
    for (std::size_t i = 0; i < a.rows(); ++i) out[i] = dot(a.row(i), v);
    return out;
}

struct SmallNet {
    Architecture arch{{4, 5, 3, 3}, Activation::tanh, {}};
    Batch batch;
    ParamVector params;
    ParamSlice slice;

    SmallNet() {
        std::mt19937_64 rng(8);
        std::uniform_real_distribution<double> u(-1.0, 1.0);
        batch.inputs = Matrix(9, 4);
        for (double& x : batch.inputs.values()) x = u(rng);
        for (std::size_t i = 0; i < 9; ++i) batch.labels.push_back(static_cast<std::uint32_t>(i % 3));
        params = initialize(arch, InitScheme::xavier, 4);
        slice = make_slice(params.layout, "W1");
    }
    NetworkObjective objective() const { return NetworkObjective(arch, params, batch, slice); }
};

void error_message_kind(const Objective& f, std::span<const double> at, const HessianOptions& opt) {
    try {
        assemble_hessian(f, at, opt);
        FAIL("expected an asymmetry error");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::numeric);
    }
}

}  // namespace

TEST_CASE("hvp on a quadratic equals A v") {
    const Matrix a = psd_with_spectrum({5.0, 3.0, 1.0, 0.5}, 2);
    const QuadraticObjective q(a, {0.1, 0.2, -0.3, 0.4}, 0.0);
    const auto x = random_vector(4, 1);
    const auto v = random_vector(4, 2);
    const auto w = random_vector(4, 3);
    const auto hv = hvp(q, x, v, 1e-3);
    const auto av = matvec(a, v);
    for (std::size_t i = 0; i < 4; ++i) CHECK(hv[i] == doctest::Approx(av[i]).epsilon(1e-9));

    std::vector<double> comb(4);
    for (std::size_t i = 0; i < 4; ++i) comb[i] = 2.0 * v[i] - 3.0 * w[i];
    const auto hc = hvp(q, x, comb, 1e-3);
    const auto hw = hvp(q, x, w, 1e-3);
    for (std::size_t i = 0; i < 4; ++i) CHECK(hc[i] == doctest::Approx(2.0 * hv[i] - 3.0 * hw[i]).epsilon(1e-8));
    CHECK_THROWS_AS(hvp(q, x, v, 0.0), Error);
}

TEST_CASE("hvp on a small network matches second differences of the loss") {
    const SmallNet net;
    const NetworkObjective f = net.objective();
    const auto x = f.center();
    auto v = random_vector(x.size(), 5);
    const double nv = norm2(v);
    for (double& e : v) e /= nv;
    const auto hv = hvp(f, x, v, default_fd_step(x));
    const double vhv = dot(v, hv);
    const double h = 1e-3;
    std::vector<double> p(x), m(x);
    for (std::size_t i = 0; i < x.size(); ++i) {
        p[i] += h * v[i];
        m[i] -= h * v[i];
    }
    const double second = (f.value(p) - 2.0 * f.value(x) + f.value(m)) / (h * h);
    CHECK(std::abs(vhv - second) <= 1e-4 * std::max(1.0, std::abs(second)));
}

TEST_CASE("assembled Hessian of quadratics") {
    const Matrix diag(2, 2, {4.0, 0.0, 0.0, 1.0});
    const QuadraticObjective q(diag, {0.0, 0.0}, 0.0);
    const std::vector<double> at{0.3, -0.7};
    const HessianMatrix h = assemble_hessian(q, at);
    for (std::size_t i = 0; i < 4; ++i) CHECK(std::abs(h.values.values()[i] - diag.values()[i]) < 1e-10);
    CHECK(h.method == "fd-of-gradient");
    CHECK(h.h == doctest::Approx(1e-4 * 1.7));

    const Matrix a = psd_with_spectrum({9, 7, 5, 3, 2, 1, 0.5, 0.1}, 6);
    const QuadraticObjective big(a, random_vector(8, 7), 1.0);
    const HessianMatrix hb = assemble_hessian(big, random_vector(8, 9));
    double worst = 0.0;
    for (std::size_t i = 0; i < a.values().size(); ++i) worst = std::max(worst, std::abs(hb.values.values()[i] - a.values()[i]));
    CHECK(worst < 1e-8);
    CHECK(hb.asymmetry < 1e-8);

    const ScaledObjective scaled(big, 3.0);
    const HessianMatrix hs = assemble_hessian(scaled, random_vector(8, 9));
    for (std::size_t i = 0; i < a.values().size(); ++i) CHECK(std::abs(hs.values.values()[i] - 3.0 * a.values()[i]) < 1e-7);

    HessianOptions cap;
    cap.max_dim = 4;
    try {
        assemble_hessian(big, random_vector(8, 9), cap);
        FAIL("expected a cap error");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::config);
    }
}

TEST_CASE("asymmetric finite differences are rejected") {
    // Gradient field with a non-symmetric Jacobian: not the gradient of anything.
    const FunctionObjective skew(
        2, [](std::span<const double> x) { return x[0] * x[0] + x[1] * x[1]; },
        [](std::span<const double> x, std::span<double> g) {
            g[0] = 2.0 * x[0] + x[1];
            g[1] = 2.0 * x[1];
            return x[0] * x[0] + x[1] * x[1];
        });
    const std::vector<double> at{0.5, 0.5};
    try {
        assemble_hessian(skew, at);
        FAIL("expected an asymmetry error");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::numeric);
    }
    HessianOptions lenient;
    lenient.fail_on_asymmetry = false;
    const HessianMatrix h = assemble_hessian(skew, at, lenient);
    CHECK(h.asymmetry == doctest::Approx(0.5).epsilon(1e-6));
    CHECK(h.values(0, 1) == doctest::Approx(0.5).epsilon(1e-6));
    CHECK(h.values(1, 0) == h.values(0, 1));
}

TEST_CASE("a kink on one side uses the other one-sided difference") {
    // f = x relu(y): the gradient has a kink at y = 0, inside the step.
    const FunctionObjective kinked(
        2, [](std::span<const double> v) { return v[0] * std::max(v[1], 0.0); },
        [](std::span<const double> v, std::span<double> g) {
            g[0] = std::max(v[1], 0.0);
            g[1] = v[1] > 0.0 ? v[0] : 0.0;
            return v[0] * std::max(v[1], 0.0);
        });
    const std::vector<double> at{0.3, 2e-5};
    HessianOptions fixed;
    fixed.h = 1e-4;
    const HessianMatrix h = assemble_hessian(kinked, at, fixed);
    CHECK(h.one_sided_columns == 1);
    CHECK(h.asymmetry < 1e-10);
    CHECK(h.values(0, 1) == doctest::Approx(1.0));
    CHECK(std::abs(h.values(1, 1)) < 1e-10);
    CHECK(std::abs(h.values(0, 0)) < 1e-10);
}

TEST_CASE("kinks on both sides shrink the automatic step") {
    // Kinks at y = 0 and y = 4e-5 around y = 2e-5.
    auto hinge = [](double y) { return std::max(y, 0.0) - 2.0 * std::max(y - 4e-5, 0.0); };
    auto slope = [](double y) { return (y > 0.0 ? 1.0 : 0.0) - (y > 4e-5 ? 2.0 : 0.0); };
    const FunctionObjective kinked(
        2, [=](std::span<const double> v) { return v[0] * hinge(v[1]); },
        [=](std::span<const double> v, std::span<double> g) {
            g[0] = hinge(v[1]);
            g[1] = v[0] * slope(v[1]);
            return v[0] * hinge(v[1]);
        });
    const std::vector<double> at{0.3, 2e-5};
    HessianOptions fixed;
    fixed.h = 1e-4;
    error_message_kind(kinked, at, fixed);

    const HessianMatrix h = assemble_hessian(kinked, at);
    CHECK(h.h == doctest::Approx(1.3e-5));
    CHECK(h.asymmetry < 1e-10);
    CHECK(h.values(0, 1) == doctest::Approx(1.0));
}

TEST_CASE("network Hessian eigenpairs agree with hvp") {
    const SmallNet net;
    const NetworkObjective f = net.objective();
    const auto x = f.center();
    const HessianMatrix h = assemble_hessian(f, x);
    CHECK(h.values == h.values.transposed());
    const Spectrum sp = eigh(h.values, SpectrumSource::hessian);
    const double step = default_fd_step(x);
    for (std::size_t i = 0; i < 10; ++i) {
        const auto v = sp.vector(i);
        const auto hv = hvp(f, x, v, step);
        double res = 0.0;
        for (std::size_t j = 0; j < v.size(); ++j) res = std::max(res, std::abs(hv[j] - sp.values[i] * v[j]));
        CHECK(res < 1e-5 * std::abs(sp.values.front()));
    }
}

TEST_CASE("Hessian projection scatter") {
    const Spectrum h = eigh(psd_with_spectrum({8, 4, 2, 1, 0.5, 0.25}, 3), SpectrumSource::hessian);
    std::mt19937_64 rng(4);
    std::normal_distribution<double> nd;

    // Samples with covariance equal to H: Var along v_i is lambda_i.
    const std::size_t n = 20000;
    Matrix s(n, 6);
    for (std::size_t r = 0; r < n; ++r) {
        for (std::size_t i = 0; i < 6; ++i) {
            const double z = nd(rng) * std::sqrt(h.values[i]);
            const auto v = h.vector(i);
            for (std::size_t c = 0; c < 6; ++c) s(r, c) += z * v[c];
        }
    }
    const auto pts = hessian_projection_scatter(h, s, 6);
    REQUIRE(pts.size() == 6);
    std::vector<std::pair<double, double>> pairs;
    for (const auto& p : pts) {
        CHECK(p.eigenvalue == h.values[p.index]);
        pairs.emplace_back(p.eigenvalue, p.variance);
    }
    const PowerLawFit fit = powerlaw_fit(pairs);
    CHECK(fit.slope == doctest::Approx(1.0).epsilon(0.05));
    CHECK(fit.spearman == doctest::Approx(1.0));

    // Isotropic control: variance flat across eigen-directions.
    Matrix iso(n, 6);
    for (double& x : iso.values()) x = nd(rng);
    for (const auto& p : hessian_projection_scatter(h, iso, 6)) CHECK(p.variance == doctest::Approx(1.0).epsilon(0.05));

    CHECK_THROWS_AS(hessian_projection_scatter(h, Matrix(3, 5), 2), Error);
    CHECK_THROWS_AS(hessian_projection_scatter(h, s, 0), Error);
    CHECK_THROWS_AS(hessian_projection_scatter(h, s, 7), Error);
}

TEST_CASE("alignment terms") {
    const std::size_t d = 6;
    const Matrix a = psd_with_spectrum({3, 2, 2, 1, 1, 0.5}, 5);
    const AlignmentTerms iso = alignment_terms(Matrix::identity(d), a);
    CHECK(iso.ratio == doctest::Approx(1.0).epsilon(1e-14));

    // Rank-one H and Sigma along the same unit vector: ratio D.
    auto u = random_vector(d, 1);
    const double nu = norm2(u);
    for (double& x : u) x /= nu;
    Matrix uu(d, d);
    for (std::size_t i = 0; i < d; ++i) {
        for (std::size_t j = 0; j < d; ++j) uu(i, j) = u[i] * u[j];
    }
    CHECK(alignment_terms(uu, uu).ratio == doctest::Approx(double(d)).epsilon(1e-12));

    const Matrix h = psd_with_spectrum({5, 4, 3, 2, 1, 0.1}, 8);
    const AlignmentTerms t = alignment_terms(h, a);
    const Matrix prod = matmul(h, a);
    CHECK(std::abs(t.tr_h_sigma - trace(prod)) <= 1e-8 * std::abs(trace(prod)));
    const double bar = trace(h) * trace(a) / double(d);
    CHECK(std::abs(t.tr_h_sigma_bar - bar) <= 1e-9 * bar);
    CHECK(t.tr_h == doctest::Approx(trace(h)));
    CHECK(t.tr_sigma == doctest::Approx(trace(a)));
    CHECK(t.ratio == doctest::Approx(t.tr_h_sigma / t.tr_h_sigma_bar));
    CHECK_THROWS_AS(alignment_terms(h, Matrix::identity(5)), Error);
}

TEST_CASE("alignment trace on a small network") {
    SmallNet net;
    const Architecture probe = net.arch.with_dropout({{2, 0.5}});
    AlignmentOptions opt;
    opt.steps = 20;
    opt.stride = 10;
    opt.samples = 200;
    opt.seed = 3;
    const AlignmentTrace tr = alignment_trace(net.arch, net.params, net.batch, OptimizerState::gd(0.1), probe, opt);
    REQUIRE(tr.steps.size() == 3);
    CHECK(tr.steps[0].step == 0);
    CHECK(tr.steps[1].step == 10);
    CHECK(tr.steps[2].step == 20);
    for (const auto* s : tr.completed()) {
        CHECK(std::isfinite(s->terms.ratio));
        CHECK(s->terms.tr_sigma > 0.0);
    }
    const AlignmentTrace again = alignment_trace(net.arch, net.params, net.batch, OptimizerState::gd(0.1), probe, opt);
    for (std::size_t i = 0; i < 3; ++i) CHECK(again.steps[i].terms.ratio == tr.steps[i].terms.ratio);

    std::ostringstream csv;
    write_alignment_csv(csv, tr);
    std::istringstream in(csv.str());
    std::string line;
    std::getline(in, line);
    CHECK(line == "step,tr_H_Sigma,tr_H_Sigma_bar,tr_H,tr_Sigma,ratio");
    std::size_t rows = 0;
    while (std::getline(in, line)) {
        CHECK(std::count(line.begin(), line.end(), ',') == 5);
        ++rows;
    }
    CHECK(rows == tr.completed().size());
}
