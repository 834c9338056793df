#include "flatlens/hessian/hessian.hpp"

#include <algorithm>
#include <cmath>
#include <utility>

#include "flatlens/errors.hpp"
#include "flatlens/landscape/flatness.hpp"
#include "flatlens/linalg/blas.hpp"
#include "flatlens/noise/stats.hpp"

namespace flatlens {

double default_fd_step(std::span<const double> x) { return 1e-4 * (1.0 + max_abs(x)); }

std::vector<double> hvp(const Objective& f, std::span<const double> x, std::span<const double> dir,
                        double h) {
    const std::size_t d = f.dim();
    require(x.size() == d && dir.size() == d, ErrorKind::dimension, "hvp: dimension mismatch");
    require(h > 0.0, ErrorKind::config, "hvp: step must be positive");
    std::vector<double> xp(d), xm(d), gp(d), gm(d);
    for (std::size_t i = 0; i < d; ++i) {
        xp[i] = x[i] + h * dir[i];
        xm[i] = x[i] - h * dir[i];
    }
    f.gradient(xp, gp);
    f.gradient(xm, gm);
    std::vector<double> out(d);
    for (std::size_t i = 0; i < d; ++i) {
        out[i] = (gp[i] - gm[i]) / (2.0 * h);
        require(std::isfinite(out[i]), ErrorKind::numeric, "hvp: non-finite gradient");
    }
    return out;
}

namespace {

// Forward and backward differences of the gradient along the columns `cols` at
// step h: fwd(i, k) = (g_i(x + h e_c) - g_i(x)) / h, bwd likewise from x - h e_c.
struct OneSided {
    Matrix fwd;
    Matrix bwd;
};

OneSided fd_columns(const Objective& f, std::span<const double> x, std::span<const std::size_t> cols, double h) {
    const std::size_t d = f.dim();
    OneSided out{Matrix(d, cols.size()), Matrix(d, cols.size())};
    std::vector<double> xp(x.begin(), x.end());
    std::vector<double> xm(x.begin(), x.end());
    std::vector<double> g0(d), gp(d), gm(d);
    f.gradient(x, g0);
    for (std::size_t k = 0; k < cols.size(); ++k) {
        const std::size_t j = cols[k];
        xp[j] = x[j] + h;
        xm[j] = x[j] - h;
        f.gradient(xp, gp);
        f.gradient(xm, gm);
        xp[j] = x[j];
        xm[j] = x[j];
        for (std::size_t i = 0; i < d; ++i) {
            const double a = (gp[i] - g0[i]) / h;
            const double b = (g0[i] - gm[i]) / h;
            require(std::isfinite(a) && std::isfinite(b), ErrorKind::numeric, "assemble_hessian: non-finite gradient");
            out.fwd(i, k) = a;
            out.bwd(i, k) = b;
        }
    }
    return out;
}

// Central differences on the block rows `cols`, except that a column whose two
// one-sided differences disagree (an activation kink within h on one side) is
// replaced by the one-sided difference that best matches its transposed row.
// Returns raw(a, k) = d g_{cols[a]} / d x_{cols[k]} and the number of columns
// replaced.
std::pair<Matrix, std::size_t> repaired_block(const OneSided& os, std::span<const std::size_t> rows, double tol) {
    const std::size_t n = os.fwd.cols();
    Matrix raw(rows.size(), n);
    std::vector<double> gap(n, 0.0), size(n, 0.0);
    for (std::size_t k = 0; k < n; ++k) {
        for (std::size_t a = 0; a < rows.size(); ++a) {
            const double f = os.fwd(rows[a], k), b = os.bwd(rows[a], k);
            raw(a, k) = 0.5 * (f + b);
            gap[k] = std::max(gap[k], std::abs(f - b));
            size[k] = std::max(size[k], std::abs(raw(a, k)));
        }
    }
    // Scale from the columns that are clearly smooth.
    double scale = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
        if (gap[k] <= 0.5 * size[k]) scale = std::max(scale, size[k]);
    }
    if (scale == 0.0) return {raw, 0};
    // A smooth column has a gap of order h; a kink inside the step opens a gap
    // comparable to the entries themselves.
    std::vector<bool> kinked(n);
    for (std::size_t k = 0; k < n; ++k) kinked[k] = gap[k] > std::sqrt(tol) * scale;

    std::size_t replaced = 0;
    for (std::size_t k = 0; k < n; ++k) {
        if (!kinked[k]) continue;
        double ec = 0.0, ef = 0.0, eb = 0.0;
        for (std::size_t a = 0; a < rows.size(); ++a) {
            if (kinked[a]) continue;
            const double ref = raw(k, a);
            ec = std::max(ec, std::abs(raw(a, k) - ref));
            ef = std::max(ef, std::abs(os.fwd(rows[a], k) - ref));
            eb = std::max(eb, std::abs(os.bwd(rows[a], k) - ref));
        }
        if (ec <= std::min(ef, eb)) continue;
        const Matrix& pick = ef <= eb ? os.fwd : os.bwd;
        for (std::size_t a = 0; a < rows.size(); ++a) raw(a, k) = pick(rows[a], k);
        ++replaced;
    }
    return {raw, replaced};
}

double relative_asymmetry(const Matrix& raw) {
    double scale = 0.0, asym = 0.0;
    for (std::size_t i = 0; i < raw.rows(); ++i) {
        for (std::size_t j = 0; j <= i; ++j) {
            scale = std::max({scale, std::abs(raw(i, j)), std::abs(raw(j, i))});
            asym = std::max(asym, std::abs(raw(i, j) - raw(j, i)));
        }
    }
    return scale > 0.0 ? asym / scale : 0.0;
}

HessianMatrix assemble_at(const Objective& f, std::span<const double> x, double h, double tol) {
    const std::size_t d = f.dim();
    std::vector<std::size_t> all(d);
    for (std::size_t j = 0; j < d; ++j) all[j] = j;
    auto [raw, replaced] = repaired_block(fd_columns(f, x, all, h), all, tol);
    HessianMatrix out;
    out.h = h;
    out.one_sided_columns = replaced;
    out.asymmetry = relative_asymmetry(raw);
    out.values = Matrix(d, d);
    for (std::size_t i = 0; i < d; ++i) {
        for (std::size_t j = 0; j <= i; ++j) {
            const double s = 0.5 * (raw(i, j) + raw(j, i));
            out.values(i, j) = s;
            out.values(j, i) = s;
        }
    }
    return out;
}

}  // namespace

std::vector<double> auto_fd_steps(std::span<const double> x) {
    const double base = 1.0 + max_abs(x);
    return {1e-4 * base, 1e-5 * base, 1e-6 * base, 1e-7 * base};
}

HessianMatrix assemble_hessian(const Objective& f, std::span<const double> x, const HessianOptions& opt) {
    const std::size_t d = f.dim();
    require(x.size() == d, ErrorKind::dimension, "assemble_hessian: point has wrong dimension");
    require(d <= opt.max_dim, ErrorKind::config,
            "assemble_hessian: dimension " + std::to_string(d) + " exceeds the cap " + std::to_string(opt.max_dim));
    const std::vector<double> steps = opt.h > 0.0 ? std::vector<double>{opt.h} : auto_fd_steps(x);

    // Evenly spaced probe columns; a kink shows up in their block long before
    // the full assembly finishes.
    std::vector<std::size_t> probe;
    constexpr std::size_t kProbe = 32;
    if (steps.size() > 1 && d > 2 * kProbe) {
        for (std::size_t k = 0; k < kProbe; ++k) probe.push_back(k * d / kProbe);
    }

    HessianMatrix out;
    std::string tried;
    for (std::size_t s = 0; s < steps.size(); ++s) {
        const double h = steps[s];
        const bool last = s + 1 == steps.size();
        if (!probe.empty() && !last) {
            const double a = relative_asymmetry(repaired_block(fd_columns(f, x, probe, h), probe, opt.asymmetry_tol).first);
            if (a > opt.asymmetry_tol) {
                tried += (tried.empty() ? "" : ", ") + format_double(h) + " (probe " + format_double(a) + ")";
                continue;
            }
        }
        out = assemble_at(f, x, h, opt.asymmetry_tol);
        if (out.asymmetry <= opt.asymmetry_tol) return out;
        tried += (tried.empty() ? "" : ", ") + format_double(h) + " (" + format_double(out.asymmetry) + ")";
    }
    if (opt.fail_on_asymmetry) {
        fail(ErrorKind::numeric, "assemble_hessian: relative asymmetry exceeds " + format_double(opt.asymmetry_tol) +
                                     " at every step tried: " + tried + " (non-smooth point)");
    }
    return out;
}

std::vector<ProjectionPoint> hessian_projection_scatter(const Spectrum& h, const Matrix& samples,
                                                        std::size_t k_top) {
    require(h.dim() == samples.cols(), ErrorKind::dimension,
            "projection scatter: Hessian slice has dimension " + std::to_string(h.dim()) +
                ", samples have " + std::to_string(samples.cols()));
    require(k_top >= 1 && k_top <= h.dim(), ErrorKind::config, "projection scatter: k_top must lie in [1, D]");
    std::vector<ProjectionPoint> out;
    out.reserve(k_top);
    for (std::size_t i = 0; i < k_top; ++i) {
        const auto v = h.vector(i);
        out.push_back({i, h.values[i], projected_variance(samples, v)});
    }
    return out;
}

}  // namespace flatlens
