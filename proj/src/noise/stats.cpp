#include "flatlens/noise/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "flatlens/errors.hpp"
#include "flatlens/linalg/blas.hpp"

namespace flatlens {

Matrix covariance(const Matrix& samples) {
    const std::size_t n = samples.rows();
    const std::size_t d = samples.cols();
    require(n >= 2, ErrorKind::dimension, "covariance needs N >= 2 samples");
    // Shift by the first row so identical rows cancel exactly.
    const auto first = samples.row(0);
    Matrix centred(n, d);
    std::vector<double> mean(d, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        auto r = samples.row(i);
        auto c = centred.row(i);
        for (std::size_t j = 0; j < d; ++j) {
            c[j] = r[j] - first[j];
            mean[j] += c[j];
        }
    }
    for (double& m : mean) m /= static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) {
        auto c = centred.row(i);
        for (std::size_t j = 0; j < d; ++j) c[j] -= mean[j];
    }
    Matrix sigma(d, d);
    gemm(Trans::yes, Trans::no, d, d, n, 1.0 / static_cast<double>(n - 1), centred.data(), d,
         centred.data(), d, 0.0, sigma.data(), d);
    for (std::size_t i = 0; i < d; ++i) {
        for (std::size_t j = 0; j < i; ++j) sigma(i, j) = sigma(j, i);
    }
    return sigma;
}

double projected_variance(const Matrix& samples, std::span<const double> dir) {
    const std::size_t n = samples.rows();
    require(n >= 2, ErrorKind::dimension, "projected variance needs N >= 2 samples");
    require(dir.size() == samples.cols(), ErrorKind::dimension,
            "projected variance: direction has dimension " + std::to_string(dir.size()) +
                ", samples have " + std::to_string(samples.cols()));
    std::vector<double> proj(n);
    for (std::size_t i = 0; i < n; ++i) proj[i] = dot(samples.row(i), dir);
    const double first = proj[0];
    for (double& p : proj) p -= first;
    const double mean = std::accumulate(proj.begin(), proj.end(), 0.0) / static_cast<double>(n);
    double ss = 0.0;
    for (double p : proj) ss += (p - mean) * (p - mean);
    return ss / static_cast<double>(n - 1);
}

double projected_variance(const SampleSet& s, const Direction& dir) {
    dir.validate();
    return projected_variance(s.samples, dir.values);
}

double trace(const Matrix& m) {
    require(m.rows() == m.cols(), ErrorKind::dimension, "trace of a non-square matrix");
    double t = 0.0;
    for (std::size_t i = 0; i < m.rows(); ++i) t += m(i, i);
    return t;
}

std::vector<double> ranks(std::span<const double> v) {
    std::vector<std::size_t> idx(v.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
    std::vector<double> r(v.size());
    for (std::size_t i = 0; i < idx.size();) {
        std::size_t j = i;
        while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
        const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
        for (std::size_t k = i; k <= j; ++k) r[idx[k]] = avg;
        i = j + 1;
    }
    return r;
}

double pearson(std::span<const double> x, std::span<const double> y) {
    require(x.size() == y.size() && x.size() >= 2, ErrorKind::dimension, "pearson: need two equal-length series");
    const double n = static_cast<double>(x.size());
    const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
    const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
        syy += (y[i] - my) * (y[i] - my);
    }
    if (sxx == 0.0 || syy == 0.0) return 0.0;
    return sxy / std::sqrt(sxx * syy);
}

double spearman(std::span<const double> x, std::span<const double> y) {
    const auto rx = ranks(x);
    const auto ry = ranks(y);
    return pearson(rx, ry);
}

PowerLawFit powerlaw_fit(std::span<const std::pair<double, double>> pairs) {
    PowerLawFit fit;
    std::vector<double> lx, ly;
    for (const auto& [x, y] : pairs) {
        if (!(x > 0.0) || !(y > 0.0) || !std::isfinite(x) || !std::isfinite(y)) {
            ++fit.excluded;
            continue;
        }
        lx.push_back(std::log(x));
        ly.push_back(std::log(y));
    }
    fit.used = lx.size();
    require(fit.used >= 3, ErrorKind::config,
            "power-law fit needs at least 3 positive pairs, got " + std::to_string(fit.used));
    const double n = static_cast<double>(fit.used);
    const double mx = std::accumulate(lx.begin(), lx.end(), 0.0) / n;
    const double my = std::accumulate(ly.begin(), ly.end(), 0.0) / n;
    double sxy = 0.0, sxx = 0.0;
    for (std::size_t i = 0; i < lx.size(); ++i) {
        sxy += (lx[i] - mx) * (ly[i] - my);
        sxx += (lx[i] - mx) * (lx[i] - mx);
    }
    require(sxx > 0.0, ErrorKind::numeric, "power-law fit: all x values coincide");
    fit.slope = sxy / sxx;
    fit.intercept = my - fit.slope * mx;
    fit.spearman = spearman(lx, ly);
    return fit;
}

}  // namespace flatlens
