#include "flatlens/noise/pca.hpp"

#include "flatlens/errors.hpp"

namespace flatlens {

std::vector<VarianceFlatnessPoint> pca_flatness_scatter(const Spectrum& sigma, const Objective& f,
                                                        std::span<const double> center,
                                                        const PcaScatterOptions& opt) {
    require(sigma.dim() == f.dim(), ErrorKind::dimension,
            "pca scatter: spectrum dimension " + std::to_string(sigma.dim()) +
                " differs from objective dimension " + std::to_string(f.dim()));
    require(opt.k_top >= 1 && opt.k_top <= sigma.dim(), ErrorKind::config,
            "pca scatter: k_top must lie in [1, D]");
    const double floor = opt.eigen_floor_ratio * sigma.values.front();
    std::vector<VarianceFlatnessPoint> out;
    for (std::size_t i = 0; i < opt.k_top; ++i) {
        if (!(sigma.values[i] > floor)) break;
        const Direction dir = unit_direction(sigma.vector(i), "pca-" + std::to_string(i));
        out.push_back({i, sigma.values[i], interval_flatness(f, center, dir, opt.flatness)});
    }
    return out;
}

}  // namespace flatlens
