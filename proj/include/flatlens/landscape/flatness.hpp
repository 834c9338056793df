#pragma once

#include <cstdint>
#include <iosfwd>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "flatlens/landscape/direction.hpp"
#include "flatlens/objective.hpp"

namespace flatlens {

struct ProfilePoint {
    double offset;
    double loss;   // NaN when the evaluation failed
    bool flagged;  // non-finite loss at this offset
};

// L(center + offset * dir) for each offset; `center` is not modified.
std::vector<ProfilePoint> loss_profile(const Objective& f, std::span<const double> center,
                                       const Direction& dir, std::span<const double> offsets);

// Same as loss_profile for filter-normalized directions: f(alpha) = L(theta + alpha d).
std::vector<ProfilePoint> slice_1d(const Objective& f, std::span<const double> center,
                                   const Direction& dir, std::span<const double> alphas);

enum class FloorPolicy { substitute, error };

struct FlatnessOptions {
    double loss_floor = 1e-8;
    FloorPolicy floor_policy = FloorPolicy::substitute;
    double initial_step = 1e-3;
    double growth = 2.0;
    double search_radius = 1e3;
    double tol_x = 1e-6;
    double tol_f = 1e-9;
};

namespace flatness_flag {
inline constexpr unsigned floored = 1u << 0;      // L(0) below the floor, threshold uses the floor
inline constexpr unsigned unbounded_left = 1u << 1;
inline constexpr unsigned unbounded_right = 1u << 2;
inline constexpr unsigned nonfinite = 1u << 3;    // a probe hit a non-finite loss
inline constexpr unsigned tol_f_unmet = 1u << 4;  // bisection hit precision limits first
}  // namespace flatness_flag

std::string describe_flags(unsigned flags);

struct FlatnessResult {
    double width = std::numeric_limits<double>::infinity();  // F_v, +inf when unbounded
    double left = 0.0;    // theta_v^l < 0 (or -radius when unbounded)
    double right = 0.0;   // theta_v^r > 0 (or +radius when unbounded)
    double base_loss = 0.0;  // L_v(0)
    double threshold = 0.0;  // 2 L_v(0), after the floor
    unsigned flags = 0;
    std::size_t evaluations = 0;

    bool finite() const noexcept { return width < std::numeric_limits<double>::infinity(); }
};

// Width of the interval around the center on which L_v stays below twice its
// central value. On each side the nearest crossing is bracketed by geometric
// expansion of the offset and refined by bisection.
FlatnessResult interval_flatness(const Objective& f, std::span<const double> center,
                                 const Direction& dir, const FlatnessOptions& opt = {});

struct FlatnessRow {
    std::string direction_id;
    std::string provenance;
    double lambda_or_eig;
    FlatnessResult result;
};

// CSV with header direction_id,provenance,lambda_or_eig,F_v,theta_l,theta_r,L0,flags
void write_flatness_csv(std::ostream& out, std::span<const FlatnessRow> rows);

// Shortest round-trip decimal text for a double ("inf", "-inf", "nan" for
// non-finite values).
std::string format_double(double v);

}  // namespace flatlens
