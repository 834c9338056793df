#include "flatlens/landscape/flatness.hpp"

#include <charconv>
#include <cmath>
#include <ostream>

#include "flatlens/errors.hpp"

namespace flatlens {
namespace {

struct Ray {
    const Objective& f;
    std::span<const double> center;
    const Direction& dir;
    std::vector<double> point;
    std::size_t evaluations = 0;
    bool saw_nonfinite = false;

    Ray(const Objective& obj, std::span<const double> c, const Direction& d)
        : f(obj), center(c), dir(d), point(c.size()) {}

    // NaN when the loss cannot be evaluated at this offset.
    double operator()(double offset) {
        ++evaluations;
        for (std::size_t i = 0; i < point.size(); ++i) point[i] = center[i] + offset * dir.values[i];
        double v = std::numeric_limits<double>::quiet_NaN();
        try {
            v = f.value(point);
        } catch (const Error& e) {
            if (e.kind() != ErrorKind::numeric) throw;
        }
        if (!std::isfinite(v)) {
            saw_nonfinite = true;
            return std::numeric_limits<double>::quiet_NaN();
        }
        return v;
    }
};

void check_inputs(const Objective& f, std::span<const double> center, const Direction& dir) {
    require(center.size() == f.dim(), ErrorKind::dimension,
            "center has " + std::to_string(center.size()) + " coordinates, objective expects " +
                std::to_string(f.dim()));
    require(dir.dim() == f.dim(), ErrorKind::dimension,
            "direction " + dir.provenance + " has dimension " + std::to_string(dir.dim()) +
                ", objective expects " + std::to_string(f.dim()));
    dir.validate();
}

// Above-threshold test that treats an unevaluable loss as a crossing.
bool above(double v, double threshold) { return std::isnan(v) || v >= threshold; }

struct Crossing {
    double offset;  // magnitude along the side
    bool found;
    bool tol_f_met;
};

Crossing find_crossing(Ray& ray, double sign, double threshold, const FlatnessOptions& opt) {
    double lo = 0.0;
    double hi = opt.initial_step;
    double v_hi = ray(sign * hi);
    while (!above(v_hi, threshold)) {
        if (hi >= opt.search_radius) return {opt.search_radius, false, true};
        lo = hi;
        hi = std::min(hi * opt.growth, opt.search_radius);
        v_hi = ray(sign * hi);
    }
    // L(lo) < threshold <= L(hi)
    double best = hi;
    double best_gap = std::isnan(v_hi) ? std::numeric_limits<double>::infinity() : v_hi - threshold;
    for (int iter = 0; iter < 200; ++iter) {
        const double mid = 0.5 * (lo + hi);
        if (mid <= lo || mid >= hi) break;
        const double v = ray(sign * mid);
        const double gap = std::isnan(v) ? std::numeric_limits<double>::infinity() : std::abs(v - threshold);
        if (gap < best_gap) {
            best = mid;
            best_gap = gap;
        }
        if (above(v, threshold)) {
            hi = mid;
        } else {
            lo = mid;
        }
        if (gap <= opt.tol_f && hi - lo <= opt.tol_x) return {mid, true, true};
    }
    return {best, true, best_gap <= opt.tol_f};
}

}  // namespace

std::vector<ProfilePoint> loss_profile(const Objective& f, std::span<const double> center,
                                       const Direction& dir, std::span<const double> offsets) {
    check_inputs(f, center, dir);
    Ray ray(f, center, dir);
    std::vector<ProfilePoint> out;
    out.reserve(offsets.size());
    for (double t : offsets) {
        const double v = ray(t);
        out.push_back({t, v, std::isnan(v)});
    }
    return out;
}

std::vector<ProfilePoint> slice_1d(const Objective& f, std::span<const double> center,
                                   const Direction& dir, std::span<const double> alphas) {
    return loss_profile(f, center, dir, alphas);
}

std::string describe_flags(unsigned flags) {
    std::string s;
    auto add = [&](unsigned bit, const char* name) {
        if ((flags & bit) == 0) return;
        if (!s.empty()) s += '|';
        s += name;
    };
    add(flatness_flag::floored, "floored");
    add(flatness_flag::unbounded_left, "unbounded_left");
    add(flatness_flag::unbounded_right, "unbounded_right");
    add(flatness_flag::nonfinite, "nonfinite");
    add(flatness_flag::tol_f_unmet, "tol_f_unmet");
    return s;
}

FlatnessResult interval_flatness(const Objective& f, std::span<const double> center,
                                 const Direction& dir, const FlatnessOptions& opt) {
    check_inputs(f, center, dir);
    Ray ray(f, center, dir);
    FlatnessResult r;
    r.base_loss = ray(0.0);
    require(!std::isnan(r.base_loss), ErrorKind::numeric, "interval flatness: loss at the center is not finite");

    double reference = r.base_loss;
    if (reference < opt.loss_floor) {
        if (opt.floor_policy == FloorPolicy::error) {
            fail(ErrorKind::degenerate,
                 "interval flatness: L_v(0) = " + format_double(r.base_loss) +
                     " is below the loss floor; use the substitute floor policy");
        }
        reference = opt.loss_floor;
        r.flags |= flatness_flag::floored;
    }
    r.threshold = 2.0 * reference;

    const Crossing right = find_crossing(ray, +1.0, r.threshold, opt);
    const Crossing left = find_crossing(ray, -1.0, r.threshold, opt);
    r.right = right.offset;
    r.left = -left.offset;
    if (!right.found) r.flags |= flatness_flag::unbounded_right;
    if (!left.found) r.flags |= flatness_flag::unbounded_left;
    if (!right.tol_f_met || !left.tol_f_met) r.flags |= flatness_flag::tol_f_unmet;
    if (ray.saw_nonfinite) r.flags |= flatness_flag::nonfinite;
    r.width = right.found && left.found ? r.right - r.left : std::numeric_limits<double>::infinity();
    r.evaluations = ray.evaluations;
    return r;
}

std::string format_double(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, ptr);
}

void write_flatness_csv(std::ostream& out, std::span<const FlatnessRow> rows) {
    out << "direction_id,provenance,lambda_or_eig,F_v,theta_l,theta_r,L0,flags\n";
    for (const auto& row : rows) {
        const auto& r = row.result;
        out << row.direction_id << ',' << row.provenance << ',' << format_double(row.lambda_or_eig) << ','
            << format_double(r.width) << ',' << format_double(r.left) << ',' << format_double(r.right)
            << ',' << format_double(r.base_loss) << ',' << describe_flags(r.flags) << '\n';
    }
}

}  // namespace flatlens
