#include "flatlens/hessian/alignment.hpp"

#include <ostream>

#include "flatlens/errors.hpp"
#include "flatlens/landscape/flatness.hpp"
#include "flatlens/linalg/blas.hpp"
#include "flatlens/nn/network_objective.hpp"
#include "flatlens/nn/rng.hpp"
#include "flatlens/nn/train.hpp"
#include "flatlens/noise/collect.hpp"
#include "flatlens/noise/stats.hpp"

namespace flatlens {

AlignmentTerms alignment_terms(const Matrix& h, const Matrix& sigma) {
    require(h.rows() == h.cols() && sigma.rows() == sigma.cols() && h.rows() == sigma.rows(),
            ErrorKind::dimension, "alignment: H is " + std::to_string(h.rows()) + "x" + std::to_string(h.cols()) +
                                      ", Sigma is " + std::to_string(sigma.rows()) + "x" +
                                      std::to_string(sigma.cols()));
    const std::size_t d = h.rows();
    require(d > 0, ErrorKind::dimension, "alignment: empty matrices");
    AlignmentTerms t;
    // Tr(H Sigma) = sum_ij H_ij Sigma_ji
    const auto hv = h.values();
    const auto sv = sigma.transposed();
    t.tr_h_sigma = dot(hv, sv.values());
    t.tr_h = trace(h);
    t.tr_sigma = trace(sigma);
    t.tr_h_sigma_bar = t.tr_h * t.tr_sigma / static_cast<double>(d);
    t.ratio = t.tr_h_sigma / t.tr_h_sigma_bar;
    return t;
}

std::vector<const AlignmentStep*> AlignmentTrace::completed() const {
    std::vector<const AlignmentStep*> out;
    for (const auto& s : steps) {
        if (!s.error) out.push_back(&s);
    }
    return out;
}

namespace {

AlignmentStep probe_step(const Architecture& plain, const ParamVector& params, const Batch& batch,
                         const Architecture& probe, const AlignmentOptions& opt, std::size_t step) {
    AlignmentStep rec;
    rec.step = step;
    try {
        const ParamSlice slice = make_slice(params.layout, opt.slice);
        const auto grads = sample_gradients(probe, params, batch, slice, opt.samples,
                                            derive_seed(opt.seed, seed_stream::probe_mask, step));
        if (grads.warning) fail(ErrorKind::degenerate, *grads.warning);
        const Matrix sigma = covariance(grads.set);
        const NetworkObjective obj(plain, params, batch, slice);
        const auto center = obj.center();
        const HessianMatrix h = assemble_hessian(obj, center, opt.hessian);
        rec.hessian_asymmetry = h.asymmetry;
        rec.terms = alignment_terms(h.values, sigma);
    } catch (const Error& e) {
        if (e.kind() == ErrorKind::config || e.kind() == ErrorKind::dimension) throw;
        rec.error = std::string(to_string(e.kind())) + ": " + e.what();
    }
    return rec;
}

}  // namespace

AlignmentTrace alignment_trace(const Architecture& arch, ParamVector params, const Batch& batch,
                               OptimizerState optimizer, const Architecture& probe,
                               const AlignmentOptions& opt) {
    require(opt.stride >= 1, ErrorKind::config, "alignment.stride must be at least 1");
    require(opt.samples >= 2, ErrorKind::config, "alignment.samples must be at least 2");
    require(!probe.dropout.empty(), ErrorKind::config, "alignment: probe architecture has no dropout layer");
    probe.validate();
    require(probe.widths == arch.widths && probe.activation == arch.activation, ErrorKind::config,
            "alignment: probe architecture must match the trained network apart from dropout");
    const Architecture plain = arch.with_dropout({});

    AlignmentTrace trace;
    trace.steps.push_back(probe_step(plain, params, batch, probe, opt, 0));
    const TrajectoryHook hook = [&](const StepRecord& r) {
        if (r.step % opt.stride == 0) trace.steps.push_back(probe_step(plain, r.params, batch, probe, opt, r.step));
        return true;
    };
    train(plain, std::move(params), batch, optimizer, opt.steps, MaskPolicy::none, opt.seed, hook);
    return trace;
}

void write_alignment_csv(std::ostream& out, const AlignmentTrace& trace) {
    out << "step,tr_H_Sigma,tr_H_Sigma_bar,tr_H,tr_Sigma,ratio\n";
    for (const auto* s : trace.completed()) {
        const auto& t = s->terms;
        out << s->step << ',' << format_double(t.tr_h_sigma) << ',' << format_double(t.tr_h_sigma_bar) << ','
            << format_double(t.tr_h) << ',' << format_double(t.tr_sigma) << ',' << format_double(t.ratio) << '\n';
    }
}

}  // namespace flatlens
