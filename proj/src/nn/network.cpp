#include "flatlens/nn/network.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <string>

#include "flatlens/errors.hpp"
#include "flatlens/linalg/blas.hpp"

namespace flatlens {
namespace {

double activate(Activation a, double z) noexcept {
    return a == Activation::relu ? (z > 0.0 ? z : 0.0) : std::tanh(z);
}

// sigma'(z) expressed through z and sigma(z).
double activate_grad(Activation a, double z, double s) noexcept {
    return a == Activation::relu ? (z > 0.0 ? 1.0 : 0.0) : 1.0 - s * s;
}

void check_mask(const Architecture& arch, const DropoutMask& mask) {
    require(mask.layers.size() == arch.dropout.size(), ErrorKind::dimension,
            "dropout mask has " + std::to_string(mask.layers.size()) + " layers, spec has " +
                std::to_string(arch.dropout.size()));
    for (std::size_t i = 0; i < mask.layers.size(); ++i) {
        require(mask.layers[i].size() == arch.widths[arch.dropout[i].layer], ErrorKind::dimension,
                "dropout mask for layer " + std::to_string(arch.dropout[i].layer) +
                    " has wrong length");
    }
}

// Per-unit multiplier applied to hidden layer `layer`, or empty when none.
struct LayerFactor {
    const std::vector<double>* mask = nullptr;
    double scale = 1.0;
    bool active() const noexcept { return mask != nullptr || scale != 1.0; }
};

LayerFactor factor_for(const Architecture& arch, std::size_t layer, const DropoutMask* mask,
                       DropoutMode mode) {
    for (std::size_t i = 0; i < arch.dropout.size(); ++i) {
        if (arch.dropout[i].layer != layer) continue;
        if (mask != nullptr) return {&mask->layers[i], 1.0};
        if (mode == DropoutMode::expectation) return {nullptr, arch.dropout[i].keep};
    }
    return {};
}

void apply_factor(const LayerFactor& f, Matrix& a) {
    if (!f.active()) return;
    const std::size_t m = a.cols();
    for (std::size_t r = 0; r < a.rows(); ++r) {
        double* row = a.data() + r * m;
        if (f.mask != nullptr) {
            const double* k = f.mask->data();
            for (std::size_t j = 0; j < m; ++j) row[j] *= k[j];
        } else {
            for (std::size_t j = 0; j < m; ++j) row[j] *= f.scale;
        }
    }
}

struct Workspace {
    std::vector<Matrix> z;  // z[l]: pre-activation of layer l
    std::vector<Matrix> a;  // a[l]: output of layer l after mask
    Matrix dz;
    Matrix da;
};

Workspace& workspace() {
    thread_local Workspace ws;
    return ws;
}

void check_params(std::span<const double> theta) {
    for (double x : theta) {
        if (!std::isfinite(x)) fail(ErrorKind::numeric, "parameters contain NaN or Inf");
    }
}

// Evaluates layers first..L-1 from `input`, the (masked) activation entering
// layer `first`. When `grad` is non-empty it is a full-length buffer and the
// tensors of layers >= first are overwritten with the loss gradient.
double run_from(const Architecture& arch, const ParamLayout& layout,
                std::span<const double> theta, std::size_t first, const Matrix& input,
                std::span<const std::uint32_t> labels, const DropoutMask* mask,
                DropoutMode mode, std::span<double> grad, Matrix* logits_out) {
    const std::size_t depth = arch.depth();
    const std::size_t n = input.rows();
    Workspace& ws = workspace();
    ws.z.resize(depth + 1);
    ws.a.resize(depth + 1);

    const Matrix* in = &input;
    for (std::size_t l = first; l < depth; ++l) {
        const auto& wt = layout.weight(l);
        const auto& bt = layout.bias(l);
        const std::size_t out = wt.rows;
        Matrix& z = ws.z[l + 1];
        z.resize(n, out);
        gemm(Trans::no, Trans::yes, n, out, wt.cols, 1.0, in->data(), in->cols(),
             theta.data() + wt.offset, wt.cols, 0.0, z.data(), out);
        const double* b = theta.data() + bt.offset;
        for (std::size_t r = 0; r < n; ++r) {
            double* zr = z.data() + r * out;
            for (std::size_t j = 0; j < out; ++j) zr[j] += b[j];
        }
        if (l + 1 < depth) {
            Matrix& a = ws.a[l + 1];
            a.resize(n, out);
            for (std::size_t i = 0; i < z.size(); ++i) {
                a.data()[i] = activate(arch.activation, z.data()[i]);
            }
            apply_factor(factor_for(arch, l + 1, mask, mode), a);
            in = &a;
        }
    }

    const Matrix& logits = ws.z[depth];
    if (logits_out != nullptr) *logits_out = logits;
    if (labels.empty()) return 0.0;

    const std::size_t classes = logits.cols();
    const bool want_grad = !grad.empty();
    if (want_grad) ws.dz.resize(n, classes);
    const double inv_n = 1.0 / static_cast<double>(n);
    double total = 0.0;
    for (std::size_t r = 0; r < n; ++r) {
        const double* zr = logits.data() + r * classes;
        const double zmax = *std::max_element(zr, zr + classes);
        double sum = 0.0;
        for (std::size_t j = 0; j < classes; ++j) sum += std::exp(zr[j] - zmax);
        const double lse = zmax + std::log(sum);
        total += lse - zr[labels[r]];
        if (want_grad) {
            double* dr = ws.dz.data() + r * classes;
            for (std::size_t j = 0; j < classes; ++j) dr[j] = std::exp(zr[j] - lse) * inv_n;
            dr[labels[r]] -= inv_n;
        }
    }
    const double value = total * inv_n;
    if (!std::isfinite(value)) fail(ErrorKind::numeric, "loss is not finite");
    if (!want_grad) return value;

    for (std::size_t l = depth; l-- > first;) {
        const auto& wt = layout.weight(l);
        const auto& bt = layout.bias(l);
        const Matrix& a_in = l == first ? input : ws.a[l];
        const std::size_t out = wt.rows;
        gemm(Trans::yes, Trans::no, out, wt.cols, n, 1.0, ws.dz.data(), out, a_in.data(),
             a_in.cols(), 0.0, grad.data() + wt.offset, wt.cols);
        double* gb = grad.data() + bt.offset;
        std::fill(gb, gb + out, 0.0);
        for (std::size_t r = 0; r < n; ++r) {
            const double* dr = ws.dz.data() + r * out;
            for (std::size_t j = 0; j < out; ++j) gb[j] += dr[j];
        }
        if (l == first) break;

        ws.da.resize(n, wt.cols);
        gemm(Trans::no, Trans::no, n, wt.cols, out, 1.0, ws.dz.data(), out,
             theta.data() + wt.offset, wt.cols, 0.0, ws.da.data(), wt.cols);
        const LayerFactor f = factor_for(arch, l, mask, mode);
        const Matrix& z = ws.z[l];
        const Matrix& a = ws.a[l];
        const std::size_t m = wt.cols;
        for (std::size_t r = 0; r < n; ++r) {
            double* dr = ws.da.data() + r * m;
            const double* zr = z.data() + r * m;
            const double* ar = a.data() + r * m;
            for (std::size_t j = 0; j < m; ++j) {
                const double k = f.mask != nullptr ? (*f.mask)[j] : f.scale;
                // a = k * sigma(z); recover sigma(z) only where k != 0.
                const double s = k != 0.0 ? ar[j] / k : 0.0;
                dr[j] *= k * activate_grad(arch.activation, zr[j], s);
            }
        }
        std::swap(ws.dz, ws.da);
    }
    return value;
}

}  // namespace

void Batch::validate(const Architecture& arch) const {
    require(!labels.empty(), ErrorKind::dimension, "batch is empty");
    require(inputs.rows() == labels.size(), ErrorKind::dimension,
            "batch has " + std::to_string(inputs.rows()) + " input rows but " +
                std::to_string(labels.size()) + " labels");
    require(inputs.cols() == arch.input_width(), ErrorKind::dimension,
            "batch input width " + std::to_string(inputs.cols()) + " does not match m_0 = " +
                std::to_string(arch.input_width()));
    for (std::uint32_t y : labels) {
        require(y < arch.output_width(), ErrorKind::dimension,
                "label " + std::to_string(y) + " out of range");
    }
}

DropoutMask sample_mask(const Architecture& arch, std::uint64_t seed) {
    require(!arch.dropout.empty(), ErrorKind::config, "sample_mask: architecture has no dropout layers");
    std::mt19937_64 rng(seed);
    DropoutMask mask;
    for (const auto& d : arch.dropout) {
        std::bernoulli_distribution keep(d.keep);
        std::vector<double> layer(arch.widths[d.layer]);
        for (double& r : layer) r = keep(rng) ? 1.0 : 0.0;
        mask.layers.push_back(std::move(layer));
    }
    return mask;
}

DropoutMask full_mask(const Architecture& arch) {
    DropoutMask mask;
    for (const auto& d : arch.dropout) mask.layers.emplace_back(arch.widths[d.layer], 1.0);
    return mask;
}

Matrix forward(const Architecture& arch, const ParamVector& params, const Batch& batch,
               const DropoutMask* mask, DropoutMode mode) {
    require(params.size() == arch.param_count(), ErrorKind::dimension,
            "parameter vector does not match architecture");
    require(batch.inputs.cols() == arch.input_width(), ErrorKind::dimension,
            "batch input width does not match architecture");
    if (mask != nullptr) check_mask(arch, *mask);
    check_params(params.values);
    Matrix logits;
    run_from(arch, params.layout, params.values, 0, batch.inputs, {}, mask, mode, {}, &logits);
    return logits;
}

double cross_entropy(const Matrix& logits, std::span<const std::uint32_t> labels) {
    require(logits.rows() == labels.size() && !labels.empty(), ErrorKind::dimension,
            "cross_entropy: logits rows do not match labels");
    double total = 0.0;
    for (std::size_t r = 0; r < logits.rows(); ++r) {
        auto z = logits.row(r);
        const double zmax = *std::max_element(z.begin(), z.end());
        double sum = 0.0;
        for (double v : z) sum += std::exp(v - zmax);
        total += zmax + std::log(sum) - z[labels[r]];
    }
    return total / static_cast<double>(labels.size());
}

double loss(const Architecture& arch, const ParamVector& params, const Batch& batch,
            const DropoutMask* mask) {
    batch.validate(arch);
    require(params.size() == arch.param_count(), ErrorKind::dimension,
            "parameter vector does not match architecture");
    if (mask != nullptr) check_mask(arch, *mask);
    check_params(params.values);
    return run_from(arch, params.layout, params.values, 0, batch.inputs, batch.labels, mask,
                    DropoutMode::off, {}, nullptr);
}

double gradient(const Architecture& arch, const ParamVector& params, const Batch& batch,
                const DropoutMask* mask, std::span<double> grad) {
    batch.validate(arch);
    require(params.size() == arch.param_count() && grad.size() == params.size(),
            ErrorKind::dimension, "gradient: parameter/gradient length mismatch");
    if (mask != nullptr) check_mask(arch, *mask);
    check_params(params.values);
    return run_from(arch, params.layout, params.values, 0, batch.inputs, batch.labels, mask,
                    DropoutMode::off, grad, nullptr);
}

ParamVector gradient(const Architecture& arch, const ParamVector& params, const Batch& batch,
                     const DropoutMask* mask) {
    ParamVector g(params.layout, std::vector<double>(params.size(), 0.0));
    gradient(arch, params, batch, mask, g.values);
    return g;
}

double accuracy(const Architecture& arch, const ParamVector& params, const Batch& batch,
                DropoutMode mode) {
    const Matrix logits = forward(arch, params, batch, nullptr, mode);
    std::size_t hits = 0;
    for (std::size_t r = 0; r < logits.rows(); ++r) {
        auto z = logits.row(r);
        const auto best = static_cast<std::uint32_t>(std::max_element(z.begin(), z.end()) - z.begin());
        hits += best == batch.labels[r] ? 1 : 0;
    }
    return static_cast<double>(hits) / static_cast<double>(logits.rows());
}

SliceEvaluator::SliceEvaluator(Architecture arch, ParamVector params, const Batch& batch,
                               ParamSlice slice)
    : arch_(std::move(arch)), params_(std::move(params)), labels_(batch.labels),
      slice_(std::move(slice)) {
    arch_.validate();
    batch.validate(arch_);
    require(params_.size() == arch_.param_count(), ErrorKind::dimension,
            "parameter vector does not match architecture");
    require(slice_.offset + slice_.length <= params_.size(), ErrorKind::dimension,
            "slice " + slice_.name + " exceeds parameter vector");
    check_params(params_.values);

    // Every layer below first_layer lies outside the slice, so its output is fixed.
    const std::size_t first = slice_.first_layer;
    if (first == 0) {
        prefix_ = batch.inputs;
        return;
    }
    // Evaluate layers 0..first-1 and keep sigma(Z_first) before any mask.
    const std::size_t n = batch.size();
    const std::span<const double> theta = params_.values;
    Matrix cur = batch.inputs;
    for (std::size_t l = 0; l < first; ++l) {
        const auto& wt = params_.layout.weight(l);
        const auto& bt = params_.layout.bias(l);
        Matrix z(n, wt.rows);
        gemm(Trans::no, Trans::yes, n, wt.rows, wt.cols, 1.0, cur.data(), cur.cols(),
             theta.data() + wt.offset, wt.cols, 0.0, z.data(), wt.rows);
        for (std::size_t r = 0; r < n; ++r) {
            for (std::size_t j = 0; j < wt.rows; ++j) {
                z(r, j) = activate(arch_.activation, z(r, j) + theta[bt.offset + j]);
            }
        }
        cur = std::move(z);
        if (l + 1 < first) {
            require(arch_.dropout_at(l + 1) == nullptr, ErrorKind::config,
                    "slice " + slice_.name + ": dropout below the slice's input layer is not supported");
        }
    }
    prefix_ = std::move(cur);
}

double SliceEvaluator::run(std::span<const double> x, const DropoutMask* mask,
                           std::span<double> grad) const {
    require(x.size() == slice_.length, ErrorKind::dimension,
            "slice " + slice_.name + ": got " + std::to_string(x.size()) + " coordinates, expected " +
                std::to_string(slice_.length));
    if (mask != nullptr) check_mask(arch_, *mask);
    check_params(x);

    thread_local std::vector<double> theta;
    thread_local std::vector<double> full_grad;
    thread_local Matrix input;
    theta = params_.values;
    slice_.scatter(x, theta);

    const Matrix* in = &prefix_;
    const std::size_t first = slice_.first_layer;
    if (first > 0) {
        const LayerFactor f = factor_for(arch_, first, mask, DropoutMode::off);
        if (f.active()) {
            input = prefix_;
            apply_factor(f, input);
            in = &input;
        }
    }
    std::span<double> g;
    if (!grad.empty()) {
        full_grad.assign(theta.size(), 0.0);
        g = full_grad;
    }
    const double value = run_from(arch_, params_.layout, theta, first, *in, labels_, mask,
                                  DropoutMode::off, g, nullptr);
    if (!grad.empty()) {
        auto part = slice_.view(std::span<const double>(full_grad));
        std::copy(part.begin(), part.end(), grad.begin());
    }
    return value;
}

double SliceEvaluator::loss(std::span<const double> x, const DropoutMask* mask) const {
    return run(x, mask, {});
}

double SliceEvaluator::gradient(std::span<const double> x, const DropoutMask* mask,
                                std::span<double> grad) const {
    require(grad.size() == slice_.length, ErrorKind::dimension, "slice gradient: wrong output length");
    return run(x, mask, grad);
}

}  // namespace flatlens
