#include "flatlens/noise/sample_set.hpp"

#include <cmath>

#include "flatlens/binary.hpp"
#include "flatlens/errors.hpp"

namespace flatlens {

std::string_view to_string(SampleKind k) noexcept {
    return k == SampleKind::trajectory ? "trajectory" : "gradient";
}

void SampleSet::validate() const {
    require(count() >= 2, ErrorKind::dimension, "sample set needs N >= 2 rows");
    for (double x : samples.values()) require(std::isfinite(x), ErrorKind::numeric, "sample set has non-finite entries");
}

std::string encode_archive(const ArchiveRecord& rec) {
    ByteWriter w;
    w.raw("FLTLSA01");
    w.str(rec.kind);
    w.u64(rec.matrix.rows());
    w.u64(rec.matrix.cols());
    w.f64(rec.meta.keep);
    w.f64(rec.meta.lr);
    w.u64(rec.meta.seed);
    w.u64(rec.meta.step_begin);
    w.u64(rec.meta.step_end);
    w.str(rec.meta.slice);
    for (double x : rec.matrix.values()) w.f64(x);
    return w.take();
}

ArchiveRecord decode_archive(std::string_view bytes) {
    ByteReader r(bytes);
    require(r.raw(8, "magic") == "FLTLSA01", ErrorKind::parse, "sample archive: bad magic");
    ArchiveRecord rec;
    rec.kind = r.str("kind");
    const std::uint64_t n = r.u64("N");
    const std::uint64_t d = r.u64("D");
    rec.meta.keep = r.f64("keep");
    rec.meta.lr = r.f64("lr");
    rec.meta.seed = r.u64("seed");
    rec.meta.step_begin = r.u64("step_begin");
    rec.meta.step_end = r.u64("step_end");
    rec.meta.slice = r.str("slice");
    require(d == 0 || n <= r.remaining() / 8 / d, ErrorKind::parse, "sample archive: truncated matrix");
    std::vector<double> values(n * d);
    for (auto& x : values) x = r.f64("matrix");
    rec.matrix = Matrix(n, d, std::move(values));
    require(r.done(), ErrorKind::parse, "sample archive: trailing bytes");
    return rec;
}

void save_samples(const std::filesystem::path& path, const SampleSet& s) {
    write_file(path, encode_archive({std::string(to_string(s.kind)), s.meta, s.samples}));
}

SampleSet load_samples(const std::filesystem::path& path) {
    ArchiveRecord rec = decode_archive(read_file(path));
    SampleSet s;
    if (rec.kind == "trajectory") {
        s.kind = SampleKind::trajectory;
    } else if (rec.kind == "gradient") {
        s.kind = SampleKind::gradient;
    } else {
        fail(ErrorKind::parse, path.string() + " holds '" + rec.kind + "', not a sample set");
    }
    s.meta = rec.meta;
    s.samples = std::move(rec.matrix);
    return s;
}

void save_spectrum(const std::filesystem::path& path, const Spectrum& s, const SampleMeta& meta) {
    const std::size_t d = s.dim();
    Matrix m(d + 1, d);
    for (std::size_t j = 0; j < d; ++j) m(0, j) = s.values[j];
    for (std::size_t i = 0; i < d; ++i) {
        for (std::size_t j = 0; j < d; ++j) m(i + 1, j) = s.vectors(j, i);
    }
    write_file(path, encode_archive({"spectrum:" + to_string(s.source), meta, std::move(m)}));
}

Spectrum load_spectrum(const std::filesystem::path& path) {
    ArchiveRecord rec = decode_archive(read_file(path));
    require(rec.kind.rfind("spectrum:", 0) == 0, ErrorKind::parse,
            path.string() + " holds '" + rec.kind + "', not a spectrum");
    const std::size_t d = rec.matrix.cols();
    require(rec.matrix.rows() == d + 1, ErrorKind::parse, "spectrum archive: bad shape");
    Spectrum s;
    s.source = parse_spectrum_source(rec.kind.substr(9));
    s.values.assign(rec.matrix.row(0).begin(), rec.matrix.row(0).end());
    s.vectors = Matrix(d, d);
    for (std::size_t i = 0; i < d; ++i) {
        for (std::size_t j = 0; j < d; ++j) s.vectors(j, i) = rec.matrix(i + 1, j);
    }
    return s;
}

void save_matrix(const std::filesystem::path& path, const Matrix& m, SpectrumSource source,
                 const SampleMeta& meta) {
    write_file(path, encode_archive({"matrix:" + to_string(source), meta, m}));
}

Matrix load_matrix(const std::filesystem::path& path) {
    ArchiveRecord rec = decode_archive(read_file(path));
    require(rec.kind.rfind("matrix:", 0) == 0, ErrorKind::parse,
            path.string() + " holds '" + rec.kind + "', not a matrix");
    return std::move(rec.matrix);
}

}  // namespace flatlens
