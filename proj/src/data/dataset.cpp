#include "flatlens/data/dataset.hpp"

#include <cmath>
#include <cstdlib>

#include "flatlens/binary.hpp"
#include "flatlens/errors.hpp"

namespace flatlens {
namespace {

std::uint32_t read_be32(std::string_view bytes, std::size_t at, const char* field) {
    if (at + 4 > bytes.size()) fail(ErrorKind::parse, std::string("IDX truncated in ") + field);
    std::uint32_t v = 0;
    for (std::size_t i = 0; i < 4; ++i) v = (v << 8) | static_cast<unsigned char>(bytes[at + i]);
    return v;
}

}  // namespace

void Dataset::validate() const {
    require(data.size() >= 1, ErrorKind::dimension, "dataset is empty");
    require(data.inputs.rows() == data.labels.size(), ErrorKind::dimension,
            "dataset: input rows and label count differ");
    for (double x : data.inputs.values()) {
        require(std::isfinite(x), ErrorKind::numeric, "dataset: non-finite input");
    }
}

Dataset parse_idx(std::string_view image_bytes, std::string_view label_bytes,
                  std::string provenance) {
    const std::uint32_t img_magic = read_be32(image_bytes, 0, "images magic");
    require(img_magic == kIdxImagesMagic, ErrorKind::parse, "IDX images magic: expected 0x00000803");
    const std::uint32_t count = read_be32(image_bytes, 4, "images count");
    const std::uint32_t rows = read_be32(image_bytes, 8, "images rows");
    const std::uint32_t cols = read_be32(image_bytes, 12, "images cols");

    const std::uint32_t lbl_magic = read_be32(label_bytes, 0, "labels magic");
    require(lbl_magic == kIdxLabelsMagic, ErrorKind::parse, "IDX labels magic: expected 0x00000801");
    const std::uint32_t lcount = read_be32(label_bytes, 4, "labels count");
    require(count == lcount, ErrorKind::parse,
            "IDX count mismatch: images count " + std::to_string(count) + " vs labels count " +
                std::to_string(lcount));
    require(count >= 1, ErrorKind::parse, "IDX images count: must be positive");

    const std::size_t d = std::size_t(rows) * cols;
    require(d >= 1, ErrorKind::parse, "IDX images rows/cols: must be positive");
    require(image_bytes.size() >= 16 + std::size_t(count) * d, ErrorKind::parse,
            "IDX images pixel data: truncated");
    require(label_bytes.size() >= 8 + std::size_t(count), ErrorKind::parse,
            "IDX labels data: truncated");

    Dataset ds;
    ds.provenance = std::move(provenance);
    ds.data.inputs = Matrix(count, d);
    ds.data.labels.resize(count);
    const auto* px = reinterpret_cast<const unsigned char*>(image_bytes.data() + 16);
    double* out = ds.data.inputs.data();
    for (std::size_t i = 0; i < std::size_t(count) * d; ++i) out[i] = px[i] / 255.0;
    for (std::size_t i = 0; i < count; ++i) {
        ds.data.labels[i] = static_cast<unsigned char>(label_bytes[8 + i]);
        require(ds.data.labels[i] < 10, ErrorKind::parse,
                "IDX labels[" + std::to_string(i) + "]: class " + std::to_string(ds.data.labels[i]) +
                    " outside 0..9");
    }
    return ds;
}

Dataset load_idx(const std::filesystem::path& images, const std::filesystem::path& labels) {
    return parse_idx(read_file(images), read_file(labels), "idx:" + images.filename().string());
}

Dataset load_mnist(const std::filesystem::path& dir, MnistSplit split) {
    const std::string stem = split == MnistSplit::train ? "train" : "t10k";
    const auto images = dir / (stem + "-images-idx3-ubyte");
    const auto labels = dir / (stem + "-labels-idx1-ubyte");
    require(std::filesystem::exists(images) && std::filesystem::exists(labels), ErrorKind::config,
            "MNIST files not found in " + dir.string() +
                " (set --data-dir or FLATLENS_DATA_DIR; see tools/fetch_mnist.sh)");
    Dataset ds = load_idx(images, labels);
    ds.provenance = split == MnistSplit::train ? "mnist-train" : "mnist-test";
    return ds;
}

std::filesystem::path resolve_data_dir(const std::string& flag_value) {
    if (!flag_value.empty()) return flag_value;
    if (const char* env = std::getenv("FLATLENS_DATA_DIR"); env != nullptr && *env != '\0') return env;
    return "data/mnist";
}

Dataset take_prefix(const Dataset& d, std::size_t k) {
    require(k >= 1 && k <= d.size(), ErrorKind::config,
            "dataset.prefix: K=" + std::to_string(k) + " must lie in [1, " + std::to_string(d.size()) + "]");
    Dataset out;
    const std::size_t w = d.input_width();
    std::vector<double> values(d.data.inputs.data(), d.data.inputs.data() + k * w);
    out.data.inputs = Matrix(k, w, std::move(values));
    out.data.labels.assign(d.data.labels.begin(), d.data.labels.begin() + static_cast<std::ptrdiff_t>(k));
    out.provenance = d.provenance + "-first-" + std::to_string(k);
    return out;
}

std::string encode_dataset(const Dataset& d) {
    ByteWriter w;
    w.raw("FLTLDS01");
    w.str(d.provenance);
    w.u64(d.data.inputs.rows());
    w.u64(d.data.inputs.cols());
    for (double x : d.data.inputs.values()) w.f64(x);
    for (auto y : d.data.labels) w.u32(y);
    return w.take();
}

Dataset decode_dataset(std::string_view bytes) {
    ByteReader r(bytes);
    require(r.raw(8, "magic") == "FLTLDS01", ErrorKind::parse, "dataset cache: bad magic");
    Dataset d;
    d.provenance = r.str("provenance");
    const std::uint64_t n = r.u64("rows");
    const std::uint64_t w = r.u64("cols");
    require(w != 0 && n <= r.remaining() / 8 / w, ErrorKind::parse, "dataset cache: truncated");
    std::vector<double> values(n * w);
    for (auto& x : values) x = r.f64("inputs");
    d.data.inputs = Matrix(n, w, std::move(values));
    d.data.labels.resize(n);
    for (auto& y : d.data.labels) y = r.u32("labels");
    require(r.done(), ErrorKind::parse, "dataset cache: trailing bytes");
    return d;
}

}  // namespace flatlens
