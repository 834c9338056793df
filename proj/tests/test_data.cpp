#include <doctest.h>

#include <array>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>

#include "flatlens/binary.hpp"
#include "flatlens/data/dataset.hpp"
#include "flatlens/data/synthetic.hpp"
#include "flatlens/errors.hpp"
#include "flatlens/linalg/blas.hpp"

using namespace flatlens;

namespace {

void be32(std::string& s, std::uint32_t v) {
    for (int i = 3; i >= 0; --i) s.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

std::string idx_images(std::uint32_t count, std::uint32_t rows, std::uint32_t cols, std::uint8_t seed) {
    std::string s;
    be32(s, 0x803);
    be32(s, count);
    be32(s, rows);
    be32(s, cols);
    for (std::uint32_t i = 0; i < count * rows * cols; ++i) s.push_back(static_cast<char>((i * 7 + seed) % 256));
    return s;
}

std::string idx_labels(std::uint32_t count) {
    std::string s;
    be32(s, 0x801);
    be32(s, count);
    for (std::uint32_t i = 0; i < count; ++i) s.push_back(static_cast<char>((i * 3) % 10));
    return s;
}

ErrorKind kind_of(auto&& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.kind();
    }
    FAIL("expected an error");
    return ErrorKind::config;
}

std::filesystem::path mnist_dir() { return resolve_data_dir(""); }
bool have_mnist() { return std::filesystem::exists(mnist_dir() / "train-labels-idx1-ubyte"); }

}  // namespace

TEST_CASE("hand-built two-image IDX blob") {
    const Dataset d = parse_idx(idx_images(2, 28, 28, 1), idx_labels(2), "synthetic-idx");
    REQUIRE(d.size() == 2);
    CHECK(d.input_width() == 784);
    CHECK(d.data.labels == std::vector<std::uint32_t>{0, 3});
    for (std::size_t i = 0; i < 2 * 784; ++i) {
        const double expect = static_cast<double>((i * 7 + 1) % 256) / 255.0;
        CHECK(d.data.inputs.values()[i] == expect);
    }
    CHECK(d.provenance == "synthetic-idx");
}

TEST_CASE("IDX errors name the field") {
    try {
        parse_idx(idx_images(3, 28, 28, 0), idx_labels(2), "x");
        FAIL("expected count mismatch");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::parse);
        CHECK(std::string(e.what()).find("count") != std::string::npos);
    }
    std::string bad = idx_images(1, 2, 2, 0);
    bad[3] = 0x04;
    CHECK(kind_of([&] { parse_idx(bad, idx_labels(1), "x"); }) == ErrorKind::parse);
    const std::string img = idx_images(2, 2, 2, 0);
    CHECK(kind_of([&] { parse_idx(img.substr(0, img.size() - 1), idx_labels(2), "x"); }) == ErrorKind::parse);
    CHECK(kind_of([&] { parse_idx(img.substr(0, 10), idx_labels(2), "x"); }) == ErrorKind::parse);
    std::string lbl = idx_labels(2);
    lbl[8] = 12;  // out of range class
    CHECK_THROWS_AS(parse_idx(img, lbl, "x"), Error);
}

TEST_CASE("take_prefix") {
    const Dataset d = parse_idx(idx_images(5, 2, 3, 4), idx_labels(5), "synthetic-five");
    const Dataset all = take_prefix(d, 5);
    CHECK(all.data.inputs == d.data.inputs);
    CHECK(all.data.labels == d.data.labels);
    const Dataset one = take_prefix(d, 1);
    CHECK(one.size() == 1);
    CHECK(std::equal(one.data.inputs.row(0).begin(), one.data.inputs.row(0).end(), d.data.inputs.row(0).begin()));
    CHECK(kind_of([&] { take_prefix(d, 6); }) == ErrorKind::config);
    const Dataset two = take_prefix(d, 2), three = take_prefix(d, 3);
    for (std::size_t i = 0; i < 2; ++i) {
        CHECK(std::equal(two.data.inputs.row(i).begin(), two.data.inputs.row(i).end(),
                         three.data.inputs.row(i).begin()));
        CHECK(two.data.labels[i] == three.data.labels[i]);
    }
}

TEST_CASE("dataset cache round trip is bit exact") {
    Dataset d = parse_idx(idx_images(3, 4, 4, 9), idx_labels(3), "synthetic-cache");
    d.data.inputs.values()[5] = 1.0 / 3.0;
    const Dataset r = decode_dataset(encode_dataset(d));
    CHECK(std::memcmp(r.data.inputs.data(), d.data.inputs.data(), d.data.inputs.size() * sizeof(double)) == 0);
    CHECK(r.data.labels == d.data.labels);
    CHECK(r.provenance == d.provenance);
    CHECK_THROWS_AS(decode_dataset(encode_dataset(d) + "!"), Error);
}

TEST_CASE("data directory resolution") {
    CHECK(resolve_data_dir("/explicit") == "/explicit");
    const char* old = std::getenv("FLATLENS_DATA_DIR");
    const std::string saved = old ? old : "";
    setenv("FLATLENS_DATA_DIR", "/from-env", 1);
    CHECK(resolve_data_dir("") == "/from-env");
    CHECK(resolve_data_dir("/flag") == "/flag");
    unsetenv("FLATLENS_DATA_DIR");
    CHECK(resolve_data_dir("") == "data/mnist");
    if (!saved.empty()) setenv("FLATLENS_DATA_DIR", saved.c_str(), 1);
}

TEST_CASE("real MNIST files") {
    if (!have_mnist()) {
        MESSAGE("MNIST not found; run tools/fetch_mnist.sh");
        return;
    }
    const Dataset train = load_mnist(mnist_dir(), MnistSplit::train);
    CHECK(train.size() == 60000);
    CHECK(train.input_width() == 784);
    CHECK(train.data.labels[0] == 5);
    double lo = 1.0, hi = 0.0;
    for (double x : train.data.inputs.values()) {
        lo = std::min(lo, x);
        hi = std::max(hi, x);
    }
    CHECK(lo == 0.0);
    CHECK(hi == 1.0);

    // Independent count straight from the label bytes.
    const std::string raw = read_file(mnist_dir() / "train-labels-idx1-ubyte");
    std::array<std::size_t, 10> direct{};
    for (std::size_t i = 0; i < 10000; ++i) ++direct[static_cast<unsigned char>(raw[8 + i])];
    const Dataset first = take_prefix(train, 10000);
    std::array<std::size_t, 10> counted{};
    for (auto l : first.data.labels) ++counted[l];
    CHECK(counted == direct);
    CHECK(first.provenance.find("10000") != std::string::npos);

    const Dataset test = load_mnist(mnist_dir(), MnistSplit::test);
    CHECK(test.size() == 10000);
}

TEST_CASE("synthetic quadratic task") {
    const auto task = synthetic_quadratic_task(3, {1.0, 1.0, 1.0}, 0.0, true);
    std::vector<double> x = task.minimum;
    const std::vector<double> u{0.5, -1.0, 2.0};
    for (std::size_t i = 0; i < 3; ++i) x[i] += u[i];
    std::vector<double> g(3);
    task.objective.gradient(x, g);
    for (std::size_t i = 0; i < 3; ++i) CHECK(g[i] == doctest::Approx(u[i]).epsilon(1e-14));
    CHECK(task.objective.value(task.minimum) == 0.0);

    const auto rotated = synthetic_quadratic_task(4, {5.0, 2.0, 0.5, 0.0}, 1.5);
    CHECK(rotated.objective.value(rotated.minimum) == doctest::Approx(1.5));
    const Matrix q = random_orthogonal(6, 2);
    CHECK(max_abs_diff(matmul(q, q, Trans::yes, Trans::no), Matrix::identity(6)) < 1e-13);
}
