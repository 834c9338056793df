#pragma once

// Little-endian byte encoding shared by the checkpoint, dataset cache and
// sample archive formats.

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace flatlens {

class ByteWriter {
public:
    void raw(std::string_view bytes) { buf_.insert(buf_.end(), bytes.begin(), bytes.end()); }
    void u8(std::uint8_t v) { buf_.push_back(static_cast<char>(v)); }
    void u32(std::uint32_t v) { put(v); }
    void u64(std::uint64_t v) { put(v); }
    void f64(double v) { put(std::bit_cast<std::uint64_t>(v)); }
    void str(std::string_view s) {
        u32(static_cast<std::uint32_t>(s.size()));
        raw(s);
    }
    // u64 element count followed by the values.
    void f64_array(std::span<const double> v) {
        u64(v.size());
        for (double x : v) f64(x);
    }

    const std::string& bytes() const noexcept { return buf_; }
    std::string take() { return std::move(buf_); }

private:
    template <class T>
    void put(T v) {
        for (std::size_t i = 0; i < sizeof(T); ++i) buf_.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
    }
    std::string buf_;
};

// Bounds-checked reader; truncation raises Error(parse) naming `what`.
class ByteReader {
public:
    explicit ByteReader(std::string_view bytes) : bytes_(bytes) {}

    std::string_view raw(std::size_t n, const char* what);
    std::uint8_t u8(const char* what);
    std::uint32_t u32(const char* what);
    std::uint64_t u64(const char* what);
    double f64(const char* what) { return std::bit_cast<double>(u64(what)); }
    std::string str(const char* what);
    std::vector<double> f64_array(const char* what);

    std::size_t remaining() const noexcept { return bytes_.size() - pos_; }
    bool done() const noexcept { return pos_ == bytes_.size(); }

private:
    std::string_view bytes_;
    std::size_t pos_ = 0;
};

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view bytes);

}  // namespace flatlens
