#include "flatlens/binary.hpp"

#include <fstream>
#include <iterator>
#include <limits>

#include "flatlens/errors.hpp"

namespace flatlens {

std::string_view ByteReader::raw(std::size_t n, const char* what) {
    if (n > remaining()) {
        fail(ErrorKind::parse, std::string("truncated input while reading ") + what);
    }
    auto out = bytes_.substr(pos_, n);
    pos_ += n;
    return out;
}

std::uint8_t ByteReader::u8(const char* what) {
    return static_cast<std::uint8_t>(raw(1, what)[0]);
}

std::uint32_t ByteReader::u32(const char* what) {
    auto b = raw(4, what);
    std::uint32_t v = 0;
    for (std::size_t i = 0; i < 4; ++i) v |= std::uint32_t(static_cast<unsigned char>(b[i])) << (8 * i);
    return v;
}

std::uint64_t ByteReader::u64(const char* what) {
    auto b = raw(8, what);
    std::uint64_t v = 0;
    for (std::size_t i = 0; i < 8; ++i) v |= std::uint64_t(static_cast<unsigned char>(b[i])) << (8 * i);
    return v;
}

std::string ByteReader::str(const char* what) {
    const std::uint32_t n = u32(what);
    return std::string(raw(n, what));
}

std::vector<double> ByteReader::f64_array(const char* what) {
    const std::uint64_t n = u64(what);
    if (n > remaining() / 8) fail(ErrorKind::parse, std::string("truncated input while reading ") + what);
    std::vector<double> v(n);
    for (auto& x : v) x = f64(what);
    return v;
}

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorKind::parse, "cannot open " + path.string());
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const std::filesystem::path& path, std::string_view bytes) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorKind::config, "cannot write " + path.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) fail(ErrorKind::config, "short write to " + path.string());
}

}  // namespace flatlens
