#include "flatlens/cli/manifest.hpp"

#include <openssl/evp.h>

#include <ctime>
#include <memory>

#include "flatlens/binary.hpp"
#include "flatlens/errors.hpp"

namespace flatlens {

using json = nlohmann::ordered_json;

std::string sha256_hex(std::string_view bytes) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), EVP_MD_CTX_free);
    if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1 ||
        EVP_DigestUpdate(ctx.get(), bytes.data(), bytes.size()) != 1 ||
        EVP_DigestFinal_ex(ctx.get(), digest, &len) != 1) {
        fail(ErrorKind::integrity, "sha256: digest computation failed");
    }
    static constexpr char hex[] = "0123456789abcdef";
    std::string out;
    out.reserve(2 * len);
    for (unsigned int i = 0; i < len; ++i) {
        out += hex[digest[i] >> 4];
        out += hex[digest[i] & 0xf];
    }
    return out;
}

std::string sha256_file(const std::filesystem::path& path) { return sha256_hex(read_file(path)); }

void RunManifest::add_file(const std::filesystem::path& dir, const std::string& rel) {
    const std::string bytes = read_file(dir / rel);
    files.push_back({rel, sha256_hex(bytes), bytes.size()});
}

std::string utc_now() {
    const std::time_t t = std::time(nullptr);
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

json to_json(const RunManifest& m) {
    json files = json::array();
    for (const auto& f : m.files) files.push_back({{"path", f.path}, {"sha256", f.sha256}, {"bytes", f.bytes}});
    return {{"command", m.command},   {"version", m.version}, {"config_hash", m.config_hash},
            {"started", m.started},   {"finished", m.finished}, {"files", files},
            {"settings", m.settings}, {"results", m.results}};
}

RunManifest manifest_from_json(const json& j) {
    RunManifest m;
    try {
        m.command = j.at("command").get<std::string>();
        m.version = j.at("version").get<std::string>();
        m.config_hash = j.at("config_hash").get<std::string>();
        m.started = j.value("started", "");
        m.finished = j.value("finished", "");
        for (const auto& f : j.at("files")) {
            m.files.push_back({f.at("path").get<std::string>(), f.at("sha256").get<std::string>(),
                               f.at("bytes").get<std::uint64_t>()});
        }
        m.settings = j.value("settings", json::object());
        m.results = j.value("results", json::object());
    } catch (const json::exception& e) {
        fail(ErrorKind::parse, std::string("manifest: ") + e.what());
    }
    return m;
}

void write_manifest(const std::filesystem::path& path, const RunManifest& m) {
    write_file(path, to_json(m).dump(2) + "\n");
}

RunManifest load_manifest(const std::filesystem::path& path) {
    json j;
    try {
        j = json::parse(read_file(path));
    } catch (const json::parse_error& e) {
        fail(ErrorKind::parse, "manifest " + path.string() + " is not valid JSON: " + e.what());
    }
    return manifest_from_json(j);
}

void verify_manifest(const RunManifest& m, const std::filesystem::path& dir) {
    for (const auto& f : m.files) {
        const auto p = dir / f.path;
        require(std::filesystem::exists(p), ErrorKind::integrity,
                "manifest lists " + f.path + " but " + p.string() + " does not exist");
        const std::string actual = sha256_file(p);
        require(actual == f.sha256, ErrorKind::integrity,
                "checksum mismatch for " + p.string() + ": manifest " + f.sha256 + ", file " + actual);
    }
}

}  // namespace flatlens
