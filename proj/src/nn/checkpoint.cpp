#include "flatlens/nn/checkpoint.hpp"

#include "flatlens/binary.hpp"
#include "flatlens/errors.hpp"

namespace flatlens {

std::string encode_checkpoint(const Architecture& arch, const ParamVector& params) {
    arch.validate();
    require(params.size() == arch.param_count(), ErrorKind::dimension,
            "checkpoint: parameters do not match architecture");
    ByteWriter w;
    w.raw(kCheckpointMagic);
    w.u32(static_cast<std::uint32_t>(arch.widths.size()));
    for (auto m : arch.widths) w.u32(static_cast<std::uint32_t>(m));
    w.u8(static_cast<std::uint8_t>(arch.activation));
    w.u32(static_cast<std::uint32_t>(arch.dropout.size()));
    for (const auto& d : arch.dropout) {
        w.u32(static_cast<std::uint32_t>(d.layer));
        w.f64(d.keep);
    }
    for (const auto& t : params.layout.tensors()) w.f64_array(params.tensor(t));
    return w.take();
}

Checkpoint decode_checkpoint(std::string_view bytes) {
    ByteReader r(bytes);
    if (r.raw(kCheckpointMagic.size(), "magic") != kCheckpointMagic) {
        fail(ErrorKind::parse, "checkpoint: bad magic (expected FLTLNS01)");
    }
    Checkpoint c;
    const std::uint32_t count = r.u32("layer count");
    require(count >= 2 && count < 1024, ErrorKind::parse, "checkpoint: implausible layer count");
    for (std::uint32_t i = 0; i < count; ++i) c.arch.widths.push_back(r.u32("layer width"));
    const std::uint8_t tag = r.u8("activation tag");
    require(tag <= 1, ErrorKind::parse, "checkpoint: unknown activation tag");
    c.arch.activation = static_cast<Activation>(tag);
    const std::uint32_t drops = r.u32("dropout count");
    require(drops < count, ErrorKind::parse, "checkpoint: implausible dropout count");
    for (std::uint32_t i = 0; i < drops; ++i) {
        DropoutLayer d;
        d.layer = r.u32("dropout layer");
        d.keep = r.f64("dropout rate");
        c.arch.dropout.push_back(d);
    }
    try {
        c.arch.validate();
    } catch (const Error& e) {
        fail(ErrorKind::parse, std::string("checkpoint: invalid architecture: ") + e.what());
    }
    c.params = ParamVector(c.arch);
    for (const auto& t : c.params.layout.tensors()) {
        auto values = r.f64_array("tensor");
        require(values.size() == t.size(), ErrorKind::parse, "checkpoint: tensor length mismatch");
        std::copy(values.begin(), values.end(), c.params.tensor(t).begin());
    }
    require(r.done(), ErrorKind::parse, "checkpoint: trailing bytes");
    return c;
}

void save_checkpoint(const std::filesystem::path& path, const Architecture& arch,
                     const ParamVector& params) {
    write_file(path, encode_checkpoint(arch, params));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    return decode_checkpoint(read_file(path));
}

}  // namespace flatlens
