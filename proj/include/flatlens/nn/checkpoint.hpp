#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include "flatlens/nn/architecture.hpp"
#include "flatlens/nn/params.hpp"

namespace flatlens {

// Binary layout:
//   "FLTLNS01"
//   u32 width count, u32 width each, u8 activation tag,
//   u32 dropout count, then (u32 layer, f64 keep) each,
//   per tensor in storage order: u64 length, f64 values (row-major).
// All integers and floats little-endian.
inline constexpr std::string_view kCheckpointMagic = "FLTLNS01";

struct Checkpoint {
    Architecture arch;
    ParamVector params;
};

std::string encode_checkpoint(const Architecture& arch, const ParamVector& params);
Checkpoint decode_checkpoint(std::string_view bytes);

void save_checkpoint(const std::filesystem::path& path, const Architecture& arch,
                     const ParamVector& params);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace flatlens
