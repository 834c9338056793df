#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <string_view>

#include "flatlens/nn/network.hpp"

namespace flatlens {

struct Dataset {
    Batch data;              // inputs scaled to [0, 1]
    std::string provenance;  // "mnist-train-first-K", "synthetic-<name>", ...

    std::size_t size() const noexcept { return data.size(); }
    std::size_t input_width() const noexcept { return data.inputs.cols(); }
    void validate() const;
};

inline constexpr std::uint32_t kIdxImagesMagic = 0x00000803;
inline constexpr std::uint32_t kIdxLabelsMagic = 0x00000801;

// Parses big-endian IDX image/label files; pixels are divided by 255.
Dataset parse_idx(std::string_view image_bytes, std::string_view label_bytes,
                  std::string provenance);
Dataset load_idx(const std::filesystem::path& images, const std::filesystem::path& labels);

enum class MnistSplit { train, test };

// Reads {train,t10k}-{images-idx3,labels-idx1}-ubyte from `dir`.
Dataset load_mnist(const std::filesystem::path& dir, MnistSplit split);

// Resolves the data directory: explicit flag, then FLATLENS_DATA_DIR, then
// ./data/mnist.
std::filesystem::path resolve_data_dir(const std::string& flag_value);

// First K examples in order. Throws Error(config) when K > n or K == 0.
Dataset take_prefix(const Dataset& d, std::size_t k);

// Internal cache format ("FLTLDS01"); bit-exact round trip.
std::string encode_dataset(const Dataset& d);
Dataset decode_dataset(std::string_view bytes);

}  // namespace flatlens
