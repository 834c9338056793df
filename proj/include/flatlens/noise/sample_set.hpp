#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

#include "flatlens/linalg/eigh.hpp"
#include "flatlens/linalg/matrix.hpp"

namespace flatlens {

enum class SampleKind { trajectory, gradient };

std::string_view to_string(SampleKind k) noexcept;

struct SampleMeta {
    std::uint64_t seed = 0;
    double keep = 1.0;  // dropout keep probability in force while sampling
    double lr = 0.0;
    std::uint64_t step_begin = 0;
    std::uint64_t step_end = 0;
    std::string slice = "W1";
};

// N x D matrix of sampled parameter slices (S_para) or gradients (S_grad).
struct SampleSet {
    Matrix samples;
    SampleKind kind = SampleKind::trajectory;
    SampleMeta meta;

    std::size_t count() const noexcept { return samples.rows(); }
    std::size_t dim() const noexcept { return samples.cols(); }
    // N >= 2 and finite rows.
    void validate() const;
};

// Archive container ("FLTLSA01"): header (kind tag, N, D, keep, lr, seed,
// step range, slice) followed by the N x D little-endian f64 matrix. The kind
// tag is "trajectory", "gradient", "matrix:<source>" or "spectrum:<source>".
struct ArchiveRecord {
    std::string kind;
    SampleMeta meta;
    Matrix matrix;
};

std::string encode_archive(const ArchiveRecord& rec);
ArchiveRecord decode_archive(std::string_view bytes);

void save_samples(const std::filesystem::path& path, const SampleSet& s);
SampleSet load_samples(const std::filesystem::path& path);

// Spectra are stored as a (D+1) x D matrix: eigenvalues, then one eigenvector per row.
void save_spectrum(const std::filesystem::path& path, const Spectrum& s, const SampleMeta& meta);
Spectrum load_spectrum(const std::filesystem::path& path);

void save_matrix(const std::filesystem::path& path, const Matrix& m, SpectrumSource source,
                 const SampleMeta& meta);
Matrix load_matrix(const std::filesystem::path& path);

}  // namespace flatlens
