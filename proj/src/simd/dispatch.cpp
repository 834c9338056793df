#include <cstdlib>
#include <string>

#include "flatlens/errors.hpp"
#include "flatlens/simd/kernels.hpp"

namespace flatlens::simd {

std::string_view to_string(Isa isa) noexcept {
    switch (isa) {
        case Isa::scalar: return "scalar";
        case Isa::avx2: return "avx2";
        case Isa::avx512: return "avx512";
    }
    return "unknown";
}

Isa parse_isa(std::string_view name) {
    if (name == "scalar") return Isa::scalar;
    if (name == "avx2") return Isa::avx2;
    if (name == "avx512") return Isa::avx512;
    fail(ErrorKind::config, "unknown instruction set '" + std::string(name) +
                                "' (expected scalar, avx2 or avx512)");
}

bool supported(Isa isa) noexcept {
    switch (isa) {
        case Isa::scalar: return true;
#if defined(__x86_64__)
        case Isa::avx2:
            return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
        case Isa::avx512:
            return __builtin_cpu_supports("avx512f") && __builtin_cpu_supports("fma");
#else
        default: return false;
#endif
    }
    return false;
}

std::vector<Isa> supported_isas() {
    std::vector<Isa> out;
    for (Isa isa : {Isa::scalar, Isa::avx2, Isa::avx512}) {
        if (supported(isa)) out.push_back(isa);
    }
    return out;
}

const KernelSet& kernels(Isa isa) {
    if (!supported(isa)) {
        fail(ErrorKind::config,
             "instruction set " + std::string(to_string(isa)) + " is not supported by this CPU");
    }
    switch (isa) {
#if defined(__x86_64__)
        case Isa::avx2: return detail::avx2_kernels;
        case Isa::avx512: return detail::avx512_kernels;
#endif
        default: return detail::scalar_kernels;
    }
}

const KernelSet& active() {
    static const KernelSet& selected = [] () -> const KernelSet& {
        if (const char* env = std::getenv("FLATLENS_ISA"); env != nullptr && *env != '\0') {
            return kernels(parse_isa(env));
        }
        const auto isas = supported_isas();
        return kernels(isas.back());
    }();
    return selected;
}

}  // namespace flatlens::simd
