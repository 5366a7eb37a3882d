#include "codite/simd.hpp"

#include "codite/common.hpp"

#include <atomic>
#include <cstdlib>
#include <cstring>

namespace codite::simd {

const RowKernels* rows_avx2_impl();  // nullptr off x86
const RowKernels* rows_neon_impl();  // nullptr off aarch64

namespace {

bool cpu_has(Isa isa) {
    switch (isa) {
        case Isa::scalar: return true;
#if defined(__x86_64__) || defined(__i386__)
        case Isa::avx2: return __builtin_cpu_supports("avx2") != 0;
#else
        case Isa::avx2: return false;
#endif
#if defined(__aarch64__)
        case Isa::neon: return true;
#else
        case Isa::neon: return false;
#endif
    }
    return false;
}

Isa detect() {
    if (const char* env = std::getenv("CODITE_SIMD")) {
        if (std::strcmp(env, "scalar") == 0) return Isa::scalar;
        if (std::strcmp(env, "avx2") == 0 && cpu_has(Isa::avx2)) return Isa::avx2;
        if (std::strcmp(env, "neon") == 0 && cpu_has(Isa::neon)) return Isa::neon;
        // "auto" or anything unusable falls through to detection.
    }
    if (cpu_has(Isa::avx2)) return Isa::avx2;
    if (cpu_has(Isa::neon)) return Isa::neon;
    return Isa::scalar;
}

std::atomic<int> g_forced{-1};

}  // namespace

const RowKernels& rows_for(Isa isa) {
    switch (isa) {
        case Isa::scalar: return rows_scalar();
        case Isa::avx2:
            if (const RowKernels* k = rows_avx2_impl(); k && cpu_has(Isa::avx2)) return *k;
            break;
        case Isa::neon:
            if (const RowKernels* k = rows_neon_impl(); k && cpu_has(Isa::neon)) return *k;
            break;
    }
    throw ArgumentError("simd: ISA " + isa_name(isa) + " is not available on this CPU");
}

Isa active_isa() {
    const int forced = g_forced.load(std::memory_order_relaxed);
    if (forced >= 0) return static_cast<Isa>(forced);
    static const Isa detected = detect();
    return detected;
}

const RowKernels& rows() { return rows_for(active_isa()); }

void force_isa(Isa isa) {
    rows_for(isa);  // validate availability first
    g_forced.store(static_cast<int>(isa), std::memory_order_relaxed);
}

void reset_isa() { g_forced.store(-1, std::memory_order_relaxed); }

std::string isa_name(Isa isa) {
    switch (isa) {
        case Isa::scalar: return "scalar";
        case Isa::avx2: return "avx2";
        case Isa::neon: return "neon";
    }
    return "unknown";
}

}  // namespace codite::simd
