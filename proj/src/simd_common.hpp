#pragma once

// Shared constants for the exp used by every row-kernel variant.  The scalar
// and vector paths must perform these operations in the same order (and never
// via FMA) so results stay bit-identical; the TUs including this header are
// compiled with -ffp-contract=off.

#include <bit>
#include <cstdint>

namespace codite::simd::detail {

inline constexpr double kLog2E = 1.44269504088896340736;
inline constexpr double kLn2Hi = 6.93147180369123816490e-01;
inline constexpr double kLn2Lo = 1.90821492927058770002e-10;

// exp(x) flushes to zero below this (std::exp is already < 1e-307 there).
inline constexpr double kExpUnderflow = -707.5;
inline constexpr double kExpOverflow = 709.782712893384;

// Taylor coefficients 1/k! for the degree-13 Horner evaluation on |r| <= ln2/2.
inline constexpr double kExpPoly[14] = {
    1.0,
    1.0,
    0.5,
    1.6666666666666666e-01,
    4.1666666666666664e-02,
    8.3333333333333332e-03,
    1.3888888888888889e-03,
    1.9841269841269841e-04,
    2.4801587301587302e-05,
    2.7557319223985893e-06,
    2.7557319223985888e-07,
    2.5052108385441720e-08,
    2.0876756987868100e-09,
    1.6059043836821613e-10,
};

// Horner core on the reduced argument; shared verbatim by all paths.
inline double exp_poly(double r) {
    double p = kExpPoly[13];
    for (int k = 12; k >= 0; --k) p = p * r + kExpPoly[k];
    return p;
}

inline double ldexp_fast(double p, std::int64_t k) {
    // 2^k via exponent bits; valid for k in [-1022, 1023].
    return p * std::bit_cast<double>(static_cast<std::uint64_t>(k + 1023) << 52);
}

}  // namespace codite::simd::detail
