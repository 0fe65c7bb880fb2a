#pragma once

#include <array>
#include <string>

#include "rootseg/errors.hpp"

namespace rootseg {

// Logarithmic SNR bins split at half decades. Intervals are half-open
// except the last: [1,3.16) [3.16,10) [10,31.6) [31.6,100].
inline constexpr std::array<double, 5> kSnrBinEdges = {1.0, 3.16, 10.0, 31.6, 100.0};
inline constexpr int kSnrBinCount = 4;

enum class SnrBin : int {
    Below = -1,
    B0 = 0,
    B1 = 1,
    B2 = 2,
    B3 = 3,
    Above = 4,
};

inline SnrBin snr_bin(double snr) {
    if (!(snr > 0.0)) throw InputError("snr must be positive");
    if (snr < kSnrBinEdges.front()) return SnrBin::Below;
    if (snr > kSnrBinEdges.back()) return SnrBin::Above;
    for (int b = kSnrBinCount - 1; b >= 0; --b)
        if (snr >= kSnrBinEdges[static_cast<std::size_t>(b)]) return static_cast<SnrBin>(b);
    return SnrBin::Below; // unreachable
}

inline std::string snr_bin_label(SnrBin b) {
    switch (b) {
        case SnrBin::Below: return "below";
        case SnrBin::B0: return "1-3.16";
        case SnrBin::B1: return "3.16-10";
        case SnrBin::B2: return "10-31.6";
        case SnrBin::B3: return "31.6-100";
        case SnrBin::Above: return "above";
    }
    return "?";
}

} // namespace rootseg
