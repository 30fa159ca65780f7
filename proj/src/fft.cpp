// SPDX-License-Identifier: Apache-2.0
#include "dpdlab/fft.hpp"

#include <stdexcept>

namespace dpdlab {

std::size_t next_pow2(std::size_t n) {
    std::size_t p = 1;
    while (p < n) p <<= 1;
    return p;
}

void fft_inplace(std::vector<cdouble>& v, bool inverse) {
    const std::size_t n = v.size();
    if (n == 0) return;
    if ((n & (n - 1)) != 0) throw std::invalid_argument("fft_inplace: size must be a power of two");

    for (std::size_t i = 1, j = 0; i < n; ++i) {
        std::size_t bit = n >> 1;
        for (; j & bit; bit >>= 1) j ^= bit;
        j ^= bit;
        if (i < j) std::swap(v[i], v[j]);
    }

    for (std::size_t len = 2; len <= n; len <<= 1) {
        const double ang = (inverse ? 2.0 : -2.0) * M_PI / static_cast<double>(len);
        const cdouble wlen{std::cos(ang), std::sin(ang)};
        for (std::size_t i = 0; i < n; i += len) {
            cdouble w{1.0, 0.0};
            for (std::size_t k = 0; k < len / 2; ++k) {
                const cdouble a = v[i + k];
                const cdouble b = v[i + k + len / 2] * w;
                v[i + k] = a + b;
                v[i + k + len / 2] = a - b;
                w *= wlen;
            }
        }
    }

    if (inverse) {
        const double scale = 1.0 / static_cast<double>(n);
        for (auto& s : v) s *= scale;
    }
}

} // namespace dpdlab
