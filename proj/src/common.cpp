// SPDX-License-Identifier: Apache-2.0
#include "dpdlab/common.hpp"

#include <stdexcept>

namespace dpdlab {

std::vector<cdouble> matvec(const CMatrix& a, const std::vector<cdouble>& v) {
    if (v.size() != a.cols) throw std::invalid_argument("matvec: dimension mismatch");
    std::vector<cdouble> out(a.rows, cdouble{0.0, 0.0});
    for (std::size_t r = 0; r < a.rows; ++r) {
        cdouble acc{0.0, 0.0};
        const cdouble* row = a.data.data() + r * a.cols;
        for (std::size_t c = 0; c < a.cols; ++c) acc += row[c] * v[c];
        out[r] = acc;
    }
    return out;
}

double mean_power(const std::vector<cdouble>& v) {
    if (v.empty()) return 0.0;
    double acc = 0.0;
    for (const auto& s : v) acc += std::norm(s);
    return acc / static_cast<double>(v.size());
}

double rms(const std::vector<cdouble>& v) { return std::sqrt(mean_power(v)); }

std::uint64_t mix_seed(std::uint64_t base, std::uint64_t salt) {
    // splitmix64 finalizer over the combined value.
    std::uint64_t z = base + 0x9e3779b97f4a7c15ull * (salt + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

} // namespace dpdlab
