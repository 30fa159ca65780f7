// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <complex>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

namespace dpdlab {

using cdouble = std::complex<double>;

/// Dense row-major complex matrix; regressor builders produce these, the
/// least-squares solver consumes them.
struct CMatrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<cdouble> data;

    CMatrix() = default;
    CMatrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c) {}

    cdouble& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
    const cdouble& operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
};

std::vector<cdouble> matvec(const CMatrix& a, const std::vector<cdouble>& v);

/// Field/rule pair produced by config validation.
struct Diagnostic {
    std::string field;
    std::string message;
};

double mean_power(const std::vector<cdouble>& v);
double rms(const std::vector<cdouble>& v);

inline double db_from_power_ratio(double r) { return 10.0 * std::log10(r); }
inline double power_from_db(double db) { return std::pow(10.0, db / 10.0); }
inline double amplitude_from_db(double db) { return std::pow(10.0, db / 20.0); }

/// splitmix64; derives independent sub-seeds from one base seed.
std::uint64_t mix_seed(std::uint64_t base, std::uint64_t salt);

/// Unit-variance circularly-symmetric complex Gaussian sample. Polar form on
/// raw mt19937_64 output, so streams are identical across standard libraries.
inline cdouble complex_gaussian(std::mt19937_64& rng) {
    const double u1 = (static_cast<double>(rng() >> 11) + 1.0) * 0x1.0p-53; // (0,1]
    const double u2 = static_cast<double>(rng() >> 11) * 0x1.0p-53;        // [0,1)
    const double r = std::sqrt(-std::log(u1));
    const double phi = 2.0 * M_PI * u2;
    return {r * std::cos(phi), r * std::sin(phi)};
}

} // namespace dpdlab
