// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <vector>

#include "dpdlab/common.hpp"

namespace dpdlab {

std::size_t next_pow2(std::size_t n);

/// In-place radix-2 FFT; v.size() must be a power of two. The inverse
/// transform includes the 1/N scaling.
void fft_inplace(std::vector<cdouble>& v, bool inverse);

} // namespace dpdlab
