// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dpdlab/common.hpp"

namespace dpdlab {

/// Complex baseband sample sequence. Carries u[n], x[n], y[n] and friends
/// throughout the lab.
struct ComplexSignal {
    std::vector<cdouble> samples;
    double sample_rate_hz = 0.0;

    std::size_t size() const { return samples.size(); }
};

enum class SubframeLevel { Low, High };

/// Bursty test signal: band-limited complex Gaussian noise with per-subframe
/// power levels. A `High` subframe has unit RMS; a `Low` subframe sits
/// power_step_db below it.
struct PulsedNoiseConfig {
    double sample_rate_hz = 30.72e6;
    double noise_bandwidth_hz = 4.0e6;
    double subframe_duration_s = 2.0e-3;
    std::size_t num_subframes = 4;
    double power_step_db = 10.0;
    std::vector<SubframeLevel> pattern = {SubframeLevel::Low, SubframeLevel::High,
                                          SubframeLevel::Low, SubframeLevel::High};
    std::uint64_t seed = 1;

    std::vector<Diagnostic> problems() const;
};

ComplexSignal gen_pulsed_noise(const PulsedNoiseConfig& cfg);

inline constexpr std::size_t kOfdmFftSize = 2048;
inline constexpr std::size_t kOfdmCpLen = 144;

/// QPSK-loaded multicarrier signal with cyclic prefix, peak-limited to keep
/// PAPR in the 8-12 dB range. One symbol spans kOfdmFftSize + kOfdmCpLen
/// samples.
ComplexSignal gen_ofdm_surrogate(double sample_rate_hz, double occupied_bandwidth_hz,
                                 std::size_t num_symbols, std::uint64_t seed);

/// Scale so that the output RMS equals target_rms; phases untouched.
ComplexSignal normalize_rms(const ComplexSignal& in, double target_rms);

/// Linear-phase windowed-sinc low-pass, group delay compensated, unit DC gain.
/// Output has the same length as the input (edges see zero padding).
ComplexSignal lowpass_filter(const ComplexSignal& in, double cutoff_hz);

/// Integer lag maximizing |cross-correlation|; positive lag means `measured`
/// is `reference` delayed by that many samples.
std::ptrdiff_t time_align(const ComplexSignal& reference, const ComplexSignal& measured);

double papr_db(const ComplexSignal& s);

// Binary container: 16-byte header (magic "CSIG", version u32, sample_rate
// f64), then little-endian float64 interleaved I/Q.
void save_signal(const ComplexSignal& s, const std::string& path);
ComplexSignal load_signal(const std::string& path);

/// CSV export with columns index,re,im.
void export_signal_csv(const ComplexSignal& s, const std::string& path);

} // namespace dpdlab
