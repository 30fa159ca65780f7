// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <vector>

#include "dpdlab/common.hpp"
#include "dpdlab/signal.hpp"

namespace dpdlab {

/// Behavioral power amplifier with odd-order envelope compression, AM/PM,
/// linear memory, and a slow thermal state that drifts gain and compression
/// with averaged drive power.
struct PaConfig {
    cdouble small_signal_gain = {10.0, 0.0};
    /// Envelope polynomial g(r) = 1 + c3 r^2 + c5 r^4 applied to the complex
    /// gain; coefficients ordered {c3, c5}.
    std::vector<double> am_am_poly = {-0.342, 0.05};
    /// Phase advance in radians at |x| = 1.
    double am_pm_strength = 0.1745;
    /// Post-nonlinearity FIR taps.
    std::vector<cdouble> memory_taps = {{1.0, 0.0}, {0.0866, 0.05}, {0.014142, -0.014142}};
    /// One-pole averaging weight for |x|^2 (per sample).
    double thermal_alpha = 1.0 / 15360.0;
    /// Gain multiplier sensitivity to the thermal level: gain *= 1 + k * level.
    cdouble thermal_gain_sensitivity = {-1.0, 0.3};
    /// Added to c3 in proportion to the thermal level.
    double thermal_compression_sensitivity = -0.5;
    /// Output noise density relative to output power; <= -300 disables it.
    double output_noise_floor_dbc = -70.0;
    /// Envelope samples above this are clamped before the polynomial.
    double rated_input_max = 1.2;
    std::uint64_t noise_seed = 0x9d2c5680u;

    std::vector<Diagnostic> problems() const;
};

/// Carry-over state between processed blocks.
struct PaState {
    double thermal_level = 0.0;
    std::vector<cdouble> filter_memory;
    std::uint64_t noise_counter = 0;
};

PaState pa_initial_state(const PaConfig& cfg);

/// Run one block through the amplifier. The returned state continues the
/// thermal trajectory and FIR tail for the next block.
std::pair<std::vector<cdouble>, PaState> pa_process(const PaConfig& cfg, const PaState& state,
                                                    const std::vector<cdouble>& x);

/// Memoryless envelope response at a given input amplitude (thermal level
/// held fixed). Useful for plotting and sanity checks.
cdouble pa_static_gain(const PaConfig& cfg, double amplitude, double thermal_level = 0.0);

} // namespace dpdlab
