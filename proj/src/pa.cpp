// SPDX-License-Identifier: Apache-2.0
#include "dpdlab/pa.hpp"

#include <stdexcept>

namespace dpdlab {

namespace {

// Counter-based noise keeps block splits exact: sample k of a run sees the
// same draw no matter how the input was chunked.
cdouble counter_noise(std::uint64_t seed, std::uint64_t ctr) {
    const std::uint64_t w1 = mix_seed(seed, 2 * ctr);
    const std::uint64_t w2 = mix_seed(seed, 2 * ctr + 1);
    const double u1 = (static_cast<double>(w1 >> 11) + 1.0) * 0x1.0p-53;
    const double u2 = static_cast<double>(w2 >> 11) * 0x1.0p-53;
    const double r = std::sqrt(-std::log(u1));
    const double phi = 2.0 * M_PI * u2;
    return {r * std::cos(phi), r * std::sin(phi)};
}

double envelope_poly(const PaConfig& cfg, double r2, double thermal_level) {
    double g = 1.0;
    double rp = r2;
    for (std::size_t k = 0; k < cfg.am_am_poly.size(); ++k) {
        double c = cfg.am_am_poly[k];
        if (k == 0) c += cfg.thermal_compression_sensitivity * thermal_level;
        g += c * rp;
        rp *= r2;
    }
    return g;
}

} // namespace

std::vector<Diagnostic> PaConfig::problems() const {
    std::vector<Diagnostic> out;
    if (small_signal_gain == cdouble{0.0, 0.0})
        out.push_back({"pa.small_signal_gain", "must be nonzero"});
    if (!(thermal_alpha > 0.0 && thermal_alpha < 1.0))
        out.push_back({"pa.thermal_alpha", "must lie in (0, 1)"});
    if (memory_taps.empty()) out.push_back({"pa.memory_taps", "must not be empty"});
    if (!(rated_input_max > 0.0))
        out.push_back({"pa.rated_input_max", "must be positive"});
    for (double c : am_am_poly)
        if (!std::isfinite(c)) {
            out.push_back({"pa.am_am_poly", "coefficients must be finite"});
            break;
        }
    if (out.empty()) {
        // Sampled envelope response: amplitude out must not shrink as
        // amplitude in grows, anywhere inside the rated drive range.
        double prev = 0.0;
        for (int k = 1; k <= 256; ++k) {
            const double r = rated_input_max * static_cast<double>(k) / 256.0;
            const double v = r * std::abs(envelope_poly(*this, r * r, 0.0));
            if (v < prev - 1e-12) {
                out.push_back(
                    {"pa.am_am_poly", "compression not monotone within rated_input_max"});
                break;
            }
            prev = v;
        }
    }
    return out;
}

PaState pa_initial_state(const PaConfig& cfg) {
    PaState st;
    st.filter_memory.assign(cfg.memory_taps.empty() ? 0 : cfg.memory_taps.size() - 1,
                            cdouble{0.0, 0.0});
    return st;
}

std::pair<std::vector<cdouble>, PaState> pa_process(const PaConfig& cfg, const PaState& state,
                                                    const std::vector<cdouble>& x) {
    const auto diags = cfg.problems();
    if (!diags.empty())
        throw std::invalid_argument("pa_process: " + diags.front().field + " " +
                                    diags.front().message);
    const std::size_t ntaps = cfg.memory_taps.size();
    if (state.filter_memory.size() != ntaps - 1)
        throw std::invalid_argument("pa_process: state does not match memory tap count");

    const bool noise_on = cfg.output_noise_floor_dbc > -300.0;
    // Noise referenced to the small-signal output power of a unit-RMS input,
    // so its scale is a pure config constant and block splits stay exact.
    const double noise_rms = noise_on ? std::abs(cfg.small_signal_gain) *
                                            amplitude_from_db(cfg.output_noise_floor_dbc)
                                      : 0.0;

    PaState st = state;
    std::vector<cdouble> v(x.size());
    for (std::size_t n = 0; n < x.size(); ++n) {
        const double p_in = std::norm(x[n]);
        st.thermal_level = (1.0 - cfg.thermal_alpha) * st.thermal_level + cfg.thermal_alpha * p_in;

        const double r = std::sqrt(p_in);
        const double reff = std::min(r, cfg.rated_input_max);
        const double r2 = reff * reff;
        const double g_env = envelope_poly(cfg, r2, st.thermal_level);
        const double phase = cfg.am_pm_strength * r2;
        const cdouble gain = cfg.small_signal_gain *
                             (cdouble{1.0, 0.0} + cfg.thermal_gain_sensitivity * st.thermal_level);
        const cdouble rot{std::cos(phase), std::sin(phase)};
        const cdouble in = r > cfg.rated_input_max ? x[n] * (cfg.rated_input_max / r) : x[n];
        v[n] = gain * g_env * rot * in;
    }

    std::vector<cdouble> y(x.size());
    for (std::size_t n = 0; n < x.size(); ++n) {
        cdouble acc = cfg.memory_taps[0] * v[n];
        for (std::size_t t = 1; t < ntaps; ++t) {
            const auto i = static_cast<std::ptrdiff_t>(n) - static_cast<std::ptrdiff_t>(t);
            const cdouble past = i >= 0 ? v[static_cast<std::size_t>(i)]
                                        : state.filter_memory[state.filter_memory.size() -
                                                              static_cast<std::size_t>(-i)];
            acc += cfg.memory_taps[t] * past;
        }
        if (noise_on) acc += noise_rms * counter_noise(cfg.noise_seed, st.noise_counter + n);
        y[n] = acc;
    }
    st.noise_counter += x.size();

    if (ntaps > 1) {
        // Next state's tail: the last ntaps-1 pre-filter samples of
        // (previous tail ++ v).
        const std::size_t keep = ntaps - 1;
        std::vector<cdouble> tail(keep);
        for (std::size_t i = 0; i < keep; ++i) {
            const auto idx = static_cast<std::ptrdiff_t>(v.size()) -
                             static_cast<std::ptrdiff_t>(keep - i);
            tail[i] = idx >= 0
                          ? v[static_cast<std::size_t>(idx)]
                          : state.filter_memory[static_cast<std::size_t>(
                                static_cast<std::ptrdiff_t>(state.filter_memory.size()) + idx)];
        }
        st.filter_memory = std::move(tail);
    }
    return {std::move(y), std::move(st)};
}

cdouble pa_static_gain(const PaConfig& cfg, double amplitude, double thermal_level) {
    const double reff = std::min(amplitude, cfg.rated_input_max);
    const double r2 = reff * reff;
    const double g_env = envelope_poly(cfg, r2, thermal_level);
    const double phase = cfg.am_pm_strength * r2;
    const cdouble gain =
        cfg.small_signal_gain * (cdouble{1.0, 0.0} + cfg.thermal_gain_sensitivity * thermal_level);
    cdouble fir_dc{0.0, 0.0};
    for (const auto& t : cfg.memory_taps) fir_dc += t;
    const double squeeze = amplitude > cfg.rated_input_max ? cfg.rated_input_max / amplitude : 1.0;
    return gain * g_env * cdouble{std::cos(phase), std::sin(phase)} * fir_dc * squeeze;
}

} // namespace dpdlab
