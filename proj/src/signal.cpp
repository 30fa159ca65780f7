// SPDX-License-Identifier: Apache-2.0
#include "dpdlab/signal.hpp"

#include <algorithm>
#include <bit>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include "dpdlab/fft.hpp"

namespace dpdlab {

namespace {

std::size_t subframe_boundary(const PulsedNoiseConfig& cfg, std::size_t i) {
    return static_cast<std::size_t>(
        std::llround(static_cast<double>(i) * cfg.subframe_duration_s * cfg.sample_rate_hz));
}

std::vector<double> lowpass_taps(double cutoff_hz, double sample_rate_hz, std::size_t ntaps) {
    const double fc = cutoff_hz / sample_rate_hz;
    const double mid = static_cast<double>(ntaps - 1) / 2.0;
    std::vector<double> h(ntaps);
    double sum = 0.0;
    for (std::size_t n = 0; n < ntaps; ++n) {
        const double t = static_cast<double>(n) - mid;
        const double x = 2.0 * M_PI * fc * t;
        const double sinc = (std::abs(t) < 1e-12) ? 2.0 * fc : std::sin(x) / (M_PI * t);
        const double w =
            0.54 - 0.46 * std::cos(2.0 * M_PI * static_cast<double>(n) / static_cast<double>(ntaps - 1));
        h[n] = sinc * w;
        sum += h[n];
    }
    for (auto& v : h) v /= sum;
    return h;
}

// The generator filter keeps the fixed 127-tap design; narrow cutoffs (the
// long-term state filter) need proportionally longer kernels to have any
// rejection at all, so the length grows as ~4 fs/fc there.
std::size_t pick_tap_count(double cutoff_hz, double sample_rate_hz) {
    std::size_t n = 127;
    const double want = 4.0 * sample_rate_hz / cutoff_hz;
    if (want > static_cast<double>(n)) n = static_cast<std::size_t>(want);
    n = std::min<std::size_t>(n, 16383);
    if (n % 2 == 0) ++n;
    return n;
}

std::vector<cdouble> convolve_full(const std::vector<cdouble>& x, const std::vector<double>& h) {
    const std::size_t nx = x.size();
    const std::size_t nh = h.size();
    if (nx == 0) return {};
    const std::size_t nfull = nx + nh - 1;

    if (static_cast<double>(nx) * static_cast<double>(nh) < 4.0e6) {
        std::vector<cdouble> y(nfull, cdouble{0.0, 0.0});
        for (std::size_t i = 0; i < nx; ++i)
            for (std::size_t j = 0; j < nh; ++j) y[i + j] += x[i] * h[j];
        return y;
    }

    const std::size_t nfft = next_pow2(nfull);
    std::vector<cdouble> fx(nfft, cdouble{0.0, 0.0});
    std::vector<cdouble> fh(nfft, cdouble{0.0, 0.0});
    std::copy(x.begin(), x.end(), fx.begin());
    for (std::size_t j = 0; j < nh; ++j) fh[j] = cdouble{h[j], 0.0};
    fft_inplace(fx, false);
    fft_inplace(fh, false);
    for (std::size_t i = 0; i < nfft; ++i) fx[i] *= fh[i];
    fft_inplace(fx, true);
    fx.resize(nfull);
    return fx;
}

void write_u32_le(std::ostream& os, std::uint32_t v) {
    unsigned char b[4];
    for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
    os.write(reinterpret_cast<const char*>(b), 4);
}

void write_f64_le(std::ostream& os, double d) {
    std::uint64_t v;
    std::memcpy(&v, &d, 8);
    if constexpr (std::endian::native == std::endian::big) v = __builtin_bswap64(v);
    os.write(reinterpret_cast<const char*>(&v), 8);
}

std::uint32_t read_u32_le(std::istream& is) {
    unsigned char b[4];
    is.read(reinterpret_cast<char*>(b), 4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
    return v;
}

double read_f64_le(std::istream& is) {
    std::uint64_t v = 0;
    is.read(reinterpret_cast<char*>(&v), 8);
    if constexpr (std::endian::native == std::endian::big) v = __builtin_bswap64(v);
    double d;
    std::memcpy(&d, &v, 8);
    return d;
}

} // namespace

std::vector<Diagnostic> PulsedNoiseConfig::problems() const {
    std::vector<Diagnostic> out;
    if (!(sample_rate_hz > 0.0))
        out.push_back({"signal.sample_rate_hz", "must be positive"});
    if (!(noise_bandwidth_hz > 0.0))
        out.push_back({"signal.noise_bandwidth_hz", "must be positive"});
    else if (sample_rate_hz > 0.0 && noise_bandwidth_hz > sample_rate_hz / 2.0)
        out.push_back({"signal.noise_bandwidth_hz", "exceeds Nyquist bandwidth"});
    if (!(subframe_duration_s > 0.0))
        out.push_back({"signal.subframe_duration_s", "must be positive"});
    if (num_subframes == 0) out.push_back({"signal.num_subframes", "must be at least 1"});
    if (pattern.empty())
        out.push_back({"signal.pattern", "must not be empty"});
    else if (pattern.size() != num_subframes)
        out.push_back({"signal.pattern", "length must equal num_subframes"});
    if (!(power_step_db >= 0.0))
        out.push_back({"signal.power_step_db", "must be nonnegative"});
    return out;
}

ComplexSignal gen_pulsed_noise(const PulsedNoiseConfig& cfg) {
    const auto diags = cfg.problems();
    if (!diags.empty())
        throw std::invalid_argument("gen_pulsed_noise: " + diags.front().field + " " +
                                    diags.front().message);

    const std::size_t total = subframe_boundary(cfg, cfg.num_subframes);
    std::mt19937_64 rng(mix_seed(cfg.seed, 0x70756c73ull));
    std::vector<cdouble> white(total);
    for (auto& s : white) s = complex_gaussian(rng);

    // Occupied (two-sided) bandwidth maps to a one-sided cutoff of half that.
    const std::size_t ntaps = pick_tap_count(cfg.noise_bandwidth_hz / 2.0, cfg.sample_rate_hz);
    const auto taps = lowpass_taps(cfg.noise_bandwidth_hz / 2.0, cfg.sample_rate_hz, ntaps);
    auto full = convolve_full(white, taps);
    const std::size_t delay = (ntaps - 1) / 2;
    std::vector<cdouble> shaped(total);
    std::copy(full.begin() + static_cast<std::ptrdiff_t>(delay),
              full.begin() + static_cast<std::ptrdiff_t>(delay + total), shaped.begin());

    const double low_rms = amplitude_from_db(-cfg.power_step_db);
    for (std::size_t i = 0; i < cfg.num_subframes; ++i) {
        const std::size_t b = subframe_boundary(cfg, i);
        const std::size_t e = subframe_boundary(cfg, i + 1);
        double p = 0.0;
        for (std::size_t n = b; n < e; ++n) p += std::norm(shaped[n]);
        p /= static_cast<double>(e - b);
        const double target =
            cfg.pattern[i % cfg.pattern.size()] == SubframeLevel::High ? 1.0 : low_rms;
        const double scale = p > 0.0 ? target / std::sqrt(p) : 0.0;
        for (std::size_t n = b; n < e; ++n) shaped[n] *= scale;
    }

    return {std::move(shaped), cfg.sample_rate_hz};
}

ComplexSignal gen_ofdm_surrogate(double sample_rate_hz, double occupied_bandwidth_hz,
                                 std::size_t num_symbols, std::uint64_t seed) {
    if (!(sample_rate_hz > 0.0))
        throw std::invalid_argument("gen_ofdm_surrogate: sample rate must be positive");
    if (num_symbols == 0)
        throw std::invalid_argument("gen_ofdm_surrogate: need at least one symbol");
    const double spacing = sample_rate_hz / static_cast<double>(kOfdmFftSize);
    const auto half = static_cast<std::size_t>(occupied_bandwidth_hz / (2.0 * spacing));
    if (half < 1 || 2 * half > kOfdmFftSize - 2)
        throw std::invalid_argument("gen_ofdm_surrogate: occupied bandwidth out of range");

    std::mt19937_64 rng(mix_seed(seed, 0x6f66646dull));
    const double amp = 1.0 / std::sqrt(2.0);
    std::vector<cdouble> out;
    out.reserve(num_symbols * (kOfdmFftSize + kOfdmCpLen));
    std::vector<cdouble> spec(kOfdmFftSize);

    for (std::size_t sym = 0; sym < num_symbols; ++sym) {
        std::fill(spec.begin(), spec.end(), cdouble{0.0, 0.0});
        for (std::size_t k = 1; k <= half; ++k) {
            const std::uint64_t bits = rng();
            spec[k] = {amp * ((bits & 1) ? 1.0 : -1.0), amp * ((bits & 2) ? 1.0 : -1.0)};
            spec[kOfdmFftSize - k] = {amp * ((bits & 4) ? 1.0 : -1.0),
                                      amp * ((bits & 8) ? 1.0 : -1.0)};
        }
        fft_inplace(spec, true);
        for (std::size_t n = kOfdmFftSize - kOfdmCpLen; n < kOfdmFftSize; ++n)
            out.push_back(spec[n]);
        out.insert(out.end(), spec.begin(), spec.end());
    }

    // Envelope clip 10.5 dB above RMS keeps the PAPR inside the 8-12 dB band
    // without visibly distorting the spectrum.
    const double r = rms(out);
    const double limit = r * amplitude_from_db(10.5);
    for (auto& s : out) {
        const double a = std::abs(s);
        if (a > limit) s *= limit / a;
    }

    ComplexSignal sig{std::move(out), sample_rate_hz};
    return normalize_rms(sig, 1.0);
}

ComplexSignal normalize_rms(const ComplexSignal& in, double target_rms) {
    const double r = rms(in.samples);
    if (r <= 0.0) throw std::invalid_argument("normalize_rms: signal has zero power");
    ComplexSignal out = in;
    const double scale = target_rms / r;
    for (auto& s : out.samples) s *= scale;
    return out;
}

ComplexSignal lowpass_filter(const ComplexSignal& in, double cutoff_hz) {
    if (!(in.sample_rate_hz > 0.0))
        throw std::invalid_argument("lowpass_filter: sample rate must be positive");
    if (!(cutoff_hz > 0.0) || cutoff_hz > in.sample_rate_hz / 2.0)
        throw std::invalid_argument("lowpass_filter: cutoff outside (0, fs/2]");
    if (in.samples.empty()) return in;

    const std::size_t ntaps = pick_tap_count(cutoff_hz, in.sample_rate_hz);
    const auto taps = lowpass_taps(cutoff_hz, in.sample_rate_hz, ntaps);
    auto full = convolve_full(in.samples, taps);
    const std::size_t delay = (ntaps - 1) / 2;
    ComplexSignal out;
    out.sample_rate_hz = in.sample_rate_hz;
    out.samples.assign(full.begin() + static_cast<std::ptrdiff_t>(delay),
                       full.begin() + static_cast<std::ptrdiff_t>(delay + in.samples.size()));
    return out;
}

std::ptrdiff_t time_align(const ComplexSignal& reference, const ComplexSignal& measured) {
    const std::size_t nr = reference.samples.size();
    const std::size_t nm = measured.samples.size();
    if (nr == 0 || nm == 0) throw std::invalid_argument("time_align: empty signal");
    if (mean_power(reference.samples) == 0.0 || mean_power(measured.samples) == 0.0)
        throw std::invalid_argument("time_align: all-zero signal");

    const std::size_t nfft = next_pow2(nr + nm);
    std::vector<cdouble> fr(nfft, cdouble{0.0, 0.0});
    std::vector<cdouble> fm(nfft, cdouble{0.0, 0.0});
    std::copy(reference.samples.begin(), reference.samples.end(), fr.begin());
    std::copy(measured.samples.begin(), measured.samples.end(), fm.begin());
    fft_inplace(fr, false);
    fft_inplace(fm, false);
    for (std::size_t i = 0; i < nfft; ++i) fm[i] *= std::conj(fr[i]);
    fft_inplace(fm, true);

    // fm[k mod nfft] now holds sum_n measured[n] conj(reference[n-k]).
    std::size_t best = 0;
    double best_mag = -1.0;
    for (std::size_t i = 0; i < nfft; ++i) {
        const double m = std::abs(fm[i]);
        if (m > best_mag) {
            best_mag = m;
            best = i;
        }
    }
    auto lag = static_cast<std::ptrdiff_t>(best);
    if (lag >= static_cast<std::ptrdiff_t>(nm)) lag -= static_cast<std::ptrdiff_t>(nfft);
    return lag;
}

double papr_db(const ComplexSignal& s) {
    if (s.samples.empty()) throw std::invalid_argument("papr_db: empty signal");
    double peak = 0.0;
    for (const auto& v : s.samples) peak = std::max(peak, std::norm(v));
    const double mean = mean_power(s.samples);
    if (mean <= 0.0) throw std::invalid_argument("papr_db: signal has zero power");
    return db_from_power_ratio(peak / mean);
}

void save_signal(const ComplexSignal& s, const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("save_signal: cannot open " + path);
    os.write("CSIG", 4);
    write_u32_le(os, 1);
    write_f64_le(os, s.sample_rate_hz);
    for (const auto& v : s.samples) {
        write_f64_le(os, v.real());
        write_f64_le(os, v.imag());
    }
    if (!os) throw std::runtime_error("save_signal: write failed for " + path);
}

ComplexSignal load_signal(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("load_signal: cannot open " + path);
    char magic[4];
    is.read(magic, 4);
    if (!is || std::memcmp(magic, "CSIG", 4) != 0)
        throw std::runtime_error("load_signal: bad magic in " + path);
    const std::uint32_t version = read_u32_le(is);
    if (version != 1)
        throw std::runtime_error("load_signal: unsupported version in " + path);
    ComplexSignal out;
    out.sample_rate_hz = read_f64_le(is);
    if (!is) throw std::runtime_error("load_signal: truncated header in " + path);
    while (true) {
        const double re = read_f64_le(is);
        if (is.eof()) break;
        const double im = read_f64_le(is);
        if (is.eof()) throw std::runtime_error("load_signal: truncated payload in " + path);
        if (!is) throw std::runtime_error("load_signal: read failed for " + path);
        out.samples.emplace_back(re, im);
    }
    return out;
}

void export_signal_csv(const ComplexSignal& s, const std::string& path) {
    std::FILE* f = std::fopen(path.c_str(), "w");
    if (!f) throw std::runtime_error("export_signal_csv: cannot open " + path);
    std::fprintf(f, "index,re,im\n");
    for (std::size_t i = 0; i < s.samples.size(); ++i)
        std::fprintf(f, "%zu,%.17g,%.17g\n", i, s.samples[i].real(), s.samples[i].imag());
    std::fclose(f);
}

} // namespace dpdlab
