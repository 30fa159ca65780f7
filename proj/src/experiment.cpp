// SPDX-License-Identifier: Apache-2.0
#include "dpdlab/experiment.hpp"

#include <atomic>
#include <cctype>
#include <cstdarg>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <functional>
#include <mutex>
#include <sstream>
#include <thread>

namespace dpdlab {

namespace fs = std::filesystem;

namespace {

std::string trim(const std::string& s) {
    std::size_t b = 0;
    std::size_t e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return s.substr(b, e - b);
}

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::string item;
    std::istringstream is(s);
    while (std::getline(is, item, sep)) out.push_back(trim(item));
    if (!s.empty() && s.back() == sep) out.push_back("");
    return out;
}

double to_double(const std::string& v, int line, const std::string& field) {
    try {
        std::size_t pos = 0;
        const double d = std::stod(v, &pos);
        if (pos != v.size()) throw std::invalid_argument("trailing characters");
        return d;
    } catch (const std::exception&) {
        throw ConfigError(line, field, "expected a number, got '" + v + "'");
    }
}

std::uint64_t to_u64(const std::string& v, int line, const std::string& field) {
    try {
        std::size_t pos = 0;
        const unsigned long long d = std::stoull(v, &pos);
        if (pos != v.size()) throw std::invalid_argument("trailing characters");
        return d;
    } catch (const std::exception&) {
        throw ConfigError(line, field, "expected an unsigned integer, got '" + v + "'");
    }
}

std::size_t to_size(const std::string& v, int line, const std::string& field) {
    return static_cast<std::size_t>(to_u64(v, line, field));
}

bool to_bool(const std::string& v, int line, const std::string& field) {
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw ConfigError(line, field, "expected true/false, got '" + v + "'");
}

cdouble to_complex(const std::string& v, int line, const std::string& field) {
    std::istringstream is(v);
    double re = 0.0;
    double im = 0.0;
    if (!(is >> re)) throw ConfigError(line, field, "expected 're [im]', got '" + v + "'");
    if (!(is >> im)) im = 0.0;
    std::string rest;
    if (is.clear(), is >> rest)
        throw ConfigError(line, field, "trailing characters in '" + v + "'");
    return {re, im};
}

std::vector<double> to_list(const std::string& v, int line, const std::string& field) {
    std::vector<double> out;
    for (const auto& item : split(v, ','))
        if (!item.empty()) out.push_back(to_double(item, line, field));
    if (out.empty()) throw ConfigError(line, field, "expected a list of numbers");
    return out;
}

std::vector<cdouble> to_clist(const std::string& v, int line, const std::string& field) {
    std::vector<cdouble> out;
    for (const auto& item : split(v, ','))
        if (!item.empty()) out.push_back(to_complex(item, line, field));
    if (out.empty()) throw ConfigError(line, field, "expected a list of complex values");
    return out;
}

std::vector<double> real_poly(const std::string& v, int line, const std::string& field) {
    std::vector<double> out;
    for (const auto& item : split(v, ','))
        if (!item.empty()) out.push_back(to_double(item, line, field));
    return out;
}

const char* experiment_name(ExperimentKind k) {
    switch (k) {
    case ExperimentKind::NmseVsTime: return "nmse_vs_time";
    case ExperimentKind::MuSweep: return "mu_sweep";
    case ExperimentKind::BlocklenSweep: return "blocklen_sweep";
    case ExperimentKind::SnrSweep: return "snr_sweep";
    case ExperimentKind::DegradationCurve: return "degradation_curve";
    case ExperimentKind::WarmupCheck: return "warmup_check";
    }
    return "?";
}

const char* mode_name(DpdMode m) {
    switch (m) {
    case DpdMode::Reactive: return "reactive";
    case DpdMode::Proactive: return "proactive";
    case DpdMode::Frozen: return "frozen";
    }
    return "?";
}

const char* algorithm_name(UpdateAlgorithm a) {
    switch (a) {
    case UpdateAlgorithm::Ila: return "ila";
    case UpdateAlgorithm::Robust: return "robust";
    case UpdateAlgorithm::ProactiveStatic: return "proactive_static";
    }
    return "?";
}

const char* impairment_name(ImpairmentKind k) {
    switch (k) {
    case ImpairmentKind::None: return "none";
    case ImpairmentKind::AwgnSnr: return "awgn";
    case ImpairmentKind::Quantizer: return "quantizer";
    }
    return "?";
}

void assign_key(ExperimentConfig& cfg, const std::string& section, const std::string& key,
                const std::string& value, int line) {
    const std::string field = section + "." + key;
    if (section == "experiment") {
        if (key == "kind") {
            if (value == "nmse_vs_time") cfg.experiment = ExperimentKind::NmseVsTime;
            else if (value == "mu_sweep") cfg.experiment = ExperimentKind::MuSweep;
            else if (value == "blocklen_sweep") cfg.experiment = ExperimentKind::BlocklenSweep;
            else if (value == "snr_sweep") cfg.experiment = ExperimentKind::SnrSweep;
            else if (value == "degradation_curve")
                cfg.experiment = ExperimentKind::DegradationCurve;
            else if (value == "warmup_check") cfg.experiment = ExperimentKind::WarmupCheck;
            else throw ConfigError(line, field, "unknown experiment kind '" + value + "'");
        } else if (key == "mode") {
            if (value == "reactive") cfg.mode = DpdMode::Reactive;
            else if (value == "proactive") cfg.mode = DpdMode::Proactive;
            else if (value == "frozen") cfg.mode = DpdMode::Frozen;
            else throw ConfigError(line, field, "unknown mode '" + value + "'");
        } else if (key == "init") {
            if (value == "cold") cfg.init = InitMode::Cold;
            else if (value == "pretrained") cfg.init = InitMode::Pretrained;
            else throw ConfigError(line, field, "unknown init mode '" + value + "'");
        } else if (key == "sweep_values") cfg.sweep_values = to_list(value, line, field);
        else if (key == "output_dir") cfg.output_dir = value;
        else if (key == "seed") cfg.seed = to_u64(value, line, field);
        else if (key == "save_theta") cfg.save_theta = to_bool(value, line, field);
        else if (key == "jobs")
            cfg.jobs = static_cast<unsigned>(to_u64(value, line, field));
        else if (key == "timestamp") cfg.timestamp = to_bool(value, line, field);
        else if (key == "robust_mu") cfg.robust_mu = to_double(value, line, field);
        else if (key == "pretrain_max_samples")
            cfg.pretrain_max_samples = to_size(value, line, field);
        else throw ConfigError(line, field, "unknown key");
    } else if (section == "signal") {
        if (key == "kind") {
            if (value == "pulsed_noise") cfg.signal.kind = SignalKind::PulsedNoise;
            else if (value == "ofdm") cfg.signal.kind = SignalKind::OfdmSurrogate;
            else throw ConfigError(line, field, "unknown signal kind '" + value + "'");
        } else if (key == "sample_rate_hz") {
            cfg.signal.pulsed.sample_rate_hz = to_double(value, line, field);
            cfg.signal.ofdm_sample_rate_hz = cfg.signal.pulsed.sample_rate_hz;
        } else if (key == "noise_bandwidth_hz")
            cfg.signal.pulsed.noise_bandwidth_hz = to_double(value, line, field);
        else if (key == "subframe_duration_s")
            cfg.signal.pulsed.subframe_duration_s = to_double(value, line, field);
        else if (key == "num_subframes")
            cfg.signal.pulsed.num_subframes = to_size(value, line, field);
        else if (key == "power_step_db")
            cfg.signal.pulsed.power_step_db = to_double(value, line, field);
        else if (key == "pattern") {
            std::vector<SubframeLevel> pat;
            for (char c : value) {
                if (c == 'H' || c == 'h') pat.push_back(SubframeLevel::High);
                else if (c == 'L' || c == 'l') pat.push_back(SubframeLevel::Low);
                else if (!std::isspace(static_cast<unsigned char>(c)))
                    throw ConfigError(line, field, "pattern must use only H and L");
            }
            cfg.signal.pulsed.pattern = std::move(pat);
        } else if (key == "seed")
            cfg.signal.pulsed.seed = to_u64(value, line, field);
        else if (key == "drive_rms") cfg.signal.drive_rms = to_double(value, line, field);
        else if (key == "ofdm_bandwidth_hz")
            cfg.signal.ofdm_bandwidth_hz = to_double(value, line, field);
        else if (key == "ofdm_num_symbols")
            cfg.signal.ofdm_num_symbols = to_size(value, line, field);
        else throw ConfigError(line, field, "unknown key");
    } else if (section == "model") {
        if (key == "kind") {
            if (value == "mp") cfg.model.kind = ModelKind::MemoryPolynomial;
            else if (value == "gmp") cfg.model.kind = ModelKind::GeneralizedMemoryPolynomial;
            else throw ConfigError(line, field, "unknown model kind '" + value + "'");
        } else if (key == "nonlinearity_order")
            cfg.model.nonlinearity_order = to_size(value, line, field);
        else if (key == "memory_depth") cfg.model.memory_depth = to_size(value, line, field);
        else if (key == "cross_terms") {
            std::vector<GmpTerm> terms;
            for (const auto& item : split(value, ',')) {
                if (item.empty()) continue;
                GmpTerm t;
                long shift = 0;
                if (std::sscanf(item.c_str(), "%zu:%zu:%ld", &t.order, &t.memory, &shift) != 3)
                    throw ConfigError(line, field,
                                      "expected order:memory:shift, got '" + item + "'");
                t.shift = shift;
                terms.push_back(t);
            }
            cfg.model.cross_terms = std::move(terms);
        } else if (key == "state_cutoff_hz")
            cfg.state_cutoff_hz = to_double(value, line, field);
        else throw ConfigError(line, field, "unknown key");
    } else if (section == "update") {
        if (key == "algorithm") {
            if (value == "ila") cfg.update.algorithm = UpdateAlgorithm::Ila;
            else if (value == "robust") cfg.update.algorithm = UpdateAlgorithm::Robust;
            else if (value == "proactive_static")
                cfg.update.algorithm = UpdateAlgorithm::ProactiveStatic;
            else throw ConfigError(line, field, "unknown algorithm '" + value + "'");
        } else if (key == "mu") cfg.update.mu = to_double(value, line, field);
        else if (key == "regularization")
            cfg.update.regularization = to_double(value, line, field);
        else throw ConfigError(line, field, "unknown key");
    } else if (section == "pa") {
        if (key == "small_signal_gain")
            cfg.pa.small_signal_gain = to_complex(value, line, field);
        else if (key == "am_am_poly") cfg.pa.am_am_poly = real_poly(value, line, field);
        else if (key == "am_pm_strength") cfg.pa.am_pm_strength = to_double(value, line, field);
        else if (key == "memory_taps") cfg.pa.memory_taps = to_clist(value, line, field);
        else if (key == "thermal_alpha") cfg.pa.thermal_alpha = to_double(value, line, field);
        else if (key == "thermal_gain_sensitivity")
            cfg.pa.thermal_gain_sensitivity = to_complex(value, line, field);
        else if (key == "thermal_compression_sensitivity")
            cfg.pa.thermal_compression_sensitivity = to_double(value, line, field);
        else if (key == "output_noise_floor_dbc")
            cfg.pa.output_noise_floor_dbc = to_double(value, line, field);
        else if (key == "rated_input_max") cfg.pa.rated_input_max = to_double(value, line, field);
        else if (key == "noise_seed") cfg.pa.noise_seed = to_u64(value, line, field);
        else throw ConfigError(line, field, "unknown key");
    } else if (section == "schedule") {
        if (key == "window_len") cfg.schedule.window_len = to_size(value, line, field);
        else if (key == "step_len") cfg.schedule.step_len = to_size(value, line, field);
        else if (key == "init_len") cfg.schedule.init_len = to_size(value, line, field);
        else throw ConfigError(line, field, "unknown key");
    } else if (section == "impairment") {
        if (key == "kind") {
            if (value == "none") cfg.impairment.kind = ImpairmentKind::None;
            else if (value == "awgn") cfg.impairment.kind = ImpairmentKind::AwgnSnr;
            else if (value == "quantizer") cfg.impairment.kind = ImpairmentKind::Quantizer;
            else throw ConfigError(line, field, "unknown impairment kind '" + value + "'");
        } else if (key == "snr_db") cfg.impairment.snr_db = to_double(value, line, field);
        else if (key == "quantizer_bits")
            cfg.impairment.quantizer_bits = static_cast<unsigned>(to_u64(value, line, field));
        else if (key == "seed") cfg.impairment.seed = to_u64(value, line, field);
        else throw ConfigError(line, field, "unknown key");
    } else {
        throw ConfigError(line, section, "unknown section");
    }
}

} // namespace

ExperimentConfig parse_config_text(const std::string& text) {
    ExperimentConfig cfg;
    std::istringstream is(text);
    std::string raw;
    std::string section;
    int line = 0;
    while (std::getline(is, raw)) {
        ++line;
        const std::size_t cut = raw.find_first_of("#;");
        std::string s = trim(cut == std::string::npos ? raw : raw.substr(0, cut));
        if (s.empty()) continue;
        if (s.front() == '[') {
            if (s.back() != ']')
                throw ConfigError(line, "", "malformed section header '" + s + "'");
            section = trim(s.substr(1, s.size() - 2));
            if (section.empty()) throw ConfigError(line, "", "empty section name");
            continue;
        }
        const std::size_t eq = s.find('=');
        if (eq == std::string::npos)
            throw ConfigError(line, section, "expected key = value, got '" + s + "'");
        const std::string key = trim(s.substr(0, eq));
        const std::string value = trim(s.substr(eq + 1));
        if (key.empty()) throw ConfigError(line, section, "empty key");
        if (section.empty())
            throw ConfigError(line, key, "key outside any [section]");
        assign_key(cfg, section, key, value, line);
    }
    return cfg;
}

ExperimentConfig parse_config_file(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("cannot open config file " + path);
    std::ostringstream ss;
    ss << is.rdbuf();
    return parse_config_text(ss.str());
}

std::string format_config(const ExperimentConfig& cfg) {
    std::ostringstream os;
    char buf[64];
    auto num = [&](double d) {
        std::snprintf(buf, sizeof(buf), "%.17g", d);
        return std::string(buf);
    };
    auto cnum = [&](cdouble c) {
        std::snprintf(buf, sizeof(buf), "%.17g %.17g", c.real(), c.imag());
        return std::string(buf);
    };

    os << "[experiment]\n";
    os << "kind = " << experiment_name(cfg.experiment) << "\n";
    os << "mode = " << mode_name(cfg.mode) << "\n";
    os << "init = " << (cfg.init == InitMode::Cold ? "cold" : "pretrained") << "\n";
    if (!cfg.sweep_values.empty()) {
        os << "sweep_values = ";
        for (std::size_t i = 0; i < cfg.sweep_values.size(); ++i)
            os << (i ? ", " : "") << num(cfg.sweep_values[i]);
        os << "\n";
    }
    os << "output_dir = " << cfg.output_dir << "\n";
    os << "seed = " << cfg.seed << "\n";
    os << "save_theta = " << (cfg.save_theta ? "true" : "false") << "\n";
    os << "jobs = " << cfg.jobs << "\n";
    os << "timestamp = " << (cfg.timestamp ? "true" : "false") << "\n";
    os << "robust_mu = " << num(cfg.robust_mu) << "\n";
    os << "pretrain_max_samples = " << cfg.pretrain_max_samples << "\n";

    os << "\n[signal]\n";
    os << "kind = "
       << (cfg.signal.kind == SignalKind::PulsedNoise ? "pulsed_noise" : "ofdm") << "\n";
    os << "sample_rate_hz = " << num(cfg.signal.pulsed.sample_rate_hz) << "\n";
    os << "noise_bandwidth_hz = " << num(cfg.signal.pulsed.noise_bandwidth_hz) << "\n";
    os << "subframe_duration_s = " << num(cfg.signal.pulsed.subframe_duration_s) << "\n";
    os << "num_subframes = " << cfg.signal.pulsed.num_subframes << "\n";
    os << "power_step_db = " << num(cfg.signal.pulsed.power_step_db) << "\n";
    os << "pattern = ";
    for (auto lv : cfg.signal.pulsed.pattern) os << (lv == SubframeLevel::High ? 'H' : 'L');
    os << "\n";
    os << "seed = " << cfg.signal.pulsed.seed << "\n";
    os << "drive_rms = " << num(cfg.signal.drive_rms) << "\n";
    os << "ofdm_bandwidth_hz = " << num(cfg.signal.ofdm_bandwidth_hz) << "\n";
    os << "ofdm_num_symbols = " << cfg.signal.ofdm_num_symbols << "\n";

    os << "\n[model]\n";
    os << "kind = " << (cfg.model.kind == ModelKind::MemoryPolynomial ? "mp" : "gmp") << "\n";
    os << "nonlinearity_order = " << cfg.model.nonlinearity_order << "\n";
    os << "memory_depth = " << cfg.model.memory_depth << "\n";
    if (!cfg.model.cross_terms.empty()) {
        os << "cross_terms = ";
        for (std::size_t i = 0; i < cfg.model.cross_terms.size(); ++i) {
            const auto& t = cfg.model.cross_terms[i];
            os << (i ? ", " : "") << t.order << ":" << t.memory << ":" << t.shift;
        }
        os << "\n";
    }
    os << "state_cutoff_hz = " << num(cfg.state_cutoff_hz) << "\n";

    os << "\n[update]\n";
    os << "algorithm = " << algorithm_name(cfg.update.algorithm) << "\n";
    os << "mu = " << num(cfg.update.mu) << "\n";
    os << "regularization = " << num(cfg.update.regularization) << "\n";

    os << "\n[pa]\n";
    os << "small_signal_gain = " << cnum(cfg.pa.small_signal_gain) << "\n";
    os << "am_am_poly = ";
    for (std::size_t i = 0; i < cfg.pa.am_am_poly.size(); ++i)
        os << (i ? ", " : "") << num(cfg.pa.am_am_poly[i]);
    os << "\n";
    os << "am_pm_strength = " << num(cfg.pa.am_pm_strength) << "\n";
    os << "memory_taps = ";
    for (std::size_t i = 0; i < cfg.pa.memory_taps.size(); ++i)
        os << (i ? ", " : "") << cnum(cfg.pa.memory_taps[i]);
    os << "\n";
    os << "thermal_alpha = " << num(cfg.pa.thermal_alpha) << "\n";
    os << "thermal_gain_sensitivity = " << cnum(cfg.pa.thermal_gain_sensitivity) << "\n";
    os << "thermal_compression_sensitivity = " << num(cfg.pa.thermal_compression_sensitivity)
       << "\n";
    os << "output_noise_floor_dbc = " << num(cfg.pa.output_noise_floor_dbc) << "\n";
    os << "rated_input_max = " << num(cfg.pa.rated_input_max) << "\n";
    os << "noise_seed = " << cfg.pa.noise_seed << "\n";

    os << "\n[schedule]\n";
    os << "window_len = " << cfg.schedule.window_len << "\n";
    os << "step_len = " << cfg.schedule.step_len << "\n";
    os << "init_len = " << cfg.schedule.init_len << "\n";

    os << "\n[impairment]\n";
    os << "kind = " << impairment_name(cfg.impairment.kind) << "\n";
    os << "snr_db = " << num(cfg.impairment.snr_db) << "\n";
    os << "quantizer_bits = " << cfg.impairment.quantizer_bits << "\n";
    os << "seed = " << cfg.impairment.seed << "\n";
    return os.str();
}

namespace {

std::size_t expected_signal_samples(const SignalConfig& sc) {
    if (sc.kind == SignalKind::PulsedNoise) {
        const auto& p = sc.pulsed;
        return static_cast<std::size_t>(std::llround(static_cast<double>(p.num_subframes) *
                                                     p.subframe_duration_s * p.sample_rate_hz));
    }
    return sc.ofdm_num_symbols * (kOfdmFftSize + kOfdmCpLen);
}

bool is_sweep(ExperimentKind k) { return k != ExperimentKind::NmseVsTime; }

} // namespace

std::vector<Diagnostic> validate_config(const ExperimentConfig& cfg) {
    std::vector<Diagnostic> out;

    if (cfg.signal.kind == SignalKind::PulsedNoise) {
        const auto sp = cfg.signal.pulsed.problems();
        out.insert(out.end(), sp.begin(), sp.end());
    } else {
        if (!(cfg.signal.ofdm_sample_rate_hz > 0.0))
            out.push_back({"signal.sample_rate_hz", "must be positive"});
        if (cfg.signal.ofdm_num_symbols == 0)
            out.push_back({"signal.ofdm_num_symbols", "must be at least 1"});
        const double spacing =
            cfg.signal.ofdm_sample_rate_hz / static_cast<double>(kOfdmFftSize);
        const double half = cfg.signal.ofdm_bandwidth_hz / (2.0 * spacing);
        if (!(half >= 1.0) || half > static_cast<double>(kOfdmFftSize / 2 - 1))
            out.push_back({"signal.ofdm_bandwidth_hz", "occupied bandwidth out of range"});
    }
    if (!(cfg.signal.drive_rms > 0.0))
        out.push_back({"signal.drive_rms", "must be positive"});

    const auto mp = cfg.model.problems();
    out.insert(out.end(), mp.begin(), mp.end());
    const auto pp = cfg.pa.problems();
    out.insert(out.end(), pp.begin(), pp.end());

    if (!(cfg.update.mu >= 0.0 && cfg.update.mu <= 1.0))
        out.push_back({"update.mu", "must lie in [0, 1]"});
    if (!(cfg.robust_mu >= 0.0 && cfg.robust_mu <= 1.0))
        out.push_back({"experiment.robust_mu", "must lie in [0, 1]"});
    if (!(cfg.update.regularization >= 0.0))
        out.push_back({"update.regularization", "must be nonnegative"});
    if (cfg.update.algorithm == UpdateAlgorithm::ProactiveStatic &&
        cfg.mode == DpdMode::Reactive)
        out.push_back({"update.algorithm",
                       "proactive_static is a one-shot fit, not a per-step update"});

    if (!std::isfinite(cfg.impairment.snr_db))
        out.push_back({"impairment.snr_db", "must be finite"});
    if (cfg.impairment.quantizer_bits < 1 || cfg.impairment.quantizer_bits > 30)
        out.push_back({"impairment.quantizer_bits", "must lie in [1, 30]"});

    const std::size_t sig_len = expected_signal_samples(cfg.signal);
    const std::size_t s_len = cfg.schedule.step_len;
    if (s_len == 0) {
        out.push_back({"schedule.step_len", "must be positive"});
    } else {
        const std::size_t usable = (sig_len / s_len) * s_len;
        if (usable == 0)
            out.push_back({"signal", "shorter than one analysis block"});
        else {
            const auto sd = cfg.schedule.problems(cfg.schedule.init_len + usable);
            out.insert(out.end(), sd.begin(), sd.end());
        }
    }

    if (cfg.jobs < 1) out.push_back({"experiment.jobs", "must be at least 1"});
    if (cfg.pretrain_max_samples == 0)
        out.push_back({"experiment.pretrain_max_samples", "must be at least 1"});
    if (!(cfg.state_cutoff_hz > 0.0))
        out.push_back({"model.state_cutoff_hz", "must be positive"});

    if (is_sweep(cfg.experiment) && cfg.sweep_values.empty())
        out.push_back({"experiment.sweep_values", "required for sweep experiments"});
    switch (cfg.experiment) {
    case ExperimentKind::MuSweep:
        for (double v : cfg.sweep_values)
            if (!(v >= 0.0 && v <= 1.0)) {
                out.push_back({"experiment.sweep_values", "mu values must lie in [0, 1]"});
                break;
            }
        break;
    case ExperimentKind::BlocklenSweep:
        for (double v : cfg.sweep_values)
            if (!(v >= 1.0) || v != std::floor(v) ||
                static_cast<std::size_t>(v) > cfg.schedule.window_len) {
                out.push_back({"experiment.sweep_values",
                               "block lengths must be positive integers <= window_len"});
                break;
            }
        break;
    case ExperimentKind::SnrSweep:
        if (cfg.impairment.kind == ImpairmentKind::Quantizer) {
            for (double v : cfg.sweep_values)
                if (!(v >= 1.0 && v <= 30.0) || v != std::floor(v)) {
                    out.push_back(
                        {"experiment.sweep_values", "bit widths must be integers in [1, 30]"});
                    break;
                }
        } else {
            for (double v : cfg.sweep_values)
                if (!std::isfinite(v)) {
                    out.push_back({"experiment.sweep_values", "SNR values must be finite"});
                    break;
                }
        }
        break;
    case ExperimentKind::DegradationCurve:
        for (double v : cfg.sweep_values)
            if (!std::isfinite(v)) {
                out.push_back({"experiment.sweep_values", "SNR values must be finite"});
                break;
            }
        break;
    case ExperimentKind::WarmupCheck:
        for (double v : cfg.sweep_values)
            if (!(v >= 0.0) || v != std::floor(v)) {
                out.push_back({"experiment.sweep_values",
                               "overlap lengths must be nonnegative integers"});
                break;
            }
        break;
    case ExperimentKind::NmseVsTime:
        break;
    }
    return out;
}

namespace {

struct PreparedSignals {
    ComplexSignal u;
    ComplexSignal init;
};

PreparedSignals prepare_signals(const ExperimentConfig& cfg, std::size_t init_needed) {
    PreparedSignals out;
    const auto& sc = cfg.signal;
    if (sc.kind == SignalKind::PulsedNoise) {
        out.u = gen_pulsed_noise(sc.pulsed);
        PulsedNoiseConfig ic = sc.pulsed;
        ic.seed = mix_seed(sc.pulsed.seed, 0x696e6974ull);
        const std::size_t one_pass = out.u.samples.size();
        const std::size_t reps = init_needed == 0 ? 1 : (init_needed + one_pass - 1) / one_pass;
        ic.num_subframes = sc.pulsed.num_subframes * reps;
        ic.pattern.clear();
        for (std::size_t r = 0; r < reps; ++r)
            ic.pattern.insert(ic.pattern.end(), sc.pulsed.pattern.begin(),
                              sc.pulsed.pattern.end());
        out.init = gen_pulsed_noise(ic);
    } else {
        out.u = gen_ofdm_surrogate(sc.ofdm_sample_rate_hz, sc.ofdm_bandwidth_hz,
                                   sc.ofdm_num_symbols, sc.pulsed.seed);
        const std::size_t sym = kOfdmFftSize + kOfdmCpLen;
        const std::size_t nsym = init_needed == 0 ? 1 : (init_needed + sym - 1) / sym;
        out.init = gen_ofdm_surrogate(sc.ofdm_sample_rate_hz, sc.ofdm_bandwidth_hz, nsym,
                                      mix_seed(sc.pulsed.seed, 0x696e6974ull));
    }
    if (init_needed > 0 && out.init.samples.size() > init_needed)
        out.init.samples.erase(out.init.samples.begin(),
                               out.init.samples.end() -
                                   static_cast<std::ptrdiff_t>(init_needed));
    for (auto& s : out.u.samples) s *= sc.drive_rms;
    for (auto& s : out.init.samples) s *= sc.drive_rms;
    return out;
}

ComplexSignal trim_to_blocks(const ComplexSignal& u, std::size_t step_len) {
    const std::size_t usable = (u.samples.size() / step_len) * step_len;
    ComplexSignal out;
    out.sample_rate_hz = u.sample_rate_hz;
    out.samples.assign(u.samples.begin(), u.samples.begin() + static_cast<std::ptrdiff_t>(usable));
    return out;
}

void run_parallel(std::size_t n, unsigned jobs, const std::function<void(std::size_t)>& fn) {
    if (jobs <= 1 || n <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    const unsigned nthreads = static_cast<unsigned>(std::min<std::size_t>(jobs, n));
    std::vector<std::thread> pool;
    pool.reserve(nthreads);
    for (unsigned t = 0; t < nthreads; ++t)
        pool.emplace_back([&] {
            for (std::size_t i = next.fetch_add(1); i < n; i = next.fetch_add(1)) fn(i);
        });
    for (auto& th : pool) th.join();
}

void write_csv(const fs::path& path, const std::string& header,
               const std::vector<std::string>& rows, bool timestamp) {
    std::FILE* f = std::fopen(path.string().c_str(), "w");
    if (!f) throw std::runtime_error("cannot open " + path.string());
    if (timestamp) {
        const std::time_t now = std::time(nullptr);
        char buf[64];
        std::tm tmv{};
        gmtime_r(&now, &tmv);
        std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tmv);
        std::fprintf(f, "# generated %s\n", buf);
    }
    std::fprintf(f, "%s\n", header.c_str());
    for (const auto& r : rows) std::fprintf(f, "%s\n", r.c_str());
    std::fclose(f);
}

std::string fmt(const char* format, ...) {
    char buf[256];
    va_list args;
    va_start(args, format);
    std::vsnprintf(buf, sizeof(buf), format, args);
    va_end(args);
    return buf;
}

struct RunContext {
    const ExperimentConfig& cfg;
    const PreparedSignals& sig;
    fs::path root;
};

AdaptationTrace one_run(const RunContext& ctx, const fs::path& dir, const Schedule& sch,
                        const UpdateConfig& upd, const FeedbackImpairment& imp, DpdMode mode,
                        InitMode init) {
    fs::create_directories(dir);
    RunOptions opts;
    opts.init = init;
    opts.state_cutoff_hz = ctx.cfg.state_cutoff_hz;
    opts.pretrain_max_samples = ctx.cfg.pretrain_max_samples;
    if (ctx.cfg.save_theta) {
        opts.record_theta = true;
        opts.theta_dir = (dir / "theta").string();
        fs::create_directories(opts.theta_dir);
    }
    const ComplexSignal u = trim_to_blocks(ctx.sig.u, sch.step_len);
    auto trace = run_adaptation(u, ctx.sig.init, ctx.cfg.model, upd, ctx.cfg.pa, sch, imp,
                                mode, opts);
    write_trace_csv(trace, (dir / "trace.csv").string(), ctx.cfg.timestamp);
    save_params_csv(trace.final_params, (dir / "params_final.csv").string());
    return trace;
}

double mean_feedback_snr(const AdaptationTrace& tr) {
    double acc = 0.0;
    std::size_t n = 0;
    for (const auto& st : tr.steps)
        if (std::isfinite(st.feedback_snr_db)) {
            acc += st.feedback_snr_db;
            ++n;
        }
    return n > 0 ? acc / static_cast<double>(n) : std::numeric_limits<double>::infinity();
}

} // namespace

int run_experiment(const ExperimentConfig& cfg) {
    const auto diags = validate_config(cfg);
    if (!diags.empty()) {
        for (const auto& d : diags)
            std::fprintf(stderr, "config error: %s: %s\n", d.field.c_str(), d.message.c_str());
        return 2;
    }

    const fs::path root(cfg.output_dir);
    fs::create_directories(root);
    {
        std::ofstream echo(root / "config_echo.ini");
        echo << format_config(cfg);
    }

    std::size_t init_needed = cfg.schedule.init_len;
    if (cfg.experiment == ExperimentKind::WarmupCheck)
        for (double v : cfg.sweep_values)
            init_needed = std::max(init_needed, static_cast<std::size_t>(v));
    const PreparedSignals sig = prepare_signals(cfg, init_needed);
    const RunContext ctx{cfg, sig, root};

    std::vector<std::string> errors;
    std::mutex errors_mu;
    auto guard = [&](std::size_t idx, const std::function<void()>& body) {
        try {
            body();
        } catch (const std::exception& e) {
            std::lock_guard<std::mutex> lk(errors_mu);
            errors.push_back(fmt("run %zu: %s", idx, e.what()));
        }
    };

    switch (cfg.experiment) {
    case ExperimentKind::NmseVsTime: {
        guard(0, [&] {
            FeedbackImpairment imp = cfg.impairment;
            imp.seed = cfg.seed;
            one_run(ctx, root, cfg.schedule, cfg.update, imp, cfg.mode, cfg.init);
        });
        break;
    }
    case ExperimentKind::MuSweep: {
        const std::size_t n = cfg.sweep_values.size();
        std::vector<std::string> rows(n);
        run_parallel(n, cfg.jobs, [&](std::size_t i) {
            guard(i, [&] {
                UpdateConfig upd = cfg.update;
                upd.mu = cfg.sweep_values[i];
                FeedbackImpairment imp = cfg.impairment;
                imp.seed = cfg.seed + i;
                const auto tr = one_run(ctx, root / fmt("run_%03zu", i), cfg.schedule, upd,
                                        imp, DpdMode::Reactive, cfg.init);
                rows[i] = fmt("%.17g,%.17g,%.17g", upd.mu, convergence_time(tr),
                              steady_state_nmse_db(tr));
            });
        });
        write_csv(root / "summary.csv", "mu,convergence_time_s,steady_nmse_db", rows,
                  cfg.timestamp);
        break;
    }
    case ExperimentKind::BlocklenSweep: {
        const std::size_t n = cfg.sweep_values.size();
        std::vector<std::string> rows(2 * n);
        run_parallel(2 * n, cfg.jobs, [&](std::size_t j) {
            guard(j, [&] {
                const std::size_t i = j / 2;
                const bool proactive = (j % 2) != 0;
                Schedule sch = cfg.schedule;
                sch.step_len = static_cast<std::size_t>(cfg.sweep_values[i]);
                FeedbackImpairment imp = cfg.impairment;
                imp.seed = cfg.seed + j;
                const char* tag = proactive ? "proactive" : algorithm_name(cfg.update.algorithm);
                const auto tr =
                    one_run(ctx, root / fmt("run_%03zu_%s", i, tag), sch, cfg.update, imp,
                            proactive ? DpdMode::Proactive : DpdMode::Reactive,
                            proactive ? InitMode::Pretrained : cfg.init);
                rows[j] = fmt("%zu,%s,%.17g,%.17g", sch.step_len, tag, convergence_time(tr),
                              steady_state_nmse_db(tr));
            });
        });
        write_csv(root / "summary.csv", "block_len,algorithm,convergence_time_s,steady_nmse_db",
                  rows, cfg.timestamp);
        break;
    }
    case ExperimentKind::SnrSweep: {
        const bool quant = cfg.impairment.kind == ImpairmentKind::Quantizer;
        const std::size_t n = cfg.sweep_values.size();
        std::vector<std::string> rows(n);
        run_parallel(n, cfg.jobs, [&](std::size_t i) {
            guard(i, [&] {
                FeedbackImpairment imp = cfg.impairment;
                imp.seed = cfg.seed + i;
                if (quant) {
                    imp.kind = ImpairmentKind::Quantizer;
                    imp.quantizer_bits = static_cast<unsigned>(cfg.sweep_values[i]);
                } else {
                    imp.kind = ImpairmentKind::AwgnSnr;
                    imp.snr_db = cfg.sweep_values[i];
                }
                const auto tr = one_run(ctx, root / fmt("run_%03zu", i), cfg.schedule,
                                        cfg.update, imp, cfg.mode, cfg.init);
                rows[i] = fmt("%.17g,%.17g,%.17g,%.17g", cfg.sweep_values[i],
                              mean_feedback_snr(tr), steady_state_nmse_db(tr),
                              convergence_time(tr));
            });
        });
        write_csv(root / "summary.csv",
                  std::string(quant ? "bits" : "snr_db") +
                      ",measured_feedback_snr_db,steady_nmse_db,convergence_time_s",
                  rows, cfg.timestamp);
        break;
    }
    case ExperimentKind::DegradationCurve: {
        const std::size_t n = cfg.sweep_values.size();
        // Per algorithm: one clean baseline plus one run per SNR point.
        std::vector<double> clean_steady(2, 0.0);
        std::vector<std::vector<double>> noisy_steady(2, std::vector<double>(n, 0.0));
        auto upd_for = [&](std::size_t a) {
            UpdateConfig u = cfg.update;
            u.algorithm = a == 0 ? UpdateAlgorithm::Ila : UpdateAlgorithm::Robust;
            u.mu = a == 0 ? cfg.update.mu : cfg.robust_mu;
            return u;
        };
        run_parallel(2 * (n + 1), cfg.jobs, [&](std::size_t j) {
            guard(j, [&] {
                const std::size_t a = j / (n + 1);
                const std::size_t i = j % (n + 1);
                const char* tag = a == 0 ? "ila" : "robust";
                if (i == 0) {
                    FeedbackImpairment imp;
                    imp.kind = ImpairmentKind::None;
                    const auto tr = one_run(ctx, root / fmt("run_%s_clean", tag), cfg.schedule,
                                            upd_for(a), imp, DpdMode::Reactive, cfg.init);
                    clean_steady[a] = steady_state_nmse_db(tr);
                } else {
                    FeedbackImpairment imp = cfg.impairment;
                    imp.kind = ImpairmentKind::AwgnSnr;
                    imp.snr_db = cfg.sweep_values[i - 1];
                    imp.seed = cfg.seed + j;
                    const auto tr = one_run(ctx, root / fmt("run_%s_%03zu", tag, i - 1),
                                            cfg.schedule, upd_for(a), imp, DpdMode::Reactive,
                                            cfg.init);
                    noisy_steady[a][i - 1] = steady_state_nmse_db(tr);
                }
            });
        });
        std::vector<std::string> rows;
        rows.reserve(2 * n);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t a = 0; a < 2; ++a)
                rows.push_back(fmt("%.17g,%s,%.17g", cfg.sweep_values[i],
                                   a == 0 ? "ila" : "robust",
                                   noisy_steady[a][i] - clean_steady[a]));
        write_csv(root / "summary.csv", "snr_db,algorithm,degradation_db", rows, cfg.timestamp);
        break;
    }
    case ExperimentKind::WarmupCheck: {
        const std::size_t n = cfg.sweep_values.size();
        std::vector<std::string> rows(n);
        // One frozen predistorter shared by all overlap settings.
        ParameterSet params;
        try {
            RunOptions opts;
            opts.state_cutoff_hz = cfg.state_cutoff_hz;
            opts.pretrain_max_samples = cfg.pretrain_max_samples;
            params = pretrain_parameters(sig.u, cfg.model, cfg.pa, DpdMode::Frozen, opts,
                                         cfg.update.regularization);
        } catch (const std::exception& e) {
            std::fprintf(stderr, "error: pretraining failed: %s\n", e.what());
            return 1;
        }
        run_parallel(n, cfg.jobs, [&](std::size_t i) {
            guard(i, [&] {
                const auto overlap = static_cast<std::size_t>(cfg.sweep_values[i]);
                Schedule sch;
                sch.step_len = cfg.schedule.step_len;
                sch.window_len = sch.step_len + overlap;
                sch.init_len = overlap;
                const ComplexSignal u = trim_to_blocks(sig.u, sch.step_len);
                ComplexSignal init = sig.init;
                if (init.samples.size() > overlap)
                    init.samples.erase(init.samples.begin(),
                                       init.samples.end() -
                                           static_cast<std::ptrdiff_t>(overlap));
                const auto rep = warmup_equivalence(u, init, params, cfg.pa, sch);
                rows[i] = fmt("%zu,%.17g", overlap, rep.worst_nmse_db);
            });
        });
        write_csv(root / "summary.csv", "overlap_len,equivalence_nmse_db", rows, cfg.timestamp);
        break;
    }
    }

    if (!errors.empty()) {
        for (const auto& e : errors) std::fprintf(stderr, "error: %s\n", e.c_str());
        return 1;
    }
    return 0;
}

} // namespace dpdlab
