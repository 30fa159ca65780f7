// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "dpdlab/common.hpp"
#include "dpdlab/testbed.hpp"

namespace dpdlab {

enum class ExperimentKind {
    NmseVsTime,
    MuSweep,
    BlocklenSweep,
    SnrSweep,
    DegradationCurve,
    WarmupCheck,
};

enum class SignalKind { PulsedNoise, OfdmSurrogate };

struct SignalConfig {
    SignalKind kind = SignalKind::PulsedNoise;
    PulsedNoiseConfig pulsed;
    double ofdm_sample_rate_hz = 30.72e6;
    double ofdm_bandwidth_hz = 18.0e6;
    std::size_t ofdm_num_symbols = 560;
    /// Input RMS presented to the predistorter; sets where on the PA curve
    /// the experiment operates.
    double drive_rms = 0.25;
};

struct ExperimentConfig {
    ExperimentKind experiment = ExperimentKind::NmseVsTime;
    SignalConfig signal;
    ModelStructure model;
    DpdMode mode = DpdMode::Reactive;
    InitMode init = InitMode::Pretrained;
    UpdateConfig update;
    /// Forgetting factor for the robust runs of degradation_curve; the ILA
    /// runs use update.mu.
    double robust_mu = 0.8;
    PaConfig pa;
    Schedule schedule;
    FeedbackImpairment impairment;
    std::vector<double> sweep_values;
    std::string output_dir = "out";
    std::uint64_t seed = 1;
    bool save_theta = false;
    unsigned jobs = 1;
    bool timestamp = true;
    double state_cutoff_hz = 50.0e3;
    std::size_t pretrain_max_samples = 131072;
};

struct ConfigError : std::runtime_error {
    int line;
    std::string field;
    ConfigError(int line_, std::string field_, const std::string& what_)
        : std::runtime_error(what_), line(line_), field(std::move(field_)) {}
};

/// Sectioned key/value text ([experiment], [signal], [model], [update], [pa],
/// [schedule], [impairment]); '#' and ';' start comments. Unknown sections or
/// keys and malformed values raise ConfigError carrying the line number.
ExperimentConfig parse_config_text(const std::string& text);
ExperimentConfig parse_config_file(const std::string& path);

/// Empty iff every nested invariant holds; each entry names the offending
/// field and the violated rule.
std::vector<Diagnostic> validate_config(const ExperimentConfig& cfg);

/// Writes the effective configuration in the same format parse_config_text
/// accepts.
std::string format_config(const ExperimentConfig& cfg);

/// Executes the experiment, writing trace/summary CSVs and a config echo
/// under cfg.output_dir. Returns a process exit status.
int run_experiment(const ExperimentConfig& cfg);

} // namespace dpdlab
