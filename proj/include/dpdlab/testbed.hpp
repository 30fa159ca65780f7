// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "dpdlab/common.hpp"
#include "dpdlab/estimation.hpp"
#include "dpdlab/model.hpp"
#include "dpdlab/pa.hpp"
#include "dpdlab/signal.hpp"

namespace dpdlab {

/// Sliding-window schedule over a long capture. Window k covers
/// [k*step, k*step + window_len); its last step_len samples form the
/// analysis block whose update lands before window k+1.
struct Schedule {
    std::size_t window_len = 120000;
    std::size_t step_len = 4096;
    std::size_t init_len = 120000;

    std::vector<Diagnostic> problems(std::size_t total_samples) const;
};

struct WindowPlan {
    std::size_t begin = 0;
    std::size_t end = 0;
    std::size_t analysis_begin = 0;
    std::size_t analysis_end = 0;
};

std::vector<WindowPlan> plan_windows(const Schedule& s, std::size_t total_samples);

enum class ImpairmentKind { None, AwgnSnr, Quantizer };

/// Observation-path degradation applied to the feedback capture only.
struct FeedbackImpairment {
    ImpairmentKind kind = ImpairmentKind::None;
    double snr_db = 60.0;
    unsigned quantizer_bits = 12;
    std::uint64_t seed = 7;
};

std::vector<cdouble> apply_feedback_impairment(const std::vector<cdouble>& y,
                                               const FeedbackImpairment& imp,
                                               std::uint64_t block_index);

/// Idealized resolution-to-SNR map for a full-scale loaded converter.
// 602n/100 keeps the result correctly rounded for every n (6.02 * n picks up
// a second rounding and lands one ulp off 30.1 at n = 5).
inline double bits_to_snr_db(unsigned bits) { return 602.0 * bits / 100.0; }

/// 10 log10(||y - ref||^2 / ||ref||^2), floored at -300 dB.
double nmse_db(const std::vector<cdouble>& ref, const std::vector<cdouble>& y);

/// Least-squares complex scalar a minimizing ||y - a u||.
cdouble block_gain(const std::vector<cdouble>& u, const std::vector<cdouble>& y);

enum class DpdMode { Reactive, Proactive, Frozen };
enum class InitMode { Cold, Pretrained };

struct RunOptions {
    InitMode init = InitMode::Pretrained;
    /// Overrides the init policy when set.
    std::optional<ParameterSet> initial_params;
    double state_cutoff_hz = 50.0e3;
    /// Pretraining regressor row cap; the fit uses the trailing slice.
    std::size_t pretrain_max_samples = 131072;
    bool record_theta = false;
    std::string theta_dir;
};

struct TraceStep {
    std::size_t step = 0;
    double time_s = 0.0;
    double nmse_db = 0.0;
    double feedback_snr_db = std::numeric_limits<double>::infinity();
    std::string theta_file;
};

struct AdaptationTrace {
    std::vector<TraceStep> steps;
    ParameterSet final_params;
};

/// One continuous PA measurement driven by `data`, then a postinverse fit on
/// the trailing options.pretrain_max_samples samples: static coefficients, or
/// the state-aware pair when mode is Proactive.
ParameterSet pretrain_parameters(const ComplexSignal& data, const ModelStructure& model,
                                 const PaConfig& pa, DpdMode mode, const RunOptions& options,
                                 double regularization);

/// Open-loop emulation of a closed adaptation loop. The timeline is
/// init_data's first init_len samples followed by u. Per window: prepend the
/// already-predistorted history, predistort the new block with the current
/// coefficients, run the PA from its cold state, measure NMSE on the clean
/// analysis block, then update from the impaired analysis block.
AdaptationTrace run_adaptation(const ComplexSignal& u, const ComplexSignal& init_data,
                               const ModelStructure& model, const UpdateConfig& update,
                               const PaConfig& pa, const Schedule& schedule,
                               const FeedbackImpairment& impairment, DpdMode mode,
                               const RunOptions& options);

/// Earliest time after which every later step stays within tolerance_db of
/// the settled value (mean of the last tenth of steps). 0 when the whole
/// trace is settled; +inf when it never settles.
double convergence_time(const AdaptationTrace& trace, double tolerance_db = 1.0);

/// Mean NMSE over the last tenth of the trace.
double steady_state_nmse_db(const AdaptationTrace& trace);

/// Settled NMSE of the degraded run minus that of the clean run. Both traces
/// must share a schedule (same step count).
double degradation_db(const AdaptationTrace& degraded, const AdaptationTrace& clean);

/// Worst (largest) nmse_db among steps whose time lies in [t_begin_s, t_end_s).
double worst_nmse_in_interval(const AdaptationTrace& trace, double t_begin_s, double t_end_s);

struct WarmupReport {
    std::vector<double> per_window_nmse_db;
    double worst_nmse_db = -std::numeric_limits<double>::infinity();
};

/// Core validity check of the windowed emulation: with a frozen predistorter
/// and PA noise disabled, compares each analysis block produced by cold-start
/// windowed uploads against one continuous streaming pass.
WarmupReport warmup_equivalence(const ComplexSignal& u, const ComplexSignal& init_data,
                                const ParameterSet& params, const PaConfig& pa,
                                const Schedule& schedule);

void write_trace_csv(const AdaptationTrace& trace, const std::string& path,
                     bool timestamp_header = true);

} // namespace dpdlab
