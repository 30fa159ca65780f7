// SPDX-License-Identifier: Apache-2.0
#include "dpdlab/testbed.hpp"

#include <algorithm>
#include <cstdio>
#include <ctime>
#include <stdexcept>

namespace dpdlab {

namespace {

constexpr double kNmseFloorDb = -300.0;

std::string default_theta_name(std::size_t step) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "theta_%05zu.csv", step);
    return buf;
}

} // namespace

std::vector<Diagnostic> Schedule::problems(std::size_t total_samples) const {
    std::vector<Diagnostic> out;
    if (window_len == 0) out.push_back({"schedule.window_len", "must be positive"});
    if (step_len == 0) out.push_back({"schedule.step_len", "must be positive"});
    if (step_len > window_len)
        out.push_back({"schedule.step_len", "must not exceed window_len"});
    if (init_len + step_len < window_len)
        out.push_back({"schedule.init_len", "must cover at least window_len minus step_len"});
    if (total_samples <= init_len)
        out.push_back({"schedule.init_len", "leaves no data after the init block"});
    else if (step_len > 0 && (total_samples - init_len) % step_len != 0)
        out.push_back({"schedule.step_len", "must divide the data length after the init block"});
    return out;
}

std::vector<WindowPlan> plan_windows(const Schedule& s, std::size_t total_samples) {
    const auto diags = s.problems(total_samples);
    if (!diags.empty())
        throw std::invalid_argument("plan_windows: " + diags.front().field + " " +
                                    diags.front().message);
    const std::size_t steps = (total_samples - s.init_len) / s.step_len;
    std::vector<WindowPlan> plan(steps);
    for (std::size_t k = 0; k < steps; ++k) {
        const std::size_t end = s.init_len + (k + 1) * s.step_len;
        plan[k] = {end - s.window_len, end, end - s.step_len, end};
    }
    return plan;
}

std::vector<cdouble> apply_feedback_impairment(const std::vector<cdouble>& y,
                                               const FeedbackImpairment& imp,
                                               std::uint64_t block_index) {
    switch (imp.kind) {
    case ImpairmentKind::None:
        return y;
    case ImpairmentKind::AwgnSnr: {
        if (y.empty()) return y;
        if (!std::isfinite(imp.snr_db))
            throw std::invalid_argument("impairment: snr_db must be finite");
        const double psig = mean_power(y);
        if (psig <= 0.0) return y;
        std::mt19937_64 rng(mix_seed(imp.seed, block_index));
        std::vector<cdouble> noise(y.size());
        for (auto& n : noise) n = complex_gaussian(rng);
        // Scale the realized noise block so the ratio hits the target
        // exactly, not just in expectation.
        const double pn = mean_power(noise);
        const double scale =
            pn > 0.0 ? std::sqrt(psig * power_from_db(-imp.snr_db) / pn) : 0.0;
        std::vector<cdouble> out(y.size());
        for (std::size_t i = 0; i < y.size(); ++i) out[i] = y[i] + scale * noise[i];
        return out;
    }
    case ImpairmentKind::Quantizer: {
        if (imp.quantizer_bits < 1 || imp.quantizer_bits > 30)
            throw std::invalid_argument("impairment: quantizer_bits outside [1, 30]");
        if (y.empty()) return y;
        const double sigma = std::sqrt(mean_power(y) / 2.0);
        if (sigma <= 0.0) return y;
        const double load = 4.0 * sigma;
        const auto half = static_cast<long>(1L << (imp.quantizer_bits - 1));
        const double delta = load / static_cast<double>(half);
        auto q = [&](double v) {
            long idx = static_cast<long>(std::floor(v / delta));
            idx = std::clamp(idx, -half, half - 1);
            return (static_cast<double>(idx) + 0.5) * delta;
        };
        std::vector<cdouble> out(y.size());
        for (std::size_t i = 0; i < y.size(); ++i) out[i] = {q(y[i].real()), q(y[i].imag())};
        return out;
    }
    }
    throw std::logic_error("apply_feedback_impairment: unknown kind");
}

double nmse_db(const std::vector<cdouble>& ref, const std::vector<cdouble>& y) {
    if (ref.size() != y.size()) throw std::invalid_argument("nmse_db: length mismatch");
    double pr = 0.0;
    double pe = 0.0;
    for (std::size_t i = 0; i < ref.size(); ++i) {
        pr += std::norm(ref[i]);
        pe += std::norm(y[i] - ref[i]);
    }
    if (pr <= 0.0) throw std::invalid_argument("nmse_db: zero-power reference");
    if (pe <= 0.0) return kNmseFloorDb;
    return std::max(kNmseFloorDb, db_from_power_ratio(pe / pr));
}

cdouble block_gain(const std::vector<cdouble>& u, const std::vector<cdouble>& y) {
    if (u.size() != y.size()) throw std::invalid_argument("block_gain: length mismatch");
    cdouble num{0.0, 0.0};
    double den = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) {
        num += std::conj(u[i]) * y[i];
        den += std::norm(u[i]);
    }
    if (den <= 0.0) throw std::invalid_argument("block_gain: zero-power reference");
    return num / den;
}

namespace {

// Shared predistortion helper: applies params to orig[b, e) using real
// timeline context on both sides.
std::vector<cdouble> predistort_span(const ParameterSet& params, DpdMode mode,
                                     const std::vector<cdouble>& orig,
                                     const std::vector<double>& state, std::size_t b,
                                     std::size_t e) {
    const auto& st = params.structure;
    const std::size_t keep = std::min(regressor_lookback(st), b);
    const std::size_t ahead = std::min(regressor_lookahead(st), orig.size() - e);
    const std::vector<cdouble> hist(orig.begin() + static_cast<std::ptrdiff_t>(b - keep),
                                    orig.begin() + static_cast<std::ptrdiff_t>(b));
    const std::vector<cdouble> blk(orig.begin() + static_cast<std::ptrdiff_t>(b),
                                   orig.begin() + static_cast<std::ptrdiff_t>(e));
    const std::vector<cdouble> fut(orig.begin() + static_cast<std::ptrdiff_t>(e),
                                   orig.begin() + static_cast<std::ptrdiff_t>(e + ahead));
    const CMatrix h = build_regressor_with_context(st, hist, blk, fut);
    std::vector<cdouble> out = matvec(h, params.theta);
    if (mode == DpdMode::Proactive && params.theta_dyn) {
        const std::vector<cdouble> dyn = matvec(h, *params.theta_dyn);
        for (std::size_t n = 0; n < out.size(); ++n) out[n] += state[b + n] * dyn[n];
    }
    return out;
}

} // namespace

ParameterSet pretrain_parameters(const ComplexSignal& data, const ModelStructure& model,
                                 const PaConfig& pa, DpdMode mode, const RunOptions& options,
                                 double regularization) {
    if (data.samples.empty())
        throw std::invalid_argument("pretrain_parameters: empty measurement data");
    const auto& orig = data.samples;
    auto [yfull, st] = pa_process(pa, pa_initial_state(pa), orig);
    (void)st;
    const cdouble g0 = pa.small_signal_gain;
    for (auto& s : yfull) s /= g0;

    const std::size_t total = orig.size();
    const std::size_t fit_n = std::min(std::max<std::size_t>(options.pretrain_max_samples, 1),
                                       total);
    const std::size_t fb = total - fit_n;
    const std::vector<cdouble> ys(yfull.begin() + static_cast<std::ptrdiff_t>(fb), yfull.end());
    const std::vector<cdouble> xs(orig.begin() + static_cast<std::ptrdiff_t>(fb), orig.end());

    if (mode == DpdMode::Proactive) {
        const std::vector<double> state =
            compute_state(data, StateConfig{options.state_cutoff_hz});
        const std::vector<double> ss(state.begin() + static_cast<std::ptrdiff_t>(fb),
                                     state.end());
        return fit_proactive(ys, xs, ss, model, regularization);
    }
    const std::size_t keep = std::min(regressor_lookback(model), fb);
    const std::vector<cdouble> hist(yfull.begin() + static_cast<std::ptrdiff_t>(fb - keep),
                                    yfull.begin() + static_cast<std::ptrdiff_t>(fb));
    const CMatrix h = build_regressor_with_history(model, hist, ys);
    ParameterSet p;
    p.structure = model;
    p.theta = ls_solve(h, xs, effective_lambda(h, regularization));
    return p;
}

AdaptationTrace run_adaptation(const ComplexSignal& u, const ComplexSignal& init_data,
                               const ModelStructure& model, const UpdateConfig& update,
                               const PaConfig& pa, const Schedule& schedule,
                               const FeedbackImpairment& impairment, DpdMode mode,
                               const RunOptions& options) {
    if (u.samples.empty()) throw std::invalid_argument("run_adaptation: empty input");
    if (init_data.samples.size() < schedule.init_len)
        throw std::invalid_argument("run_adaptation: init data shorter than init_len");
    {
        const auto mdiags = model.problems();
        if (!mdiags.empty())
            throw std::invalid_argument("run_adaptation: " + mdiags.front().field + " " +
                                        mdiags.front().message);
    }
    if (mode == DpdMode::Reactive && update.algorithm == UpdateAlgorithm::ProactiveStatic)
        throw std::invalid_argument(
            "run_adaptation: proactive-static fitting is not a per-step update");

    const std::size_t total = schedule.init_len + u.samples.size();
    const auto plan = plan_windows(schedule, total);
    const double fs = u.sample_rate_hz;
    const std::size_t s_len = schedule.step_len;

    std::vector<cdouble> orig;
    orig.reserve(total);
    orig.insert(orig.end(), init_data.samples.begin(),
                init_data.samples.begin() + static_cast<std::ptrdiff_t>(schedule.init_len));
    orig.insert(orig.end(), u.samples.begin(), u.samples.end());

    std::vector<double> state;
    if (mode == DpdMode::Proactive)
        state = compute_state({orig, fs}, StateConfig{options.state_cutoff_hz});

    ParameterSet params;
    if (options.initial_params) {
        params = *options.initial_params;
        if (params.theta.size() != model.coeff_count())
            throw std::invalid_argument("run_adaptation: initial parameter count mismatch");
    } else if (options.init == InitMode::Cold) {
        params = unit_linear_params(model);
    } else {
        params = pretrain_parameters({orig, fs}, model, pa, mode, options,
                                     update.regularization);
    }

    const cdouble g0 = pa.small_signal_gain;
    const std::size_t look = regressor_lookback(model);

    std::vector<cdouble> tx(total);
    for (std::size_t pos = 0; pos < schedule.init_len; pos += 8192) {
        const std::size_t end = std::min(pos + 8192, schedule.init_len);
        const auto blk = predistort_span(params, mode, orig, state, pos, end);
        std::copy(blk.begin(), blk.end(), tx.begin() + static_cast<std::ptrdiff_t>(pos));
    }

    AdaptationTrace trace;
    trace.steps.reserve(plan.size());

    for (std::size_t k = 0; k < plan.size(); ++k) {
        const auto& wnd = plan[k];

        const auto blk = predistort_span(params, mode, orig, state, wnd.analysis_begin,
                                         wnd.analysis_end);
        std::copy(blk.begin(), blk.end(),
                  tx.begin() + static_cast<std::ptrdiff_t>(wnd.analysis_begin));

        const std::vector<cdouble> win(tx.begin() + static_cast<std::ptrdiff_t>(wnd.begin),
                                       tx.begin() + static_cast<std::ptrdiff_t>(wnd.end));
        auto [y, pa_st] = pa_process(pa, pa_initial_state(pa), win);
        (void)pa_st;

        const std::vector<cdouble> ya(y.end() - static_cast<std::ptrdiff_t>(s_len), y.end());
        const std::vector<cdouble> ub(orig.begin() + static_cast<std::ptrdiff_t>(wnd.analysis_begin),
                                      orig.begin() + static_cast<std::ptrdiff_t>(wnd.analysis_end));

        const cdouble a = block_gain(ub, ya);
        double nm = 0.0;
        if (std::abs(a) > 0.0) {
            std::vector<cdouble> est(ya.size());
            for (std::size_t i = 0; i < ya.size(); ++i) est[i] = ya[i] / a;
            nm = nmse_db(ub, est);
        }

        // The observation path sees the analysis block plus just enough
        // preceding samples to give the update regressor real context.
        const std::size_t ctx = std::min(look, y.size() - s_len);
        const std::vector<cdouble> ymeas(y.end() - static_cast<std::ptrdiff_t>(s_len + ctx),
                                         y.end());
        const std::vector<cdouble> ymeas_imp = apply_feedback_impairment(ymeas, impairment, k);

        double fb_snr = std::numeric_limits<double>::infinity();
        if (impairment.kind != ImpairmentKind::None) {
            double perr = 0.0;
            double psig = 0.0;
            for (std::size_t i = ctx; i < ymeas.size(); ++i) {
                psig += std::norm(ymeas[i]);
                perr += std::norm(ymeas_imp[i] - ymeas[i]);
            }
            if (perr > 0.0 && psig > 0.0) fb_snr = db_from_power_ratio(psig / perr);
        }

        if (mode == DpdMode::Reactive) {
            std::vector<cdouble> yn(ymeas_imp.size());
            for (std::size_t i = 0; i < yn.size(); ++i) yn[i] = ymeas_imp[i] / g0;
            const std::vector<cdouble> yhist(yn.begin(),
                                             yn.begin() + static_cast<std::ptrdiff_t>(ctx));
            const std::vector<cdouble> yblk(yn.begin() + static_cast<std::ptrdiff_t>(ctx),
                                            yn.end());
            const CMatrix h_y = build_regressor_with_history(model, yhist, yblk);
            const std::vector<cdouble> x_target(
                tx.begin() + static_cast<std::ptrdiff_t>(wnd.analysis_begin),
                tx.begin() + static_cast<std::ptrdiff_t>(wnd.analysis_end));

            if (update.algorithm == UpdateAlgorithm::Ila) {
                params.theta = ila_update(params.theta, h_y, x_target, update);
            } else {
                const std::size_t keep = std::min(look, wnd.analysis_begin);
                const std::vector<cdouble> xhist(
                    tx.begin() + static_cast<std::ptrdiff_t>(wnd.analysis_begin - keep),
                    tx.begin() + static_cast<std::ptrdiff_t>(wnd.analysis_begin));
                const CMatrix h_x = build_regressor_with_history(model, xhist, x_target);
                params.theta = robust_update(params.theta, h_y, h_x, x_target, update);
            }
        }

        TraceStep step;
        step.step = k;
        step.time_s = fs > 0.0 ? static_cast<double>(k * s_len) / fs : static_cast<double>(k);
        step.nmse_db = nm;
        step.feedback_snr_db = fb_snr;
        if (options.record_theta) {
            const std::string name = default_theta_name(k);
            const std::string dir = options.theta_dir.empty() ? std::string(".")
                                                              : options.theta_dir;
            save_params_csv(params, dir + "/" + name);
            step.theta_file = name;
        }
        trace.steps.push_back(std::move(step));
    }

    trace.final_params = std::move(params);
    return trace;
}

double steady_state_nmse_db(const AdaptationTrace& trace) {
    if (trace.steps.empty())
        throw std::invalid_argument("steady_state_nmse_db: empty trace");
    const std::size_t n = trace.steps.size();
    const std::size_t count = std::max<std::size_t>(1, (n + 9) / 10);
    double acc = 0.0;
    for (std::size_t i = n - count; i < n; ++i) acc += trace.steps[i].nmse_db;
    return acc / static_cast<double>(count);
}

double convergence_time(const AdaptationTrace& trace, double tolerance_db) {
    if (trace.steps.empty()) throw std::invalid_argument("convergence_time: empty trace");
    const double steady = steady_state_nmse_db(trace);
    std::size_t k = trace.steps.size();
    while (k > 0 && std::abs(trace.steps[k - 1].nmse_db - steady) <= tolerance_db) --k;
    if (k == trace.steps.size()) return std::numeric_limits<double>::infinity();
    if (k == 0) return 0.0;
    return trace.steps[k].time_s;
}

double degradation_db(const AdaptationTrace& degraded, const AdaptationTrace& clean) {
    if (degraded.steps.size() != clean.steps.size())
        throw std::invalid_argument("degradation_db: schedules differ");
    return steady_state_nmse_db(degraded) - steady_state_nmse_db(clean);
}

double worst_nmse_in_interval(const AdaptationTrace& trace, double t_begin_s, double t_end_s) {
    double worst = -std::numeric_limits<double>::infinity();
    bool any = false;
    for (const auto& st : trace.steps)
        if (st.time_s >= t_begin_s && st.time_s < t_end_s) {
            worst = std::max(worst, st.nmse_db);
            any = true;
        }
    if (!any) throw std::invalid_argument("worst_nmse_in_interval: no steps in interval");
    return worst;
}

WarmupReport warmup_equivalence(const ComplexSignal& u, const ComplexSignal& init_data,
                                const ParameterSet& params, const PaConfig& pa,
                                const Schedule& schedule) {
    if (u.samples.empty()) throw std::invalid_argument("warmup_equivalence: empty input");
    if (init_data.samples.size() < schedule.init_len)
        throw std::invalid_argument("warmup_equivalence: init data shorter than init_len");

    const std::size_t total = schedule.init_len + u.samples.size();
    const auto plan = plan_windows(schedule, total);
    const std::size_t s_len = schedule.step_len;

    PaConfig quiet = pa;
    quiet.output_noise_floor_dbc = -1000.0;

    std::vector<cdouble> orig;
    orig.reserve(total);
    orig.insert(orig.end(), init_data.samples.begin(),
                init_data.samples.begin() + static_cast<std::ptrdiff_t>(schedule.init_len));
    orig.insert(orig.end(), u.samples.begin(), u.samples.end());

    std::vector<cdouble> tx(total);
    const std::vector<double> no_state;
    for (std::size_t pos = 0; pos < total; pos += 8192) {
        const std::size_t end = std::min(pos + 8192, total);
        const auto blk = predistort_span(params, DpdMode::Frozen, orig, no_state, pos, end);
        std::copy(blk.begin(), blk.end(), tx.begin() + static_cast<std::ptrdiff_t>(pos));
    }

    const auto y_cont = pa_process(quiet, pa_initial_state(quiet), tx).first;

    WarmupReport rep;
    rep.per_window_nmse_db.reserve(plan.size());
    for (const auto& wnd : plan) {
        const std::vector<cdouble> win(tx.begin() + static_cast<std::ptrdiff_t>(wnd.begin),
                                       tx.begin() + static_cast<std::ptrdiff_t>(wnd.end));
        const auto y_win = pa_process(quiet, pa_initial_state(quiet), win).first;
        const std::vector<cdouble> blk(y_win.end() - static_cast<std::ptrdiff_t>(s_len),
                                       y_win.end());
        const std::vector<cdouble> ref(
            y_cont.begin() + static_cast<std::ptrdiff_t>(wnd.analysis_begin),
            y_cont.begin() + static_cast<std::ptrdiff_t>(wnd.analysis_end));
        const double nm = nmse_db(ref, blk);
        rep.per_window_nmse_db.push_back(nm);
        rep.worst_nmse_db = std::max(rep.worst_nmse_db, nm);
    }
    return rep;
}

void write_trace_csv(const AdaptationTrace& trace, const std::string& path,
                     bool timestamp_header) {
    std::FILE* f = std::fopen(path.c_str(), "w");
    if (!f) throw std::runtime_error("write_trace_csv: cannot open " + path);
    if (timestamp_header) {
        const std::time_t now = std::time(nullptr);
        char buf[64];
        std::tm tmv{};
        gmtime_r(&now, &tmv);
        std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tmv);
        std::fprintf(f, "# generated %s\n", buf);
    }
    std::fprintf(f, "step,time_s,nmse_db,feedback_snr_db,theta_file\n");
    for (const auto& st : trace.steps)
        std::fprintf(f, "%zu,%.17g,%.17g,%.17g,%s\n", st.step, st.time_s, st.nmse_db,
                     st.feedback_snr_db, st.theta_file.c_str());
    std::fclose(f);
}

} // namespace dpdlab
