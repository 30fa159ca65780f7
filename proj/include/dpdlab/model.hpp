// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <optional>
#include <string>
#include <vector>

#include "dpdlab/common.hpp"
#include "dpdlab/signal.hpp"

namespace dpdlab {

enum class ModelKind { MemoryPolynomial, GeneralizedMemoryPolynomial };

/// One envelope cross-term x[n-m]*|x[n-m-shift]|^(order-1). Negative shift
/// means the envelope leads the signal sample.
struct GmpTerm {
    std::size_t order = 1;
    std::size_t memory = 0;
    std::ptrdiff_t shift = 0;
};

/// Structure of a complex-baseband behavioral model. The diagonal part uses
/// every polynomial order 1..nonlinearity_order (even ones included) at every
/// memory depth 0..memory_depth.
struct ModelStructure {
    ModelKind kind = ModelKind::MemoryPolynomial;
    std::size_t nonlinearity_order = 7;
    std::size_t memory_depth = 4;
    std::vector<GmpTerm> cross_terms;

    std::size_t coeff_count() const;
    std::vector<Diagnostic> problems() const;
};

/// Model coefficients. theta_dyn, when present, holds the state-dependent
/// increment of the long-term-aware variant; output is then
/// H(x) * (theta + s[n] * theta_dyn) with s the scalar state trajectory.
struct ParameterSet {
    ModelStructure structure;
    std::vector<cdouble> theta;
    std::optional<std::vector<cdouble>> theta_dyn;
};

/// All-zero coefficients except a unit linear tap at memory 0.
ParameterSet unit_linear_params(const ModelStructure& s);

/// Regressor matrix: row n collects the model basis evaluated at x up to
/// sample n. Column order is order-major, memory-minor for the diagonal part,
/// then the cross terms in declaration order. Samples before x[0] (or past
/// the end, for leading shifts) are zero.
CMatrix build_regressor(const ModelStructure& s, const std::vector<cdouble>& x);

/// Same as build_regressor for the concatenation (history ++ x), keeping only
/// the rows of x. Lets block processing see real past samples instead of the
/// zero padding.
CMatrix build_regressor_with_history(const ModelStructure& s,
                                     const std::vector<cdouble>& history,
                                     const std::vector<cdouble>& x);

/// Block regressor with context on both sides (history ++ x ++ future); rows
/// cover x only. Needed when leading cross terms would otherwise see zeros at
/// a chunk boundary.
CMatrix build_regressor_with_context(const ModelStructure& s,
                                     const std::vector<cdouble>& history,
                                     const std::vector<cdouble>& x,
                                     const std::vector<cdouble>& future);

/// Samples of past context a regressor row can reach (memory plus lagging
/// shifts).
std::size_t regressor_lookback(const ModelStructure& s);

/// Samples of future context a row can reach (leading shifts only).
std::size_t regressor_lookahead(const ModelStructure& s);

/// Static model response H(x) * theta; theta_dyn is ignored here.
std::vector<cdouble> model_output(const ParameterSet& p, const std::vector<cdouble>& x);

/// State-aware response H(x) * (theta + s[n] * theta_dyn). A missing
/// theta_dyn acts as zeros.
std::vector<cdouble> proactive_output(const ParameterSet& p, const std::vector<cdouble>& x,
                                      const std::vector<double>& s);

/// Long-term state trajectory: low-passed instantaneous power |x|^2.
struct StateConfig {
    double cutoff_hz = 50.0e3;
};

std::vector<double> compute_state(const ComplexSignal& x, const StateConfig& cfg);

/// Stacked regressor [H | diag(s) H] used to fit theta and theta_dyn jointly.
CMatrix build_proactive_regressor(const ModelStructure& s, const std::vector<cdouble>& x,
                                  const std::vector<double>& state);

void save_params_csv(const ParameterSet& p, const std::string& path);
ParameterSet load_params_csv(const std::string& path);

} // namespace dpdlab
