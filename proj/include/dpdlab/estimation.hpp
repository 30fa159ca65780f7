// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <vector>

#include "dpdlab/common.hpp"
#include "dpdlab/model.hpp"

namespace dpdlab {

enum class UpdateAlgorithm { Ila, Robust, ProactiveStatic };

struct UpdateConfig {
    UpdateAlgorithm algorithm = UpdateAlgorithm::Ila;
    /// Blend weight mu: 1 keeps only the fresh estimate, 0 freezes learning.
    double mu = 0.8;
    /// Relative ridge weight; scaled internally by trace(H^H H)/cols.
    double regularization = 1e-10;
};

/// Minimum-norm least squares min ||H t - b||^2 + lambda ||t||^2 via
/// column-scaled Householder QR with ridge terms as augmented rows.
/// lambda is absolute here. Throws std::runtime_error on rank deficiency,
/// naming the number of unusable columns.
std::vector<cdouble> ls_solve(const CMatrix& h, const std::vector<cdouble>& b,
                              double lambda = 0.0);

/// Fresh postinverse fit theta_hat = ls_solve(h_y, x_target) blended with the
/// previous coefficients: theta' = (1-mu) theta_old + mu theta_hat.
std::vector<cdouble> ila_update(const std::vector<cdouble>& theta_old, const CMatrix& h_y,
                                const std::vector<cdouble>& x_target, const UpdateConfig& cfg);

/// Error-driven update that inverts the clean-input regressor h_x instead of
/// the observed-output one: theta' = theta_old + mu ls_solve(h_x, x_target -
/// h_y theta_old).
std::vector<cdouble> robust_update(const std::vector<cdouble>& theta_old, const CMatrix& h_y,
                                   const CMatrix& h_x, const std::vector<cdouble>& x_target,
                                   const UpdateConfig& cfg);

/// Joint fit of (theta, theta_dyn) so that H(x) (theta + s[n] theta_dyn)
/// approximates y, via the stacked regressor. Intended to run once on
/// representative data.
ParameterSet fit_proactive(const std::vector<cdouble>& x, const std::vector<cdouble>& y,
                           const std::vector<double>& s, const ModelStructure& structure,
                           double regularization);

/// Convenience: trace-normalized ridge weight used by the update layer.
double effective_lambda(const CMatrix& h, double regularization);

} // namespace dpdlab
