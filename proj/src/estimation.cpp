// SPDX-License-Identifier: Apache-2.0
#include "dpdlab/estimation.hpp"

#include <algorithm>
#include <stdexcept>
#include <string>

namespace dpdlab {

namespace {

constexpr double kRankTol = 1e-12;

void check_mu(double mu) {
    if (!(mu >= 0.0 && mu <= 1.0)) throw std::invalid_argument("update: mu outside [0, 1]");
}

} // namespace

double effective_lambda(const CMatrix& h, double regularization) {
    if (h.cols == 0) return 0.0;
    double trace = 0.0;
    for (const auto& v : h.data) trace += std::norm(v);
    return regularization * trace / static_cast<double>(h.cols);
}

std::vector<cdouble> ls_solve(const CMatrix& h, const std::vector<cdouble>& b, double lambda) {
    const std::size_t m = h.rows;
    const std::size_t n = h.cols;
    if (m < n) throw std::invalid_argument("ls_solve: fewer rows than columns");
    if (b.size() != m) throw std::invalid_argument("ls_solve: target length mismatch");
    if (lambda < 0.0) throw std::invalid_argument("ls_solve: negative regularization");
    if (n == 0) return {};

    // Columns scaled to unit norm; the scaling is folded back into the
    // solution at the end. Ridge terms become sqrt(lambda)/d augmented rows
    // so they penalize the unscaled coefficients.
    std::vector<double> d(n);
    for (std::size_t c = 0; c < n; ++c) {
        double acc = 0.0;
        for (std::size_t r = 0; r < m; ++r) acc += std::norm(h(r, c));
        d[c] = std::sqrt(acc);
        if (d[c] == 0.0) d[c] = 1.0;
    }

    const bool ridge = lambda > 0.0;
    const std::size_t mtot = m + (ridge ? n : 0);
    const std::size_t nc = n + 1; // last column carries the target
    std::vector<cdouble> a(mtot * nc, cdouble{0.0, 0.0});
    for (std::size_t r = 0; r < m; ++r) {
        for (std::size_t c = 0; c < n; ++c) a[r * nc + c] = h(r, c) / d[c];
        a[r * nc + n] = b[r];
    }
    if (ridge) {
        const double sl = std::sqrt(lambda);
        for (std::size_t c = 0; c < n; ++c) a[(m + c) * nc + c] = sl / d[c];
    }

    std::size_t deficient = 0;
    std::vector<cdouble> v(mtot);
    for (std::size_t k = 0; k < n; ++k) {
        double norm2 = 0.0;
        for (std::size_t r = k; r < mtot; ++r) norm2 += std::norm(a[r * nc + k]);
        const double norm = std::sqrt(norm2);
        if (norm < kRankTol * std::sqrt(static_cast<double>(mtot))) {
            ++deficient;
            a[k * nc + k] = {0.0, 0.0};
            continue;
        }
        const cdouble a0 = a[k * nc + k];
        const double a0m = std::abs(a0);
        const cdouble phase = a0m > 0.0 ? a0 / a0m : cdouble{1.0, 0.0};
        const cdouble alpha = -phase * norm;

        v[k] = a0 - alpha;
        double vnorm2 = std::norm(v[k]);
        for (std::size_t r = k + 1; r < mtot; ++r) {
            v[r] = a[r * nc + k];
            vnorm2 += std::norm(v[r]);
        }
        if (vnorm2 > 0.0) {
            for (std::size_t j = k + 1; j < nc; ++j) {
                cdouble dot{0.0, 0.0};
                for (std::size_t r = k; r < mtot; ++r) dot += std::conj(v[r]) * a[r * nc + j];
                const cdouble w = dot * (2.0 / vnorm2);
                for (std::size_t r = k; r < mtot; ++r) a[r * nc + j] -= w * v[r];
            }
        }
        a[k * nc + k] = alpha;
        for (std::size_t r = k + 1; r < mtot; ++r) a[r * nc + k] = {0.0, 0.0};
    }

    if (deficient > 0 && !ridge)
        throw std::runtime_error("ls_solve: singular system, " + std::to_string(deficient) +
                                 " linearly dependent column(s)");

    std::vector<cdouble> theta(n, cdouble{0.0, 0.0});
    for (std::size_t kk = n; kk-- > 0;) {
        cdouble acc = a[kk * nc + n];
        for (std::size_t j = kk + 1; j < n; ++j) acc -= a[kk * nc + j] * theta[j];
        const cdouble diag = a[kk * nc + kk];
        theta[kk] = std::abs(diag) > 0.0 ? acc / diag : cdouble{0.0, 0.0};
    }
    for (std::size_t c = 0; c < n; ++c) theta[c] /= d[c];
    return theta;
}

std::vector<cdouble> ila_update(const std::vector<cdouble>& theta_old, const CMatrix& h_y,
                                const std::vector<cdouble>& x_target, const UpdateConfig& cfg) {
    check_mu(cfg.mu);
    if (theta_old.size() != h_y.cols) throw std::invalid_argument("ila_update: theta size mismatch");
    if (cfg.mu == 0.0) return theta_old;
    std::vector<cdouble> theta_hat =
        ls_solve(h_y, x_target, effective_lambda(h_y, cfg.regularization));
    if (cfg.mu == 1.0) return theta_hat;
    std::vector<cdouble> out(theta_old.size());
    for (std::size_t i = 0; i < out.size(); ++i)
        out[i] = (1.0 - cfg.mu) * theta_old[i] + cfg.mu * theta_hat[i];
    return out;
}

std::vector<cdouble> robust_update(const std::vector<cdouble>& theta_old, const CMatrix& h_y,
                                   const CMatrix& h_x, const std::vector<cdouble>& x_target,
                                   const UpdateConfig& cfg) {
    check_mu(cfg.mu);
    if (h_y.rows != h_x.rows || h_y.cols != h_x.cols)
        throw std::invalid_argument("robust_update: regressor shape mismatch");
    if (theta_old.size() != h_y.cols)
        throw std::invalid_argument("robust_update: theta size mismatch");
    if (cfg.mu == 0.0) return theta_old;

    const std::vector<cdouble> x_post = matvec(h_y, theta_old);
    std::vector<cdouble> e(x_target.size());
    bool all_zero = true;
    for (std::size_t i = 0; i < e.size(); ++i) {
        e[i] = x_target[i] - x_post[i];
        if (e[i] != cdouble{0.0, 0.0}) all_zero = false;
    }
    if (all_zero) return theta_old;

    const std::vector<cdouble> delta =
        ls_solve(h_x, e, effective_lambda(h_x, cfg.regularization));
    std::vector<cdouble> out(theta_old.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = theta_old[i] + cfg.mu * delta[i];
    return out;
}

ParameterSet fit_proactive(const std::vector<cdouble>& x, const std::vector<cdouble>& y,
                           const std::vector<double>& s, const ModelStructure& structure,
                           double regularization) {
    if (x.size() != y.size() || x.size() != s.size())
        throw std::invalid_argument("fit_proactive: length mismatch");
    const CMatrix h2 = build_proactive_regressor(structure, x, s);
    const std::vector<cdouble> full =
        ls_solve(h2, y, effective_lambda(h2, regularization));
    const std::size_t c = structure.coeff_count();
    ParameterSet p;
    p.structure = structure;
    p.theta.assign(full.begin(), full.begin() + static_cast<std::ptrdiff_t>(c));
    p.theta_dyn.emplace(full.begin() + static_cast<std::ptrdiff_t>(c), full.end());
    return p;
}

} // namespace dpdlab
