#include <doctest.h>

#include <random>

#include "dpdlab/estimation.hpp"
#include "oracles.hpp"

using namespace dpdlab;

namespace {

CMatrix random_matrix(std::size_t rows, std::size_t cols, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    CMatrix h(rows, cols);
    for (auto& v : h.data) v = complex_gaussian(rng);
    return h;
}

std::vector<cdouble> random_vector(std::size_t n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::vector<cdouble> v(n);
    for (auto& x : v) x = complex_gaussian(rng);
    return v;
}

} // namespace

TEST_CASE("identity system returns the target") {
    CMatrix h(4, 4);
    for (std::size_t i = 0; i < 4; ++i) h(i, i) = 1.0;
    const auto t = random_vector(4, 201);
    const auto theta = ls_solve(h, t);
    for (std::size_t i = 0; i < 4; ++i)
        CHECK(std::abs(theta[i] - t[i]) <= 1e-12 * (1.0 + std::abs(t[i])));
}

TEST_CASE("orthonormal columns collapse to a projection") {
    // Two orthonormal columns in C^4.
    CMatrix h(4, 2);
    const double s = 1.0 / 2.0;
    h(0, 0) = s;
    h(1, 0) = s;
    h(2, 0) = s;
    h(3, 0) = s;
    h(0, 1) = s;
    h(1, 1) = cdouble{0.0, s};
    h(2, 1) = -s;
    h(3, 1) = cdouble{0.0, -s};
    const auto t = random_vector(4, 202);
    const auto theta = ls_solve(h, t);
    for (std::size_t c = 0; c < 2; ++c) {
        cdouble want = 0.0;
        for (std::size_t r = 0; r < 4; ++r) want += std::conj(h(r, c)) * t[r];
        CHECK(std::abs(theta[c] - want) <= 1e-12 * (1.0 + std::abs(want)));
    }
}

TEST_CASE("random systems match the svd oracle") {
    const CMatrix h = random_matrix(64, 6, 203);
    const auto b = random_vector(64, 204);
    const auto got = ls_solve(h, b);
    const auto want = oracle::svd_solve(h, b);
    CHECK(oracle::rel_err(got, want) < 1e-9);
}

TEST_CASE("ridge solutions match the damped svd oracle") {
    const CMatrix h = random_matrix(48, 5, 205);
    const auto b = random_vector(48, 206);
    for (double lambda : {1e-6, 1e-2, 1.0}) {
        const auto got = ls_solve(h, b, lambda);
        const auto want = oracle::svd_solve(h, b, lambda);
        CHECK(oracle::rel_err(got, want) < 1e-9);
    }
}

TEST_CASE("residual is orthogonal to the column space") {
    const CMatrix h = random_matrix(96, 8, 207);
    const auto b = random_vector(96, 208);
    const auto theta = ls_solve(h, b);
    // r = b - H theta; check |H^H r| against |H^H b|.
    std::vector<cdouble> r = b;
    for (std::size_t i = 0; i < h.rows; ++i) {
        cdouble acc = 0.0;
        for (std::size_t c = 0; c < h.cols; ++c) acc += h(i, c) * theta[c];
        r[i] -= acc;
    }
    double num = 0.0;
    double den = 0.0;
    for (std::size_t c = 0; c < h.cols; ++c) {
        cdouble hr = 0.0;
        cdouble hb = 0.0;
        for (std::size_t i = 0; i < h.rows; ++i) {
            hr += std::conj(h(i, c)) * r[i];
            hb += std::conj(h(i, c)) * b[i];
        }
        num += std::norm(hr);
        den += std::norm(hb);
    }
    CHECK(std::sqrt(num) <= 1e-9 * std::sqrt(den));
}

TEST_CASE("rank deficiency is reported with a column count") {
    CMatrix h = random_matrix(16, 4, 209);
    for (std::size_t i = 0; i < h.rows; ++i) h(i, 3) = h(i, 0) + h(i, 1);
    try {
        ls_solve(h, random_vector(16, 210));
        FAIL("expected a singular-system error");
    } catch (const std::runtime_error& e) {
        const std::string msg = e.what();
        CHECK(msg.find("singular") != std::string::npos);
        CHECK(msg.find("1 linearly dependent column") != std::string::npos);
    }
    // Ridge regularization makes the same system solvable.
    CHECK_NOTHROW(ls_solve(h, random_vector(16, 210), 1e-8));
}

TEST_CASE("underdetermined and mismatched shapes are rejected") {
    const CMatrix wide = random_matrix(3, 5, 211);
    CHECK_THROWS_AS(ls_solve(wide, random_vector(3, 212)), std::invalid_argument);
    const CMatrix h = random_matrix(8, 2, 213);
    CHECK_THROWS_AS(ls_solve(h, random_vector(7, 214)), std::invalid_argument);
    CHECK_THROWS_AS(ls_solve(h, random_vector(8, 215), -1.0), std::invalid_argument);
}

TEST_CASE("badly scaled columns survive thanks to internal normalization") {
    CMatrix h = random_matrix(64, 4, 216);
    for (std::size_t i = 0; i < h.rows; ++i) {
        h(i, 1) *= 1e-9;
        h(i, 2) *= 1e+9;
    }
    const auto b = random_vector(64, 217);
    const auto got = ls_solve(h, b);

    // A raw SVD pseudo-inverse on the unscaled matrix truncates the tiny
    // column, so the reference repeats the contracted recipe: equilibrate
    // columns to unit RMS, solve, undo the scaling.
    CMatrix hs = h;
    std::vector<double> d(h.cols, 1.0);
    for (std::size_t c = 0; c < h.cols; ++c) {
        double acc = 0.0;
        for (std::size_t r = 0; r < h.rows; ++r) acc += std::norm(hs(r, c));
        d[c] = std::sqrt(acc / static_cast<double>(h.rows));
        for (std::size_t r = 0; r < h.rows; ++r) hs(r, c) /= d[c];
    }
    auto want = oracle::svd_solve(hs, b);
    for (std::size_t c = 0; c < h.cols; ++c) want[c] /= d[c];

    CHECK(oracle::rel_err(got, want) < 1e-8);
    for (std::size_t c = 0; c < h.cols; ++c)
        CHECK(std::abs(got[c] - want[c]) <= 1e-8 * std::abs(want[c]));
}

TEST_CASE("blended update honors its fixed points") {
    const CMatrix h = random_matrix(40, 6, 218);
    const auto x = random_vector(40, 219);
    const auto theta_old = random_vector(6, 220);
    UpdateConfig cfg;

    cfg.mu = 0.0;
    const auto frozen = ila_update(theta_old, h, x, cfg);
    for (std::size_t i = 0; i < 6; ++i) CHECK(frozen[i] == theta_old[i]);

    cfg.mu = 1.0;
    const auto replaced = ila_update(theta_old, h, x, cfg);
    const auto hat = ls_solve(h, x, effective_lambda(h, cfg.regularization));
    for (std::size_t i = 0; i < 6; ++i) CHECK(replaced[i] == hat[i]);

    cfg.mu = 0.5;
    const auto half = ila_update(std::vector<cdouble>(6, cdouble{0.0, 0.0}), h, x, cfg);
    for (std::size_t i = 0; i < 6; ++i) CHECK(half[i] == 0.5 * hat[i]);
}

TEST_CASE("blended update is affine in the blend weight") {
    const CMatrix h = random_matrix(52, 5, 221);
    const auto x = random_vector(52, 222);
    const auto theta_old = random_vector(5, 223);
    UpdateConfig cfg;
    cfg.mu = 1.0;
    const auto hat = ila_update(theta_old, h, x, cfg);
    for (double mu : {0.1, 0.3, 0.7, 0.9}) {
        cfg.mu = mu;
        const auto got = ila_update(theta_old, h, x, cfg);
        for (std::size_t i = 0; i < 5; ++i) {
            const cdouble want = theta_old[i] + mu * (hat[i] - theta_old[i]);
            CHECK(std::abs(got[i] - want) <= 1e-14 * (1.0 + std::abs(want)));
        }
    }
}

TEST_CASE("blended update stops moving once the model is exact") {
    const CMatrix h = random_matrix(48, 4, 224);
    const auto theta_star = random_vector(4, 225);
    const auto x = matvec(h, theta_star);
    UpdateConfig cfg;
    cfg.mu = 0.8;
    cfg.regularization = 0.0;
    const auto next = ila_update(theta_star, h, x, cfg);
    for (std::size_t i = 0; i < 4; ++i)
        CHECK(std::abs(next[i] - theta_star[i]) <= 1e-9 * (1.0 + std::abs(theta_star[i])));
}

TEST_CASE("error-driven update honors its fixed points") {
    const CMatrix hy = random_matrix(40, 6, 226);
    const CMatrix hx = random_matrix(40, 6, 227);
    const auto theta_old = random_vector(6, 228);
    UpdateConfig cfg;

    // Exact data: the error is identically zero.
    const auto x_exact = matvec(hy, theta_old);
    cfg.mu = 0.9;
    const auto still = robust_update(theta_old, hy, hx, x_exact, cfg);
    for (std::size_t i = 0; i < 6; ++i) CHECK(still[i] == theta_old[i]);

    cfg.mu = 0.0;
    const auto frozen = robust_update(theta_old, hy, hx, random_vector(40, 229), cfg);
    for (std::size_t i = 0; i < 6; ++i) CHECK(frozen[i] == theta_old[i]);
}

TEST_CASE("error-driven update with shared regressor reduces to the blended one") {
    const CMatrix h = random_matrix(64, 6, 230);
    const auto x = random_vector(64, 231);
    const auto theta_old = random_vector(6, 232);
    UpdateConfig cfg;
    cfg.mu = 1.0;
    cfg.regularization = 0.0;
    const auto a = robust_update(theta_old, h, h, x, cfg);
    const auto b = ila_update(theta_old, h, x, cfg);
    CHECK(oracle::rel_err(a, b) < 1e-9);
}

TEST_CASE("joint state fit recovers synthetic ground truth") {
    ModelStructure st;
    st.nonlinearity_order = 3;
    st.memory_depth = 1;
    const std::size_t nc = st.coeff_count();
    const auto x = random_vector(512, 233);
    const auto t0 = random_vector(nc, 234);
    const auto t1 = random_vector(nc, 235);
    std::vector<double> s(x.size());
    std::mt19937_64 rng(236);
    for (auto& v : s) v = 0.5 + 0.5 * std::abs(complex_gaussian(rng));
    const auto y = proactive_output({st, t0, t1}, x, s);

    const ParameterSet fit = fit_proactive(x, y, s, st, 0.0);
    REQUIRE(fit.theta_dyn.has_value());
    CHECK(oracle::rel_err(fit.theta, t0) < 1e-8);
    CHECK(oracle::rel_err(*fit.theta_dyn, t1) < 1e-8);
}

TEST_CASE("joint state fit degenerates gracefully") {
    ModelStructure st;
    st.nonlinearity_order = 2;
    st.memory_depth = 1;
    const auto x = random_vector(256, 237);

    SUBCASE("zero state pins the dynamic part at zero") {
        const auto y = random_vector(256, 238);
        const std::vector<double> s(x.size(), 0.0);
        const ParameterSet fit = fit_proactive(x, y, s, st, 1e-8);
        for (const auto& v : *fit.theta_dyn) CHECK(std::abs(v) < 1e-9);
        // Static half matches a plain regularized fit.
        const CMatrix h = build_regressor(st, x);
        const auto want = ls_solve(h, y, 1e-8);
        CHECK(oracle::rel_err(fit.theta, want) < 1e-6);
    }

    SUBCASE("identity data yields the unit linear tap") {
        std::vector<double> s(x.size());
        std::mt19937_64 rng(239);
        for (auto& v : s) v = std::abs(complex_gaussian(rng));
        const ParameterSet fit = fit_proactive(x, x, s, st, 1e-10);
        const auto unit = unit_linear_params(st);
        CHECK(oracle::rel_err(fit.theta, unit.theta) < 1e-6);
        for (const auto& v : *fit.theta_dyn) CHECK(std::abs(v) < 1e-6);
    }
}

TEST_CASE("joint state fit never loses to the static-only fit") {
    ModelStructure st;
    st.nonlinearity_order = 2;
    st.memory_depth = 0;
    const auto x = random_vector(384, 240);
    std::vector<double> s(x.size());
    std::mt19937_64 rng(241);
    for (auto& v : s) v = std::abs(complex_gaussian(rng));
    // Data with a genuine state-dependent component plus noise.
    auto y = proactive_output({st, random_vector(2, 242), random_vector(2, 243)}, x, s);
    for (auto& v : y) v += 0.01 * complex_gaussian(rng);

    const ParameterSet joint = fit_proactive(x, y, s, st, 0.0);
    const CMatrix h = build_regressor(st, x);
    const auto stat = ls_solve(h, y);

    auto resid = [&](const std::vector<cdouble>& yhat) {
        double acc = 0.0;
        for (std::size_t i = 0; i < y.size(); ++i) acc += std::norm(y[i] - yhat[i]);
        return acc;
    };
    const double r_joint = resid(proactive_output(joint, x, s));
    const double r_stat = resid(matvec(h, stat));
    CHECK(r_joint <= r_stat * (1.0 + 1e-12));
}

TEST_CASE("trace-normalized ridge weight tracks the matrix scale") {
    CMatrix h(4, 2);
    h(0, 0) = 3.0;
    h(1, 1) = 4.0;
    // trace(H^H H) = 9 + 16 = 25, over 2 columns.
    CHECK(effective_lambda(h, 1e-6) == doctest::Approx(1e-6 * 12.5).epsilon(1e-12));
    CHECK(effective_lambda(h, 0.0) == 0.0);
}
