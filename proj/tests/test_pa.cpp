#include <doctest.h>

#include <random>

#include "dpdlab/pa.hpp"

using namespace dpdlab;

namespace {

std::vector<cdouble> random_vector(std::size_t n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::vector<cdouble> v(n);
    for (auto& x : v) x = complex_gaussian(rng);
    return v;
}

PaConfig quiet_config() {
    PaConfig cfg;
    cfg.output_noise_floor_dbc = -1000.0;
    return cfg;
}

} // namespace

TEST_CASE("cold state is zeroed and reproducible") {
    const PaConfig cfg;
    const PaState a = pa_initial_state(cfg);
    const PaState b = pa_initial_state(cfg);
    CHECK(a.thermal_level == 0.0);
    CHECK(a.noise_counter == 0);
    REQUIRE(a.filter_memory.size() == cfg.memory_taps.size() - 1);
    for (const auto& v : a.filter_memory) CHECK(v == cdouble{0.0, 0.0});
    CHECK(b.thermal_level == a.thermal_level);
    CHECK(b.filter_memory == a.filter_memory);
}

TEST_CASE("silence in, silence out") {
    const PaConfig cfg = quiet_config();
    const std::vector<cdouble> x(256, cdouble{0.0, 0.0});
    const auto [y, st] = pa_process(cfg, pa_initial_state(cfg), x);
    REQUIRE(y.size() == x.size());
    for (const auto& v : y) CHECK(v == cdouble{0.0, 0.0});
    CHECK(st.thermal_level == 0.0);
}

TEST_CASE("small-signal response is the linear gain") {
    PaConfig cfg = quiet_config();
    cfg.memory_taps = {{1.0, 0.0}};
    cfg.am_pm_strength = 0.0;
    cfg.thermal_gain_sensitivity = {0.0, 0.0};
    cfg.thermal_compression_sensitivity = 0.0;
    const std::vector<cdouble> x(64, cdouble{1e-3, 5e-4});
    const auto [y, st] = pa_process(cfg, pa_initial_state(cfg), x);
    for (std::size_t i = 0; i < x.size(); ++i) {
        const cdouble want = cfg.small_signal_gain * x[i];
        CHECK(std::abs(y[i] - want) <= 1e-3 * std::abs(want));
    }
}

TEST_CASE("block splitting does not change the output") {
    const PaConfig quiet = quiet_config();
    const auto x = random_vector(1024, 301);

    SUBCASE("noise disabled") {
        const auto [whole, st_whole] = pa_process(quiet, pa_initial_state(quiet), x);
        const std::vector<cdouble> first(x.begin(), x.begin() + 333);
        const std::vector<cdouble> second(x.begin() + 333, x.end());
        const auto [ya, st_a] = pa_process(quiet, pa_initial_state(quiet), first);
        const auto [yb, st_b] = pa_process(quiet, st_a, second);
        REQUIRE(ya.size() + yb.size() == whole.size());
        for (std::size_t i = 0; i < ya.size(); ++i) CHECK(ya[i] == whole[i]);
        for (std::size_t i = 0; i < yb.size(); ++i) CHECK(yb[i] == whole[333 + i]);
        CHECK(st_b.thermal_level == st_whole.thermal_level);
        CHECK(st_b.filter_memory == st_whole.filter_memory);
    }

    SUBCASE("noise enabled, counter-indexed draws") {
        PaConfig noisy;
        const auto [whole, st_whole] = pa_process(noisy, pa_initial_state(noisy), x);
        const std::vector<cdouble> first(x.begin(), x.begin() + 100);
        const std::vector<cdouble> second(x.begin() + 100, x.end());
        const auto [ya, st_a] = pa_process(noisy, pa_initial_state(noisy), first);
        const auto [yb, st_b] = pa_process(noisy, st_a, second);
        for (std::size_t i = 0; i < ya.size(); ++i) CHECK(ya[i] == whole[i]);
        for (std::size_t i = 0; i < yb.size(); ++i) CHECK(yb[i] == whole[100 + i]);
        CHECK(st_b.noise_counter == st_whole.noise_counter);
    }
}

TEST_CASE("identical inputs give identical outputs") {
    const PaConfig cfg;
    const auto x = random_vector(512, 302);
    const auto [y1, s1] = pa_process(cfg, pa_initial_state(cfg), x);
    const auto [y2, s2] = pa_process(cfg, pa_initial_state(cfg), x);
    for (std::size_t i = 0; i < x.size(); ++i) CHECK(y1[i] == y2[i]);
    CHECK(s1.thermal_level == s2.thermal_level);
}

TEST_CASE("zero sensitivities make the device time invariant") {
    PaConfig cfg = quiet_config();
    cfg.thermal_gain_sensitivity = {0.0, 0.0};
    cfg.thermal_compression_sensitivity = 0.0;
    const auto x = random_vector(256, 303);

    PaState cold = pa_initial_state(cfg);
    PaState hot = pa_initial_state(cfg);
    hot.thermal_level = 0.5;
    const auto [y_cold, s1] = pa_process(cfg, cold, x);
    const auto [y_hot, s2] = pa_process(cfg, hot, x);
    for (std::size_t i = 0; i < x.size(); ++i) CHECK(y_cold[i] == y_hot[i]);
}

TEST_CASE("thermal level tracks average drive power") {
    PaConfig cfg = quiet_config();
    const double amp = 0.3;
    const std::vector<cdouble> x(200000, cdouble{amp, 0.0});
    const auto [y, st] = pa_process(cfg, pa_initial_state(cfg), x);
    // One-pole average of |x|^2 converges to amp^2.
    CHECK(st.thermal_level == doctest::Approx(amp * amp).epsilon(1e-3));

    // Thermal drift must actually move the gain: compare the first and last
    // output samples (after the FIR settles).
    const double early = std::abs(y[10]);
    const double late = std::abs(y.back());
    CHECK(std::abs(late - early) / early > 0.01);
}

TEST_CASE("compression is monotone over the rated range") {
    const PaConfig cfg;
    double prev = 0.0;
    for (int i = 1; i <= 120; ++i) {
        const double r = cfg.rated_input_max * static_cast<double>(i) / 120.0;
        const double out = std::abs(pa_static_gain(cfg, r)) * r;
        CHECK(out >= prev);
        prev = out;
    }
}

TEST_CASE("drive beyond the rated envelope saturates instead of exploding") {
    const PaConfig cfg = quiet_config();
    const std::vector<cdouble> x(64, cdouble{5.0, 0.0});
    const auto [y, st] = pa_process(cfg, pa_initial_state(cfg), x);
    for (const auto& v : y) CHECK(std::isfinite(std::abs(v)));
    // Output amplitude stays at the rated-envelope response.
    const double capped = std::abs(pa_static_gain(cfg, cfg.rated_input_max)) *
                          cfg.rated_input_max;
    CHECK(std::abs(y.back()) <= capped * 1.5);
}

TEST_CASE("output noise sits at the configured level") {
    PaConfig noisy;
    noisy.thermal_gain_sensitivity = {0.0, 0.0};
    noisy.thermal_compression_sensitivity = 0.0;
    PaConfig quiet = noisy;
    quiet.output_noise_floor_dbc = -1000.0;

    std::mt19937_64 rng(304);
    std::vector<cdouble> x(65536);
    for (auto& v : x) v = 0.05 * complex_gaussian(rng);

    const auto [yn, s1] = pa_process(noisy, pa_initial_state(noisy), x);
    const auto [yq, s2] = pa_process(quiet, pa_initial_state(quiet), x);
    double noise_power = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) noise_power += std::norm(yn[i] - yq[i]);
    noise_power /= static_cast<double>(x.size());

    // The floor is referenced to the small-signal output of a unit-RMS drive.
    const double ref = std::norm(noisy.small_signal_gain);
    const double dbc = 10.0 * std::log10(noise_power / ref);
    CHECK(dbc == doctest::Approx(-70.0).epsilon(0.01));
}

TEST_CASE("config validation catches broken setups") {
    PaConfig ok;
    CHECK(ok.problems().empty());

    PaConfig bad_alpha;
    bad_alpha.thermal_alpha = 1.5;
    CHECK(!bad_alpha.problems().empty());

    PaConfig no_taps;
    no_taps.memory_taps.clear();
    CHECK(!no_taps.problems().empty());

    PaConfig non_monotone;
    non_monotone.am_am_poly = {-2.0, 0.0};
    CHECK(!non_monotone.problems().empty());
}
