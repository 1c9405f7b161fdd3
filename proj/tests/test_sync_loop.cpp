#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstddef>
#include <vector>

#include "eopd/errors.hpp"
#include "eopd/sync_loop.hpp"

using namespace eopd;

namespace {
constexpr double kPi = 3.141592653589793238462643383279502884;
constexpr double kTwoPi = 2.0 * kPi;
constexpr double kSqrt2 = 1.4142135623730950488;

// Reference loop: 1 Mbaud, 16 samples per symbol, 20 kHz natural frequency,
// critically-ish damped, tracking hardware with 100 kHz/V actuation.
LoopConfig reference_loop(long n_symbols = 4000) {
    LoopConfig cfg;
    cfg.symbol_rate = 1e6;
    cfg.samples_per_symbol = 16;
    cfg.n_symbols = n_symbols;
    cfg.detector_gain = 1.0;
    cfg.vco_gain = 1e5;
    cfg.loop_filter = design_pi_gains(2e4, 0.7071067811865476, cfg.detector_gain,
                                      cfg.vco_gain);
    cfg.mode = LoopMode::closed;
    cfg.seed = 3;
    return cfg;
}

double dist_to_quarter_grid(double x) {
    const double q = kPi / 2.0;
    const double m = std::round(x / q) * q;
    return std::abs(x - m);
}
}  // namespace

TEST_CASE("qpsk_source") {
    SUBCASE("draws only the four diagonal phases") {
        const auto phases = qpsk_source(1000, 11);
        for (double p : phases) {
            const double idx = (p - kPi / 4.0) / (kPi / 2.0);
            CHECK(std::abs(idx - std::round(idx)) < 1e-12);
            CHECK(p >= kPi / 4.0 - 1e-12);
            CHECK(p <= 7.0 * kPi / 4.0 + 1e-12);
        }
    }
    SUBCASE("deterministic for a fixed seed") {
        CHECK(qpsk_source(500, 21) == qpsk_source(500, 21));
        const auto a = qpsk_source(10000, 21);
        const auto b = qpsk_source(10000, 22);
        bool any_diff = false;
        for (std::size_t k = 0; k < a.size(); ++k) any_diff |= (a[k] != b[k]);
        CHECK(any_diff);
    }
    SUBCASE("near-uniform occupancy over many draws") {
        const auto phases = qpsk_source(100000, 31);
        int counts[4] = {0, 0, 0, 0};
        for (double p : phases) {
            const int idx =
                static_cast<int>(std::lround((p - kPi / 4.0) / (kPi / 2.0)));
            REQUIRE(idx >= 0);
            REQUIRE(idx < 4);
            ++counts[idx];
        }
        for (int c : counts) {
            CHECK(std::abs(c / 100000.0 - 0.25) < 0.01);
        }
    }
    SUBCASE("single symbol and bad count") {
        CHECK(qpsk_source(1, 0).size() == 1);
        CHECK_THROWS_AS(qpsk_source(0, 0), invalid_input);
    }
}

TEST_CASE("offset_process") {
    SUBCASE("ramp accumulates rate times time") {
        OffsetProcess p;
        p.kind = OffsetProcess::Kind::ramp;
        p.rate = 2000.0 * kPi;
        const auto phi = offset_process(p, 1001, 1e-6, 0);
        CHECK(phi.front() == 0.0);
        CHECK(phi.back() == doctest::Approx(kTwoPi).epsilon(1e-12));
    }
    SUBCASE("zero-diffusion walk stays at zero") {
        OffsetProcess p;
        p.kind = OffsetProcess::Kind::random_walk;
        p.diffusion = 0.0;
        for (double v : offset_process(p, 200, 1e-6, 77)) CHECK(v == 0.0);
    }
    SUBCASE("walk variance grows like diffusion times time") {
        OffsetProcess p;
        p.kind = OffsetProcess::Kind::random_walk;
        p.diffusion = 1.0;
        const double dt = 1e-2;
        const std::size_t n = 100;
        double acc = 0.0;
        const int trials = 1000;
        for (int trial = 0; trial < trials; ++trial) {
            const auto phi =
                offset_process(p, n, dt, static_cast<std::uint64_t>(trial));
            acc += phi.back() * phi.back();
        }
        const double expected = p.diffusion * static_cast<double>(n - 1) * dt;
        CHECK(acc / trials == doctest::Approx(expected).epsilon(0.15));
    }
    SUBCASE("sinusoid hits its quarter-period peak") {
        OffsetProcess p;
        p.kind = OffsetProcess::Kind::sinusoidal;
        p.amplitude = 0.3;
        p.frequency = 1000.0;
        const auto phi = offset_process(p, 26, 1e-5, 0);
        CHECK(phi.front() == 0.0);
        CHECK(phi[25] == doctest::Approx(0.3).epsilon(1e-12));
    }
    SUBCASE("invalid arguments rejected") {
        OffsetProcess bad;
        bad.diffusion = -1.0;
        CHECK_THROWS_AS(offset_process(bad, 10, 1e-6, 0), invalid_input);
        OffsetProcess ok;
        CHECK_THROWS_AS(offset_process(ok, 0, 1e-6, 0), invalid_input);
        CHECK_THROWS_AS(offset_process(ok, 10, 0.0, 0), invalid_input);
    }
}

TEST_CASE("receiver_mix") {
    SUBCASE("pass-through at zero offset") {
        const auto [i, q] = receiver_mix(kPi / 4.0, 0.0, 0.0);
        CHECK(i == doctest::Approx(std::cos(kPi / 4.0)).epsilon(1e-15));
        CHECK(q == doctest::Approx(std::sin(kPi / 4.0)).epsilon(1e-15));
    }
    SUBCASE("actuator phase cancels the offset") {
        const auto [i, q] = receiver_mix(3.0 * kPi / 4.0, 1.234, -1.234);
        CHECK(i == doctest::Approx(std::cos(3.0 * kPi / 4.0)).epsilon(1e-12));
        CHECK(q == doctest::Approx(std::sin(3.0 * kPi / 4.0)).epsilon(1e-12));
    }
    SUBCASE("vector form matches the scalar form") {
        const std::vector<double> phi_m = {0.1, 0.9, 2.2};
        const std::vector<double> phi_off = {0.3, -0.2, 0.5};
        const std::vector<double> theta = {-0.1, 0.0, 0.7};
        std::vector<double> i_out, q_out;
        receiver_mix(phi_m, phi_off, theta, i_out, q_out);
        REQUIRE(i_out.size() == 3);
        for (std::size_t k = 0; k < 3; ++k) {
            const auto [i, q] = receiver_mix(phi_m[k], phi_off[k], theta[k]);
            CHECK(i_out[k] == i);
            CHECK(q_out[k] == q);
        }
        std::vector<double> bad = {0.0};
        CHECK_THROWS_AS(receiver_mix(phi_m, bad, theta, i_out, q_out),
                        invalid_input);
    }
    SUBCASE("unit-magnitude output") {
        const auto [i, q] = receiver_mix(5.0 * kPi / 4.0, 0.77, 0.33);
        CHECK(i * i + q * q == doctest::Approx(1.0).epsilon(1e-15));
    }
}

TEST_CASE("phase_detector") {
    SUBCASE("zero at every constellation point") {
        std::vector<double> i, q;
        for (int m = 0; m < 4; ++m) {
            const double phi = kPi / 4.0 + m * kPi / 2.0;
            for (int k = 0; k < 8; ++k) {
                i.push_back(std::cos(phi));
                q.push_back(std::sin(phi));
            }
        }
        for (double v : phase_detector(i, q, 1.0, 8)) {
            CHECK(std::abs(v) < 1e-15);
        }
    }
    SUBCASE("small-signal slope is detector_gain times sqrt(2)") {
        const double eps = 0.05;
        for (double gain : {1.0, 2.5}) {
            for (int m = 0; m < 4; ++m) {
                const double phi = kPi / 4.0 + m * kPi / 2.0 + eps;
                std::vector<double> i(16, std::cos(phi)), q(16, std::sin(phi));
                const auto out = phase_detector(i, q, gain, 8);
                const double expected = gain * kSqrt2 * std::sin(eps);
                CHECK(out.back() == doctest::Approx(expected).epsilon(1e-9));
                CHECK(out.back() > 0.0);
            }
        }
    }
    SUBCASE("blind to quarter-turn rotations") {
        const double phi = kPi / 4.0 + kPi / 2.0;  // another ideal point
        std::vector<double> i(8, std::cos(phi)), q(8, std::sin(phi));
        for (double v : phase_detector(i, q, 1.0, 8)) {
            CHECK(std::abs(v) < 1e-15);
        }
    }
    SUBCASE("boxcar averages the trailing symbol window") {
        const double eps = 0.05;
        const double pp = kPi / 4.0 + eps;
        const double pm = kPi / 4.0 - eps;
        std::vector<double> i, q;
        for (int k = 0; k < 3; ++k) {
            i.push_back(std::cos(pp));
            q.push_back(std::sin(pp));
        }
        for (int k = 0; k < 5; ++k) {
            i.push_back(std::cos(pm));
            q.push_back(std::sin(pm));
        }
        const auto out = phase_detector(i, q, 1.0, 8);
        const double vp = std::sin(pp) - std::cos(pp);
        const double vm = std::sin(pm) - std::cos(pm);
        CHECK(out[0] == doctest::Approx(vp).epsilon(1e-15));
        CHECK(out[1] == doctest::Approx(vp).epsilon(1e-15));
        CHECK(out.back() ==
              doctest::Approx((3.0 * vp + 5.0 * vm) / 8.0).epsilon(1e-12));
    }
    SUBCASE("invalid arguments rejected") {
        std::vector<double> i(4, 1.0), q(3, 0.0);
        CHECK_THROWS_AS(phase_detector(i, q, 1.0, 4), invalid_input);
        std::vector<double> q4(4, 0.0);
        CHECK_THROWS_AS(phase_detector(i, q4, 1.0, 0), invalid_input);
    }
}

TEST_CASE("design_pi_gains round trip") {
    const double fn = 2e4;
    const double zeta = 0.7071067811865476;
    const double kd = 1.0;
    const double kv = 1e5;
    const PiGains g = design_pi_gains(fn, zeta, kd, kv);
    CHECK(g.kp > 0.0);
    CHECK(g.ki > 0.0);

    LoopConfig cfg;
    cfg.detector_gain = kd;
    cfg.vco_gain = kv;
    cfg.loop_filter = g;
    CHECK(loop_natural_frequency_hz(cfg) == doctest::Approx(fn).epsilon(1e-9));

    const double path = kTwoPi * kv * kd * kSqrt2;
    CHECK(g.kp * path / (2.0 * kTwoPi * fn) ==
          doctest::Approx(zeta).epsilon(1e-12));

    CHECK_THROWS_AS(design_pi_gains(0.0, zeta, kd, kv), invalid_input);
    CHECK_THROWS_AS(design_pi_gains(fn, 0.0, kd, kv), invalid_input);
    CHECK_THROWS_AS(design_pi_gains(fn, zeta, 0.0, kv), invalid_input);
}

TEST_CASE("run_loop closed on a frequency ramp") {
    LoopConfig cfg = reference_loop();
    cfg.offset.kind = OffsetProcess::Kind::ramp;
    cfg.offset.rate = 4e5;  // rad/s

    const LoopTrace trace = run_loop(cfg);
    REQUIRE(trace.t.size() == cfg.n_samples());
    const LoopSummary s = summarize_loop(trace, cfg, 0.5);

    SUBCASE("locks and tracks with small residual") {
        CHECK(s.locked);
        CHECK(s.residual_rms < 0.05);
        CHECK(s.evm_percent < 5.0);
        CHECK(s.eye_opening_i > 0.8);
        CHECK(s.eye_opening_q > 0.8);
    }
    SUBCASE("loop-filter output matches the offset rate") {
        const double expected = cfg.offset.rate / (kTwoPi * cfg.vco_gain);
        CHECK(s.v_pd_lf_mean == doctest::Approx(expected).epsilon(0.02));
    }
    SUBCASE("actuator phase is endless while drives stay bounded") {
        const double span =
            std::abs(trace.theta_eopd.back() - trace.theta_eopd.front());
        CHECK(span > 100.0 * kPi);
        CHECK(trace.max_drive_alpha <= cfg.v_pi);
        CHECK(trace.max_drive_beta <= cfg.v_pi);
        // Tail slope of the actuator phase cancels the offset ramp.
        const std::size_t h = trace.t.size() / 2;
        const double slope =
            (trace.theta_eopd.back() - trace.theta_eopd[h]) /
            (trace.t.back() - trace.t[h]);
        CHECK(slope == doctest::Approx(-cfg.offset.rate).epsilon(0.01));
    }
    SUBCASE("absolute phase settles on the quarter-turn grid") {
        CHECK(dist_to_quarter_grid(trace.phi_off.back() +
                                   trace.theta_eopd.back()) < 0.05);
    }
}

TEST_CASE("run_loop open leaves the actuator frozen") {
    LoopConfig cfg = reference_loop();
    cfg.mode = LoopMode::open;
    cfg.offset.kind = OffsetProcess::Kind::ramp;
    cfg.offset.rate = 4e5;

    const LoopTrace trace = run_loop(cfg);
    for (std::size_t k = 0; k < trace.theta_eopd.size(); k += 977) {
        CHECK(std::abs(trace.theta_eopd[k]) < 1e-12);
    }
    const LoopSummary s = summarize_loop(trace, cfg, 0.5);
    CHECK(!s.locked);
    CHECK(s.evm_percent > 30.0);
    CHECK(s.eye_opening_i < 0.2);
    CHECK(s.eye_opening_q < 0.2);
}

TEST_CASE("run_loop closed with no disturbance is quiescent") {
    LoopConfig cfg = reference_loop(1000);
    cfg.offset.kind = OffsetProcess::Kind::ramp;
    cfg.offset.rate = 0.0;

    const LoopTrace trace = run_loop(cfg);
    const LoopSummary s = summarize_loop(trace, cfg, 0.5);
    CHECK(s.locked);
    CHECK(s.residual_rms < 1e-3);
    CHECK(s.evm_percent < 0.1);
    CHECK(std::abs(s.v_pd_lf_mean) < 1e-3);
}

TEST_CASE("run_loop tracks slow sinusoidal and random-walk offsets") {
    SUBCASE("sinusoid well inside the loop bandwidth") {
        LoopConfig cfg = reference_loop();
        cfg.offset.kind = OffsetProcess::Kind::sinusoidal;
        cfg.offset.amplitude = 0.3;
        cfg.offset.frequency = 1e3;
        const LoopSummary s = summarize_loop(run_loop(cfg), cfg, 0.5);
        CHECK(s.locked);
    }
    SUBCASE("moderate phase diffusion") {
        LoopConfig cfg = reference_loop();
        cfg.offset.kind = OffsetProcess::Kind::random_walk;
        cfg.offset.diffusion = 100.0;
        const LoopSummary s = summarize_loop(run_loop(cfg), cfg, 0.5);
        CHECK(s.locked);
    }
}

TEST_CASE("run_loop reports divergence with the partial trace") {
    LoopConfig cfg = reference_loop(200);
    cfg.offset.kind = OffsetProcess::Kind::ramp;
    cfg.offset.rate = 1e9;  // far beyond any attainable correction speed

    CHECK_THROWS_AS(run_loop(cfg), instability_error);
    try {
        run_loop(cfg);
        FAIL("expected instability_error");
    } catch (const instability_error& e) {
        CHECK(!e.partial.t.empty());
        CHECK(e.partial.t.size() < cfg.n_samples());
        CHECK(std::abs(e.partial.phi_off.back() + e.partial.theta_eopd.back()) >
              1e3);
    }

    // The same disturbance in open mode is observed, not tracked: no throw.
    cfg.mode = LoopMode::open;
    CHECK_NOTHROW(run_loop(cfg));
}

TEST_CASE("symbol_centers picks mid-symbol samples") {
    LoopTrace trace;
    for (int k = 0; k < 12; ++k) {
        trace.i_out.push_back(static_cast<double>(k));
        trace.q_out.push_back(static_cast<double>(100 + k));
    }
    const auto [ci, cq] = symbol_centers(trace, 4);
    REQUIRE(ci.size() == 3);
    CHECK(ci[0] == 2.0);
    CHECK(ci[1] == 6.0);
    CHECK(ci[2] == 10.0);
    CHECK(cq[0] == 102.0);
    CHECK_THROWS_AS(symbol_centers(trace, 0), invalid_input);
}

TEST_CASE("summarize_loop guards") {
    LoopConfig cfg = reference_loop(30);
    cfg.offset.rate = 0.0;
    const LoopTrace trace = run_loop(cfg);
    CHECK_THROWS_AS(summarize_loop(trace, cfg, 0.0), invalid_input);
    CHECK_THROWS_AS(summarize_loop(trace, cfg, 1.5), invalid_input);
    // 30 symbols at tail_fraction 0.2 leaves a 6-symbol window: too short.
    CHECK_THROWS_AS(summarize_loop(trace, cfg, 0.2), invalid_input);
    CHECK_NOTHROW(summarize_loop(trace, cfg, 0.5));
}

TEST_CASE("LoopConfig validation") {
    LoopConfig cfg = reference_loop();
    CHECK_NOTHROW(cfg.validate());
    LoopConfig bad = cfg;
    bad.samples_per_symbol = 3;
    CHECK_THROWS_AS(bad.validate(), invalid_input);
    bad = cfg;
    bad.n_symbols = 0;
    CHECK_THROWS_AS(bad.validate(), invalid_input);
    bad = cfg;
    bad.r = 0.0;
    CHECK_THROWS_AS(bad.validate(), invalid_input);
    bad = cfg;
    bad.r = 1.5;
    CHECK_THROWS_AS(bad.validate(), invalid_input);
    bad = cfg;
    bad.v_pi = 0.0;
    CHECK_THROWS_AS(bad.validate(), invalid_input);
    bad = cfg;
    bad.symbol_rate = 0.0;
    CHECK_THROWS_AS(bad.validate(), invalid_input);
}
