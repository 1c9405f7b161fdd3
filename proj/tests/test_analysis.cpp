#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "eopd/analysis.hpp"
#include "eopd/errors.hpp"

using namespace eopd;

namespace {
constexpr double kPi = 3.141592653589793238462643383279502884;
constexpr double kTwoPi = 2.0 * kPi;

// n samples of sum of cosines at (freq, amplitude) pairs, fs sample rate.
std::vector<double> tones(std::size_t n, double fs,
                          std::initializer_list<std::pair<double, double>> fa) {
    std::vector<double> out(n, 0.0);
    for (std::size_t k = 0; k < n; ++k) {
        const double t = static_cast<double>(k) / fs;
        for (const auto& [f, a] : fa) out[k] += a * std::cos(kTwoPi * f * t);
    }
    return out;
}

std::size_t argmax(const std::vector<double>& v) {
    return static_cast<std::size_t>(
        std::distance(v.begin(), std::max_element(v.begin(), v.end())));
}
}  // namespace

TEST_CASE("spectrum") {
    const double fs = 6.4e7;
    SUBCASE("single tone peaks at its frequency with 0 dB") {
        for (auto win : {SpectralWindow::hann, SpectralWindow::rect}) {
            const auto s = spectrum(tones(4096, fs, {{1e6, 1.0}}), fs, win);
            REQUIRE(s.freq.size() == 2049);
            CHECK(s.resolution == doctest::Approx(fs / 4096.0).epsilon(1e-15));
            const std::size_t peak = argmax(s.mag_db);
            CHECK(s.freq[peak] == doctest::Approx(1e6).epsilon(1e-12));
            CHECK(s.mag_db[peak] == 0.0);
        }
    }
    SUBCASE("rectangular window of an integer-period tone is bin-exact") {
        const auto s =
            spectrum(tones(4096, fs, {{1e6, 1.0}}), fs, SpectralWindow::rect);
        for (std::size_t k = 0; k < s.mag_db.size(); ++k) {
            if (k != 64) CHECK(s.mag_db[k] < -250.0);
        }
    }
    SUBCASE("constant signal concentrates at DC") {
        const std::vector<double> dc(64, 1.0);
        const auto s = spectrum(dc, fs, SpectralWindow::rect);
        CHECK(argmax(s.mag_db) == 0);
        CHECK(s.mag_db[0] == 0.0);
        CHECK(s.mag_db[5] < -250.0);
    }
    SUBCASE("two tones keep their amplitude ratio in dB") {
        const auto s = spectrum(tones(4096, fs, {{1e6, 1.0}, {5e6, 0.01}}), fs,
                                SpectralWindow::rect);
        CHECK(s.mag_db[64] == 0.0);
        CHECK(s.mag_db[320] == doctest::Approx(-40.0).epsilon(1e-9));
    }
    SUBCASE("input guards") {
        CHECK_THROWS_AS(spectrum(std::vector<double>(15, 1.0), fs),
                        invalid_input);
        CHECK_THROWS_AS(spectrum(std::vector<double>(64, 0.0), fs),
                        degenerate_input);
        CHECK_THROWS_AS(spectrum(tones(64, fs, {{1e6, 1.0}}), 0.0),
                        invalid_input);
        std::vector<double> nan_sig(64, 1.0);
        nan_sig[3] = std::nan("");
        CHECK_THROWS_AS(spectrum(nan_sig, fs), invalid_input);
    }
}

TEST_CASE("harmonic_suppression") {
    const double fs = 6.4e7;
    SUBCASE("pure tone leaves only numerical residue in the harmonics") {
        const auto s =
            spectrum(tones(4096, fs, {{1e6, 1.0}}), fs, SpectralWindow::rect);
        CHECK(harmonic_suppression(s, 1e6, 5) > 100.0);
    }
    SUBCASE("a one-percent second harmonic reads as 40 dB") {
        const auto s = spectrum(tones(4096, fs, {{1e6, 1.0}, {2e6, 0.01}}), fs,
                                SpectralWindow::rect);
        CHECK(harmonic_suppression(s, 1e6, 5) ==
              doctest::Approx(40.0).epsilon(1e-6));
    }
    SUBCASE("the strongest harmonic governs") {
        const auto s = spectrum(
            tones(4096, fs, {{1e6, 1.0}, {2e6, 0.01}, {3e6, 0.05}}), fs,
            SpectralWindow::rect);
        const double expected = -20.0 * std::log10(0.05);
        CHECK(harmonic_suppression(s, 1e6, 5) ==
              doctest::Approx(expected).epsilon(1e-6));
        // Excluding the third harmonic restores the 40 dB reading.
        CHECK(harmonic_suppression(s, 1e6, 2) ==
              doctest::Approx(40.0).epsilon(1e-6));
    }
    SUBCASE("argument guards") {
        const auto s =
            spectrum(tones(4096, fs, {{1e6, 1.0}}), fs, SpectralWindow::rect);
        CHECK_THROWS_AS(harmonic_suppression(s, 0.0, 5), invalid_input);
        CHECK_THROWS_AS(harmonic_suppression(s, 1e9, 5), invalid_input);
        CHECK_THROWS_AS(harmonic_suppression(s, 1e6, 1), invalid_input);
        // Fundamental near Nyquist: no harmonic fits inside the spectrum.
        CHECK_THROWS_AS(harmonic_suppression(s, 3e7, 5), invalid_input);
        CHECK_THROWS_AS(harmonic_suppression(Spectrum{}, 1e6, 5), invalid_input);
    }
}

TEST_CASE("phase_slope") {
    SUBCASE("exact linear ramp") {
        std::vector<double> t, theta;
        for (int k = 0; k <= 640; ++k) {
            t.push_back(static_cast<double>(k) / 6.4e7);
            theta.push_back(kTwoPi * 1e6 * t.back());
        }
        CHECK(phase_slope(theta, t) ==
              doctest::Approx(kTwoPi * 1e6).epsilon(1e-9));
    }
    SUBCASE("arbitrary slope with an offset") {
        std::vector<double> t, theta;
        for (int k = 0; k < 500; ++k) {
            t.push_back(0.01 * k);
            theta.push_back(3.7 * t.back() + 0.2);
        }
        CHECK(phase_slope(theta, t) == doctest::Approx(3.7).epsilon(1e-9));
    }
    SUBCASE("constant phase has zero slope") {
        std::vector<double> t, theta;
        for (int k = 0; k < 100; ++k) {
            t.push_back(0.1 * k);
            theta.push_back(0.321);
        }
        CHECK(std::abs(phase_slope(theta, t)) < 1e-9);
    }
    SUBCASE("invariant under wrapping of the input") {
        std::vector<double> t, plain, wrapped;
        for (int k = 0; k < 400; ++k) {
            t.push_back(0.1 * k);
            const double th = 5.0 * t.back();
            plain.push_back(th);
            wrapped.push_back(std::atan2(std::sin(th), std::cos(th)));
        }
        const double a = phase_slope(plain, t);
        const double b = phase_slope(wrapped, t);
        CHECK(a == doctest::Approx(5.0).epsilon(1e-9));
        CHECK(b == doctest::Approx(a).epsilon(1e-9));
    }
    SUBCASE("guards") {
        CHECK_THROWS_AS(phase_slope({1.0}, {0.0}), invalid_input);
        CHECK_THROWS_AS(phase_slope({1.0, 2.0}, {0.0}), invalid_input);
        CHECK_THROWS_AS(phase_slope({1.0, 2.0, 3.0}, {0.5, 0.5, 0.5}),
                        invalid_input);
    }
}

TEST_CASE("evm") {
    const double h = std::sqrt(0.5);
    SUBCASE("ideal constellation scores zero") {
        const std::vector<double> i = {h, -h, -h, h};
        const std::vector<double> q = {h, h, -h, -h};
        CHECK(evm(i, q) == 0.0);
    }
    SUBCASE("uniform rotation by pi/8 hits the closed form") {
        std::vector<double> i, q;
        for (int m = 0; m < 4; ++m) {
            const double phi = kPi / 4.0 + m * kPi / 2.0 + kPi / 8.0;
            i.push_back(std::cos(phi));
            q.push_back(std::sin(phi));
        }
        // 100 sqrt(2 (1 - cos(pi/8))), high-precision reference value.
        CHECK(evm(i, q) ==
              doctest::Approx(39.01806440322565).epsilon(1e-12));
    }
    SUBCASE("isotropic gaussian noise of scale sigma reads as 100 sigma") {
        const double sigma = 0.05;
        std::mt19937_64 rng(4);
        std::normal_distribution<double> axis(0.0, sigma / std::sqrt(2.0));
        std::vector<double> i, q;
        for (int k = 0; k < 40000; ++k) {
            const int m = k % 4;
            const double phi = kPi / 4.0 + m * kPi / 2.0;
            i.push_back(std::cos(phi) + axis(rng));
            q.push_back(std::sin(phi) + axis(rng));
        }
        CHECK(evm(i, q) == doctest::Approx(100.0 * sigma).epsilon(0.02));
    }
    SUBCASE("invariant under quarter-turn rotation of the input") {
        std::mt19937_64 rng(8);
        std::normal_distribution<double> axis(0.0, 0.1);
        std::vector<double> i, q, ri, rq;
        for (int k = 0; k < 1000; ++k) {
            const double phi = kPi / 4.0 + (k % 4) * kPi / 2.0;
            const double x = std::cos(phi) + axis(rng);
            const double y = std::sin(phi) + axis(rng);
            i.push_back(x);
            q.push_back(y);
            ri.push_back(-y);  // rotate by +pi/2
            rq.push_back(x);
        }
        CHECK(evm(ri, rq) == doctest::Approx(evm(i, q)).epsilon(1e-13));
    }
    SUBCASE("guards") {
        CHECK_THROWS_AS(evm({}, {}), invalid_input);
        CHECK_THROWS_AS(evm({1.0}, {}), invalid_input);
    }
}

TEST_CASE("eye_metrics") {
    const double fs = 1.6e7;
    const double ts = 1e-6;  // 16 samples per symbol
    SUBCASE("clean NRZ opens fully") {
        std::vector<double> wave;
        for (int sym = 0; sym < 40; ++sym) {
            const double level = (sym % 2 == 0) ? 1.0 : -1.0;
            for (int k = 0; k < 16; ++k) wave.push_back(level);
        }
        const auto m = eye_metrics(wave, ts, fs);
        CHECK(m.n_traces == 40);
        CHECK(m.eye_opening == doctest::Approx(1.0).epsilon(1e-12));
        CHECK(m.evm_percent == doctest::Approx(0.0).epsilon(1e-12));
    }
    SUBCASE("jittered rails shrink the opening") {
        std::mt19937_64 rng(15);
        std::uniform_real_distribution<double> jitter(-0.1, 0.1);
        std::vector<double> wave;
        for (int sym = 0; sym < 200; ++sym) {
            const double level = ((sym * 7) % 3 == 0 ? -1.0 : 1.0) + jitter(rng);
            for (int k = 0; k < 16; ++k) wave.push_back(level);
        }
        const auto m = eye_metrics(wave, ts, fs);
        CHECK(m.eye_opening < 1.0);
        CHECK(m.eye_opening > 0.8);
        CHECK(m.evm_percent > 0.0);
        CHECK(m.evm_percent < 12.0);
    }
    SUBCASE("incommensurate rotation closes the eye") {
        std::vector<double> wave;
        const double f = 0.237e6;  // not a symbol-rate multiple
        for (int k = 0; k < 16 * 200; ++k) {
            wave.push_back(std::cos(kTwoPi * f * static_cast<double>(k) / fs));
        }
        const auto m = eye_metrics(wave, ts, fs);
        CHECK(m.eye_opening < 0.1);
    }
    SUBCASE("single-level waveform reports a closed eye") {
        const std::vector<double> wave(16 * 20, 1.0);
        const auto m = eye_metrics(wave, ts, fs);
        CHECK(m.eye_opening == 0.0);
        CHECK(m.evm_percent == 0.0);
        CHECK(m.n_traces == 20);
    }
    SUBCASE("guards") {
        const std::vector<double> wave(16 * 9, 1.0);
        CHECK_THROWS_AS(eye_metrics(wave, ts, fs), invalid_input);
        const std::vector<double> ok(16 * 20, 1.0);
        CHECK_THROWS_AS(eye_metrics(ok, ts, 1.55e7), invalid_input);
        CHECK_THROWS_AS(eye_metrics(ok, 0.0, fs), invalid_input);
        CHECK_THROWS_AS(eye_metrics(ok, ts, -1.0), invalid_input);
    }
}
