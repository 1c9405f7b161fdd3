#include "eopd/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>

#include <unsupported/Eigen/FFT>

#include "eopd/control.hpp"
#include "eopd/errors.hpp"

namespace eopd {

namespace {

constexpr double kPi = 3.141592653589793238462643383279502884;
constexpr double kTwoPi = 2.0 * kPi;

}  // namespace

Spectrum spectrum(const std::vector<double>& samples, double sample_rate,
                  SpectralWindow window) {
    if (samples.size() < 16) {
        throw invalid_input("spectrum: need at least 16 samples");
    }
    if (!(sample_rate > 0.0) || !std::isfinite(sample_rate)) {
        throw invalid_input("spectrum: sample_rate must be positive");
    }
    const std::size_t n = samples.size();
    std::vector<std::complex<double>> windowed(n);
    for (std::size_t k = 0; k < n; ++k) {
        if (!std::isfinite(samples[k])) {
            throw invalid_input("spectrum: non-finite sample");
        }
        const double w =
            window == SpectralWindow::hann
                ? 0.5 * (1.0 - std::cos(kTwoPi * static_cast<double>(k) /
                                        static_cast<double>(n - 1)))
                : 1.0;
        windowed[k] = samples[k] * w;
    }

    Eigen::FFT<double> fft;
    std::vector<std::complex<double>> bins;
    fft.fwd(bins, windowed);

    Spectrum s;
    const std::size_t n_half = n / 2 + 1;
    s.freq.resize(n_half);
    s.mag_db.resize(n_half);
    s.resolution = sample_rate / static_cast<double>(n);
    double peak = 0.0;
    std::vector<double> mags(n_half);
    for (std::size_t k = 0; k < n_half; ++k) {
        s.freq[k] = static_cast<double>(k) * s.resolution;
        mags[k] = std::abs(bins[k]);
        peak = std::max(peak, mags[k]);
    }
    if (!(peak > 0.0)) {
        throw degenerate_input("spectrum: identically zero signal");
    }
    for (std::size_t k = 0; k < n_half; ++k) {
        // Floor keeps empty bins finite (about -6000 dB) instead of -inf.
        const double m = std::max(mags[k], 1e-300);
        s.mag_db[k] = 20.0 * std::log10(m / peak);
    }
    return s;
}

double harmonic_suppression(const Spectrum& s, double f0, int n_harmonics) {
    if (s.freq.empty() || s.freq.size() != s.mag_db.size()) {
        throw invalid_input("harmonic_suppression: empty or malformed spectrum");
    }
    if (n_harmonics < 2) {
        throw invalid_input("harmonic_suppression: need n_harmonics >= 2");
    }
    if (!(f0 > 0.0) || f0 > s.freq.back()) {
        throw invalid_input("harmonic_suppression: f0 outside spectrum range");
    }
    const auto n_bins = static_cast<long>(s.freq.size());
    // +/- 3 bins absorbs the window main lobe around each tone.
    const long half_window = 3;
    auto tone_level = [&](double f) {
        const long center = std::lround(f / s.resolution);
        double level = -std::numeric_limits<double>::infinity();
        for (long b = center - half_window; b <= center + half_window; ++b) {
            if (b >= 0 && b < n_bins) {
                level = std::max(level, s.mag_db[static_cast<std::size_t>(b)]);
            }
        }
        return level;
    };

    const double fundamental = tone_level(f0);
    double strongest_harmonic = -std::numeric_limits<double>::infinity();
    bool any = false;
    for (int h = 2; h <= n_harmonics; ++h) {
        const double fh = f0 * h;
        if (fh > s.freq.back() + 0.5 * s.resolution) break;
        strongest_harmonic = std::max(strongest_harmonic, tone_level(fh));
        any = true;
    }
    if (!any) {
        throw invalid_input(
            "harmonic_suppression: no harmonic lies inside the spectrum");
    }
    return fundamental - strongest_harmonic;
}

double phase_slope(const std::vector<double>& theta,
                   const std::vector<double>& t) {
    if (theta.size() < 2 || theta.size() != t.size()) {
        throw invalid_input("phase_slope: need >= 2 samples of equal length");
    }
    const std::vector<double> unwrapped = unwrap_phase(theta);
    const auto n = static_cast<double>(t.size());
    double t_mean = 0.0, th_mean = 0.0;
    for (std::size_t k = 0; k < t.size(); ++k) {
        t_mean += t[k];
        th_mean += unwrapped[k];
    }
    t_mean /= n;
    th_mean /= n;
    double num = 0.0, den = 0.0;
    for (std::size_t k = 0; k < t.size(); ++k) {
        const double dt = t[k] - t_mean;
        num += dt * (unwrapped[k] - th_mean);
        den += dt * dt;
    }
    if (!(den > 0.0)) {
        throw invalid_input("phase_slope: degenerate time base");
    }
    return num / den;
}

double evm(const std::vector<double>& i, const std::vector<double>& q,
           ConstellationRef reference) {
    (void)reference;  // QPSK is the only supported constellation
    if (i.empty() || i.size() != q.size()) {
        throw invalid_input("evm: empty input or length mismatch");
    }
    const double half = std::sqrt(0.5);
    double acc = 0.0;
    for (std::size_t k = 0; k < i.size(); ++k) {
        // Nearest unit-radius QPSK point: sign quadrant selection.
        const double ci = std::copysign(half, i[k]);
        const double cq = std::copysign(half, q[k]);
        const double di = i[k] - ci;
        const double dq = q[k] - cq;
        acc += di * di + dq * dq;
    }
    return 100.0 * std::sqrt(acc / static_cast<double>(i.size()));
}

EyeMetrics eye_metrics(const std::vector<double>& waveform,
                       double symbol_period, double sample_rate) {
    if (!(symbol_period > 0.0) || !(sample_rate > 0.0)) {
        throw invalid_input("eye_metrics: periods and rates must be positive");
    }
    const double sps_real = symbol_period * sample_rate;
    const auto sps = static_cast<std::size_t>(std::llround(sps_real));
    if (sps < 2 || std::abs(sps_real - static_cast<double>(sps)) > 1e-6) {
        throw invalid_input(
            "eye_metrics: symbol period must span an integer number (>= 2) of "
            "samples");
    }
    const std::size_t n_traces = waveform.size() / sps;
    if (n_traces < 10) {
        throw invalid_input("eye_metrics: need at least 10 symbol periods");
    }

    std::vector<double> centers(n_traces);
    for (std::size_t j = 0; j < n_traces; ++j) {
        centers[j] = waveform[j * sps + sps / 2];
    }
    double mid = 0.0;
    for (double c : centers) mid += c;
    mid /= static_cast<double>(n_traces);

    double upper_min = std::numeric_limits<double>::infinity();
    double lower_max = -std::numeric_limits<double>::infinity();
    double upper_mean = 0.0, lower_mean = 0.0;
    std::size_t n_upper = 0, n_lower = 0;
    for (double c : centers) {
        if (c > mid) {
            upper_min = std::min(upper_min, c);
            upper_mean += c;
            ++n_upper;
        } else if (c < mid) {
            lower_max = std::max(lower_max, c);
            lower_mean += c;
            ++n_lower;
        }
    }

    EyeMetrics m;
    m.n_traces = static_cast<int>(n_traces);
    if (n_upper == 0 || n_lower == 0) {
        // No two-level structure at the sampling instant: closed eye.
        m.eye_opening = 0.0;
        m.evm_percent = 0.0;
        return m;
    }
    upper_mean /= static_cast<double>(n_upper);
    lower_mean /= static_cast<double>(n_lower);
    const double separation = upper_mean - lower_mean;
    m.eye_opening =
        std::clamp((upper_min - lower_max) / separation, 0.0, 1.0);

    double acc = 0.0;
    for (double c : centers) {
        const double rail = (c > mid) ? upper_mean : lower_mean;
        acc += (c - rail) * (c - rail);
    }
    m.evm_percent = 100.0 * std::sqrt(acc / static_cast<double>(n_traces)) /
                    (0.5 * separation);
    return m;
}

}  // namespace eopd
