#pragma once

#include <vector>

namespace eopd {

struct Spectrum {
    std::vector<double> freq;    // hertz, ascending from 0
    std::vector<double> mag_db;  // dB relative to peak (max = 0 exactly)
    double resolution = 0.0;     // bin width, hertz
};

struct EyeMetrics {
    double eye_opening = 0.0;  // in [0, 1]
    double evm_percent = 0.0;  // center-sample deviation from the rails
    int n_traces = 0;          // folded symbol periods
};

enum class SpectralWindow { hann, rect };

// One-sided windowed DFT magnitude, normalized so the peak bin is 0 dB.
// Requires at least 16 samples.
Spectrum spectrum(const std::vector<double>& samples, double sample_rate,
                  SpectralWindow window = SpectralWindow::hann);

// Fundamental magnitude minus the strongest of harmonics 2..n (dB). Each
// tone is searched within a few bins of its nominal frequency to absorb
// windowing spread. f0 must lie inside the spectrum range.
double harmonic_suppression(const Spectrum& s, double f0, int n_harmonics);

// Least-squares slope of theta(t) in rad/s. Requires >= 2 samples and a
// non-degenerate time base.
double phase_slope(const std::vector<double>& theta,
                   const std::vector<double>& t);

enum class ConstellationRef { qpsk };

// RMS error vector magnitude against the nearest ideal constellation point
// (unit-radius QPSK at odd multiples of pi/4), normalized to the
// constellation radius, in percent.
double evm(const std::vector<double>& i, const std::vector<double>& q,
           ConstellationRef reference = ConstellationRef::qpsk);

// Folds the waveform modulo the symbol period and evaluates the eye at the
// center sampling instant: opening = (min upper rail - max lower rail) /
// (mean rail separation), clamped to [0, 1]. evm_percent is the RMS
// center-sample deviation from the nearest rail mean over half the rail
// separation, in percent. Requires >= 10 symbol periods.
EyeMetrics eye_metrics(const std::vector<double>& waveform,
                       double symbol_period, double sample_rate);

}  // namespace eopd
