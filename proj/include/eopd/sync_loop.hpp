#pragma once

#include <cstdint>
#include <stdexcept>
#include <utility>
#include <vector>

namespace eopd {

/// Phase-offset disturbance between signal and local oscillator paths.
struct OffsetProcess {
    enum class Kind { ramp, random_walk, sinusoidal };
    Kind kind = Kind::ramp;
    double rate = 0.0;       // rad/s       (ramp)
    double diffusion = 0.0;  // rad^2/s     (random walk)
    double amplitude = 0.0;  // rad         (sinusoidal)
    double frequency = 0.0;  // Hz          (sinusoidal)

    void validate() const;
};

struct PiGains {
    double kp = 0.0;  // proportional, 1/volt-normalized
    double ki = 0.0;  // integral, 1/(volt*second)
};

enum class LoopMode { open, closed };

struct LoopConfig {
    double symbol_rate = 1e6;      // baud
    int samples_per_symbol = 16;   // >= 4
    long n_symbols = 10000;        // >= 1
    OffsetProcess offset;          // phi_off generator
    double detector_gain = 1.0;    // volts/radian small-signal
    PiGains loop_filter;           // PI gains
    double vco_gain = 1e5;         // Hz/volt
    LoopMode mode = LoopMode::closed;
    std::uint64_t seed = 0;
    double v_pi = 3.0;             // actuator half-wave voltage
    double r = 1.0;                // synthesis radius

    double dt() const { return 1.0 / (symbol_rate * samples_per_symbol); }
    std::size_t n_samples() const {
        return static_cast<std::size_t>(n_symbols) * samples_per_symbol;
    }

    // Throws invalid_input on violated ranges; emits a warning (stderr) when
    // the small-signal loop bandwidth exceeds symbol_rate / 10.
    void validate() const;
};

struct LoopTrace {
    std::vector<double> t;           // seconds
    std::vector<double> phi_off;     // radians
    std::vector<double> theta_eopd;  // radians, unwrapped actuator phase
    std::vector<double> v_pd;        // detector output, symbol-averaged
    std::vector<double> v_pd_lf;     // loop-filter output
    std::vector<double> i_out;       // demodulated in-phase
    std::vector<double> q_out;       // demodulated quadrature
    std::vector<double> residual;    // phi_off + theta_eopd wrapped to
                                     // (-pi/4, pi/4]
    double max_drive_alpha = 0.0;    // peak |alpha_sig| seen during the run
    double max_drive_beta = 0.0;     // peak |beta_sig| seen during the run
};

// Thrown when the closed loop diverges (|phi_off + theta_eopd| beyond
// 1000 rad); carries the trace accumulated so far.
struct instability_error : std::runtime_error {
    LoopTrace partial;
    instability_error(const std::string& what, LoopTrace trace)
        : std::runtime_error(what), partial(std::move(trace)) {}
};

// Message phases: i.i.d. uniform draws from {pi/4, 3pi/4, 5pi/4, 7pi/4},
// one entry per symbol (the loop holds each for samples_per_symbol samples).
std::vector<double> qpsk_source(long n_symbols, std::uint64_t seed);

// phi_off sampled on an n_samples grid with spacing dt; starts at 0.
std::vector<double> offset_process(const OffsetProcess& process,
                                   std::size_t n_samples, double dt,
                                   std::uint64_t seed);

// Self-homodyne downconversion: i = cos(phi_m + phi_off + theta_eopd),
// q = sin(...). With theta_eopd = -phi_off this recovers cos/sin(phi_m).
std::pair<double, double> receiver_mix(double phi_m, double phi_off,
                                       double theta_eopd);
void receiver_mix(const std::vector<double>& phi_m,
                  const std::vector<double>& phi_off,
                  const std::vector<double>& theta_eopd,
                  std::vector<double>& i_out, std::vector<double>& q_out);

// Sign-based QPSK Costas characteristic,
//   v = detector_gain * (sign(i) q - sign(q) i),
// boxcar-averaged over one symbol (trailing window of samples_per_symbol
// samples). Small-signal slope detector_gain * sqrt(2) near constellation
// points; zero at residual = 0 mod pi/2.
std::vector<double> phase_detector(const std::vector<double>& i,
                                   const std::vector<double>& q,
                                   double detector_gain,
                                   int samples_per_symbol);

// PI gains for a target natural frequency (Hz) and damping ratio given the
// detector small-signal slope and the actuator frequency gain.
PiGains design_pi_gains(double natural_frequency_hz, double damping,
                        double detector_gain, double vco_gain);

// Small-signal natural frequency (Hz) implied by a PI design; used for the
// bandwidth sanity warning.
double loop_natural_frequency_hz(const LoopConfig& cfg);

// Time-stepped simulation. Closed mode: detector -> PI -> correction
// frequency f = vco_gain * v_pd_lf applied with inverted sign (negative
// feedback), theta_d accumulating -2 pi f dt, so locking onto a ramp at
// +rate leaves v_pd_lf near +rate / (2 pi vco_gain). Open mode freezes the
// actuator at theta_d = 0 while everything else runs.
LoopTrace run_loop(const LoopConfig& cfg);

// I/Q at symbol centers (sample index k*sps + sps/2): the decision-point
// constellation.
std::pair<std::vector<double>, std::vector<double>> symbol_centers(
    const LoopTrace& trace, int samples_per_symbol);

struct LoopSummary {
    double residual_rms = 0.0;    // radians over the tail window
    double evm_percent = 0.0;     // decision-point EVM over the tail
    double eye_opening_i = 0.0;
    double eye_opening_q = 0.0;
    double v_pd_lf_mean = 0.0;    // mean loop-filter output over the tail
    bool locked = false;          // residual_rms < 0.05 rad
};

// Metrics over the trailing tail_fraction of the trace (the post-transient
// window).
LoopSummary summarize_loop(const LoopTrace& trace, const LoopConfig& cfg,
                           double tail_fraction = 0.5);

}  // namespace eopd
