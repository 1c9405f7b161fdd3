#pragma once

#include <complex>
#include <cstdint>
#include <vector>

namespace eopd {

struct ControlWaveform;  // control.hpp

/// Physical parameters of the IQ modulator: two null-biased child MZMs
/// (in-phase and quadrature arms) combined behind a phase shifter.
/// All voltages in volts; gains and imbalance dimensionless.
struct ModulatorParams {
    double v_pi_i = 3.0;         // half-wave voltage, I-arm MZM (> 0)
    double v_pi_q = 3.0;         // half-wave voltage, Q-arm MZM (> 0)
    double v_pi_pm = 3.0;        // half-wave voltage, embedded phase shifter (> 0)
    double alpha_dc = -3.0;      // I-arm bias voltage (nominal -v_pi)
    double beta_dc = -3.0;       // Q-arm bias voltage (nominal -v_pi)
    double gamma = 1.5;          // phase-shifter bias voltage (nominal v_pi/2)
    double alpha_gain = 1.0;     // I drive-path gain (nominal 1)
    double beta_gain = 1.0;      // Q drive-path gain (nominal 1)
    double combiner_norm = 1.0;  // output normalization constant
    double imbalance = 0.0;      // I/Q power-split asymmetry

    // Canonical operating point for a device with half-wave voltage v_pi:
    // biases at -v_pi, -v_pi, v_pi/2 and unity gains.
    static ModulatorParams nominal(double v_pi);

    // Throws invalid_input if any half-wave voltage is non-positive or any
    // field is non-finite.
    void validate() const;
};

/// Random multiplicative perturbation applied to the five calibratable
/// parameters (alpha_dc, beta_dc, gamma, alpha_gain, beta_gain).
struct DriftSpec {
    enum class Distribution { uniform, gaussian };
    double relative_range = 0.30;  // fraction of nominal (>= 0)
    Distribution distribution = Distribution::uniform;
    std::uint64_t seed = 0;

    void validate() const;
};

/// Per-sample monitor photocurrents and ground-truth phase for a simulated
/// drive. Photocurrents are normalized (detector responsivity and load
/// absorbed into unit scale).
struct MonitorTrace {
    std::vector<double> t;           // seconds, uniformly spaced
    std::vector<double> m1;          // output-port photocurrent, |f|^2
    std::vector<double> m2;          // interferometer photocurrent, |1+f|^2
    std::vector<double> theta_true;  // unwrapped field argument, radians
};

// Complex field ratio E_out/E_in at drive (v_alpha, v_beta). The combiner's
// 1/2 is included and a fixed x2 normalization restores unit peak magnitude
// at nominal parameters, so the nominal device gives exactly
// sin(pi v_a / 2 v_pi) + j sin(pi v_b / 2 v_pi). Magnitude is bounded by
// 2 * combiner_norm for arbitrary drives and by combiner_norm on
// constraint-circle drives.
std::complex<double> field_transfer(const ModulatorParams& params, double v_alpha,
                                    double v_beta);

// |f|^2: normalized photocurrent at the output monitor port.
double monitor_m1(std::complex<double> f);

// |1 + f|^2: interferometer against a unit reference arm; equals
// 2(1 + cos theta) when |f| = 1.
double monitor_m2(std::complex<double> f);

// Copy of params with the five calibratable parameters independently
// perturbed: value *= (1 + delta), delta drawn per spec.distribution with
// half-width (uniform) or standard deviation (gaussian) spec.relative_range.
// Deterministic for a fixed seed.
ModulatorParams apply_drift(const ModulatorParams& params, const DriftSpec& spec);

// Drives the plant with w sample by sample; m1/m2 from the monitors and
// theta_true as the unwrapped argument of the field sequence.
MonitorTrace simulate_trace(const ModulatorParams& params, const ControlWaveform& w);

}  // namespace eopd
