#pragma once

#include <utility>
#include <vector>

namespace eopd {

/// Desired optical phase versus time, unbounded and continuous.
struct PhaseTrajectory {
    std::vector<double> t;        // seconds, uniformly spaced
    std::vector<double> theta_d;  // radians

    // Throws invalid_input on length mismatch, empty data, non-finite
    // values, or an adjacent theta_d step larger than pi.
    void validate() const;
};

/// Drive voltages realizing a phase trajectory on a device with half-wave
/// voltage v_pi_ref at constellation radius r. Bounded by +/- v_pi_ref.
struct ControlWaveform {
    std::vector<double> t;          // seconds
    std::vector<double> alpha_sig;  // volts, I-arm drive
    std::vector<double> beta_sig;   // volts, Q-arm drive
    double v_pi_ref = 0.0;          // half-wave voltage assumed by synthesis
    double r = 0.0;                 // target radius in (0, 1]

    void validate() const;
    std::size_t size() const { return t.size(); }
};

// theta_d(t) = 2 pi f_con t sampled on a uniform grid including both
// endpoints. Requires sample_rate >= 64 f_con (undersampled trajectories are
// rejected, not warned).
PhaseTrajectory linear_ramp_trajectory(double f_con, double duration,
                                       double sample_rate);

// Bounded continuous drive solution:
//   alpha_sig = (2 v_pi / pi) asin(r cos theta_d)
//   beta_sig  = (2 v_pi / pi) asin(r sin theta_d)
// (principal branch). Satisfies sin^2(pi a / 2 v_pi) + sin^2(pi b / 2 v_pi)
// = r^2 at every sample and stays within [-v_pi, v_pi].
ControlWaveform synthesize_controls(const PhaseTrajectory& traj, double r,
                                    double v_pi);

// Single-sample version of the drive solution, clamped to [-v_pi, v_pi] to
// absorb last-ulp rounding of asin at |r cos| = 1.
std::pair<double, double> synthesize_point(double theta_d, double r,
                                           double v_pi);

// Continuous phase from wrapped samples: out[0] = wrapped[0]; each later
// sample is shifted by the 2 pi multiple that keeps every adjacent step
// within (-pi, pi].
std::vector<double> unwrap_phase(const std::vector<double>& wrapped);

// Phase delay realized by a drive waveform:
// atan2(sin(pi b / 2 v_pi), sin(pi a / 2 v_pi)) per sample, then unwrapped.
// Equals the synthesis trajectory up to one global 2 pi multiple. Throws
// degenerate_input when both sine terms vanish at a sample (r = 0 point).
std::vector<double> eopd_phase(const ControlWaveform& w);

}  // namespace eopd
