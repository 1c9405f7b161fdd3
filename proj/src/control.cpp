#include "eopd/control.hpp"

#include <algorithm>
#include <cmath>

#include "eopd/errors.hpp"

namespace eopd {

namespace {

constexpr double kPi = 3.141592653589793238462643383279502884;
constexpr double kTwoPi = 2.0 * kPi;

void check_uniform_series(const std::vector<double>& t, const char* who) {
    for (std::size_t k = 1; k < t.size(); ++k) {
        if (!(t[k] > t[k - 1])) {
            throw invalid_input(std::string(who) + ": time base not increasing");
        }
    }
}

}  // namespace

std::pair<double, double> synthesize_point(double theta_d, double r,
                                           double v_pi) {
    const double k = 2.0 * v_pi / kPi;
    const double a = std::clamp(k * std::asin(r * std::cos(theta_d)), -v_pi, v_pi);
    const double b = std::clamp(k * std::asin(r * std::sin(theta_d)), -v_pi, v_pi);
    return {a, b};
}

void PhaseTrajectory::validate() const {
    if (t.empty() || t.size() != theta_d.size()) {
        throw invalid_input("PhaseTrajectory: empty or mismatched lengths");
    }
    check_uniform_series(t, "PhaseTrajectory");
    for (std::size_t k = 0; k < theta_d.size(); ++k) {
        if (!std::isfinite(theta_d[k]) || !std::isfinite(t[k])) {
            throw invalid_input("PhaseTrajectory: non-finite sample");
        }
        if (k > 0 && std::abs(theta_d[k] - theta_d[k - 1]) > kPi) {
            throw invalid_input(
                "PhaseTrajectory: adjacent step exceeds pi (discontinuous)");
        }
    }
}

void ControlWaveform::validate() const {
    if (t.empty() || t.size() != alpha_sig.size() || t.size() != beta_sig.size()) {
        throw invalid_input("ControlWaveform: empty or mismatched lengths");
    }
    if (!(v_pi_ref > 0.0) || !std::isfinite(v_pi_ref)) {
        throw invalid_input("ControlWaveform: v_pi_ref must be positive");
    }
    if (!(r > 0.0) || r > 1.0) {
        throw invalid_input("ControlWaveform: r must lie in (0, 1]");
    }
    check_uniform_series(t, "ControlWaveform");
    for (std::size_t k = 0; k < t.size(); ++k) {
        if (!std::isfinite(alpha_sig[k]) || !std::isfinite(beta_sig[k])) {
            throw invalid_input("ControlWaveform: non-finite sample");
        }
    }
}

PhaseTrajectory linear_ramp_trajectory(double f_con, double duration,
                                       double sample_rate) {
    if (!std::isfinite(f_con) || f_con < 0.0) {
        throw invalid_input("linear_ramp_trajectory: f_con must be >= 0");
    }
    if (!(duration > 0.0) || !std::isfinite(duration)) {
        throw invalid_input("linear_ramp_trajectory: duration must be positive");
    }
    if (!(sample_rate > 0.0) || !std::isfinite(sample_rate)) {
        throw invalid_input("linear_ramp_trajectory: sample_rate must be positive");
    }
    if (sample_rate < 64.0 * f_con) {
        throw invalid_input(
            "linear_ramp_trajectory: undersampled (need >= 64 samples per "
            "control period)");
    }
    const auto n_steps = static_cast<long long>(std::llround(duration * sample_rate));
    if (n_steps < 1) {
        throw invalid_input("linear_ramp_trajectory: duration shorter than one sample");
    }
    PhaseTrajectory traj;
    traj.t.resize(static_cast<std::size_t>(n_steps) + 1);
    traj.theta_d.resize(traj.t.size());
    for (long long i = 0; i <= n_steps; ++i) {
        const double t = static_cast<double>(i) / sample_rate;
        traj.t[static_cast<std::size_t>(i)] = t;
        traj.theta_d[static_cast<std::size_t>(i)] = kTwoPi * f_con * t;
    }
    return traj;
}

ControlWaveform synthesize_controls(const PhaseTrajectory& traj, double r,
                                    double v_pi) {
    traj.validate();
    if (!(r > 0.0) || r > 1.0 || !std::isfinite(r)) {
        throw invalid_input("synthesize_controls: r must lie in (0, 1]");
    }
    if (!(v_pi > 0.0) || !std::isfinite(v_pi)) {
        throw invalid_input("synthesize_controls: v_pi must be positive");
    }
    ControlWaveform w;
    w.t = traj.t;
    w.v_pi_ref = v_pi;
    w.r = r;
    const std::size_t n = traj.theta_d.size();
    w.alpha_sig.resize(n);
    w.beta_sig.resize(n);
    for (std::size_t k = 0; k < n; ++k) {
        const auto [a, b] = synthesize_point(traj.theta_d[k], r, v_pi);
        w.alpha_sig[k] = a;
        w.beta_sig[k] = b;
    }
    return w;
}

std::vector<double> unwrap_phase(const std::vector<double>& wrapped) {
    if (wrapped.empty()) {
        throw invalid_input("unwrap_phase: empty input");
    }
    std::vector<double> out(wrapped.size());
    out[0] = wrapped[0];
    for (std::size_t k = 1; k < wrapped.size(); ++k) {
        double delta = std::fmod(wrapped[k] - wrapped[k - 1] + kPi, kTwoPi);
        if (delta <= 0.0) delta += kTwoPi;  // map into (0, 2*pi]
        out[k] = out[k - 1] + (delta - kPi);
    }
    return out;
}

std::vector<double> eopd_phase(const ControlWaveform& w) {
    w.validate();
    const double k = kPi / (2.0 * w.v_pi_ref);
    std::vector<double> wrapped(w.size());
    for (std::size_t idx = 0; idx < w.size(); ++idx) {
        const double x = std::sin(k * w.alpha_sig[idx]);
        const double y = std::sin(k * w.beta_sig[idx]);
        if (x == 0.0 && y == 0.0) {
            throw degenerate_input(
                "eopd_phase: zero field sample, phase undefined");
        }
        wrapped[idx] = std::atan2(y, x);
    }
    return unwrap_phase(wrapped);
}

}  // namespace eopd
