#include "eopd/plant.hpp"

#include <cmath>
#include <random>

#include "eopd/control.hpp"
#include "eopd/errors.hpp"

namespace eopd {

namespace {

// The combiner's 1/2 is kept explicit; this fixed factor restores unit
// peak magnitude at nominal parameters so the nominal device is exactly
// sin(pi v_a / 2 v_pi) + j sin(pi v_b / 2 v_pi).
constexpr double kPeakRescale = 2.0;

constexpr double kPi = 3.141592653589793238462643383279502884;

}  // namespace

ModulatorParams ModulatorParams::nominal(double v_pi) {
    if (!(v_pi > 0.0) || !std::isfinite(v_pi)) {
        throw invalid_input("nominal: v_pi must be positive and finite");
    }
    ModulatorParams p;
    p.v_pi_i = v_pi;
    p.v_pi_q = v_pi;
    p.v_pi_pm = v_pi;
    p.alpha_dc = -v_pi;
    p.beta_dc = -v_pi;
    p.gamma = v_pi / 2.0;
    p.alpha_gain = 1.0;
    p.beta_gain = 1.0;
    p.combiner_norm = 1.0;
    p.imbalance = 0.0;
    return p;
}

void ModulatorParams::validate() const {
    const double fields[] = {v_pi_i,     v_pi_q,    v_pi_pm,       alpha_dc,
                             beta_dc,    gamma,     alpha_gain,    beta_gain,
                             combiner_norm, imbalance};
    for (double f : fields) {
        if (!std::isfinite(f)) {
            throw invalid_input("ModulatorParams: non-finite field");
        }
    }
    if (!(v_pi_i > 0.0) || !(v_pi_q > 0.0) || !(v_pi_pm > 0.0)) {
        throw invalid_input("ModulatorParams: half-wave voltages must be positive");
    }
}

void DriftSpec::validate() const {
    if (!std::isfinite(relative_range) || relative_range < 0.0) {
        throw invalid_input("DriftSpec: relative_range must be finite and >= 0");
    }
}

std::complex<double> field_transfer(const ModulatorParams& params, double v_alpha,
                                    double v_beta) {
    params.validate();
    if (!std::isfinite(v_alpha) || !std::isfinite(v_beta)) {
        throw invalid_input("field_transfer: non-finite drive voltage");
    }
    const double arm_i =
        std::cos(kPi * (params.alpha_gain * v_alpha + params.alpha_dc) /
                 (2.0 * params.v_pi_i));
    const double arm_q =
        std::cos(kPi * (params.beta_gain * v_beta + params.beta_dc) /
                 (2.0 * params.v_pi_q));
    const double phi = kPi * params.gamma / params.v_pi_pm;
    const std::complex<double> quad(std::cos(phi), std::sin(phi));
    const double scale = params.combiner_norm * 0.5 * kPeakRescale;
    return scale * ((1.0 + params.imbalance) * arm_i +
                    quad * (1.0 - params.imbalance) * arm_q);
}

double monitor_m1(std::complex<double> f) { return std::norm(f); }

double monitor_m2(std::complex<double> f) {
    return std::norm(std::complex<double>(1.0, 0.0) + f);
}

ModulatorParams apply_drift(const ModulatorParams& params, const DriftSpec& spec) {
    spec.validate();
    params.validate();
    ModulatorParams out = params;
    std::mt19937_64 rng(spec.seed);
    auto draw = [&]() {
        if (spec.distribution == DriftSpec::Distribution::uniform) {
            std::uniform_real_distribution<double> d(-spec.relative_range,
                                                     spec.relative_range);
            return d(rng);
        }
        std::normal_distribution<double> d(0.0, spec.relative_range);
        return d(rng);
    };
    // Fixed draw order keeps a given seed meaningful across runs.
    out.alpha_dc = params.alpha_dc * (1.0 + draw());
    out.beta_dc = params.beta_dc * (1.0 + draw());
    out.gamma = params.gamma * (1.0 + draw());
    out.alpha_gain = params.alpha_gain * (1.0 + draw());
    out.beta_gain = params.beta_gain * (1.0 + draw());
    return out;
}

MonitorTrace simulate_trace(const ModulatorParams& params, const ControlWaveform& w) {
    params.validate();
    w.validate();
    const std::size_t n = w.size();
    MonitorTrace trace;
    trace.t = w.t;
    trace.m1.resize(n);
    trace.m2.resize(n);
    std::vector<double> wrapped(n);
    for (std::size_t k = 0; k < n; ++k) {
        const std::complex<double> f =
            field_transfer(params, w.alpha_sig[k], w.beta_sig[k]);
        trace.m1[k] = monitor_m1(f);
        trace.m2[k] = monitor_m2(f);
        wrapped[k] = std::atan2(f.imag(), f.real());
    }
    trace.theta_true = unwrap_phase(wrapped);
    return trace;
}

}  // namespace eopd
