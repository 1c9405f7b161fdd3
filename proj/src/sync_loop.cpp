#include "eopd/sync_loop.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <iostream>
#include <random>

#include "eopd/analysis.hpp"
#include "eopd/control.hpp"
#include "eopd/errors.hpp"
#include "eopd/plant.hpp"
#include "eopd/seeding.hpp"

namespace eopd {

namespace {

constexpr double kPi = 3.141592653589793238462643383279502884;
constexpr double kTwoPi = 2.0 * kPi;
constexpr double kSqrt2 = 1.4142135623730950488;
constexpr double kDivergenceLimit = 1e3;  // rad of accumulated raw residual
constexpr double kLockRmsThreshold = 0.05;  // rad

inline double sgn(double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); }

inline double wrap_pm_pi(double x) {
    double d = std::fmod(x + kPi, kTwoPi);
    if (d <= 0.0) d += kTwoPi;
    return d - kPi;
}

// Wrap to the principal QPSK sector (-pi/4, pi/4].
inline double wrap_sector(double x) {
    const double quarter = kPi / 2.0;
    double d = std::fmod(x + quarter / 2.0, quarter);
    if (d <= 0.0) d += quarter;
    return d - quarter / 2.0;
}

// Closed-loop -3 dB bandwidth of the standard second-order PI loop.
double closed_loop_bandwidth_hz(double fn_hz, double zeta) {
    const double a = 1.0 + 2.0 * zeta * zeta;
    return fn_hz * std::sqrt(a + std::sqrt(a * a + 1.0));
}

}  // namespace

void OffsetProcess::validate() const {
    const double fields[] = {rate, diffusion, amplitude, frequency};
    for (double f : fields) {
        if (!std::isfinite(f)) {
            throw invalid_input("OffsetProcess: non-finite parameter");
        }
    }
    if (diffusion < 0.0) {
        throw invalid_input("OffsetProcess: diffusion must be >= 0");
    }
    if (frequency < 0.0) {
        throw invalid_input("OffsetProcess: frequency must be >= 0");
    }
}

void LoopConfig::validate() const {
    if (!(symbol_rate > 0.0) || !std::isfinite(symbol_rate)) {
        throw invalid_input("LoopConfig: symbol_rate must be positive");
    }
    if (samples_per_symbol < 4) {
        throw invalid_input("LoopConfig: samples_per_symbol must be >= 4");
    }
    if (n_symbols < 1) {
        throw invalid_input("LoopConfig: n_symbols must be >= 1");
    }
    if (!std::isfinite(detector_gain) || !std::isfinite(vco_gain) ||
        !std::isfinite(loop_filter.kp) || !std::isfinite(loop_filter.ki)) {
        throw invalid_input("LoopConfig: gains must be finite");
    }
    if (!(v_pi > 0.0) || !std::isfinite(v_pi)) {
        throw invalid_input("LoopConfig: v_pi must be positive");
    }
    if (!(r > 0.0) || r > 1.0) {
        throw invalid_input("LoopConfig: r must lie in (0, 1]");
    }
    offset.validate();
    const double fn = loop_natural_frequency_hz(*this);
    if (fn > 0.0) {
        const double g = kTwoPi * std::abs(vco_gain) * std::abs(detector_gain) * kSqrt2;
        const double zeta = loop_filter.kp * g / (2.0 * kTwoPi * fn);
        if (closed_loop_bandwidth_hz(fn, zeta) > symbol_rate / 10.0) {
            std::cerr << "warning: loop bandwidth exceeds symbol_rate/10; "
                         "detector averaging model may be inaccurate\n";
        }
    }
}

std::vector<double> qpsk_source(long n_symbols, std::uint64_t seed) {
    if (n_symbols < 1) {
        throw invalid_input("qpsk_source: n_symbols must be >= 1");
    }
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<int> pick(0, 3);
    std::vector<double> phases(static_cast<std::size_t>(n_symbols));
    for (auto& p : phases) {
        p = kPi / 4.0 + pick(rng) * kPi / 2.0;
    }
    return phases;
}

std::vector<double> offset_process(const OffsetProcess& process,
                                   std::size_t n_samples, double dt,
                                   std::uint64_t seed) {
    process.validate();
    if (n_samples == 0 || !(dt > 0.0)) {
        throw invalid_input("offset_process: need n_samples >= 1 and dt > 0");
    }
    std::vector<double> phi(n_samples, 0.0);
    switch (process.kind) {
        case OffsetProcess::Kind::ramp:
            for (std::size_t k = 0; k < n_samples; ++k) {
                phi[k] = process.rate * static_cast<double>(k) * dt;
            }
            break;
        case OffsetProcess::Kind::random_walk: {
            std::mt19937_64 rng(seed);
            std::normal_distribution<double> gauss(0.0, 1.0);
            const double sigma = std::sqrt(process.diffusion * dt);
            for (std::size_t k = 1; k < n_samples; ++k) {
                phi[k] = phi[k - 1] + sigma * gauss(rng);
            }
            break;
        }
        case OffsetProcess::Kind::sinusoidal:
            for (std::size_t k = 0; k < n_samples; ++k) {
                phi[k] = process.amplitude *
                         std::sin(kTwoPi * process.frequency * static_cast<double>(k) * dt);
            }
            break;
    }
    return phi;
}

std::pair<double, double> receiver_mix(double phi_m, double phi_off,
                                       double theta_eopd) {
    const double psi = phi_m + phi_off + theta_eopd;
    return {std::cos(psi), std::sin(psi)};
}

void receiver_mix(const std::vector<double>& phi_m,
                  const std::vector<double>& phi_off,
                  const std::vector<double>& theta_eopd,
                  std::vector<double>& i_out, std::vector<double>& q_out) {
    if (phi_m.size() != phi_off.size() || phi_m.size() != theta_eopd.size()) {
        throw invalid_input("receiver_mix: length mismatch");
    }
    i_out.resize(phi_m.size());
    q_out.resize(phi_m.size());
    for (std::size_t k = 0; k < phi_m.size(); ++k) {
        const auto [i, q] = receiver_mix(phi_m[k], phi_off[k], theta_eopd[k]);
        i_out[k] = i;
        q_out[k] = q;
    }
}

std::vector<double> phase_detector(const std::vector<double>& i,
                                   const std::vector<double>& q,
                                   double detector_gain,
                                   int samples_per_symbol) {
    if (i.size() != q.size()) {
        throw invalid_input("phase_detector: length mismatch");
    }
    if (samples_per_symbol < 1) {
        throw invalid_input("phase_detector: samples_per_symbol must be >= 1");
    }
    const auto window = static_cast<std::size_t>(samples_per_symbol);
    std::vector<double> out(i.size());
    std::vector<double> ring(window, 0.0);
    double sum = 0.0;
    for (std::size_t k = 0; k < i.size(); ++k) {
        const double raw = detector_gain * (sgn(i[k]) * q[k] - sgn(q[k]) * i[k]);
        const std::size_t slot = k % window;
        sum += raw - ring[slot];
        ring[slot] = raw;
        const double filled = static_cast<double>(std::min(k + 1, window));
        out[k] = sum / filled;
    }
    return out;
}

PiGains design_pi_gains(double natural_frequency_hz, double damping,
                        double detector_gain, double vco_gain) {
    if (!(natural_frequency_hz > 0.0) || !(damping > 0.0) ||
        !std::isfinite(natural_frequency_hz) || !std::isfinite(damping)) {
        throw invalid_input("design_pi_gains: need positive frequency and damping");
    }
    const double g = kTwoPi * vco_gain * detector_gain * kSqrt2;
    if (!(std::abs(g) > 0.0) || !std::isfinite(g)) {
        throw invalid_input("design_pi_gains: zero or non-finite path gain");
    }
    const double wn = kTwoPi * natural_frequency_hz;
    PiGains gains;
    gains.kp = 2.0 * damping * wn / g;
    gains.ki = wn * wn / g;
    return gains;
}

double loop_natural_frequency_hz(const LoopConfig& cfg) {
    const double g =
        kTwoPi * std::abs(cfg.vco_gain) * std::abs(cfg.detector_gain) * kSqrt2;
    const double wn2 = cfg.loop_filter.ki * g;
    return wn2 > 0.0 ? std::sqrt(wn2) / kTwoPi : 0.0;
}

LoopTrace run_loop(const LoopConfig& cfg) {
    cfg.validate();
    const std::size_t n = cfg.n_samples();
    const double dt = cfg.dt();
    const int sps = cfg.samples_per_symbol;
    const bool closed = cfg.mode == LoopMode::closed;

    const std::vector<double> phi_m = qpsk_source(cfg.n_symbols, cfg.seed);
    const std::vector<double> phi_off =
        offset_process(cfg.offset, n, dt, derive_seed(cfg.seed, 1));
    const ModulatorParams plant = ModulatorParams::nominal(cfg.v_pi);

    LoopTrace trace;
    for (auto* v : {&trace.t, &trace.phi_off, &trace.theta_eopd, &trace.v_pd,
                    &trace.v_pd_lf, &trace.i_out, &trace.q_out, &trace.residual}) {
        v->reserve(n);
    }

    double theta_d = 0.0;
    double theta_eopd = 0.0;
    double prev_arg = 0.0;
    double integrator = 0.0;
    const auto window = static_cast<std::size_t>(sps);
    std::vector<double> ring(window, 0.0);
    double ring_sum = 0.0;

    for (std::size_t k = 0; k < n; ++k) {
        // Actuator: command phase -> drive voltages -> optical field.
        const double theta_cmd = closed ? theta_d : 0.0;
        const auto [va, vb] = synthesize_point(theta_cmd, cfg.r, cfg.v_pi);
        trace.max_drive_alpha = std::max(trace.max_drive_alpha, std::abs(va));
        trace.max_drive_beta = std::max(trace.max_drive_beta, std::abs(vb));
        const std::complex<double> f = field_transfer(plant, va, vb);
        const double arg = std::atan2(f.imag(), f.real());
        theta_eopd = (k == 0) ? arg : theta_eopd + wrap_pm_pi(arg - prev_arg);
        prev_arg = arg;

        // Receiver: mix, detect, filter.
        const auto [i_s, q_s] =
            receiver_mix(phi_m[k / window], phi_off[k], theta_eopd);
        const double raw =
            cfg.detector_gain * (sgn(i_s) * q_s - sgn(q_s) * i_s);
        const std::size_t slot = k % window;
        ring_sum += raw - ring[slot];
        ring[slot] = raw;
        const double v_pd =
            ring_sum / static_cast<double>(std::min(k + 1, window));
        integrator += v_pd * dt;
        const double v_lf = cfg.loop_filter.kp * v_pd + cfg.loop_filter.ki * integrator;

        // Control engine: correction frequency applied with inverted sign
        // (negative feedback), so v_pd_lf settles at +rate/(2 pi vco_gain)
        // when tracking a +rate ramp.
        if (closed) {
            theta_d -= kTwoPi * cfg.vco_gain * v_lf * dt;
        }

        const double resid_raw = phi_off[k] + theta_eopd;
        trace.t.push_back(static_cast<double>(k) * dt);
        trace.phi_off.push_back(phi_off[k]);
        trace.theta_eopd.push_back(theta_eopd);
        trace.v_pd.push_back(v_pd);
        trace.v_pd_lf.push_back(v_lf);
        trace.i_out.push_back(i_s);
        trace.q_out.push_back(q_s);
        trace.residual.push_back(wrap_sector(resid_raw));

        if (closed && std::abs(resid_raw) > kDivergenceLimit) {
            throw instability_error(
                "run_loop: residual diverged beyond 1000 rad", std::move(trace));
        }
    }
    return trace;
}

std::pair<std::vector<double>, std::vector<double>> symbol_centers(
    const LoopTrace& trace, int samples_per_symbol) {
    if (samples_per_symbol < 1) {
        throw invalid_input("symbol_centers: samples_per_symbol must be >= 1");
    }
    const auto sps = static_cast<std::size_t>(samples_per_symbol);
    std::vector<double> ci, cq;
    for (std::size_t k = sps / 2; k < trace.i_out.size(); k += sps) {
        ci.push_back(trace.i_out[k]);
        cq.push_back(trace.q_out[k]);
    }
    return {std::move(ci), std::move(cq)};
}

LoopSummary summarize_loop(const LoopTrace& trace, const LoopConfig& cfg,
                           double tail_fraction) {
    if (!(tail_fraction > 0.0) || tail_fraction > 1.0) {
        throw invalid_input("summarize_loop: tail_fraction must lie in (0, 1]");
    }
    const auto sps = static_cast<std::size_t>(cfg.samples_per_symbol);
    const std::size_t n = trace.t.size();
    const std::size_t total_syms = n / sps;
    const auto tail_syms = static_cast<std::size_t>(
        static_cast<double>(total_syms) * tail_fraction);
    if (tail_syms < 10) {
        throw invalid_input("summarize_loop: tail window shorter than 10 symbols");
    }
    const std::size_t start = (total_syms - tail_syms) * sps;

    LoopSummary s;
    double acc = 0.0;
    double lf = 0.0;
    for (std::size_t k = start; k < n; ++k) {
        acc += trace.residual[k] * trace.residual[k];
        lf += trace.v_pd_lf[k];
    }
    s.residual_rms = std::sqrt(acc / static_cast<double>(n - start));
    s.v_pd_lf_mean = lf / static_cast<double>(n - start);

    std::vector<double> ci, cq, ti, tq;
    for (std::size_t k = start; k < n; ++k) {
        ti.push_back(trace.i_out[k]);
        tq.push_back(trace.q_out[k]);
    }
    for (std::size_t k = start + sps / 2; k < n; k += sps) {
        ci.push_back(trace.i_out[k]);
        cq.push_back(trace.q_out[k]);
    }
    s.evm_percent = evm(ci, cq);
    const double ts = 1.0 / cfg.symbol_rate;
    const double fs = cfg.symbol_rate * static_cast<double>(sps);
    s.eye_opening_i = eye_metrics(ti, ts, fs).eye_opening;
    s.eye_opening_q = eye_metrics(tq, ts, fs).eye_opening;
    s.locked = s.residual_rms < kLockRmsThreshold;
    return s;
}

}  // namespace eopd
