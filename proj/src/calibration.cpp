#include "eopd/calibration.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <future>
#include <limits>
#include <numeric>

namespace eopd {

namespace {

constexpr double kPi = 3.141592653589793238462643383279502884;

double quantile(std::vector<double> sorted, double q) {
    if (sorted.empty()) return 0.0;
    const double pos = q * static_cast<double>(sorted.size() - 1);
    const auto lo = static_cast<std::size_t>(pos);
    const auto hi = std::min(lo + 1, sorted.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    return sorted[lo] * (1.0 - frac) + sorted[hi] * frac;
}

}  // namespace

ParamVector ParamVector::nominal(double v_pi) {
    if (!(v_pi > 0.0) || !std::isfinite(v_pi)) {
        throw invalid_input("ParamVector::nominal: v_pi must be positive");
    }
    ParamVector pv;
    pv.alpha_dc = -v_pi;
    pv.beta_dc = -v_pi;
    pv.gamma = v_pi / 2.0;
    pv.alpha_sg = 1.0;
    pv.beta_sg = 1.0;
    return pv;
}

void ParamVector::validate() const {
    const double fields[] = {alpha_dc, beta_dc, gamma, alpha_sg, beta_sg};
    for (double f : fields) {
        if (!std::isfinite(f)) {
            throw invalid_input("ParamVector: non-finite entry");
        }
    }
    if (!(alpha_sg > 0.0) || !(beta_sg > 0.0)) {
        throw invalid_input("ParamVector: gains must be positive");
    }
}

void DescentConfig::validate() const {
    if (!(mu > 0.0) || !std::isfinite(mu)) {
        throw invalid_input("DescentConfig: mu must be positive");
    }
    if (epochs < 1) {
        throw invalid_input("DescentConfig: epochs must be >= 1");
    }
    if (!(gate >= 0.0) || !std::isfinite(gate)) {
        throw invalid_input("DescentConfig: gate must be >= 0");
    }
    if (!(reset_threshold > gate) || !std::isfinite(reset_threshold)) {
        throw invalid_input("DescentConfig: reset_threshold must exceed gate");
    }
    if (!(fd_step > 0.0) || !std::isfinite(fd_step)) {
        throw invalid_input("DescentConfig: fd_step must be positive");
    }
}

std::vector<double> predicted_m1(const ControlWaveform& w) {
    w.validate();
    const ModulatorParams nom = ModulatorParams::nominal(w.v_pi_ref);
    std::vector<double> m1(w.size());
    for (std::size_t k = 0; k < w.size(); ++k) {
        m1[k] = monitor_m1(field_transfer(nom, w.alpha_sig[k], w.beta_sig[k]));
    }
    return m1;
}

double risk(const std::vector<double>& m1_actual,
            const std::vector<double>& m1_predicted) {
    if (m1_actual.empty() || m1_actual.size() != m1_predicted.size()) {
        throw invalid_input("risk: sequences empty or of different length");
    }
    double acc = 0.0;
    for (std::size_t k = 0; k < m1_actual.size(); ++k) {
        const double d = m1_actual[k] - m1_predicted[k];
        acc += d * d;
    }
    return acc / static_cast<double>(m1_actual.size());
}

ModulatorParams effective_params(const ModulatorParams& true_plant,
                                 const ParamVector& pv, double v_pi_ref) {
    const ParamVector nom = ParamVector::nominal(v_pi_ref);
    ModulatorParams eff = true_plant;
    eff.alpha_dc = pv.alpha_dc + (true_plant.alpha_dc - nom.alpha_dc);
    eff.beta_dc = pv.beta_dc + (true_plant.beta_dc - nom.beta_dc);
    eff.gamma = pv.gamma + (true_plant.gamma - nom.gamma);
    eff.alpha_gain = true_plant.alpha_gain * pv.alpha_sg;
    eff.beta_gain = true_plant.beta_gain * pv.beta_sg;
    return eff;
}

RiskContext::RiskContext(const ModulatorParams& true_plant,
                         const ControlWaveform& w)
    : true_plant_(true_plant),
      v_pi_ref_(w.v_pi_ref),
      alpha_sig_(w.alpha_sig),
      beta_sig_(w.beta_sig),
      m1_predicted_(predicted_m1(w)) {
    true_plant_.validate();
}

ModulatorParams RiskContext::effective(const ParamVector& pv) const {
    return effective_params(true_plant_, pv, v_pi_ref_);
}

double RiskContext::operator()(const ParamVector& pv) const {
    const ModulatorParams eff = effective(pv);
    // Inline |field|^2 of field_transfer for the descent's hot path.
    const double ka = kPi * eff.alpha_gain / (2.0 * eff.v_pi_i);
    const double ca = kPi * eff.alpha_dc / (2.0 * eff.v_pi_i);
    const double kb = kPi * eff.beta_gain / (2.0 * eff.v_pi_q);
    const double cb = kPi * eff.beta_dc / (2.0 * eff.v_pi_q);
    const double cos_g = std::cos(kPi * eff.gamma / eff.v_pi_pm);
    const double wa = eff.combiner_norm * (1.0 + eff.imbalance);
    const double wb = eff.combiner_norm * (1.0 - eff.imbalance);
    double acc = 0.0;
    const std::size_t n = alpha_sig_.size();
    for (std::size_t k = 0; k < n; ++k) {
        const double a = wa * std::cos(ka * alpha_sig_[k] + ca);
        const double b = wb * std::cos(kb * beta_sig_[k] + cb);
        const double m1 = a * a + b * b + 2.0 * a * b * cos_g;
        const double d = m1 - m1_predicted_[k];
        acc += d * d;
    }
    return acc / static_cast<double>(n);
}

namespace {

// Per-parameter descent scale: voltages move in units of v_pi, gains in
// units of 1.
struct ParamAccess {
    double ParamVector::*member;
    double scale;
};

std::array<ParamAccess, 5> update_order(double v_pi) {
    // The engine's sequential update order: gamma, beta_sg, beta_dc,
    // alpha_sg, alpha_dc.
    return {{{&ParamVector::gamma, v_pi},
             {&ParamVector::beta_sg, 1.0},
             {&ParamVector::beta_dc, v_pi},
             {&ParamVector::alpha_sg, 1.0},
             {&ParamVector::alpha_dc, v_pi}}};
}

}  // namespace

ParamVector gradient(const ParamVector& pv, const RiskEvaluator& j_of,
                     double v_pi, const DescentConfig& cfg) {
    cfg.validate();
    if (!(v_pi > 0.0) || !std::isfinite(v_pi)) {
        throw invalid_input("gradient: v_pi must be positive");
    }
    ParamVector grad;
    grad.alpha_sg = 0.0;
    grad.beta_sg = 0.0;
    for (const auto& acc : update_order(v_pi)) {
        const double step = cfg.fd_step * acc.scale;
        ParamVector plus = pv;
        ParamVector minus = pv;
        plus.*(acc.member) += step;
        minus.*(acc.member) -= step;
        grad.*(acc.member) = (j_of(plus) - j_of(minus)) / (2.0 * step);
    }
    return grad;
}

CalibrationReport calibrate(const ModulatorParams& true_plant,
                            const ParamVector& init, const ControlWaveform& w,
                            const DescentConfig& cfg) {
    true_plant.validate();
    init.validate();
    cfg.validate();
    const RiskContext ctx(true_plant, w);
    const ParamVector nominal = ParamVector::nominal(w.v_pi_ref);
    const auto order = update_order(w.v_pi_ref);

    CalibrationReport report;
    ParamVector pv = init;
    double j_cur = ctx(pv);
    report.j_history.push_back(j_cur);
    report.param_history.push_back(pv);

    auto finish = [&](bool threw) {
        report.final_j = report.j_history.back();
        report.final_params = report.param_history.back();
        report.converged =
            std::isfinite(report.final_j) && report.final_j < kConvergenceThreshold;
        if (threw) {
            throw calibration_failure("calibrate: risk became non-finite", report);
        }
    };

    if (!std::isfinite(j_cur)) {
        finish(true);
    }
    if (j_cur <= cfg.gate) {
        finish(false);
        return report;
    }

    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
        if (j_cur > cfg.reset_threshold) {
            pv = nominal;
            j_cur = ctx(pv);
            ++report.resets;
            report.reset_epochs.push_back(epoch);
        }
        // Sequential updates with freshest values: each finite-difference
        // uses the parameters already updated this epoch.
        for (const auto& acc : order) {
            const double step = cfg.fd_step * acc.scale;
            ParamVector plus = pv;
            ParamVector minus = pv;
            plus.*(acc.member) += step;
            minus.*(acc.member) -= step;
            const double g = (ctx(plus) - ctx(minus)) / (2.0 * step);
            pv.*(acc.member) -= cfg.mu * g * acc.scale;
        }
        j_cur = ctx(pv);
        report.j_history.push_back(j_cur);
        report.param_history.push_back(pv);
        if (!std::isfinite(j_cur)) {
            finish(true);
        }
        if (j_cur <= cfg.gate) {
            break;
        }
    }
    finish(false);
    return report;
}

MonteCarloResult monte_carlo(int n_runs, const ModulatorParams& nominal_plant,
                             const ControlWaveform& w, const DriftSpec& spec,
                             const DescentConfig& cfg, int parallel_jobs) {
    if (n_runs < 1) {
        throw invalid_input("monte_carlo: n_runs must be >= 1");
    }
    spec.validate();
    cfg.validate();
    nominal_plant.validate();
    w.validate();
    const int jobs = std::max(1, parallel_jobs);
    const ParamVector init = ParamVector::nominal(w.v_pi_ref);

    MonteCarloResult result;
    result.runs.resize(static_cast<std::size_t>(n_runs));

    auto run_one = [&](int idx) {
        DriftSpec run_spec = spec;
        run_spec.seed = derive_seed(spec.seed, static_cast<std::uint64_t>(idx));
        const ModulatorParams drifted = apply_drift(nominal_plant, run_spec);
        MonteCarloRun row;
        row.seed = run_spec.seed;
        try {
            const CalibrationReport rep = calibrate(drifted, init, w, cfg);
            row.initial_j = rep.j_history.front();
            row.final_j = rep.final_j;
            row.epochs_run = static_cast<int>(rep.j_history.size()) - 1;
            row.resets = rep.resets;
            row.converged = rep.converged;
        } catch (const calibration_failure& e) {
            row.initial_j = e.report.j_history.front();
            row.final_j = e.report.final_j;
            row.epochs_run = static_cast<int>(e.report.j_history.size()) - 1;
            row.resets = e.report.resets;
            row.converged = false;
        }
        result.runs[static_cast<std::size_t>(idx)] = row;
    };

    if (jobs == 1) {
        for (int idx = 0; idx < n_runs; ++idx) run_one(idx);
    } else {
        std::vector<std::future<void>> pending;
        pending.reserve(static_cast<std::size_t>(jobs));
        int next = 0;
        while (next < n_runs || !pending.empty()) {
            while (next < n_runs && pending.size() < static_cast<std::size_t>(jobs)) {
                pending.push_back(std::async(std::launch::async, run_one, next));
                ++next;
            }
            pending.front().get();
            pending.erase(pending.begin());
        }
    }

    std::vector<double> finals;
    finals.reserve(result.runs.size());
    int converged = 0;
    for (const auto& row : result.runs) {
        // Non-finite outcomes sort as +inf so the quantiles stay ordered.
        finals.push_back(std::isfinite(row.final_j)
                             ? row.final_j
                             : std::numeric_limits<double>::infinity());
        converged += row.converged ? 1 : 0;
        ++result.reset_histogram[row.resets];
    }
    std::sort(finals.begin(), finals.end());
    result.convergence_fraction =
        static_cast<double>(converged) / static_cast<double>(n_runs);
    result.j_median = quantile(finals, 0.5);
    result.j_p10 = quantile(finals, 0.10);
    result.j_p90 = quantile(finals, 0.90);
    result.j_max = finals.back();
    return result;
}

}  // namespace eopd
