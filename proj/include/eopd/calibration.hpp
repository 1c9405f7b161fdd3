#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <vector>

#include "eopd/control.hpp"
#include "eopd/errors.hpp"
#include "eopd/plant.hpp"
#include "eopd/seeding.hpp"

namespace eopd {

/// The five quantities the calibration engine optimizes: bias voltages for
/// the two child MZMs and the phase shifter, plus the two drive gains.
struct ParamVector {
    double alpha_dc = 0.0;  // volts
    double beta_dc = 0.0;   // volts
    double gamma = 0.0;     // volts
    double alpha_sg = 1.0;  // dimensionless
    double beta_sg = 1.0;   // dimensionless

    // Design operating point for a device with half-wave voltage v_pi.
    static ParamVector nominal(double v_pi);

    // Throws invalid_input on non-finite entries or non-positive gains.
    void validate() const;
};

struct DescentConfig {
    double mu = 0.05;              // learning rate in normalized coordinates
    int epochs = 500;              // max iterations
    double gate = 1e-5;            // initial-risk gate (0.001%)
    double reset_threshold = 0.5;  // risk level triggering reset to nominal
    double fd_step = 1e-3;         // finite-difference step, normalized units
    std::uint64_t seed = 0;        // reserved for randomized variants

    void validate() const;
};

struct CalibrationReport {
    std::vector<double> j_history;            // risk per epoch; [0] = initial
    std::vector<ParamVector> param_history;   // state per epoch; [0] = init
    int resets = 0;                           // reset-to-nominal count
    bool converged = false;                   // final_j < 1e-3
    double final_j = 0.0;                     // last j_history entry
    std::vector<int> reset_epochs;            // epochs that began with a reset
    ParamVector final_params;
};

// Thrown when the descent produces a non-finite risk; carries the progress
// made up to the failing epoch.
struct calibration_failure : numeric_failure {
    CalibrationReport report;
    calibration_failure(const std::string& what, CalibrationReport r)
        : numeric_failure(what), report(std::move(r)) {}
};

// Risk level below which a run counts as converged (0.1%).
inline constexpr double kConvergenceThreshold = 1e-3;

// M1 trace of the ideal (nominal) plant driven by the waveform. The
// calibration engine compares live monitor readings against this.
std::vector<double> predicted_m1(const ControlWaveform& w);

// Mean of squared differences between the two traces.
double risk(const std::vector<double>& m1_actual,
            const std::vector<double>& m1_predicted);

// Plant seen by the calibration engine when it applies candidate parameters
// pv to a drifted device: the candidate biases add where the device's bias
// offsets sit and the candidate gains multiply the device's drive gains, so
// engine and plant disagree exactly by the drift.
ModulatorParams effective_params(const ModulatorParams& true_plant,
                                 const ParamVector& pv, double v_pi_ref);

/// Measurable risk J(pv) for a fixed drifted device and drive waveform.
/// Precomputes the predicted trace and keeps evaluation allocation-free.
class RiskContext {
  public:
    RiskContext(const ModulatorParams& true_plant, const ControlWaveform& w);

    double operator()(const ParamVector& pv) const;

    const std::vector<double>& m1_predicted() const { return m1_predicted_; }
    ModulatorParams effective(const ParamVector& pv) const;
    double v_pi_ref() const { return v_pi_ref_; }

  private:
    ModulatorParams true_plant_;
    double v_pi_ref_;
    std::vector<double> alpha_sig_;
    std::vector<double> beta_sig_;
    std::vector<double> m1_predicted_;
};

using RiskEvaluator = std::function<double(const ParamVector&)>;

// Central finite-difference estimate of dJ/dp for each parameter, holding
// the others fixed. Steps are cfg.fd_step scaled by v_pi for the voltage
// parameters and unscaled for the gains.
ParamVector gradient(const ParamVector& pv, const RiskEvaluator& j_of,
                     double v_pi, const DescentConfig& cfg);

// Iterative descent on the measurable risk. Skips the loop entirely when
// the initial risk is at or below cfg.gate. Each epoch updates the
// parameters sequentially (gamma, beta_sg, beta_dc, alpha_sg, alpha_dc)
// with freshest values, then re-measures J; an epoch whose predecessor left
// J above cfg.reset_threshold starts over from nominal parameters. Stops
// early once J falls to cfg.gate. Throws calibration_failure when J turns
// non-finite.
CalibrationReport calibrate(const ModulatorParams& true_plant,
                            const ParamVector& init, const ControlWaveform& w,
                            const DescentConfig& cfg);

struct MonteCarloRun {
    std::uint64_t seed = 0;
    double initial_j = 0.0;
    double final_j = 0.0;
    int epochs_run = 0;
    int resets = 0;
    bool converged = false;
};

struct MonteCarloResult {
    std::vector<MonteCarloRun> runs;  // ordered by run index
    double convergence_fraction = 0.0;
    double j_median = 0.0;
    double j_p10 = 0.0;
    double j_p90 = 0.0;
    double j_max = 0.0;
    std::map<int, int> reset_histogram;  // resets -> run count
};

// n_runs independent calibrations of freshly drifted copies of
// nominal_plant. spec.seed acts as the master seed; per-run seeds are
// derived from it, so results do not depend on parallel_jobs. Runs that
// throw calibration_failure are recorded as non-converged.
MonteCarloResult monte_carlo(int n_runs, const ModulatorParams& nominal_plant,
                             const ControlWaveform& w, const DriftSpec& spec,
                             const DescentConfig& cfg, int parallel_jobs = 1);

}  // namespace eopd
