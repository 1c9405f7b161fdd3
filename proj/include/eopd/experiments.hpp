#pragma once

#include <cstdint>
#include <string>

#include <json.hpp>

#include "eopd/calibration.hpp"
#include "eopd/plant.hpp"
#include "eopd/sync_loop.hpp"

namespace eopd {

/// Ramp demo: ideal drive synthesis and monitor simulation.
struct RampSection {
    double f_con = 1e6;         // control frequency, Hz
    double duration = 1e-5;     // seconds
    double sample_rate = 6.4e7; // Hz
    double r = 1.0;
    double v_pi = 3.0;

    void validate() const;
};

/// Drive waveform used by the calibration engine: an ideal ramp covering an
/// integer number of control periods.
struct CalWaveformSection {
    double f_con = 1e6;
    int samples_per_period = 64;
    int n_samples = 4096;
    double r = 1.0;
    double v_pi = 3.0;

    void validate() const;
    ControlWaveform build() const;
};

struct CalibrateSection {
    CalWaveformSection waveform;
    DriftSpec drift;  // seed filled from the master seed unless set
    DescentConfig descent;

    void validate() const;
};

struct MonteCarloSection {
    int n_runs = 1000;
    CalWaveformSection waveform;
    DriftSpec drift;
    DescentConfig descent;

    void validate() const;
};

enum class SyncRunMode { open, closed, both };

struct SyncLoopSection {
    LoopConfig loop;                   // loop.mode ignored when mode = both
    SyncRunMode mode = SyncRunMode::both;
    double natural_frequency_hz = 0.0; // 0 -> symbol_rate / 2000
    double damping = 0.7071067811865476;
    double tail_fraction = 0.5;        // post-transient metrics window

    void validate() const;
    // Loop config with PI gains filled in from the frequency/damping design
    // and the requested mode and master seed applied.
    LoopConfig resolved(LoopMode mode, std::uint64_t seed) const;
};

struct ExperimentConfig {
    std::string kind;  // ramp | calibrate | montecarlo | syncloop
    std::uint64_t seed = 1;
    RampSection ramp;
    CalibrateSection calibrate_cfg;
    MonteCarloSection montecarlo;
    SyncLoopSection syncloop;

    void validate() const;
};

// Parses a JSON experiment config. Every field has a default, so an empty
// object is a valid config for any kind. A top-level "experiment" entry, if
// present, must equal kind. Unknown keys are rejected.
ExperimentConfig parse_experiment_config(const nlohmann::json& j,
                                         const std::string& kind);
ExperimentConfig load_experiment_config(const std::string& path,
                                        const std::string& kind);

// FNV-1a 64-bit hash of the canonical serialized config, for provenance.
std::string config_hash(const ExperimentConfig& cfg);

// Command back ends. Each validates first (no files are written on
// validation failure), then creates out_dir and writes the CSV/JSON
// artifacts. Numeric failures propagate after flagging partial output.
void cmd_ramp(const ExperimentConfig& cfg, const std::string& out_dir);
void cmd_calibrate(const ExperimentConfig& cfg, const std::string& out_dir);
void cmd_montecarlo(const ExperimentConfig& cfg, const std::string& out_dir,
                    int parallel_jobs);
void cmd_syncloop(const ExperimentConfig& cfg, const std::string& out_dir);

}  // namespace eopd
