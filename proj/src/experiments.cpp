#include "eopd/experiments.hpp"

#include <algorithm>
#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "eopd/analysis.hpp"
#include "eopd/errors.hpp"

namespace eopd {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

// ---------------------------------------------------------------------------
// CSV output: one header line, fixed column order, full-precision floats,
// LF endings (binary mode keeps them LF on every platform).

std::string fmt_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string fmt_u64(std::uint64_t v) {
    char buf[24];
    std::snprintf(buf, sizeof buf, "%" PRIu64, v);
    return buf;
}

class CsvWriter {
  public:
    CsvWriter(const fs::path& path, std::initializer_list<const char*> columns)
        : out_(path, std::ios::binary) {
        if (!out_) {
            throw invalid_input("cannot open output file: " + path.string());
        }
        bool first = true;
        for (const char* c : columns) {
            if (!first) out_ << ',';
            out_ << c;
            first = false;
        }
        out_ << '\n';
    }

    void row(std::initializer_list<std::string> cells) {
        bool first = true;
        for (const auto& c : cells) {
            if (!first) out_ << ',';
            out_ << c;
            first = false;
        }
        out_ << '\n';
    }

    void row(std::initializer_list<double> values) {
        bool first = true;
        for (double v : values) {
            if (!first) out_ << ',';
            out_ << fmt_double(v);
            first = false;
        }
        out_ << '\n';
    }

  private:
    std::ofstream out_;
};

void write_json(const fs::path& path, const json& j) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw invalid_input("cannot open output file: " + path.string());
    }
    out << j.dump(2) << '\n';
}

// ---------------------------------------------------------------------------
// Config parsing: every field defaulted, unknown keys rejected.

void check_keys(const json& j, const std::string& where,
                std::initializer_list<const char*> allowed) {
    if (!j.is_object()) {
        throw invalid_input("config section '" + where + "' must be an object");
    }
    std::set<std::string> ok(allowed.begin(), allowed.end());
    for (const auto& item : j.items()) {
        if (!ok.count(item.key())) {
            throw invalid_input("unknown config key '" + item.key() + "' in " +
                                where);
        }
    }
}

RampSection parse_ramp(const json& j) {
    check_keys(j, "ramp",
               {"f_con_hz", "duration_s", "sample_rate_hz", "r", "v_pi"});
    RampSection s;
    s.f_con = j.value("f_con_hz", s.f_con);
    s.duration = j.value("duration_s", s.duration);
    s.sample_rate = j.value("sample_rate_hz", s.sample_rate);
    s.r = j.value("r", s.r);
    s.v_pi = j.value("v_pi", s.v_pi);
    return s;
}

CalWaveformSection parse_waveform(const json& j) {
    check_keys(j, "waveform",
               {"f_con_hz", "samples_per_period", "n_samples", "r", "v_pi"});
    CalWaveformSection s;
    s.f_con = j.value("f_con_hz", s.f_con);
    s.samples_per_period = j.value("samples_per_period", s.samples_per_period);
    s.n_samples = j.value("n_samples", s.n_samples);
    s.r = j.value("r", s.r);
    s.v_pi = j.value("v_pi", s.v_pi);
    return s;
}

DriftSpec parse_drift(const json& j) {
    check_keys(j, "drift", {"relative_range", "distribution"});
    DriftSpec d;
    d.relative_range = j.value("relative_range", d.relative_range);
    const std::string dist = j.value("distribution", std::string("uniform"));
    if (dist == "uniform") {
        d.distribution = DriftSpec::Distribution::uniform;
    } else if (dist == "gaussian") {
        d.distribution = DriftSpec::Distribution::gaussian;
    } else {
        throw invalid_input("drift.distribution must be 'uniform' or 'gaussian'");
    }
    return d;
}

DescentConfig parse_descent(const json& j) {
    check_keys(j, "descent",
               {"mu", "epochs", "gate", "reset_threshold", "fd_step"});
    DescentConfig c;
    c.mu = j.value("mu", c.mu);
    c.epochs = j.value("epochs", c.epochs);
    c.gate = j.value("gate", c.gate);
    c.reset_threshold = j.value("reset_threshold", c.reset_threshold);
    c.fd_step = j.value("fd_step", c.fd_step);
    return c;
}

OffsetProcess parse_offset(const json& j) {
    check_keys(j, "offset",
               {"kind", "rate_rad_s", "diffusion_rad2_s", "amplitude_rad",
                "frequency_hz"});
    OffsetProcess p;
    const std::string kind = j.value("kind", std::string("ramp"));
    if (kind == "ramp") {
        p.kind = OffsetProcess::Kind::ramp;
    } else if (kind == "random_walk") {
        p.kind = OffsetProcess::Kind::random_walk;
    } else if (kind == "sinusoidal") {
        p.kind = OffsetProcess::Kind::sinusoidal;
    } else {
        throw invalid_input(
            "offset.kind must be 'ramp', 'random_walk' or 'sinusoidal'");
    }
    p.rate = j.value("rate_rad_s", p.rate);
    p.diffusion = j.value("diffusion_rad2_s", p.diffusion);
    p.amplitude = j.value("amplitude_rad", p.amplitude);
    p.frequency = j.value("frequency_hz", p.frequency);
    return p;
}

SyncLoopSection parse_syncloop(const json& j) {
    check_keys(j, "syncloop",
               {"symbol_rate_hz", "samples_per_symbol", "n_symbols", "offset",
                "detector_gain", "vco_gain_hz_v", "natural_frequency_hz",
                "damping", "mode", "v_pi", "r", "tail_fraction"});
    SyncLoopSection s;
    s.loop.symbol_rate = j.value("symbol_rate_hz", s.loop.symbol_rate);
    s.loop.samples_per_symbol =
        j.value("samples_per_symbol", s.loop.samples_per_symbol);
    s.loop.n_symbols = j.value("n_symbols", s.loop.n_symbols);
    if (j.contains("offset")) s.loop.offset = parse_offset(j.at("offset"));
    s.loop.detector_gain = j.value("detector_gain", s.loop.detector_gain);
    s.loop.vco_gain = j.value("vco_gain_hz_v", s.loop.vco_gain);
    s.natural_frequency_hz =
        j.value("natural_frequency_hz", s.natural_frequency_hz);
    s.damping = j.value("damping", s.damping);
    const std::string mode = j.value("mode", std::string("both"));
    if (mode == "open") {
        s.mode = SyncRunMode::open;
    } else if (mode == "closed") {
        s.mode = SyncRunMode::closed;
    } else if (mode == "both") {
        s.mode = SyncRunMode::both;
    } else {
        throw invalid_input("syncloop.mode must be 'open', 'closed' or 'both'");
    }
    s.loop.v_pi = j.value("v_pi", s.loop.v_pi);
    s.loop.r = j.value("r", s.loop.r);
    s.tail_fraction = j.value("tail_fraction", s.tail_fraction);
    return s;
}

// ---------------------------------------------------------------------------
// Canonical serialization (defaults materialized) for hashing and summaries.

json offset_json(const OffsetProcess& p) {
    const char* kind = p.kind == OffsetProcess::Kind::ramp          ? "ramp"
                       : p.kind == OffsetProcess::Kind::random_walk ? "random_walk"
                                                                    : "sinusoidal";
    return {{"kind", kind},
            {"rate_rad_s", p.rate},
            {"diffusion_rad2_s", p.diffusion},
            {"amplitude_rad", p.amplitude},
            {"frequency_hz", p.frequency}};
}

json drift_json(const DriftSpec& d) {
    return {{"relative_range", d.relative_range},
            {"distribution", d.distribution == DriftSpec::Distribution::uniform
                                 ? "uniform"
                                 : "gaussian"}};
}

json descent_json(const DescentConfig& c) {
    return {{"mu", c.mu},
            {"epochs", c.epochs},
            {"gate", c.gate},
            {"reset_threshold", c.reset_threshold},
            {"fd_step", c.fd_step}};
}

json waveform_json(const CalWaveformSection& w) {
    return {{"f_con_hz", w.f_con},
            {"samples_per_period", w.samples_per_period},
            {"n_samples", w.n_samples},
            {"r", w.r},
            {"v_pi", w.v_pi}};
}

json effective_json(const ExperimentConfig& cfg) {
    json j;
    j["experiment"] = cfg.kind;
    j["seed"] = cfg.seed;
    j["ramp"] = {{"f_con_hz", cfg.ramp.f_con},
                 {"duration_s", cfg.ramp.duration},
                 {"sample_rate_hz", cfg.ramp.sample_rate},
                 {"r", cfg.ramp.r},
                 {"v_pi", cfg.ramp.v_pi}};
    j["calibrate"] = {{"waveform", waveform_json(cfg.calibrate_cfg.waveform)},
                      {"drift", drift_json(cfg.calibrate_cfg.drift)},
                      {"descent", descent_json(cfg.calibrate_cfg.descent)}};
    j["montecarlo"] = {{"n_runs", cfg.montecarlo.n_runs},
                       {"waveform", waveform_json(cfg.montecarlo.waveform)},
                       {"drift", drift_json(cfg.montecarlo.drift)},
                       {"descent", descent_json(cfg.montecarlo.descent)}};
    const SyncLoopSection& s = cfg.syncloop;
    j["syncloop"] = {{"symbol_rate_hz", s.loop.symbol_rate},
                     {"samples_per_symbol", s.loop.samples_per_symbol},
                     {"n_symbols", s.loop.n_symbols},
                     {"offset", offset_json(s.loop.offset)},
                     {"detector_gain", s.loop.detector_gain},
                     {"vco_gain_hz_v", s.loop.vco_gain},
                     {"natural_frequency_hz", s.natural_frequency_hz},
                     {"damping", s.damping},
                     {"mode", s.mode == SyncRunMode::open     ? "open"
                              : s.mode == SyncRunMode::closed ? "closed"
                                                              : "both"},
                     {"v_pi", s.loop.v_pi},
                     {"r", s.loop.r},
                     {"tail_fraction", s.tail_fraction}};
    return j;
}

std::uint64_t fnv1a64(const std::string& data) {
    std::uint64_t h = 0xCBF29CE484222325ULL;
    for (unsigned char c : data) {
        h ^= c;
        h *= 0x100000001B3ULL;
    }
    return h;
}

json summary_header(const ExperimentConfig& cfg) {
    return {{"experiment", cfg.kind},
            {"seed", cfg.seed},
            {"config_hash", config_hash(cfg)},
            {"config", effective_json(cfg)}};
}

std::pair<std::vector<double>, std::vector<double>> trace_m1_m2(
    const ModulatorParams& params, const ControlWaveform& w) {
    std::vector<double> m1(w.size()), m2(w.size());
    for (std::size_t k = 0; k < w.size(); ++k) {
        const auto f = field_transfer(params, w.alpha_sig[k], w.beta_sig[k]);
        m1[k] = monitor_m1(f);
        m2[k] = monitor_m2(f);
    }
    return {std::move(m1), std::move(m2)};
}

}  // namespace

// ---------------------------------------------------------------------------
// Section validation.

void RampSection::validate() const {
    // Range checks happen in the library constructors; re-run them here so
    // invalid configs fail before any output file is created.
    linear_ramp_trajectory(f_con, duration, sample_rate);
    if (!(r > 0.0) || r > 1.0) {
        throw invalid_input("ramp.r must lie in (0, 1]");
    }
    if (!(v_pi > 0.0)) {
        throw invalid_input("ramp.v_pi must be positive");
    }
}

void CalWaveformSection::validate() const {
    if (!(f_con > 0.0) || !std::isfinite(f_con)) {
        throw invalid_input("waveform.f_con_hz must be positive");
    }
    if (samples_per_period < 64) {
        throw invalid_input("waveform.samples_per_period must be >= 64");
    }
    if (n_samples < 2 * samples_per_period) {
        throw invalid_input(
            "waveform.n_samples must cover at least two control periods");
    }
    if (!(r > 0.0) || r > 1.0) {
        throw invalid_input("waveform.r must lie in (0, 1]");
    }
    if (!(v_pi > 0.0)) {
        throw invalid_input("waveform.v_pi must be positive");
    }
}

ControlWaveform CalWaveformSection::build() const {
    validate();
    const double sample_rate = f_con * samples_per_period;
    const double duration = static_cast<double>(n_samples) / sample_rate;
    PhaseTrajectory traj = linear_ramp_trajectory(f_con, duration, sample_rate);
    // The constructor includes the endpoint; the risk trace wants exactly
    // n_samples covering whole periods.
    traj.t.resize(static_cast<std::size_t>(n_samples));
    traj.theta_d.resize(static_cast<std::size_t>(n_samples));
    return synthesize_controls(traj, r, v_pi);
}

void CalibrateSection::validate() const {
    waveform.validate();
    drift.validate();
    descent.validate();
}

void MonteCarloSection::validate() const {
    if (n_runs < 1) {
        throw invalid_input("montecarlo.n_runs must be >= 1");
    }
    waveform.validate();
    drift.validate();
    descent.validate();
}

void SyncLoopSection::validate() const {
    if (!(tail_fraction > 0.0) || tail_fraction > 1.0) {
        throw invalid_input("syncloop.tail_fraction must lie in (0, 1]");
    }
    if (!(damping > 0.0) || !std::isfinite(damping)) {
        throw invalid_input("syncloop.damping must be positive");
    }
    if (natural_frequency_hz < 0.0 || !std::isfinite(natural_frequency_hz)) {
        throw invalid_input("syncloop.natural_frequency_hz must be >= 0");
    }
    resolved(LoopMode::closed, 0).validate();
}

LoopConfig SyncLoopSection::resolved(LoopMode run_mode,
                                     std::uint64_t seed) const {
    LoopConfig lc = loop;
    lc.mode = run_mode;
    lc.seed = seed;
    const double fn =
        natural_frequency_hz > 0.0 ? natural_frequency_hz : lc.symbol_rate / 2000.0;
    lc.loop_filter = design_pi_gains(fn, damping, lc.detector_gain, lc.vco_gain);
    return lc;
}

void ExperimentConfig::validate() const {
    if (kind != "ramp" && kind != "calibrate" && kind != "montecarlo" &&
        kind != "syncloop") {
        throw invalid_input("experiment kind must be one of "
                            "ramp|calibrate|montecarlo|syncloop");
    }
    ramp.validate();
    calibrate_cfg.validate();
    montecarlo.validate();
    syncloop.validate();
}

ExperimentConfig parse_experiment_config(const json& j, const std::string& kind) {
    check_keys(j, "config root",
               {"experiment", "seed", "ramp", "calibrate", "montecarlo",
                "syncloop"});
    ExperimentConfig cfg;
    cfg.kind = kind;
    if (j.contains("experiment")) {
        const auto named = j.at("experiment").get<std::string>();
        if (named != kind) {
            throw invalid_input("config names experiment '" + named +
                                "' but command is '" + kind + "'");
        }
    }
    cfg.seed = j.value("seed", cfg.seed);
    if (j.contains("ramp")) cfg.ramp = parse_ramp(j.at("ramp"));
    if (j.contains("calibrate")) {
        const json& c = j.at("calibrate");
        check_keys(c, "calibrate", {"waveform", "drift", "descent"});
        if (c.contains("waveform"))
            cfg.calibrate_cfg.waveform = parse_waveform(c.at("waveform"));
        if (c.contains("drift")) cfg.calibrate_cfg.drift = parse_drift(c.at("drift"));
        if (c.contains("descent"))
            cfg.calibrate_cfg.descent = parse_descent(c.at("descent"));
    }
    if (j.contains("montecarlo")) {
        const json& m = j.at("montecarlo");
        check_keys(m, "montecarlo", {"n_runs", "waveform", "drift", "descent"});
        cfg.montecarlo.n_runs = m.value("n_runs", cfg.montecarlo.n_runs);
        if (m.contains("waveform"))
            cfg.montecarlo.waveform = parse_waveform(m.at("waveform"));
        if (m.contains("drift")) cfg.montecarlo.drift = parse_drift(m.at("drift"));
        if (m.contains("descent"))
            cfg.montecarlo.descent = parse_descent(m.at("descent"));
    }
    if (j.contains("syncloop")) cfg.syncloop = parse_syncloop(j.at("syncloop"));
    cfg.validate();
    return cfg;
}

ExperimentConfig load_experiment_config(const std::string& path,
                                        const std::string& kind) {
    if (path.empty()) {
        return parse_experiment_config(json::object(), kind);
    }
    std::ifstream in(path);
    if (!in) {
        throw invalid_input("cannot read config file: " + path);
    }
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw invalid_input(std::string("config parse error: ") + e.what());
    }
    return parse_experiment_config(j, kind);
}

std::string config_hash(const ExperimentConfig& cfg) {
    char buf[20];
    std::snprintf(buf, sizeof buf, "%016" PRIx64,
                  fnv1a64(effective_json(cfg).dump()));
    return buf;
}

// ---------------------------------------------------------------------------
// Commands.

void cmd_ramp(const ExperimentConfig& cfg, const std::string& out_dir) {
    const RampSection& sec = cfg.ramp;
    cfg.validate();

    const PhaseTrajectory traj =
        linear_ramp_trajectory(sec.f_con, sec.duration, sec.sample_rate);
    const ControlWaveform w = synthesize_controls(traj, sec.r, sec.v_pi);
    const ModulatorParams plant = ModulatorParams::nominal(sec.v_pi);
    const MonitorTrace trace = simulate_trace(plant, w);

    const double slope = phase_slope(trace.theta_true, trace.t);
    const auto [m1_min, m1_max] =
        std::minmax_element(trace.m1.begin(), trace.m1.end());
    const double ripple = *m1_max - *m1_min;

    std::optional<double> suppression;
    if (sec.f_con > 0.0 && trace.m2.size() >= 16) {
        const Spectrum spec =
            spectrum(trace.m2, sec.sample_rate, SpectralWindow::hann);
        suppression = harmonic_suppression(spec, sec.f_con, 5);
    }

    fs::create_directories(out_dir);
    const fs::path out(out_dir);
    {
        CsvWriter csv(out / "waveforms.csv", {"t", "alpha_sig", "beta_sig"});
        for (std::size_t k = 0; k < w.size(); ++k) {
            csv.row({w.t[k], w.alpha_sig[k], w.beta_sig[k]});
        }
    }
    {
        CsvWriter csv(out / "monitors.csv", {"t", "m1", "m2", "theta_true"});
        for (std::size_t k = 0; k < trace.t.size(); ++k) {
            csv.row({trace.t[k], trace.m1[k], trace.m2[k], trace.theta_true[k]});
        }
    }
    json summary = summary_header(cfg);
    summary["phase_slope_rad_s"] = slope;
    summary["m1_ripple_pp"] = ripple;
    if (suppression) {
        summary["harmonic_suppression_db"] = *suppression;
    } else {
        summary["harmonic_suppression_db"] = nullptr;
    }
    write_json(out / "summary.json", summary);
}

void cmd_calibrate(const ExperimentConfig& cfg, const std::string& out_dir) {
    const CalibrateSection& sec = cfg.calibrate_cfg;
    cfg.validate();

    const ControlWaveform w = sec.waveform.build();
    const ModulatorParams nominal = ModulatorParams::nominal(sec.waveform.v_pi);
    DriftSpec drift = sec.drift;
    drift.seed = cfg.seed;
    const ModulatorParams drifted = apply_drift(nominal, drift);
    const ParamVector init = ParamVector::nominal(sec.waveform.v_pi);

    CalibrationReport report;
    bool partial = false;
    try {
        report = calibrate(drifted, init, w, sec.descent);
    } catch (const calibration_failure& e) {
        report = e.report;
        partial = true;
    }

    fs::create_directories(out_dir);
    const fs::path out(out_dir);
    {
        CsvWriter csv(out / "j_history.csv", {"epoch", "j"});
        for (std::size_t k = 0; k < report.j_history.size(); ++k) {
            csv.row({static_cast<double>(k), report.j_history[k]});
        }
    }
    {
        CsvWriter csv(out / "params_history.csv",
                      {"epoch", "alpha_dc", "beta_dc", "gamma", "alpha_sg",
                       "beta_sg"});
        for (std::size_t k = 0; k < report.param_history.size(); ++k) {
            const ParamVector& p = report.param_history[k];
            csv.row({static_cast<double>(k), p.alpha_dc, p.beta_dc, p.gamma,
                     p.alpha_sg, p.beta_sg});
        }
    }
    {
        const auto [m1_pred, m2_pred] = trace_m1_m2(nominal, w);
        const auto before_plant = effective_params(drifted, init, w.v_pi_ref);
        const auto after_plant =
            effective_params(drifted, report.final_params, w.v_pi_ref);
        const auto [m1_before, m2_before] = trace_m1_m2(before_plant, w);
        const auto [m1_after, m2_after] = trace_m1_m2(after_plant, w);
        CsvWriter c1(out / "before_after_m1.csv",
                     {"t", "m1_predicted", "m1_before", "m1_after"});
        CsvWriter c2(out / "before_after_m2.csv",
                     {"t", "m2_predicted", "m2_before", "m2_after"});
        for (std::size_t k = 0; k < w.size(); ++k) {
            c1.row({w.t[k], m1_pred[k], m1_before[k], m1_after[k]});
            c2.row({w.t[k], m2_pred[k], m2_before[k], m2_after[k]});
        }
    }
    json summary = summary_header(cfg);
    summary["initial_j"] = report.j_history.front();
    summary["final_j"] = report.final_j;
    summary["converged"] = report.converged;
    summary["resets"] = report.resets;
    summary["epochs_run"] =
        static_cast<int>(report.j_history.size()) - 1;
    summary["partial"] = partial;
    write_json(out / "summary.json", summary);
    if (partial) {
        throw numeric_failure("calibration risk became non-finite (partial "
                              "report written)");
    }
}

void cmd_montecarlo(const ExperimentConfig& cfg, const std::string& out_dir,
                    int parallel_jobs) {
    const MonteCarloSection& sec = cfg.montecarlo;
    cfg.validate();

    const ControlWaveform w = sec.waveform.build();
    const ModulatorParams nominal = ModulatorParams::nominal(sec.waveform.v_pi);
    DriftSpec drift = sec.drift;
    drift.seed = cfg.seed;
    const MonteCarloResult result =
        monte_carlo(sec.n_runs, nominal, w, drift, sec.descent, parallel_jobs);

    fs::create_directories(out_dir);
    const fs::path out(out_dir);
    {
        CsvWriter csv(out / "runs.csv",
                      {"run", "seed", "initial_j", "final_j", "epochs",
                       "resets", "converged"});
        for (std::size_t k = 0; k < result.runs.size(); ++k) {
            const MonteCarloRun& r = result.runs[k];
            csv.row({std::to_string(k), fmt_u64(r.seed), fmt_double(r.initial_j),
                     fmt_double(r.final_j), std::to_string(r.epochs_run),
                     std::to_string(r.resets), r.converged ? "1" : "0"});
        }
    }
    json histogram = json::object();
    for (const auto& [resets, count] : result.reset_histogram) {
        histogram[std::to_string(resets)] = count;
    }
    json summary = summary_header(cfg);
    summary["n_runs"] = sec.n_runs;
    summary["convergence_fraction"] = result.convergence_fraction;
    summary["j_median"] = result.j_median;
    summary["j_p10"] = result.j_p10;
    summary["j_p90"] = result.j_p90;
    summary["j_max"] = result.j_max;
    summary["reset_histogram"] = histogram;
    write_json(out / "summary.json", summary);
}

namespace {

void write_loop_files(const fs::path& out, const std::string& suffix,
                      const LoopTrace& trace, const LoopConfig& lc) {
    {
        CsvWriter csv(out / ("loop_trace" + suffix + ".csv"),
                      {"t", "phi_off", "theta_eopd", "v_pd", "v_pd_lf",
                       "residual"});
        for (std::size_t k = 0; k < trace.t.size(); ++k) {
            csv.row({trace.t[k], trace.phi_off[k], trace.theta_eopd[k],
                     trace.v_pd[k], trace.v_pd_lf[k], trace.residual[k]});
        }
    }
    {
        const auto [ci, cq] = symbol_centers(trace, lc.samples_per_symbol);
        const double ts = 1.0 / lc.symbol_rate;
        CsvWriter csv(out / ("constellation" + suffix + ".csv"),
                      {"symbol", "t", "i", "q"});
        for (std::size_t k = 0; k < ci.size(); ++k) {
            csv.row({static_cast<double>(k),
                     (static_cast<double>(k) + 0.5) * ts, ci[k], cq[k]});
        }
    }
    {
        const auto sps = static_cast<std::size_t>(lc.samples_per_symbol);
        CsvWriter csv(out / ("eye" + suffix + ".csv"),
                      {"symbol", "sample", "t_offset", "i", "q"});
        for (std::size_t k = 0; k < trace.i_out.size(); ++k) {
            const std::size_t sym = k / sps;
            const std::size_t sample = k % sps;
            csv.row({static_cast<double>(sym), static_cast<double>(sample),
                     static_cast<double>(sample) * lc.dt(), trace.i_out[k],
                     trace.q_out[k]});
        }
    }
}

}  // namespace

void cmd_syncloop(const ExperimentConfig& cfg, const std::string& out_dir) {
    const SyncLoopSection& sec = cfg.syncloop;
    cfg.validate();

    std::vector<LoopMode> modes;
    if (sec.mode == SyncRunMode::both) {
        modes = {LoopMode::open, LoopMode::closed};
    } else {
        modes = {sec.mode == SyncRunMode::open ? LoopMode::open
                                               : LoopMode::closed};
    }

    fs::create_directories(out_dir);
    const fs::path out(out_dir);
    json summary = summary_header(cfg);
    std::optional<std::string> failure;

    for (LoopMode mode : modes) {
        const LoopConfig lc = sec.resolved(mode, cfg.seed);
        const std::string mode_name =
            mode == LoopMode::open ? "open" : "closed";
        const std::string suffix =
            sec.mode == SyncRunMode::both ? "_" + mode_name : "";
        LoopTrace trace;
        bool partial = false;
        try {
            trace = run_loop(lc);
        } catch (const instability_error& e) {
            trace = e.partial;
            partial = true;
            failure = e.what();
        }
        write_loop_files(out, suffix, trace, lc);

        json entry;
        entry["partial"] = partial;
        entry["max_drive_alpha"] = trace.max_drive_alpha;
        entry["max_drive_beta"] = trace.max_drive_beta;
        if (!partial) {
            const LoopSummary s = summarize_loop(trace, lc, sec.tail_fraction);
            entry["residual_rms_rad"] = s.residual_rms;
            entry["evm_percent"] = s.evm_percent;
            entry["eye_opening_i"] = s.eye_opening_i;
            entry["eye_opening_q"] = s.eye_opening_q;
            entry["v_pd_lf_mean"] = s.v_pd_lf_mean;
            entry["locked"] = s.locked;
        }
        summary["modes"][mode_name] = entry;
    }
    write_json(out / "summary.json", summary);
    if (failure) {
        throw numeric_failure(*failure + " (partial trace written)");
    }
}

}  // namespace eopd
