#pragma once

// Run configuration for the command-line front end. The on-disk format is
// JSON with nested sections and the physical unit spelled out in each key
// (tau_rc_s, q_cap_Ah, c1_per_s, ...). See README.md for a full example.

#include <filesystem>
#include <optional>
#include <string>

#include "etobs/battery.hpp"
#include "etobs/design.hpp"
#include "etobs/hybrid.hpp"

namespace etobs {

struct InputSpec {
    enum class Kind { Phev, Constant, PiecewiseConstant, Sampled };
    Kind kind = Kind::Phev;
    std::uint64_t seed = 1;
    InputSignal signal;  // resolved for non-PHEV kinds

    /// Materializes the signal (PHEV profiles are generated over `horizon`).
    [[nodiscard]] InputSignal build(double horizon) const;
};

struct RunConfig {
    bool battery_preset = false;
    battery::BatteryParams battery;
    LtiPlant plant;

    Matrix gain;
    SymMatrix q;
    double c = 0.5;

    TriggerRequest trigger;             // nu may be 0 when it is to be derived
    bool nu_given = false;
    bool alpha_bar_given = false;
    std::optional<double> m_bound;      // for the printed dwell-time bound

    SimConfig sim;
    Vector x0;
    Vector xhat0;
    InputSpec input;

    double cert_tol = 1e-7;
    std::optional<double> quiescence_window;

    battery::SweepConfig sweep;
    std::optional<std::filesystem::path> output_dir;
};

/// Parses JSON text; throws Error(ConfigError) with the offending key.
[[nodiscard]] RunConfig parse_config(const std::string& text);
[[nodiscard]] RunConfig load_config(const std::filesystem::path& path);

/// Completes the trigger request against a certificate: alpha_bar defaults to
/// alpha and, when nu is absent, nu is the smallest value admitting epsilon.
[[nodiscard]] TriggerRequest resolve_trigger(const RunConfig& cfg, const IssCertificate& cert);

}  // namespace etobs
