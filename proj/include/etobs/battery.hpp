#pragma once

// Two-state equivalent-circuit lithium-ion cell:
//   U_RC' = -U_RC / tau + i_bat / C
//   SOC'  = -i_bat / Q
//   V_bat = -U_RC + alpha_f SOC + beta_f - R_int i_bat
// with state x = (U_RC [V], SOC [fraction in 0..1]) and input u = i_bat [A]
// (positive when discharging).

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "etobs/analysis.hpp"
#include "etobs/design.hpp"
#include "etobs/hybrid.hpp"

namespace etobs::battery {

struct BatteryParams {
    double tau_rc_s = 7.0;
    double cap_c_f = 2.33e4;
    double q_cap_as = 25.0 * 3600.0;  // 25 Ah
    double r_int_ohm = 4e-3;
    double alpha_f_v = 0.6;   // V per unit SOC
    double beta_f_v = 3.4;

    void validate() const;
};

[[nodiscard]] LtiPlant build_battery_plant(const BatteryParams& p);

/// L = [0.64; 2.33]
[[nodiscard]] Matrix reference_gain();
/// Q = diag(100, 1000)
[[nodiscard]] SymMatrix reference_q();

/// Zero-current rest windows of the synthetic drive profile.
inline constexpr std::pair<double, double> kRestWindows[] = {{720.0, 900.0}, {1260.0, 1500.0}};
inline constexpr double kMaxCurrentA = 50.0;

/// Seeded synthetic plug-in-hybrid current profile: piecewise-constant
/// segments of 5-60 s with currents drawn uniformly in [-50, 50] A, and zero
/// current on the rest windows that fall inside [0, horizon].
[[nodiscard]] InputSignal phev_profile(std::uint64_t seed, double horizon);

/// CSV with columns t, i_bat (one row per breakpoint).
void write_profile_csv(std::ostream& out, const InputSignal& profile);

struct Range {
    double lo = 0.0;
    double hi = 1.0;
};

struct InitialConditionRanges {
    Range u_rc{0.0, 3.0};
    Range soc{0.0, 1.0};
    Range xi_u_rc{0.0, 3.0};
    Range xi_soc{0.0, 1.0};
};

struct InitialCondition {
    Vector x0;
    Vector xhat0;
};

/// Deterministic draw for trial `trial` under `seed`; the same (seed, trial)
/// gives the same initial condition in every sweep row.
[[nodiscard]] InitialCondition draw_initial_condition(std::uint64_t seed, std::size_t trial,
                                                      const InitialConditionRanges& ranges);

struct SweepRow {
    double sigma = 500.0;
    double c1 = 1.0;
    double c2 = 50.0;
    double c3 = 1.0;
    double epsilon = 1.0;
};

/// The nine parameter rows of the reference study.
[[nodiscard]] std::vector<SweepRow> reference_rows();

struct DesignInputs {
    BatteryParams battery;
    Matrix gain = reference_gain();
    SymMatrix q = reference_q();
    double c = 0.5;
    /// Decay rate to certify; defaults to alpha of the certificate.
    std::optional<double> alpha_bar;
};

struct SweepConfig {
    std::vector<SweepRow> rows = reference_rows();
    std::size_t trials = 100;
    InitialConditionRanges ic_ranges;
    double horizon = 1500.0;
    std::pair<double, double> error_window{1000.0, 1500.0};
    std::uint64_t seed = 1;
    std::uint64_t profile_seed = 1;
    double eta0 = 1e6;
    double dt_max = 1e-2;
    double event_tol = 1e-9;
    std::int64_t max_jumps = 1'000'000;
    unsigned threads = 1;

    void validate() const;
};

/// Triggering parameters for a sweep row. nu is chosen as the smallest value
/// for which the row's epsilon is admissible, so epsilon is never clamped.
[[nodiscard]] TriggerParams row_parameters(const IssCertificate& cert, const SweepRow& row,
                                           std::optional<double> alpha_bar);

struct TrialMetrics {
    std::int64_t transmissions = 0;
    double max_err_u_rc = 0.0;
    double max_err_soc = 0.0;
    double min_iet = std::numeric_limits<double>::infinity();
    double m_measured = 0.0;
    bool certificate_holds = true;
    double worst_jump_increase = 0.0;
};

/// One simulation streamed through the sweep metrics (no arc is stored).
[[nodiscard]] TrialMetrics run_trial(const LtiPlant& plant, const IssCertificate& cert, const TriggerParams& params,
                                     const InputSignal& profile, const InitialCondition& ic, const SweepConfig& cfg);

struct SweepRowResult {
    SweepRow row;
    bool valid = false;
    std::string message;  // why the row was flagged or which trials failed
    double avg_transmissions = 0.0;
    double max_err_u_rc = 0.0;  // V, averaged over trials
    double max_err_soc = 0.0;   // unit SOC, averaged over trials
    std::size_t trials_ok = 0;
    std::size_t trials_failed = 0;
    bool certificate_holds = true;
    double min_iet = std::numeric_limits<double>::infinity();
    double dwell_bound = 0.0;  // from the largest measured M over the row
};

struct ExperimentReport {
    std::vector<SweepRowResult> rows;
};

[[nodiscard]] ExperimentReport run_sweep(const SweepConfig& cfg, const DesignInputs& design);

/// Columns: sigma, c1, epsilon, transmissions, xi_urc_max, xi_soc_max.
/// Flagged rows carry nan in the metric columns.
void write_sweep_csv(std::ostream& out, const ExperimentReport& report);

struct TrendLine {
    std::string description;
    bool holds = false;
};

/// Orderings expected of the study: fewer transmissions and larger errors as
/// epsilon grows; more transmissions with sigma = 0 than sigma > 0.
[[nodiscard]] std::vector<TrendLine> check_trends(const ExperimentReport& report);

}  // namespace etobs::battery
