#pragma once

// Event-triggered observer loop as a hybrid system.
//
// Flow (while gamma |e|^2 < sigma c1 eta + epsilon):
//   x'    = A x + B u
//   xhat' = A xhat + B u + L (ybar - C xhat)
//   ybar' = 0
//   eta'  = -c1 eta + c2 |e|^2,          e = ybar - C x
// Jump (transmission):
//   ybar+ = C x,  eta+ = c3 eta,  x and xhat unchanged.
//
// The state is kept in (x, xhat, ybar, eta) coordinates; the estimation
// error xi = x - xhat and sampling error e = ybar - C x are derived.

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <vector>

#include "etobs/design.hpp"
#include "etobs/matrix.hpp"

namespace etobs {

struct HybridState {
    Vector x;
    Vector xhat;
    Vector ybar;
    double eta = 0.0;

    friend bool operator==(const HybridState&, const HybridState&) = default;
};

/// Exogenous input u(t). Piecewise-constant signals hold each value until the
/// next breakpoint; sampled series interpolate linearly between samples.
/// Both hold the first value before the first breakpoint and the last value
/// after the final one.
class InputSignal {
public:
    enum class Kind { PiecewiseConstant, SampledSeries };

    InputSignal() = default;
    InputSignal(Kind kind, std::vector<double> breakpoints, std::vector<Vector> values);

    [[nodiscard]] static InputSignal constant(Vector value);
    [[nodiscard]] static InputSignal piecewise_constant(std::vector<double> breakpoints, std::vector<Vector> values);
    [[nodiscard]] static InputSignal sampled(std::vector<double> times, std::vector<Vector> values);

    [[nodiscard]] Kind kind() const noexcept { return kind_; }
    [[nodiscard]] std::size_t dim() const noexcept { return values_.empty() ? 0 : values_.front().size(); }
    [[nodiscard]] std::span<const double> breakpoints() const noexcept { return breakpoints_; }
    [[nodiscard]] std::span<const Vector> values() const noexcept { return values_; }

    /// u(t), right-continuous.
    [[nodiscard]] Vector value(double t) const;
    /// lim_{s -> t-} u(s); equals value(t) away from breakpoints.
    [[nodiscard]] Vector left_value(double t) const;
    /// First breakpoint strictly after t, or +inf.
    [[nodiscard]] double next_breakpoint(double t) const noexcept;

    /// Returns a copy with every value multiplied by `factor`.
    [[nodiscard]] InputSignal scaled(double factor) const;

private:
    Kind kind_ = Kind::PiecewiseConstant;
    std::vector<double> breakpoints_;
    std::vector<Vector> values_;
};

struct HybridTime {
    double t = 0.0;
    std::int64_t j = 0;
    friend bool operator==(const HybridTime&, const HybridTime&) = default;
};

struct ArcSample {
    double t = 0.0;
    std::int64_t j = 0;
    HybridState state;
    bool event = false;  // true on the sample created by a jump

    friend bool operator==(const ArcSample&, const ArcSample&) = default;
};

/// One interval [t_begin, t_end] x {j} of a hybrid time domain.
struct DomainInterval {
    double t_begin = 0.0;
    double t_end = 0.0;
    std::int64_t j = 0;
    friend bool operator==(const DomainInterval&, const DomainInterval&) = default;
};

struct HybridArc {
    std::vector<ArcSample> samples;
    /// Transmission instants, recorded as the post-jump hybrid time (t, j).
    std::vector<HybridTime> events;
    std::vector<DomainInterval> domain;

    [[nodiscard]] double t_end() const noexcept { return samples.empty() ? 0.0 : samples.back().t; }
    [[nodiscard]] std::size_t jumps() const noexcept { return events.size(); }
};

struct SimConfig {
    double t_end = 1.0;         // s
    double dt_max = 1e-2;       // s
    double event_tol = 1e-9;    // s
    std::int64_t max_jumps = 1'000'000;
    double eta0 = 0.0;
    double tol_eta = 1e-12;

    void validate() const;
};

struct StateDerivative {
    Vector x;
    Vector xhat;
    double eta = 0.0;
};

[[nodiscard]] StateDerivative flow_derivative(const LtiPlant& plant, const IssCertificate& cert,
                                              const TriggerParams& params, const HybridState& s,
                                              std::span<const double> u);

/// gamma |e|^2 - sigma c1 eta - epsilon. Negative strictly inside the flow
/// set, nonnegative in the jump set. `u` is unused: the rule only sees the
/// sampled output and eta.
[[nodiscard]] double trigger_margin(const LtiPlant& plant, const IssCertificate& cert, const TriggerParams& params,
                                    const HybridState& s);

/// sigma c1 eta + epsilon, the right-hand side of the triggering rule.
[[nodiscard]] double trigger_threshold(const TriggerParams& params, double eta) noexcept;

/// ybar+ = y, eta+ = c3 eta.
[[nodiscard]] HybridState jump(const HybridState& s, const TriggerParams& params, std::span<const double> y);

/// Initial hybrid state with ybar = C x0 (e(0,0) = 0) and eta = cfg.eta0.
[[nodiscard]] HybridState initial_state(const LtiPlant& plant, Vector x0, Vector xhat0, double eta0);

/// Receives every sample as it is produced; used to reduce long runs without
/// storing them.
using SampleSink = std::function<void(const ArcSample&)>;

/// Runs the hybrid loop from `q0` and streams samples into `sink`. Returns the
/// number of jumps. Fixed-step RK4 with steps capped at dt_max, input
/// breakpoints and t_end; trigger crossings are localized by bisection and
/// the jump is applied at the first point with nonnegative margin.
std::int64_t simulate_streaming(const LtiPlant& plant, const IssCertificate& cert, const TriggerParams& params,
                                const InputSignal& input, const HybridState& q0, const SimConfig& cfg,
                                const SampleSink& sink);

[[nodiscard]] HybridArc simulate(const LtiPlant& plant, const IssCertificate& cert, const TriggerParams& params,
                                 const InputSignal& input, const HybridState& q0, const SimConfig& cfg);

[[nodiscard]] HybridArc simulate(const LtiPlant& plant, const IssCertificate& cert, const TriggerParams& params,
                                 const InputSignal& input, Vector x0, Vector xhat0, const SimConfig& cfg);

struct ErrorSample {
    double t = 0.0;
    std::int64_t j = 0;
    Vector xi;  // x - xhat
    Vector e;   // ybar - C x
};

[[nodiscard]] std::vector<ErrorSample> derived_error_states(const HybridArc& arc, const LtiPlant& plant);

/// CSV with columns t, j, x_1..x_n, xhat_1..xhat_n, ybar_1..ybar_p, eta,
/// event_flag; 17 significant digits.
void write_arc_csv(std::ostream& out, const HybridArc& arc);

/// Parses write_arc_csv output. Events and domain are rebuilt from the
/// event flags.
[[nodiscard]] HybridArc read_arc_csv(std::istream& in);

}  // namespace etobs
