#pragma once

// Post-hoc checks of simulated arcs against the guarantees of the triggering
// design: the exponential bound on U = V(xi) + d eta, monotonicity of U
// across jumps, its flow decay, inter-event statistics and dwell time, and
// transmission quiescence.

#include <cstdint>
#include <iosfwd>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "etobs/design.hpp"
#include "etobs/hybrid.hpp"

namespace etobs {

/// U(q) = xi^T P xi + d eta.
[[nodiscard]] double lyapunov_value(const IssCertificate& cert, const TriggerParams& params, const HybridState& s);

struct BoundSample {
    double t = 0.0;
    std::int64_t j = 0;
    double u = 0.0;      // U(q(t, j))
    double bound = 0.0;  // e^{-alpha_bar t} U(0,0) + nu
};

struct CertificateReport {
    bool holds = true;
    /// max over samples of (U - bound) / (1 + U0); <= cert_tol when the bound holds.
    double worst_violation = -std::numeric_limits<double>::infinity();
    HybridTime worst_time;
    double u0 = 0.0;
    double cert_tol = 1e-7;
    std::vector<BoundSample> bound_samples;
};

inline constexpr double kDefaultCertTol = 1e-7;

/// Streaming form of check_certificate, usable from a SampleSink.
class CertificateMonitor {
public:
    CertificateMonitor(const IssCertificate& cert, const TriggerParams& params, double cert_tol = kDefaultCertTol,
                       bool keep_samples = true);

    void observe(const ArcSample& s);
    [[nodiscard]] const CertificateReport& report() const noexcept { return report_; }
    [[nodiscard]] CertificateReport take() && { return std::move(report_); }

private:
    const IssCertificate& cert_;
    const TriggerParams& params_;
    bool keep_samples_;
    bool started_ = false;
    CertificateReport report_;
};

/// Checks U(t, j) <= e^{-alpha_bar t} U(0,0) + nu + cert_tol (1 + U(0,0)) at every sample.
[[nodiscard]] CertificateReport check_certificate(const HybridArc& arc, const IssCertificate& cert,
                                                  const TriggerParams& params, double cert_tol = kDefaultCertTol);

struct JumpDecreaseReport {
    std::size_t jumps = 0;
    /// max over jumps of (U(post) - U(pre)) / max(U(pre), tiny)
    double worst_relative_increase = -std::numeric_limits<double>::infinity();
};

[[nodiscard]] JumpDecreaseReport check_jump_decrease(const HybridArc& arc, const IssCertificate& cert,
                                                     const TriggerParams& params);

struct FlowDecayReport {
    std::size_t pairs = 0;
    /// max over consecutive flow samples of
    /// (U(t+h) - [e^{-alpha_bar h} U(t) + nu (1 - e^{-alpha_bar h})]) / (1 + U(t))
    double worst_excess = -std::numeric_limits<double>::infinity();
    double worst_t = 0.0;
};

/// Integrated (comparison-lemma) form of U' <= -alpha_bar U + alpha_bar nu
/// between consecutive samples with the same jump index.
[[nodiscard]] FlowDecayReport check_flow_decay(const HybridArc& arc, const IssCertificate& cert,
                                               const TriggerParams& params);

struct IetStats {
    std::size_t count = 0;
    double min = 0.0;
    double mean = 0.0;
    double max = 0.0;
    std::vector<double> series;
};

/// Gaps between consecutive transmission instants.
[[nodiscard]] IetStats iet_stats(const HybridArc& arc);
[[nodiscard]] IetStats iet_stats(const std::vector<double>& event_times);

struct Interval {
    double begin = 0.0;
    double end = 0.0;
    [[nodiscard]] double length() const noexcept { return end - begin; }
};

/// Maximal event-free intervals of length >= window on [0, t_end].
[[nodiscard]] std::vector<Interval> detect_quiescence(const HybridArc& arc, double window);

/// Event-free gaps (including the tail after the last event) that last at
/// least `factor` times the largest inter-event time observed before the gap
/// starts. Gaps with no earlier inter-event time are skipped.
[[nodiscard]] std::vector<Interval> detect_quiescence_adaptive(const HybridArc& arc, double factor = 5.0);

/// Five times the largest inter-event time among events up to `before`;
/// nullopt if fewer than two events happen by then.
[[nodiscard]] std::optional<double> default_quiescence_window(const HybridArc& arc, double before);

/// max over samples of |C A x + C B u|, taking both u(t) and u(t-) so that
/// input discontinuities on the sample grid are not missed.
[[nodiscard]] double measured_M(const HybridArc& arc, const LtiPlant& plant, const InputSignal& input);

void write_bound_samples_csv(std::ostream& out, const CertificateReport& report);
void write_iet_csv(std::ostream& out, const HybridArc& arc);

/// `quiescent` uses the fixed window when one is given, the adaptive rule
/// otherwise.
struct RunSummary {
    CertificateReport certificate;
    JumpDecreaseReport jumps;
    FlowDecayReport flow;
    IetStats iet;
    double m_measured = 0.0;
    std::optional<double> dwell_bound;
    std::vector<Interval> quiescent;
};

[[nodiscard]] RunSummary summarize(const HybridArc& arc, const LtiPlant& plant, const IssCertificate& cert,
                                   const TriggerParams& params, const InputSignal& input,
                                   double cert_tol = kDefaultCertTol,
                                   std::optional<double> quiescence_window = std::nullopt);

/// Human-readable multi-line report.
[[nodiscard]] std::string format_summary(const RunSummary& s, const TriggerParams& params, double event_tol);

}  // namespace etobs
