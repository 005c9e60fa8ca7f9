#include "etobs/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <sstream>

#include "etobs/error.hpp"

namespace etobs {

double lyapunov_value(const IssCertificate& cert, const TriggerParams& params, const HybridState& s) {
    Vector xi(s.x.size());
    for (std::size_t i = 0; i < xi.size(); ++i) xi[i] = s.x[i] - s.xhat[i];
    return cert.P.quadratic_form(xi) + params.d * s.eta;
}

// ---------------------------------------------------------------------------
// Certificate bound

CertificateMonitor::CertificateMonitor(const IssCertificate& cert, const TriggerParams& params, double cert_tol,
                                       bool keep_samples)
    : cert_(cert), params_(params), keep_samples_(keep_samples) {
    report_.cert_tol = cert_tol;
}

void CertificateMonitor::observe(const ArcSample& s) {
    const double u = lyapunov_value(cert_, params_, s.state);
    if (!started_) {
        report_.u0 = u;
        started_ = true;
    }
    const double bound = std::exp(-params_.alpha_bar * s.t) * report_.u0 + params_.nu;
    const double violation = (u - bound) / (1.0 + report_.u0);
    if (violation > report_.worst_violation) {
        report_.worst_violation = violation;
        report_.worst_time = {s.t, s.j};
    }
    report_.holds = report_.worst_violation <= report_.cert_tol;
    if (keep_samples_) report_.bound_samples.push_back({s.t, s.j, u, bound});
}

CertificateReport check_certificate(const HybridArc& arc, const IssCertificate& cert, const TriggerParams& params,
                                    double cert_tol) {
    CertificateMonitor monitor(cert, params, cert_tol);
    for (const auto& s : arc.samples) monitor.observe(s);
    return std::move(monitor).take();
}

JumpDecreaseReport check_jump_decrease(const HybridArc& arc, const IssCertificate& cert,
                                       const TriggerParams& params) {
    JumpDecreaseReport r;
    for (std::size_t k = 1; k < arc.samples.size(); ++k) {
        if (!arc.samples[k].event) continue;
        const double pre = lyapunov_value(cert, params, arc.samples[k - 1].state);
        const double post = lyapunov_value(cert, params, arc.samples[k].state);
        const double rel = (post - pre) / std::max(pre, std::numeric_limits<double>::min());
        r.worst_relative_increase = std::max(r.worst_relative_increase, rel);
        ++r.jumps;
    }
    return r;
}

FlowDecayReport check_flow_decay(const HybridArc& arc, const IssCertificate& cert, const TriggerParams& params) {
    FlowDecayReport r;
    for (std::size_t k = 1; k < arc.samples.size(); ++k) {
        const auto& a = arc.samples[k - 1];
        const auto& b = arc.samples[k];
        if (b.event || a.j != b.j) continue;
        const double h = b.t - a.t;
        const double ua = lyapunov_value(cert, params, a.state);
        const double ub = lyapunov_value(cert, params, b.state);
        const double decay = std::exp(-params.alpha_bar * h);
        const double excess = (ub - (decay * ua + params.nu * (1.0 - decay))) / (1.0 + ua);
        if (excess > r.worst_excess) {
            r.worst_excess = excess;
            r.worst_t = a.t;
        }
        ++r.pairs;
    }
    return r;
}

// ---------------------------------------------------------------------------
// Inter-event times and quiescence

IetStats iet_stats(const std::vector<double>& event_times) {
    IetStats st;
    for (std::size_t k = 1; k < event_times.size(); ++k) st.series.push_back(event_times[k] - event_times[k - 1]);
    st.count = st.series.size();
    if (st.count == 0) return st;
    st.min = *std::min_element(st.series.begin(), st.series.end());
    st.max = *std::max_element(st.series.begin(), st.series.end());
    double sum = 0.0;
    for (double g : st.series) sum += g;
    st.mean = sum / static_cast<double>(st.count);
    return st;
}

IetStats iet_stats(const HybridArc& arc) {
    std::vector<double> times;
    times.reserve(arc.events.size());
    for (const auto& e : arc.events) times.push_back(e.t);
    return iet_stats(times);
}

namespace {

// Event-free gaps [0, t_1], [t_1, t_2], ..., [t_last, t_end].
std::vector<Interval> event_free_gaps(const HybridArc& arc) {
    std::vector<Interval> gaps;
    double start = arc.samples.empty() ? 0.0 : arc.samples.front().t;
    for (const auto& e : arc.events) {
        if (e.t > start) gaps.push_back({start, e.t});
        start = e.t;
    }
    if (arc.t_end() > start || gaps.empty()) gaps.push_back({start, arc.t_end()});
    return gaps;
}

}  // namespace

std::vector<Interval> detect_quiescence(const HybridArc& arc, double window) {
    if (!(window > 0.0)) throw Error(ErrorCode::NonPositiveArgument, "quiescence window must be positive");
    std::vector<Interval> out;
    for (const auto& g : event_free_gaps(arc)) {
        if (g.length() >= window) out.push_back(g);
    }
    return out;
}

std::vector<Interval> detect_quiescence_adaptive(const HybridArc& arc, double factor) {
    if (!(factor > 0.0)) throw Error(ErrorCode::NonPositiveArgument, "quiescence factor must be positive");
    std::vector<Interval> out;
    double largest_before = 0.0;
    for (std::size_t k = 0; k < arc.events.size(); ++k) {
        const double begin = arc.events[k].t;
        const double end = k + 1 < arc.events.size() ? arc.events[k + 1].t : arc.t_end();
        if (largest_before > 0.0 && end - begin >= factor * largest_before) out.push_back({begin, end});
        largest_before = std::max(largest_before, end - begin);
    }
    return out;
}

std::optional<double> default_quiescence_window(const HybridArc& arc, double before) {
    double largest = 0.0;
    std::size_t gaps = 0;
    for (std::size_t k = 1; k < arc.events.size() && arc.events[k].t <= before; ++k) {
        largest = std::max(largest, arc.events[k].t - arc.events[k - 1].t);
        ++gaps;
    }
    if (gaps == 0) return std::nullopt;
    return 5.0 * largest;
}

double measured_M(const HybridArc& arc, const LtiPlant& plant, const InputSignal& input) {
    const Matrix ca = plant.C * plant.A;
    const Matrix cb = plant.C * plant.B;
    double m = 0.0;
    for (const auto& s : arc.samples) {
        const Vector cax = ca * s.state.x;
        for (const Vector& u : {input.value(s.t), input.left_value(s.t)}) {
            const Vector cbu = cb * u;
            double sq = 0.0;
            for (std::size_t r = 0; r < cax.size(); ++r) sq += (cax[r] + cbu[r]) * (cax[r] + cbu[r]);
            m = std::max(m, std::sqrt(sq));
        }
    }
    return m;
}

// ---------------------------------------------------------------------------
// Output

void write_bound_samples_csv(std::ostream& out, const CertificateReport& report) {
    out << "t,j,U,bound\n";
    char buf[128];
    for (const auto& b : report.bound_samples) {
        std::snprintf(buf, sizeof buf, "%.17g,%lld,%.17g,%.17g\n", b.t, static_cast<long long>(b.j), b.u, b.bound);
        out << buf;
    }
}

void write_iet_csv(std::ostream& out, const HybridArc& arc) {
    out << "t,j,iet\n";
    char buf[96];
    for (std::size_t k = 1; k < arc.events.size(); ++k) {
        std::snprintf(buf, sizeof buf, "%.17g,%lld,%.17g\n", arc.events[k].t,
                      static_cast<long long>(arc.events[k].j), arc.events[k].t - arc.events[k - 1].t);
        out << buf;
    }
}

RunSummary summarize(const HybridArc& arc, const LtiPlant& plant, const IssCertificate& cert,
                     const TriggerParams& params, const InputSignal& input, double cert_tol,
                     std::optional<double> quiescence_window) {
    RunSummary s;
    s.certificate = check_certificate(arc, cert, params, cert_tol);
    s.jumps = check_jump_decrease(arc, cert, params);
    s.flow = check_flow_decay(arc, cert, params);
    s.iet = iet_stats(arc);
    s.m_measured = measured_M(arc, plant, input);
    if (s.m_measured > 0.0) s.dwell_bound = dwell_time_bound(s.m_measured, params.epsilon, cert.gamma);
    s.quiescent = quiescence_window ? detect_quiescence(arc, *quiescence_window) : detect_quiescence_adaptive(arc);
    return s;
}

std::string format_summary(const RunSummary& s, const TriggerParams& params, double event_tol) {
    std::ostringstream os;
    os.precision(6);
    os << "transmissions:          " << s.jumps.jumps << '\n';
    os << "certificate bound:      " << (s.certificate.holds ? "holds" : "VIOLATED")
       << " (worst relative excess " << s.certificate.worst_violation << " at t = " << s.certificate.worst_time.t
       << ", j = " << s.certificate.worst_time.j << "; U(0,0) = " << s.certificate.u0 << ")\n";
    os << "U across jumps:         worst relative increase "
       << (s.jumps.jumps ? s.jumps.worst_relative_increase : 0.0) << '\n';
    os << "U along flows:          worst relative excess " << (s.flow.pairs ? s.flow.worst_excess : 0.0) << '\n';
    os << "inter-event times:      count " << s.iet.count;
    if (s.iet.count) os << ", min " << s.iet.min << " s, mean " << s.iet.mean << " s, max " << s.iet.max << " s";
    os << '\n';
    os << "measured M:             " << s.m_measured << '\n';
    if (s.dwell_bound) {
        os << "dwell-time bound:       " << *s.dwell_bound << " s";
        if (s.iet.count) os << (s.iet.min >= *s.dwell_bound - 2.0 * event_tol ? " (respected)" : " (VIOLATED)");
        os << '\n';
    }
    os << "epsilon / sigma / c1:   " << params.epsilon << " / " << params.sigma << " / " << params.c1 << '\n';
    os << "quiescent intervals:    " << s.quiescent.size() << '\n';
    for (const auto& q : s.quiescent) os << "  [" << q.begin << ", " << q.end << "] s\n";
    return os.str();
}

}  // namespace etobs
