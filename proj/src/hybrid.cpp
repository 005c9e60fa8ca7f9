#include "etobs/hybrid.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <string>

#include "etobs/error.hpp"

namespace etobs {

// ---------------------------------------------------------------------------
// InputSignal

InputSignal::InputSignal(Kind kind, std::vector<double> breakpoints, std::vector<Vector> values)
    : kind_(kind), breakpoints_(std::move(breakpoints)), values_(std::move(values)) {
    if (breakpoints_.empty() || breakpoints_.size() != values_.size()) {
        throw Error(ErrorCode::InvalidArgument, "input signal needs one value per breakpoint and at least one breakpoint");
    }
    for (std::size_t k = 1; k < breakpoints_.size(); ++k) {
        if (!(breakpoints_[k] > breakpoints_[k - 1])) {
            throw Error(ErrorCode::InvalidArgument, "input breakpoints must be strictly increasing");
        }
    }
    const std::size_t m = values_.front().size();
    for (const auto& v : values_) {
        if (v.size() != m) throw Error(ErrorCode::DimensionMismatch, "input values must share one dimension");
        if (!std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); })) {
            throw Error(ErrorCode::InvalidArgument, "input values must be finite");
        }
    }
}

InputSignal InputSignal::constant(Vector value) {
    return InputSignal(Kind::PiecewiseConstant, {0.0}, {std::move(value)});
}

InputSignal InputSignal::piecewise_constant(std::vector<double> breakpoints, std::vector<Vector> values) {
    return InputSignal(Kind::PiecewiseConstant, std::move(breakpoints), std::move(values));
}

InputSignal InputSignal::sampled(std::vector<double> times, std::vector<Vector> values) {
    return InputSignal(Kind::SampledSeries, std::move(times), std::move(values));
}

Vector InputSignal::value(double t) const {
    const auto it = std::upper_bound(breakpoints_.begin(), breakpoints_.end(), t);
    if (it == breakpoints_.begin()) return values_.front();
    const auto k = static_cast<std::size_t>(it - breakpoints_.begin()) - 1;
    if (kind_ == Kind::PiecewiseConstant || k + 1 == breakpoints_.size()) return values_[k];
    const double w = (t - breakpoints_[k]) / (breakpoints_[k + 1] - breakpoints_[k]);
    Vector out(values_[k].size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = (1.0 - w) * values_[k][i] + w * values_[k + 1][i];
    return out;
}

Vector InputSignal::left_value(double t) const {
    if (kind_ == Kind::SampledSeries) return value(t);
    const auto it = std::lower_bound(breakpoints_.begin(), breakpoints_.end(), t);
    if (it == breakpoints_.begin()) return values_.front();
    return values_[static_cast<std::size_t>(it - breakpoints_.begin()) - 1];
}

double InputSignal::next_breakpoint(double t) const noexcept {
    const auto it = std::upper_bound(breakpoints_.begin(), breakpoints_.end(), t);
    return it == breakpoints_.end() ? std::numeric_limits<double>::infinity() : *it;
}

InputSignal InputSignal::scaled(double factor) const {
    std::vector<Vector> v = values_;
    for (auto& row : v) {
        for (double& x : row) x *= factor;
    }
    return InputSignal(kind_, breakpoints_, std::move(v));
}

// ---------------------------------------------------------------------------
// Config

void SimConfig::validate() const {
    if (!(t_end > 0.0) || !(dt_max > 0.0) || !(event_tol > 0.0) || !(tol_eta >= 0.0)) {
        throw Error(ErrorCode::InvalidArgument, "simulation config: t_end, dt_max, event_tol must be positive");
    }
    if (max_jumps < 1) throw Error(ErrorCode::InvalidArgument, "simulation config: max_jumps must be >= 1");
    if (!(eta0 >= 0.0)) throw Error(ErrorCode::InvalidArgument, "simulation config: eta0 must be >= 0");
}

namespace {

// Flat state layout: [x (n), xhat (n), ybar (p), eta].
class FlowKernel {
public:
    FlowKernel(const LtiPlant& plant, const IssCertificate& cert, const TriggerParams& params)
        : plant_(plant), cert_(cert), params_(params), n_(plant.states()), p_(plant.outputs()),
          m_(plant.inputs()), bu_(n_), e_(p_), innov_(p_) {}

    [[nodiscard]] std::size_t size() const noexcept { return 2 * n_ + p_ + 1; }
    [[nodiscard]] std::size_t n() const noexcept { return n_; }
    [[nodiscard]] std::size_t p() const noexcept { return p_; }

    void derivative(std::span<const double> q, std::span<const double> u, std::span<double> dq) {
        const auto x = q.subspan(0, n_);
        const auto xhat = q.subspan(n_, n_);
        const auto ybar = q.subspan(2 * n_, p_);
        const double eta = q[2 * n_ + p_];
        const Matrix& A = plant_.A;
        const Matrix& B = plant_.B;
        const Matrix& C = plant_.C;
        const Matrix& L = cert_.L;

        for (std::size_t i = 0; i < n_; ++i) {
            double s = 0.0;
            for (std::size_t k = 0; k < m_; ++k) s += B(i, k) * u[k];
            bu_[i] = s;
        }
        double e2 = 0.0;
        for (std::size_t r = 0; r < p_; ++r) {
            double cx = 0.0;
            double cxhat = 0.0;
            for (std::size_t k = 0; k < n_; ++k) {
                cx += C(r, k) * x[k];
                cxhat += C(r, k) * xhat[k];
            }
            e_[r] = ybar[r] - cx;
            innov_[r] = ybar[r] - cxhat;
            e2 += e_[r] * e_[r];
        }
        for (std::size_t i = 0; i < n_; ++i) {
            double ax = 0.0;
            double axhat = 0.0;
            for (std::size_t k = 0; k < n_; ++k) {
                ax += A(i, k) * x[k];
                axhat += A(i, k) * xhat[k];
            }
            double li = 0.0;
            for (std::size_t r = 0; r < p_; ++r) li += L(i, r) * innov_[r];
            dq[i] = ax + bu_[i];
            dq[n_ + i] = axhat + bu_[i] + li;
        }
        for (std::size_t r = 0; r < p_; ++r) dq[2 * n_ + r] = 0.0;
        dq[2 * n_ + p_] = -params_.c1 * eta + params_.c2 * e2;
    }

    [[nodiscard]] double margin(std::span<const double> q) const {
        const auto x = q.subspan(0, n_);
        const auto ybar = q.subspan(2 * n_, p_);
        const double eta = q[2 * n_ + p_];
        double e2 = 0.0;
        for (std::size_t r = 0; r < p_; ++r) {
            double cx = 0.0;
            for (std::size_t k = 0; k < n_; ++k) cx += plant_.C(r, k) * x[k];
            const double e = ybar[r] - cx;
            e2 += e * e;
        }
        return cert_.gamma * e2 - trigger_threshold(params_, eta);
    }

    void apply_jump(std::span<double> q) const {
        const auto x = q.subspan(0, n_);
        for (std::size_t r = 0; r < p_; ++r) {
            double cx = 0.0;
            for (std::size_t k = 0; k < n_; ++k) cx += plant_.C(r, k) * x[k];
            q[2 * n_ + r] = cx;
        }
        q[2 * n_ + p_] *= params_.c3;
    }

private:
    const LtiPlant& plant_;
    const IssCertificate& cert_;
    const TriggerParams& params_;
    std::size_t n_;
    std::size_t p_;
    std::size_t m_;
    Vector bu_;
    Vector e_;
    Vector innov_;
};

// Classical RK4 over [t, t + h] with the input evaluated by `input_at`.
template <typename InputAt>
class Rk4 {
public:
    Rk4(FlowKernel& kernel, InputAt input_at)
        : kernel_(kernel), input_at_(std::move(input_at)), k1_(kernel.size()), k2_(kernel.size()),
          k3_(kernel.size()), k4_(kernel.size()), tmp_(kernel.size()) {}

    void step(std::span<const double> q, double t, double h, std::span<double> out) {
        const std::size_t n = q.size();
        kernel_.derivative(q, input_at_(t), k1_);
        for (std::size_t i = 0; i < n; ++i) tmp_[i] = q[i] + 0.5 * h * k1_[i];
        kernel_.derivative(tmp_, input_at_(t + 0.5 * h), k2_);
        for (std::size_t i = 0; i < n; ++i) tmp_[i] = q[i] + 0.5 * h * k2_[i];
        kernel_.derivative(tmp_, input_at_(t + 0.5 * h), k3_);
        for (std::size_t i = 0; i < n; ++i) tmp_[i] = q[i] + h * k3_[i];
        kernel_.derivative(tmp_, input_at_(t + h), k4_);
        for (std::size_t i = 0; i < n; ++i) {
            out[i] = q[i] + h / 6.0 * (k1_[i] + 2.0 * k2_[i] + 2.0 * k3_[i] + k4_[i]);
        }
    }

private:
    FlowKernel& kernel_;
    InputAt input_at_;
    Vector k1_, k2_, k3_, k4_, tmp_;
};

Vector flatten(const HybridState& s) {
    Vector q;
    q.reserve(s.x.size() * 2 + s.ybar.size() + 1);
    q.insert(q.end(), s.x.begin(), s.x.end());
    q.insert(q.end(), s.xhat.begin(), s.xhat.end());
    q.insert(q.end(), s.ybar.begin(), s.ybar.end());
    q.push_back(s.eta);
    return q;
}

void unflatten(std::span<const double> q, std::size_t n, std::size_t p, HybridState& s) {
    s.x.assign(q.begin(), q.begin() + static_cast<std::ptrdiff_t>(n));
    s.xhat.assign(q.begin() + static_cast<std::ptrdiff_t>(n), q.begin() + static_cast<std::ptrdiff_t>(2 * n));
    s.ybar.assign(q.begin() + static_cast<std::ptrdiff_t>(2 * n),
                  q.begin() + static_cast<std::ptrdiff_t>(2 * n + p));
    s.eta = q[2 * n + p];
}

void check_state_dims(const LtiPlant& plant, const HybridState& s) {
    if (s.x.size() != plant.states() || s.xhat.size() != plant.states() || s.ybar.size() != plant.outputs()) {
        throw Error(ErrorCode::DimensionMismatch, "hybrid state dimensions do not match the plant");
    }
}

std::string time_str(double t) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.9g", t);
    return buf;
}

}  // namespace

StateDerivative flow_derivative(const LtiPlant& plant, const IssCertificate& cert, const TriggerParams& params,
                                const HybridState& s, std::span<const double> u) {
    check_state_dims(plant, s);
    if (u.size() != plant.inputs()) throw Error(ErrorCode::DimensionMismatch, "input dimension does not match B");
    FlowKernel kernel(plant, cert, params);
    const Vector q = flatten(s);
    Vector dq(q.size());
    kernel.derivative(q, u, dq);
    StateDerivative d;
    const std::size_t n = plant.states();
    d.x.assign(dq.begin(), dq.begin() + static_cast<std::ptrdiff_t>(n));
    d.xhat.assign(dq.begin() + static_cast<std::ptrdiff_t>(n), dq.begin() + static_cast<std::ptrdiff_t>(2 * n));
    d.eta = dq.back();
    return d;
}

double trigger_threshold(const TriggerParams& params, double eta) noexcept {
    return params.sigma * params.c1 * eta + params.epsilon;
}

double trigger_margin(const LtiPlant& plant, const IssCertificate& cert, const TriggerParams& params,
                      const HybridState& s) {
    check_state_dims(plant, s);
    const Vector cx = plant.C * s.x;
    double e2 = 0.0;
    for (std::size_t r = 0; r < cx.size(); ++r) e2 += (s.ybar[r] - cx[r]) * (s.ybar[r] - cx[r]);
    return cert.gamma * e2 - trigger_threshold(params, s.eta);
}

HybridState jump(const HybridState& s, const TriggerParams& params, std::span<const double> y) {
    if (y.size() != s.ybar.size()) throw Error(ErrorCode::DimensionMismatch, "jump: output dimension mismatch");
    HybridState out = s;
    out.ybar.assign(y.begin(), y.end());
    out.eta = params.c3 * s.eta;
    return out;
}

HybridState initial_state(const LtiPlant& plant, Vector x0, Vector xhat0, double eta0) {
    if (x0.size() != plant.states() || xhat0.size() != plant.states()) {
        throw Error(ErrorCode::DimensionMismatch, "initial state dimension does not match A");
    }
    HybridState s;
    s.ybar = plant.C * x0;
    s.x = std::move(x0);
    s.xhat = std::move(xhat0);
    s.eta = eta0;
    return s;
}

std::int64_t simulate_streaming(const LtiPlant& plant, const IssCertificate& cert, const TriggerParams& params,
                                const InputSignal& input, const HybridState& q0, const SimConfig& cfg,
                                const SampleSink& sink) {
    cfg.validate();
    check_state_dims(plant, q0);
    if (input.dim() != plant.inputs()) throw Error(ErrorCode::DimensionMismatch, "input dimension does not match B");
    if (!(q0.eta >= 0.0)) throw Error(ErrorCode::InvalidArgument, "eta(0,0) must be nonnegative");

    FlowKernel kernel(plant, cert, params);
    const std::size_t n = plant.states();
    const std::size_t p = plant.outputs();

    // Piecewise-constant inputs are frozen at the step start (steps never
    // straddle a breakpoint); sampled series are interpolated.
    Vector u_step = input.value(0.0);
    Vector u_interp(input.dim());
    const bool frozen = input.kind() == InputSignal::Kind::PiecewiseConstant;
    auto input_at = [&](double tau) -> std::span<const double> {
        if (frozen) return u_step;
        u_interp = input.value(tau);
        return u_interp;
    };
    Rk4 rk4(kernel, input_at);

    // keep c1 h <= 1 so the eta decay stays well inside RK4's stability region
    const double h_max = params.c1 > 0.0 ? std::min(cfg.dt_max, 1.0 / params.c1) : cfg.dt_max;

    Vector q = flatten(q0);
    Vector q_next(q.size());
    Vector q_probe(q.size());
    double t = 0.0;
    std::int64_t j = 0;

    ArcSample sample;
    sample.state = q0;
    auto emit = [&](bool event) {
        sample.t = t;
        sample.j = j;
        sample.event = event;
        unflatten(q, n, p, sample.state);
        sink(sample);
    };
    emit(false);

    while (true) {
        if (kernel.margin(q) >= 0.0) {
            if (j >= cfg.max_jumps) {
                throw Error(ErrorCode::MaxJumpsExceeded,
                            "more than " + std::to_string(cfg.max_jumps) + " jumps by t = " + time_str(t) +
                                " (Zeno behaviour or mis-tuned epsilon)");
            }
            kernel.apply_jump(q);
            ++j;
            emit(true);
        }
        if (t >= cfg.t_end) break;

        double t_next = std::min(t + h_max, cfg.t_end);
        const double bp = input.next_breakpoint(t);
        if (bp <= t_next) t_next = bp;
        const double h = t_next - t;
        if (frozen) u_step = input.value(t);

        rk4.step(q, t, h, q_next);
        if (!std::all_of(q_next.begin(), q_next.end(), [](double v) { return std::isfinite(v); })) {
            throw Error(ErrorCode::NonFiniteState, "state became non-finite at t = " + time_str(t_next));
        }

        if (kernel.margin(q_next) >= 0.0) {
            // bracket: margin < 0 at 0, >= 0 at h
            double lo = 0.0;
            double hi = h;
            for (int it = 0; it < 60 && hi - lo > cfg.event_tol; ++it) {
                const double mid = 0.5 * (lo + hi);
                if (mid <= lo || mid >= hi) break;
                rk4.step(q, t, mid, q_probe);
                if (kernel.margin(q_probe) >= 0.0) {
                    hi = mid;
                    std::swap(q_next, q_probe);
                } else {
                    lo = mid;
                }
            }
            t_next = hi < h ? t + hi : t_next;
        }

        std::swap(q, q_next);
        t = t_next;
        double& eta = q[2 * n + p];
        if (eta < 0.0) {
            if (eta < -cfg.tol_eta) {
                throw Error(ErrorCode::NegativeAuxiliaryState, "eta = " + time_str(eta) + " at t = " + time_str(t));
            }
            eta = 0.0;
        }
        emit(false);
    }
    return j;
}

HybridArc simulate(const LtiPlant& plant, const IssCertificate& cert, const TriggerParams& params,
                   const InputSignal& input, const HybridState& q0, const SimConfig& cfg) {
    HybridArc arc;
    double interval_start = 0.0;
    simulate_streaming(plant, cert, params, input, q0, cfg, [&](const ArcSample& s) {
        if (s.event) {
            arc.domain.push_back({interval_start, s.t, s.j - 1});
            arc.events.push_back({s.t, s.j});
            interval_start = s.t;
        }
        arc.samples.push_back(s);
    });
    arc.domain.push_back({interval_start, arc.t_end(), static_cast<std::int64_t>(arc.events.size())});
    return arc;
}

HybridArc simulate(const LtiPlant& plant, const IssCertificate& cert, const TriggerParams& params,
                   const InputSignal& input, Vector x0, Vector xhat0, const SimConfig& cfg) {
    return simulate(plant, cert, params, input, initial_state(plant, std::move(x0), std::move(xhat0), cfg.eta0), cfg);
}

std::vector<ErrorSample> derived_error_states(const HybridArc& arc, const LtiPlant& plant) {
    std::vector<ErrorSample> out;
    out.reserve(arc.samples.size());
    for (const auto& s : arc.samples) {
        ErrorSample es;
        es.t = s.t;
        es.j = s.j;
        es.xi.resize(s.state.x.size());
        for (std::size_t i = 0; i < es.xi.size(); ++i) es.xi[i] = s.state.x[i] - s.state.xhat[i];
        es.e = plant.C * s.state.x;
        for (std::size_t r = 0; r < es.e.size(); ++r) es.e[r] = s.state.ybar[r] - es.e[r];
        out.push_back(std::move(es));
    }
    return out;
}

// ---------------------------------------------------------------------------
// CSV

void write_arc_csv(std::ostream& out, const HybridArc& arc) {
    const std::size_t n = arc.samples.empty() ? 0 : arc.samples.front().state.x.size();
    const std::size_t p = arc.samples.empty() ? 0 : arc.samples.front().state.ybar.size();
    out << "t,j";
    for (std::size_t i = 1; i <= n; ++i) out << ",x_" << i;
    for (std::size_t i = 1; i <= n; ++i) out << ",xhat_" << i;
    for (std::size_t i = 1; i <= p; ++i) out << ",ybar_" << i;
    out << ",eta,event_flag\n";
    char buf[40];
    auto put = [&](double v) {
        std::snprintf(buf, sizeof buf, ",%.17g", v);
        out << buf;
    };
    for (const auto& s : arc.samples) {
        std::snprintf(buf, sizeof buf, "%.17g", s.t);
        out << buf << ',' << s.j;
        for (double v : s.state.x) put(v);
        for (double v : s.state.xhat) put(v);
        for (double v : s.state.ybar) put(v);
        put(s.state.eta);
        out << ',' << (s.event ? 1 : 0) << '\n';
    }
}

HybridArc read_arc_csv(std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) throw Error(ErrorCode::InvalidArgument, "arc CSV: missing header");
    std::size_t n = 0;
    std::size_t p = 0;
    {
        std::istringstream hs(line);
        std::string col;
        while (std::getline(hs, col, ',')) {
            if (col.rfind("x_", 0) == 0) ++n;
            if (col.rfind("ybar_", 0) == 0) ++p;
        }
    }
    const std::size_t width = 2 + 2 * n + p + 2;
    HybridArc arc;
    double interval_start = 0.0;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<std::string> cells;
        std::istringstream ls(line);
        std::string cell;
        while (std::getline(ls, cell, ',')) cells.push_back(cell);
        if (cells.size() != width) throw Error(ErrorCode::InvalidArgument, "arc CSV: wrong column count");
        ArcSample s;
        s.t = std::strtod(cells[0].c_str(), nullptr);
        s.j = std::strtoll(cells[1].c_str(), nullptr, 10);
        std::size_t c = 2;
        for (std::size_t i = 0; i < n; ++i) s.state.x.push_back(std::strtod(cells[c++].c_str(), nullptr));
        for (std::size_t i = 0; i < n; ++i) s.state.xhat.push_back(std::strtod(cells[c++].c_str(), nullptr));
        for (std::size_t i = 0; i < p; ++i) s.state.ybar.push_back(std::strtod(cells[c++].c_str(), nullptr));
        s.state.eta = std::strtod(cells[c++].c_str(), nullptr);
        s.event = cells[c] == "1";
        if (s.event) {
            arc.domain.push_back({interval_start, s.t, s.j - 1});
            arc.events.push_back({s.t, s.j});
            interval_start = s.t;
        }
        arc.samples.push_back(std::move(s));
    }
    arc.domain.push_back({interval_start, arc.t_end(), static_cast<std::int64_t>(arc.events.size())});
    return arc;
}

}  // namespace etobs
