#include "etobs/battery.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <map>
#include <ostream>
#include <random>
#include <sstream>
#include <thread>
#include <tuple>

#include "etobs/error.hpp"

namespace etobs::battery {

namespace {

// Uniform in [0, 1) from the top 53 bits; unlike std::uniform_real_distribution
// this mapping is identical across standard libraries.
double unit_uniform(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

double draw(std::mt19937_64& rng, Range r) { return r.lo + (r.hi - r.lo) * unit_uniform(rng); }

std::uint64_t mix(std::uint64_t seed, std::uint64_t stream) {
    // splitmix64 finalizer
    std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (stream + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

std::string num(double v) {
    std::ostringstream os;
    os.precision(6);
    os << v;
    return os.str();
}

}  // namespace

void BatteryParams::validate() const {
    if (!(tau_rc_s > 0.0) || !(cap_c_f > 0.0) || !(q_cap_as > 0.0) || !(r_int_ohm > 0.0)) {
        throw Error(ErrorCode::InvalidArgument, "battery tau_rc, C, Q and R_int must be strictly positive");
    }
    if (!std::isfinite(alpha_f_v) || !std::isfinite(beta_f_v)) {
        throw Error(ErrorCode::InvalidArgument, "battery alpha_f and beta_f must be finite");
    }
}

LtiPlant build_battery_plant(const BatteryParams& p) {
    p.validate();
    Matrix a{{-1.0 / p.tau_rc_s, 0.0}, {0.0, 0.0}};
    Matrix b{{1.0 / p.cap_c_f}, {-1.0 / p.q_cap_as}};
    Matrix c{{-1.0, p.alpha_f_v}};
    Matrix d{{-p.r_int_ohm}};
    return LtiPlant::make(std::move(a), std::move(b), std::move(c), std::move(d), Vector{p.beta_f_v});
}

Matrix reference_gain() { return Matrix{{0.64}, {2.33}}; }

SymMatrix reference_q() {
    const double d[] = {100.0, 1000.0};
    return SymMatrix::diagonal(d);
}

InputSignal phev_profile(std::uint64_t seed, double horizon) {
    if (!(horizon > 0.0)) throw Error(ErrorCode::NonPositiveArgument, "profile horizon must be positive");
    std::mt19937_64 rng(mix(seed, 0));
    std::vector<double> times;
    std::vector<Vector> values;
    double t = 0.0;
    while (t < horizon) {
        const auto rest = std::find_if(std::begin(kRestWindows), std::end(kRestWindows),
                                       [&](const auto& w) { return t >= w.first && t < w.second; });
        if (rest != std::end(kRestWindows)) {
            times.push_back(t);
            values.push_back({0.0});
            t = rest->second;
            continue;
        }
        double end = t + draw(rng, {5.0, 60.0});
        const double current = draw(rng, {-kMaxCurrentA, kMaxCurrentA});
        for (const auto& w : kRestWindows) {
            if (w.first > t && w.first < end) end = w.first;
        }
        times.push_back(t);
        values.push_back({current});
        t = end;
    }
    return InputSignal::piecewise_constant(std::move(times), std::move(values));
}

void write_profile_csv(std::ostream& out, const InputSignal& profile) {
    out << "t,i_bat\n";
    char buf[80];
    const auto bps = profile.breakpoints();
    const auto vals = profile.values();
    for (std::size_t k = 0; k < bps.size(); ++k) {
        std::snprintf(buf, sizeof buf, "%.17g,%.17g\n", bps[k], vals[k].front());
        out << buf;
    }
}

InitialCondition draw_initial_condition(std::uint64_t seed, std::size_t trial, const InitialConditionRanges& r) {
    std::mt19937_64 rng(mix(seed, 1000 + trial));
    const double u_rc = draw(rng, r.u_rc);
    const double soc = draw(rng, r.soc);
    const double xi_u_rc = draw(rng, r.xi_u_rc);
    const double xi_soc = draw(rng, r.xi_soc);
    return {{u_rc, soc}, {u_rc - xi_u_rc, soc - xi_soc}};
}

std::vector<SweepRow> reference_rows() {
    return {
        {500.0, 1.0, 50.0, 1.0, 1.0},  {500.0, 1.0, 50.0, 1.0, 0.1},   {500.0, 1.0, 50.0, 1.0, 10.0},
        {500.0, 1.0, 50.0, 1.0, 100.0}, {500.0, 0.01, 50.0, 1.0, 1.0}, {500.0, 0.1, 50.0, 1.0, 1.0},
        {500.0, 10.0, 50.0, 1.0, 1.0}, {1000.0, 1.0, 50.0, 1.0, 1.0},  {0.0, 1.0, 50.0, 1.0, 1.0},
    };
}

void SweepConfig::validate() const {
    if (trials < 1) throw Error(ErrorCode::InvalidArgument, "sweep needs at least one trial");
    if (!(horizon > 0.0)) throw Error(ErrorCode::InvalidArgument, "sweep horizon must be positive");
    if (!(error_window.first >= 0.0 && error_window.first < error_window.second && error_window.second <= horizon)) {
        throw Error(ErrorCode::InvalidArgument, "error window must lie inside [0, horizon]");
    }
    if (!(eta0 >= 0.0)) throw Error(ErrorCode::InvalidArgument, "eta0 must be nonnegative");
}

TriggerParams row_parameters(const IssCertificate& cert, const SweepRow& row, std::optional<double> alpha_bar) {
    TriggerRequest req;
    req.alpha_bar = alpha_bar.value_or(cert.alpha);
    req.c1 = row.c1;
    req.c2 = row.c2;
    req.c3 = row.c3;
    req.sigma = row.sigma;
    req.epsilon = row.epsilon;
    req.nu = minimal_nu(cert, req, row.epsilon);
    return select_parameters(cert, req);
}

TrialMetrics run_trial(const LtiPlant& plant, const IssCertificate& cert, const TriggerParams& params,
                       const InputSignal& profile, const InitialCondition& ic, const SweepConfig& cfg) {
    SimConfig sim;
    sim.t_end = cfg.horizon;
    sim.dt_max = cfg.dt_max;
    sim.event_tol = cfg.event_tol;
    sim.max_jumps = cfg.max_jumps;
    sim.eta0 = cfg.eta0;

    const Matrix ca = plant.C * plant.A;
    const Matrix cb = plant.C * plant.B;

    TrialMetrics m;
    CertificateMonitor monitor(cert, params, kDefaultCertTol, /*keep_samples=*/false);
    double last_event = -1.0;
    double u_pre = 0.0;
    bool have_pre = false;
    auto sink = [&](const ArcSample& s) {
        monitor.observe(s);
        if (s.event) {
            if (last_event >= 0.0) m.min_iet = std::min(m.min_iet, s.t - last_event);
            last_event = s.t;
            const double u_post = lyapunov_value(cert, params, s.state);
            if (have_pre) {
                m.worst_jump_increase =
                    std::max(m.worst_jump_increase, (u_post - u_pre) / std::max(u_pre, std::numeric_limits<double>::min()));
            }
        } else {
            u_pre = lyapunov_value(cert, params, s.state);
            have_pre = true;
        }
        if (s.t >= cfg.error_window.first && s.t <= cfg.error_window.second) {
            m.max_err_u_rc = std::max(m.max_err_u_rc, std::abs(s.state.x[0] - s.state.xhat[0]));
            m.max_err_soc = std::max(m.max_err_soc, std::abs(s.state.x[1] - s.state.xhat[1]));
        }
        const double cax = ca(0, 0) * s.state.x[0] + ca(0, 1) * s.state.x[1];
        m.m_measured = std::max({m.m_measured, std::abs(cax + cb(0, 0) * profile.value(s.t)[0]),
                                 std::abs(cax + cb(0, 0) * profile.left_value(s.t)[0])});
    };
    m.transmissions = simulate_streaming(plant, cert, params, profile,
                                         initial_state(plant, ic.x0, ic.xhat0, cfg.eta0), sim, sink);
    m.certificate_holds = monitor.report().holds;
    return m;
}

ExperimentReport run_sweep(const SweepConfig& cfg, const DesignInputs& design) {
    cfg.validate();
    const LtiPlant plant = build_battery_plant(design.battery);
    const IssCertificate cert = iss_constants(plant, design.gain, design.q, design.c);
    const InputSignal profile = phev_profile(cfg.profile_seed, cfg.horizon);

    std::vector<InitialCondition> ics;
    ics.reserve(cfg.trials);
    for (std::size_t k = 0; k < cfg.trials; ++k) ics.push_back(draw_initial_condition(cfg.seed, k, cfg.ic_ranges));

    ExperimentReport report;
    for (const auto& row : cfg.rows) {
        SweepRowResult res;
        res.row = row;
        TriggerParams params;
        try {
            params = row_parameters(cert, row, design.alpha_bar);
            res.valid = true;
        } catch (const Error& e) {
            res.message = e.what();
            report.rows.push_back(std::move(res));
            continue;
        }

        struct Outcome {
            std::optional<TrialMetrics> metrics;
            std::string error;
        };
        std::vector<Outcome> outcomes(cfg.trials);
        auto run_one = [&](std::size_t k) {
            try {
                outcomes[k].metrics = run_trial(plant, cert, params, profile, ics[k], cfg);
            } catch (const Error& e) {
                outcomes[k].error = e.what();
            }
        };
        const unsigned workers = std::max(1u, std::min<unsigned>(cfg.threads, static_cast<unsigned>(cfg.trials)));
        if (workers == 1) {
            for (std::size_t k = 0; k < cfg.trials; ++k) run_one(k);
        } else {
            std::atomic<std::size_t> next{0};
            std::vector<std::thread> pool;
            for (unsigned w = 0; w < workers; ++w) {
                pool.emplace_back([&] {
                    for (std::size_t k = next++; k < cfg.trials; k = next++) run_one(k);
                });
            }
            for (auto& th : pool) th.join();
        }

        // reduce in trial order so the result does not depend on scheduling
        double sum_tx = 0.0;
        double sum_urc = 0.0;
        double sum_soc = 0.0;
        double m_max = 0.0;
        for (std::size_t k = 0; k < cfg.trials; ++k) {
            const auto& o = outcomes[k];
            if (!o.metrics) {
                ++res.trials_failed;
                if (res.message.empty()) res.message = "trial " + std::to_string(k) + ": " + o.error;
                continue;
            }
            ++res.trials_ok;
            sum_tx += static_cast<double>(o.metrics->transmissions);
            sum_urc += o.metrics->max_err_u_rc;
            sum_soc += o.metrics->max_err_soc;
            res.certificate_holds = res.certificate_holds && o.metrics->certificate_holds;
            res.min_iet = std::min(res.min_iet, o.metrics->min_iet);
            m_max = std::max(m_max, o.metrics->m_measured);
        }
        if (res.trials_ok > 0) {
            const auto n = static_cast<double>(res.trials_ok);
            res.avg_transmissions = sum_tx / n;
            res.max_err_u_rc = sum_urc / n;
            res.max_err_soc = sum_soc / n;
        } else {
            res.valid = false;
        }
        if (m_max > 0.0) res.dwell_bound = dwell_time_bound(m_max, params.epsilon, cert.gamma);
        report.rows.push_back(std::move(res));
    }
    return report;
}

void write_sweep_csv(std::ostream& out, const ExperimentReport& report) {
    out << "sigma,c1,epsilon,transmissions,xi_urc_max,xi_soc_max\n";
    char buf[256];
    for (const auto& r : report.rows) {
        if (r.valid) {
            std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n", r.row.sigma, r.row.c1,
                          r.row.epsilon, r.avg_transmissions, r.max_err_u_rc, r.max_err_soc);
        } else {
            std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g,nan,nan,nan\n", r.row.sigma, r.row.c1, r.row.epsilon);
        }
        out << buf;
    }
}

std::vector<TrendLine> check_trends(const ExperimentReport& report) {
    std::vector<TrendLine> lines;
    // epsilon series: rows sharing sigma, c1, c2, c3
    std::map<std::tuple<double, double, double, double>, std::vector<const SweepRowResult*>> groups;
    for (const auto& r : report.rows) {
        if (r.valid) groups[{r.row.sigma, r.row.c1, r.row.c2, r.row.c3}].push_back(&r);
    }
    for (auto& [key, rows] : groups) {
        if (rows.size() < 2) continue;
        std::sort(rows.begin(), rows.end(), [](auto* a, auto* b) { return a->row.epsilon < b->row.epsilon; });
        bool tx_down = true;
        bool err_up = true;
        std::string eps_list;
        for (std::size_t k = 0; k < rows.size(); ++k) {
            eps_list += (k ? " -> " : "") + num(rows[k]->row.epsilon);
            if (k == 0) continue;
            tx_down = tx_down && rows[k]->avg_transmissions < rows[k - 1]->avg_transmissions;
            err_up = err_up && rows[k]->max_err_u_rc > rows[k - 1]->max_err_u_rc &&
                     rows[k]->max_err_soc > rows[k - 1]->max_err_soc;
        }
        const std::string where = "sigma = " + num(std::get<0>(key)) + ", c1 = " + num(std::get<1>(key));
        lines.push_back({"transmissions strictly decrease as epsilon goes " + eps_list + " (" + where + ")", tx_down});
        lines.push_back({"error maxima strictly increase as epsilon goes " + eps_list + " (" + where + ")", err_up});
    }
    // absolute threshold versus dynamic rule
    for (const auto& zero : report.rows) {
        if (!zero.valid || zero.row.sigma != 0.0) continue;
        for (const auto& other : report.rows) {
            if (!other.valid || other.row.sigma <= 0.0 || other.row.c1 != zero.row.c1 || other.row.c2 != zero.row.c2 ||
                other.row.c3 != zero.row.c3 || other.row.epsilon != zero.row.epsilon) {
                continue;
            }
            const double ratio = zero.avg_transmissions / std::max(other.avg_transmissions, 1e-300);
            lines.push_back({"sigma = 0 transmits more than sigma = " + num(other.row.sigma) + " at epsilon = " +
                                 num(zero.row.epsilon) + " (ratio " + num(ratio) + ")",
                             zero.avg_transmissions > other.avg_transmissions});
        }
    }
    return lines;
}

}  // namespace etobs::battery
