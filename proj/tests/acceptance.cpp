// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <thread>
#include <unistd.h>
#include <vector>

#include "etobs/analysis.hpp"
#include "etobs/battery.hpp"
#include "etobs/error.hpp"
#include "support.hpp"

namespace fs = std::filesystem;
using namespace etobs;
using namespace etobs::testing;

namespace {

constexpr double kEventTol = 1e-9;

struct Verdict {
    bool pass = false;
    std::string detail;
};

std::string fmt(const char* f, double a) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, a);
    return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

unsigned worker_count() { return std::max(1u, std::thread::hardware_concurrency()); }

// Dwell-time and jump-monotonicity audit over every arc simulated here.
struct ArcAudit {
    std::size_t arcs = 0;
    std::size_t jumps = 0;
    double worst_dwell_margin = std::numeric_limits<double>::infinity();  // min IET - (tau - 2 event_tol)
    std::string worst_dwell_arc;
    double worst_jump_increase = -std::numeric_limits<double>::infinity();
    std::string worst_jump_arc;

    void record(const std::string& name, const HybridArc& arc, const LtiPlant& plant, const IssCertificate& cert,
                const TriggerParams& params, const InputSignal& input) {
        ++arcs;
        jumps += arc.jumps();
        const IetStats iet = iet_stats(arc);
        const double m = measured_M(arc, plant, input);
        if (iet.count > 0 && m > 0.0) {
            const double margin = iet.min - (dwell_time_bound(m, params.epsilon, cert.gamma) - 2.0 * kEventTol);
            if (margin < worst_dwell_margin) {
                worst_dwell_margin = margin;
                worst_dwell_arc = name;
            }
        }
        const JumpDecreaseReport jr = check_jump_decrease(arc, cert, params);
        if (jr.jumps > 0 && jr.worst_relative_increase > worst_jump_increase) {
            worst_jump_increase = jr.worst_relative_increase;
            worst_jump_arc = name;
        }
    }
};

ArcAudit audit;
std::size_t max_jump_failures = 0;
std::size_t guarded_runs = 0;

// Simulation wrapper that counts runs and MaxJumpsExceeded for criterion 8.
HybridArc guarded_simulate(const LtiPlant& plant, const IssCertificate& cert, const TriggerParams& params,
                           const InputSignal& input, const Vector& x0, const Vector& xhat0, const SimConfig& cfg) {
    ++guarded_runs;
    try {
        return simulate(plant, cert, params, input, x0, xhat0, cfg);
    } catch (const Error& e) {
        if (e.code() == ErrorCode::MaxJumpsExceeded) ++max_jump_failures;
        throw;
    }
}

SimConfig battery_sim() {
    SimConfig cfg;
    cfg.t_end = 1500.0;
    cfg.eta0 = 1e6;
    cfg.event_tol = kEventTol;
    cfg.max_jumps = 1'000'000;
    return cfg;
}

// 1. Lyapunov solver on random stable systems.
Verdict lyapunov_suite() {
    const auto t0 = std::chrono::steady_clock::now();
    std::mt19937_64 rng(20240601);
    std::uniform_int_distribution<int> dim(1, 6);
    std::uniform_real_distribution<double> margin(0.05, 1.0);
    double worst = 0.0;
    std::size_t spd_failures = 0;
    for (int k = 0; k < 100; ++k) {
        const auto n = static_cast<std::size_t>(dim(rng));
        Matrix a(n, n);
        if (k % 2 == 0) {
            a = random_stable(rng, n, margin(rng));
        } else {
            // shift by the spectral abscissa only: closer to the stability boundary
            a = random_matrix(rng, n, n);
            double abscissa = -std::numeric_limits<double>::infinity();
            for (const auto& l : eigenvalues(a)) abscissa = std::max(abscissa, l.real());
            const double shift = abscissa + margin(rng);
            for (std::size_t i = 0; i < n; ++i) a(i, i) -= shift;
        }
        const SymMatrix q = random_spd(rng, n);
        const SymMatrix p = solve_lyapunov(a, q);
        const Matrix pm = p.to_matrix();
        const Matrix r = a.transpose() * pm + pm * a + q.to_matrix();
        worst = std::max(worst, r.frobenius() / q.to_matrix().frobenius());
        // SPD by Cholesky: an independent check of positive definiteness
        Matrix l(n, n);
        bool spd = true;
        for (std::size_t i = 0; i < n && spd; ++i) {
            for (std::size_t j = 0; j <= i; ++j) {
                double s = pm(i, j);
                for (std::size_t m = 0; m < j; ++m) s -= l(i, m) * l(j, m);
                if (i == j) {
                    if (!(s > 0.0)) {
                        spd = false;
                        break;
                    }
                    l(i, i) = std::sqrt(s);
                } else {
                    l(i, j) = s / l(j, j);
                }
            }
        }
        if (!spd) ++spd_failures;
    }
    const double dt = seconds_since(t0);
    return {worst <= 1e-9 && spd_failures == 0 && dt < 5.0,
            "100 systems, worst relative residual " + fmt("%.3g", worst) + ", non-SPD " +
                std::to_string(spd_failures) + ", " + fmt("%.3f", dt) + " s"};
}

// 2. Battery design reproduction at c = 0.5.
Verdict design_reproduction() {
    const IssCertificate cert = battery_cert();
    double worst_p = 0.0;
    for (std::size_t i = 0; i < 2; ++i) {
        for (std::size_t j = 0; j < 2; ++j) {
            worst_p = std::max(worst_p, std::abs(cert.P(i, j) - kPublishedP(i, j)) / std::abs(kPublishedP(i, j)));
        }
    }
    const double ea = std::abs(cert.alpha - kPublishedAlpha) / kPublishedAlpha;
    const double eg = std::abs(cert.gamma - kPublishedGamma) / kPublishedGamma;
    return {worst_p <= 0.05 && ea <= 0.05 && eg <= 0.10,
            "c = 0.5, P worst elementwise " + fmt("%.2f%%", 100 * worst_p) + ", alpha " + fmt("%.6g", cert.alpha) +
                " (" + fmt("%.2f%%", 100 * ea) + "), gamma " + fmt("%.6g", cert.gamma) + " (" +
                fmt("%.2f%%", 100 * eg) + ")"};
}

// 3. Certificate on 20 randomized battery runs.
Verdict certificate_runs() {
    const auto t0 = std::chrono::steady_clock::now();
    const LtiPlant plant = battery_plant();
    const IssCertificate cert = battery_cert();
    const auto rows = battery::reference_rows();
    const battery::InitialConditionRanges ranges;
    std::size_t held = 0;
    std::size_t failed = 0;
    double worst = -std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < 20; ++k) {
        const TriggerParams params = battery::row_parameters(cert, rows[k % rows.size()], std::nullopt);
        const battery::InitialCondition ic = battery::draw_initial_condition(777, k, ranges);
        const InputSignal profile = battery::phev_profile(100 + k, 1500.0);
        try {
            const HybridArc arc = guarded_simulate(plant, cert, params, profile, ic.x0, ic.xhat0, battery_sim());
            const CertificateReport r = check_certificate(arc, cert, params);
            worst = std::max(worst, r.worst_violation);
            if (r.holds) ++held;
            audit.record("randomized battery run " + std::to_string(k), arc, plant, cert, params, profile);
        } catch (const Error&) {
            ++failed;
        }
    }
    const double dt = seconds_since(t0);
    return {held == 20 && dt < 60.0,
            std::to_string(held) + "/20 runs hold (failed " + std::to_string(failed) + "), worst relative excess " +
                fmt("%.3g", worst) + ", " + fmt("%.1f", dt) + " s"};
}

// 4b. Ramp plant with sigma = 0: every IET equals sqrt(eps/gamma).
struct RampResult {
    bool pass = true;
    double worst = 0.0;
    std::size_t gaps = 0;
};

RampResult ramp_iets() {
    RampResult res;
    const LtiPlant plant = ramp_plant();
    const IssCertificate cert = ramp_cert();
    for (double eps : {1e-4, 1e-3, 2e-2}) {
        const TriggerParams params = ramp_params(cert, eps);
        SimConfig cfg;
        cfg.t_end = 5.0;
        cfg.dt_max = 1e-3;
        cfg.event_tol = kEventTol;
        const InputSignal u = InputSignal::constant({1.0});
        const HybridArc arc = guarded_simulate(plant, cert, params, u, {0.0}, {0.0}, cfg);
        audit.record("ramp eps " + fmt("%g", eps), arc, plant, cert, params, u);
        const double gap = std::sqrt(eps / cert.gamma);
        for (double g : iet_stats(arc).series) {
            res.worst = std::max(res.worst, std::abs(g - gap));
            ++res.gaps;
        }
    }
    res.pass = res.gaps > 0 && res.worst <= 2.0 * kEventTol;
    return res;
}

// 6. Sweep trends over 100 trials per row.
Verdict sweep_trends() {
    const auto t0 = std::chrono::steady_clock::now();
    battery::SweepConfig cfg;
    cfg.trials = 100;
    cfg.threads = worker_count();
    cfg.rows = {{500.0, 1.0, 50.0, 1.0, 0.1},
                {500.0, 1.0, 50.0, 1.0, 1.0},
                {500.0, 1.0, 50.0, 1.0, 10.0},
                {500.0, 1.0, 50.0, 1.0, 100.0},
                {0.0, 1.0, 50.0, 1.0, 1.0}};
    const battery::ExperimentReport rep = battery::run_sweep(cfg, {});
    const double dt = seconds_since(t0);

    bool all_ok = true;
    for (const auto& r : rep.rows) all_ok = all_ok && r.valid && r.trials_failed == 0;
    bool tx_down = true;
    bool err_up = true;
    std::string counts;
    for (std::size_t k = 0; k < 4; ++k) {
        counts += (k ? " / " : "") + fmt("%.1f", rep.rows[k].avg_transmissions);
        if (k == 0) continue;
        tx_down = tx_down && rep.rows[k].avg_transmissions < rep.rows[k - 1].avg_transmissions;
        err_up = err_up && rep.rows[k].max_err_u_rc > rep.rows[k - 1].max_err_u_rc &&
                 rep.rows[k].max_err_soc > rep.rows[k - 1].max_err_soc;
    }
    const double ratio = rep.rows[4].avg_transmissions / rep.rows[1].avg_transmissions;
    return {all_ok && tx_down && err_up && ratio >= 1.5 && dt < 600.0,
            "eps 0.1/1/10/100 transmissions " + counts + (tx_down ? " (decreasing)" : " (NOT decreasing)") +
                ", errors " + (err_up ? "increasing" : "NOT increasing") + ", sigma = 0 ratio " +
                fmt("%.2f", ratio) + ", " + fmt("%.1f", dt) + " s"};
}

// 7. Silence in the [720, 900] rest window once the output has settled.
Verdict rest_window_silence() {
    const LtiPlant plant = battery_plant();
    const IssCertificate cert = battery_cert();
    const TriggerParams params = battery_params(cert);
    const double half_gap = 0.5 * std::sqrt(params.epsilon / cert.gamma);
    const double rest_begin = battery::kRestWindows[0].first;
    const double rest_end = battery::kRestWindows[0].second;
    std::size_t ok = 0;
    std::string spans;
    const std::uint64_t seeds[] = {1, 2, 3, 4, 5};
    for (std::uint64_t seed : seeds) {
        const InputSignal profile = battery::phev_profile(seed, 1500.0);
        const HybridArc arc =
            guarded_simulate(plant, cert, params, profile, Vector{1.0, 1.0}, Vector{1.0, 0.25}, battery_sim());
        audit.record("rest window seed " + std::to_string(seed), arc, plant, cert, params, profile);

        auto z = [&](const ArcSample& s) { return plant.C(0, 0) * s.state.x[0] + plant.C(0, 1) * s.state.x[1]; };
        double z_end = 0.0;
        for (const auto& s : arc.samples) {
            if (s.t <= rest_end) z_end = z(s);
        }
        // settling time T: last sample in the rest window still farther than half_gap from z_end
        double settle = rest_begin;
        for (const auto& s : arc.samples) {
            if (s.t >= rest_begin && s.t <= rest_end && std::abs(z(s) - z_end) >= half_gap) settle = s.t;
        }
        double t_q = settle;
        for (const auto& e : arc.events) {
            if (e.t >= settle && e.t <= rest_end) {
                t_q = e.t;
                break;
            }
        }
        bool silent = t_q < rest_end;
        for (const auto& e : arc.events) silent = silent && !(e.t > t_q && e.t < rest_end);
        bool detected = false;
        if (silent) {
            for (const auto& iv : detect_quiescence(arc, rest_end - t_q)) {
                detected = detected || (iv.begin <= t_q && iv.end >= rest_end);
            }
        }
        if (silent && detected) ++ok;
        spans += (spans.empty() ? "" : ", ") + fmt("[%.1f, ", t_q) + fmt("%.0f]", rest_end);
    }
    return {ok == std::size(seeds),
            std::to_string(ok) + "/5 profile seeds silent after settling: " + spans};
}

// 8. Full reference grid at max_jumps = 1e6.
Verdict zeno_guard() {
    const auto t0 = std::chrono::steady_clock::now();
    battery::SweepConfig cfg;
    cfg.trials = 10;
    cfg.seed = 99;
    cfg.profile_seed = 7;
    cfg.threads = worker_count();
    const battery::ExperimentReport rep = battery::run_sweep(cfg, {});
    std::size_t failed = 0;
    std::size_t invalid = 0;
    for (const auto& r : rep.rows) {
        failed += r.trials_failed;
        if (!r.valid) ++invalid;
    }
    const double dt = seconds_since(t0);
    return {failed == 0 && invalid == 0 && max_jump_failures == 0,
            "9 rows x 10 trials: failed trials " + std::to_string(failed) + ", invalid rows " +
                std::to_string(invalid) + "; other runs " + std::to_string(guarded_runs) + ", MaxJumpsExceeded " +
                std::to_string(max_jump_failures) + ", " + fmt("%.1f", dt) + " s"};
}

std::string read_file(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// 9. Byte-identical outputs from repeated executable runs.
Verdict determinism() {
    const fs::path tmp = fs::temp_directory_path() / ("etobs_acceptance_" + std::to_string(::getpid()));
    fs::remove_all(tmp);
    fs::create_directories(tmp);
    {
        std::ofstream(tmp / "sweep.json") << R"({
  "plant": { "preset": "battery" },
  "trigger": { "epsilon": 1.0 },
  "sweep": { "trials": 4, "horizon_s": 300.0, "error_window_s": [200.0, 300.0], "threads": 4,
             "rows": [ { "sigma": 500, "epsilon": 1.0 }, { "sigma": 0, "epsilon": 1.0 } ] }
})";
    }
    const std::string exe = ETOBS_CLI_PATH;
    const std::string battery_cfg = std::string(ETOBS_CONFIG_DIR) + "/battery.json";
    bool ran = true;
    for (const char* run : {"a", "b"}) {
        const fs::path out = tmp / run;
        const std::string sim = "\"" + exe + "\" simulate --config \"" + battery_cfg + "\" --seed 7 --out \"" +
                                (out / "simulate").string() + "\" > /dev/null";
        const std::string swp = "\"" + exe + "\" sweep --config \"" + (tmp / "sweep.json").string() +
                                "\" --seed 7 --out \"" + (out / "sweep").string() + "\" > /dev/null";
        ran = ran && std::system(sim.c_str()) == 0 && std::system(swp.c_str()) == 0;
    }
    std::size_t compared = 0;
    std::size_t differing = 0;
    std::size_t bytes = 0;
    if (ran) {
        for (const auto& entry : fs::recursive_directory_iterator(tmp / "a")) {
            if (entry.path().extension() != ".csv") continue;
            const fs::path twin = tmp / "b" / fs::relative(entry.path(), tmp / "a");
            const std::string x = read_file(entry.path());
            ++compared;
            bytes += x.size();
            if (!fs::exists(twin) || read_file(twin) != x) ++differing;
        }
    }
    fs::remove_all(tmp);
    return {ran && compared >= 5 && differing == 0,
            std::string(ran ? "" : "executable failed; ") + std::to_string(compared) + " CSV files (" +
                std::to_string(bytes) + " bytes) compared, " + std::to_string(differing) + " differ"};
}

}  // namespace

int main() {
    std::map<int, Verdict> v;
    auto guarded = [&](int id, const std::function<Verdict()>& f) {
        try {
            v[id] = f();
        } catch (const std::exception& e) {
            v[id] = {false, std::string("exception: ") + e.what()};
        }
    };

    guarded(1, lyapunov_suite);
    guarded(2, design_reproduction);
    guarded(3, certificate_runs);
    guarded(7, rest_window_silence);

    RampResult ramp;
    guarded(4, [&] {
        // reference run with its own profile, then the analytic ramp
        const BatteryRun& run = battery_reference_run();
        audit.record("reference run", run.arc, run.plant, run.cert, run.params, run.input);
        ramp = ramp_iets();
        const bool pass = ramp.pass && audit.worst_dwell_margin >= 0.0;
        return Verdict{pass, std::to_string(audit.arcs) + " arcs, worst min IET - bound margin " +
                                 fmt("%.4g s", audit.worst_dwell_margin) + " (" + audit.worst_dwell_arc +
                                 "); ramp: " + std::to_string(ramp.gaps) + " gaps, worst |IET - sqrt(eps/gamma)| " +
                                 fmt("%.3g", ramp.worst)};
    });
    guarded(5, [&] {
        return Verdict{audit.jumps > 0 && audit.worst_jump_increase <= 1e-10,
                       std::to_string(audit.jumps) + " jumps over " + std::to_string(audit.arcs) +
                           " arcs, worst relative increase " + fmt("%.3g", audit.worst_jump_increase) + " (" +
                           audit.worst_jump_arc + ")"};
    });
    guarded(6, sweep_trends);
    guarded(8, zeno_guard);
    guarded(9, determinism);

    bool all = true;
    for (const auto& [id, verdict] : v) {
        std::printf("criterion %d: %s  %s\n", id, verdict.pass ? "PASS" : "FAIL", verdict.detail.c_str());
        all = all && verdict.pass;
    }
    return all ? 0 : 1;
}
