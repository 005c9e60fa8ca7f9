#include "etobs/cli.hpp"

#include <cstdio>
#include <fstream>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "etobs/analysis.hpp"
#include "etobs/battery.hpp"
#include "etobs/config.hpp"
#include "etobs/error.hpp"
#include "etobs/svg.hpp"

namespace etobs::cli {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

struct Designed {
    IssCertificate cert;
    TriggerParams params;
};

std::string num(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.10g", v);
    return buf;
}

void print_matrix(std::ostream& out, const std::string& name, const Matrix& m) {
    for (std::size_t i = 0; i < m.rows(); ++i) {
        out << (i == 0 ? name + " = [" : std::string(name.size() + 4, ' '));
        for (std::size_t j = 0; j < m.cols(); ++j) out << (j ? ", " : "") << num(m(i, j));
        out << (i + 1 == m.rows() ? "]\n" : ";\n");
    }
}

json matrix_json(const Matrix& m) {
    json rows = json::array();
    for (std::size_t i = 0; i < m.rows(); ++i) {
        json r = json::array();
        for (std::size_t j = 0; j < m.cols(); ++j) r.push_back(m(i, j));
        rows.push_back(std::move(r));
    }
    return rows;
}

// Loads the config and applies command-line overrides. Throws ConfigError.
RunConfig prepare(const Options& opt) {
    RunConfig cfg = load_config(opt.config);
    if (opt.seed) {
        cfg.input.seed = *opt.seed;
        cfg.sweep.seed = *opt.seed;
        cfg.sweep.profile_seed = *opt.seed;
    }
    if (opt.out_dir) cfg.output_dir = opt.out_dir;
    return cfg;
}

Designed run_design(const RunConfig& cfg) {
    Designed d;
    d.cert = iss_constants(cfg.plant, cfg.gain, cfg.q, cfg.c);
    d.params = select_parameters(d.cert, resolve_trigger(cfg, d.cert));
    return d;
}

void print_design(std::ostream& out, const RunConfig& cfg, const Designed& d) {
    const auto& c = d.cert;
    const auto& p = d.params;
    out << "ISS certificate (c = " << num(c.c) << ")\n";
    print_matrix(out, "L", c.L);
    print_matrix(out, "Q", c.Q.to_matrix());
    print_matrix(out, "P", c.P.to_matrix());
    out << "alpha = " << num(c.alpha) << " 1/s\n";
    out << "gamma = " << num(c.gamma) << "\n\n";
    out << "triggering parameters\n";
    out << "alpha_bar = " << num(p.alpha_bar) << " 1/s, nu = " << num(p.nu) << '\n';
    out << "sigma = " << num(p.sigma) << ", c1 = " << num(p.c1) << " 1/s, c2 = " << num(p.c2)
        << ", c3 = " << num(p.c3) << '\n';
    out << "d = " << num(p.d) << '\n';
    out << "epsilon* = " << num(p.epsilon_star) << ", epsilon = " << num(p.epsilon);
    if (p.epsilon_clamped) out << " (requested " << num(*cfg.trigger.epsilon) << ", clamped to epsilon*)";
    out << '\n';
    if (cfg.m_bound) {
        out << "dwell-time bound = " << num(dwell_time_bound(*cfg.m_bound, p.epsilon, c.gamma)) << " s (M = "
            << num(*cfg.m_bound) << ")\n";
    }
}

json design_json(const RunConfig& cfg, const Designed& d) {
    const auto& c = d.cert;
    const auto& p = d.params;
    json j;
    j["certificate"] = {{"L", matrix_json(c.L)}, {"Q", matrix_json(c.Q.to_matrix())}, {"P", matrix_json(c.P.to_matrix())},
                        {"c", c.c},          {"alpha_per_s", c.alpha},           {"gamma", c.gamma}};
    j["trigger"] = {{"alpha_bar_per_s", p.alpha_bar}, {"nu", p.nu},           {"sigma", p.sigma},
                    {"c1_per_s", p.c1},               {"c2", p.c2},           {"c3", p.c3},
                    {"d", p.d},                       {"epsilon", p.epsilon}, {"epsilon_star", p.epsilon_star},
                    {"epsilon_clamped", p.epsilon_clamped}};
    if (cfg.m_bound) {
        j["dwell"] = {{"M_bound", *cfg.m_bound}, {"tau_s", dwell_time_bound(*cfg.m_bound, p.epsilon, c.gamma)}};
    }
    return j;
}

fs::path output_dir(const RunConfig& cfg) {
    fs::path dir = cfg.output_dir.value_or("out");
    fs::create_directories(dir);
    return dir;
}

std::ofstream open_out(const fs::path& p) {
    std::ofstream f(p, std::ios::binary);
    if (!f) throw Error(ErrorCode::ConfigError, "cannot write " + p.string());
    return f;
}

void write_input_csv(std::ostream& out, const RunConfig& cfg, const InputSignal& input) {
    if (cfg.battery_preset) {
        battery::write_profile_csv(out, input);
        return;
    }
    out << 't';
    for (std::size_t i = 0; i < input.dim(); ++i) out << ",u_" << i;
    out << '\n';
    char buf[40];
    const auto times = input.breakpoints();
    const auto values = input.values();
    for (std::size_t k = 0; k < values.size(); ++k) {
        std::snprintf(buf, sizeof buf, "%.17g", k < times.size() ? times[k] : 0.0);
        out << buf;
        for (double v : values[k]) {
            std::snprintf(buf, sizeof buf, ",%.17g", v);
            out << buf;
        }
        out << '\n';
    }
}

void write_plots(std::ostream& out, const RunConfig& cfg, const HybridArc& arc, const InputSignal& input) {
    const LtiPlant& plant = cfg.plant;
    svg::Panel in{"input u", "t [s]", {}};
    svg::Panel y{cfg.battery_preset ? "terminal voltage V_bat [V]" : "output y", "t [s]", {}};
    svg::Panel xi{"estimation error x - xhat", "t [s]", {}};
    svg::Panel iet{"inter-event times [s]", "t [s]", {}};
    const char* xi_names[] = {"U_RC [V]", "SOC"};
    for (std::size_t i = 0; i < plant.inputs(); ++i) in.series.push_back({"u_" + std::to_string(i), {}, {}, false});
    for (std::size_t i = 0; i < plant.outputs(); ++i) y.series.push_back({"y_" + std::to_string(i), {}, {}, false});
    for (std::size_t i = 0; i < plant.states(); ++i) {
        xi.series.push_back({cfg.battery_preset && i < 2 ? xi_names[i] : "xi_" + std::to_string(i), {}, {}, false});
    }
    for (const auto& s : arc.samples) {
        const Vector u = input.value(s.t);
        const Vector out_y = plant_output(plant, s.state.x, u);
        for (std::size_t i = 0; i < u.size(); ++i) {
            in.series[i].x.push_back(s.t);
            in.series[i].y.push_back(u[i]);
        }
        for (std::size_t i = 0; i < out_y.size(); ++i) {
            y.series[i].x.push_back(s.t);
            y.series[i].y.push_back(out_y[i]);
        }
        for (std::size_t i = 0; i < s.state.x.size(); ++i) {
            xi.series[i].x.push_back(s.t);
            xi.series[i].y.push_back(s.state.x[i] - s.state.xhat[i]);
        }
    }
    svg::Series pts{"transmissions", {}, {}, true};
    for (std::size_t k = 1; k < arc.events.size(); ++k) {
        pts.x.push_back(arc.events[k].t);
        pts.y.push_back(arc.events[k].t - arc.events[k - 1].t);
    }
    iet.series.push_back(std::move(pts));
    svg::write_figure(out, {in, y, xi, iet});
}

HybridArc simulate_arc(const RunConfig& cfg, const Designed& d, const InputSignal& input) {
    const HybridState q0 = initial_state(cfg.plant, cfg.x0, cfg.xhat0, cfg.sim.eta0);
    return etobs::simulate(cfg.plant, d.cert, d.params, input, q0, cfg.sim);
}

// Shared error mapping for the three commands.
template <class Body>
int guarded(std::ostream& err, Body&& body) {
    try {
        return body();
    } catch (const Error& e) {
        err << "error: " << e.what() << '\n';
        return e.code() == ErrorCode::ConfigError ? kConfigError : kSimulationError;
    } catch (const fs::filesystem_error& e) {
        err << "error: " << e.what() << '\n';
        return kConfigError;
    }
}

}  // namespace

int design(const Options& opt, std::ostream& out, std::ostream& err) {
    return guarded(err, [&] {
        const RunConfig cfg = prepare(opt);
        Designed d;
        try {
            d = run_design(cfg);
        } catch (const Error& e) {
            err << "design error: " << e.what() << '\n';
            return static_cast<int>(kDesignError);
        }
        print_design(out, cfg, d);
        if (cfg.output_dir) {
            auto f = open_out(output_dir(cfg) / "design.json");
            f << design_json(cfg, d).dump(2) << '\n';
        }
        return static_cast<int>(kOk);
    });
}

int simulate(const Options& opt, std::ostream& out, std::ostream& err) {
    return guarded(err, [&] {
        const RunConfig cfg = prepare(opt);
        Designed d;
        try {
            d = run_design(cfg);
        } catch (const Error& e) {
            err << "design error: " << e.what() << '\n';
            return static_cast<int>(kDesignError);
        }
        const InputSignal input = cfg.input.build(cfg.sim.t_end);
        const HybridArc arc = simulate_arc(cfg, d, input);
        const RunSummary summary =
            summarize(arc, cfg.plant, d.cert, d.params, input, cfg.cert_tol, cfg.quiescence_window);

        std::ostringstream report;
        print_design(report, cfg, d);
        report << '\n' << format_summary(summary, d.params, cfg.sim.event_tol);
        out << report.str();

        const fs::path dir = output_dir(cfg);
        {
            auto f = open_out(dir / "arc.csv");
            write_arc_csv(f, arc);
        }
        {
            auto f = open_out(dir / "certificate.csv");
            write_bound_samples_csv(f, summary.certificate);
        }
        {
            auto f = open_out(dir / "iet.csv");
            write_iet_csv(f, arc);
        }
        {
            auto f = open_out(dir / "input.csv");
            write_input_csv(f, cfg, input);
        }
        {
            auto f = open_out(dir / "summary.txt");
            f << report.str();
        }
        if (!opt.no_plots) {
            auto f = open_out(dir / "plots.svg");
            write_plots(f, cfg, arc, input);
        }
        return static_cast<int>(kOk);
    });
}

int sweep(const Options& opt, std::ostream& out, std::ostream& err) {
    return guarded(err, [&] {
        const RunConfig cfg = prepare(opt);
        if (!cfg.battery_preset) throw Error(ErrorCode::ConfigError, "sweep requires plant.preset = \"battery\"");
        battery::DesignInputs di;
        di.battery = cfg.battery;
        di.gain = cfg.gain;
        di.q = cfg.q;
        di.c = cfg.c;
        if (cfg.alpha_bar_given) di.alpha_bar = cfg.trigger.alpha_bar;

        battery::ExperimentReport report;
        try {
            (void)iss_constants(cfg.plant, cfg.gain, cfg.q, cfg.c);
        } catch (const Error& e) {
            err << "design error: " << e.what() << '\n';
            return static_cast<int>(kDesignError);
        }
        report = battery::run_sweep(cfg.sweep, di);

        out << "sigma       c1          c2          c3          epsilon     transmissions  xi_urc_max    xi_soc_max\n";
        char buf[256];
        bool any_ok = false;
        for (const auto& r : report.rows) {
            std::snprintf(buf, sizeof buf, "%-11.6g %-11.6g %-11.6g %-11.6g %-11.6g ", r.row.sigma, r.row.c1,
                          r.row.c2, r.row.c3, r.row.epsilon);
            out << buf;
            if (!r.valid || r.trials_ok == 0) {
                out << "flagged: " << r.message << '\n';
                continue;
            }
            any_ok = true;
            std::snprintf(buf, sizeof buf, "%-14.6g %-13.6g %-13.6g", r.avg_transmissions, r.max_err_u_rc,
                          r.max_err_soc);
            out << buf;
            if (r.trials_failed) out << "  (" << r.trials_failed << " trials failed: " << r.message << ')';
            if (!r.certificate_holds) out << "  (certificate bound violated)";
            out << '\n';
        }
        out << "\ntrends\n";
        for (const auto& t : battery::check_trends(report)) {
            out << (t.holds ? "  holds     " : "  violated  ") << t.description << '\n';
        }
        {
            auto f = open_out(output_dir(cfg) / "sweep.csv");
            battery::write_sweep_csv(f, report);
        }
        if (!any_ok) {
            err << "error: every sweep row failed\n";
            return static_cast<int>(kSimulationError);
        }
        return static_cast<int>(kOk);
    });
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Event-triggered observer design and hybrid simulation"};
    app.require_subcommand(1);
    Options opt;
    std::uint64_t seed = 0;
    std::string out_dir;
    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", opt.config, "JSON run configuration")->required();
        sub->add_option("--out", out_dir, "output directory");
        sub->add_option("--seed", seed, "seed for the drive profile and initial conditions");
    };
    auto* des = app.add_subcommand("design", "compute the ISS certificate and triggering parameters");
    auto* sim = app.add_subcommand("simulate", "simulate one hybrid run and write its report");
    auto* swp = app.add_subcommand("sweep", "run the battery parameter sweep");
    for (auto* sub : {des, sim, swp}) add_common(sub);
    sim->add_flag("--no-plots", opt.no_plots, "skip plots.svg");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kOk : kConfigError;
    }
    auto given = [](CLI::App* sub, const char* name) { return sub->count(name) > 0; };
    CLI::App* active = des->parsed() ? des : sim->parsed() ? sim : swp;
    if (given(active, "--out")) opt.out_dir = out_dir;
    if (given(active, "--seed")) opt.seed = seed;
    if (active == des) return design(opt, out, err);
    if (active == sim) return simulate(opt, out, err);
    return sweep(opt, out, err);
}

}  // namespace etobs::cli
