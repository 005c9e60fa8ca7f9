#include "etobs/config.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

#include "etobs/error.hpp"

namespace etobs {

namespace {

using nlohmann::json;

[[noreturn]] void fail(const std::string& key, const std::string& why) {
    throw Error(ErrorCode::ConfigError, key + ": " + why);
}

double get_number(const json& obj, const std::string& key, const std::string& where) {
    const auto& v = obj.at(key);
    if (!v.is_number()) fail(where + "." + key, "expected a number");
    return v.get<double>();
}

std::optional<double> opt_number(const json& obj, const std::string& key, const std::string& where) {
    if (!obj.contains(key) || obj.at(key).is_null()) return std::nullopt;
    return get_number(obj, key, where);
}

double number_or(const json& obj, const std::string& key, const std::string& where, double fallback) {
    return opt_number(obj, key, where).value_or(fallback);
}

Vector to_vector(const json& v, const std::string& where) {
    if (!v.is_array()) fail(where, "expected an array of numbers");
    Vector out;
    for (const auto& x : v) {
        if (!x.is_number()) fail(where, "expected an array of numbers");
        out.push_back(x.get<double>());
    }
    return out;
}

// Accepts [[...], [...]] (rows) or a flat array, which is read as a column.
Matrix to_matrix(const json& v, const std::string& where) {
    if (!v.is_array() || v.empty()) fail(where, "expected a non-empty array");
    if (!v.front().is_array()) return Matrix::column(to_vector(v, where));
    const std::size_t cols = v.front().size();
    std::vector<double> entries;
    for (const auto& row : v) {
        const Vector r = to_vector(row, where);
        if (r.size() != cols) fail(where, "ragged matrix");
        entries.insert(entries.end(), r.begin(), r.end());
    }
    try {
        return Matrix(v.size(), cols, std::move(entries));
    } catch (const Error& e) {
        fail(where, e.what());
    }
}

const json& section(const json& root, const std::string& key) {
    if (!root.contains(key) || !root.at(key).is_object()) fail(key, "missing section");
    return root.at(key);
}

void parse_plant(const json& root, RunConfig& cfg) {
    const json& p = section(root, "plant");
    if (p.value("preset", std::string{}) == "battery") {
        cfg.battery_preset = true;
        const json b = p.value("battery", json::object());
        auto& bp = cfg.battery;
        bp.tau_rc_s = number_or(b, "tau_rc_s", "plant.battery", bp.tau_rc_s);
        bp.cap_c_f = number_or(b, "cap_c_F", "plant.battery", bp.cap_c_f);
        if (auto q = opt_number(b, "q_cap_Ah", "plant.battery")) bp.q_cap_as = *q * 3600.0;
        bp.r_int_ohm = number_or(b, "r_int_ohm", "plant.battery", bp.r_int_ohm);
        bp.alpha_f_v = number_or(b, "alpha_f_V", "plant.battery", bp.alpha_f_v);
        bp.beta_f_v = number_or(b, "beta_f_V", "plant.battery", bp.beta_f_v);
        try {
            cfg.plant = battery::build_battery_plant(bp);
        } catch (const Error& e) {
            fail("plant.battery", e.what());
        }
        return;
    }
    if (p.contains("preset")) fail("plant.preset", "unknown preset (only \"battery\" is built in)");
    for (const char* key : {"A_per_s", "B", "C"}) {
        if (!p.contains(key)) fail(std::string("plant.") + key, "missing");
    }
    std::optional<Matrix> d;
    std::optional<Vector> offset;
    if (p.contains("D")) d = to_matrix(p.at("D"), "plant.D");
    if (p.contains("offset")) offset = to_vector(p.at("offset"), "plant.offset");
    try {
        cfg.plant = LtiPlant::make(to_matrix(p.at("A_per_s"), "plant.A_per_s"), to_matrix(p.at("B"), "plant.B"),
                                   to_matrix(p.at("C"), "plant.C"), std::move(d), std::move(offset));
    } catch (const Error& e) {
        fail("plant", e.what());
    }
}

void parse_observer(const json& root, RunConfig& cfg) {
    const json o = root.value("observer", json::object());
    if (o.contains("L")) {
        cfg.gain = to_matrix(o.at("L"), "observer.L");
    } else if (cfg.battery_preset) {
        cfg.gain = battery::reference_gain();
    } else {
        fail("observer.L", "missing");
    }
    if (o.contains("Q")) {
        const Matrix q = to_matrix(o.at("Q"), "observer.Q");
        if (!q.square()) fail("observer.Q", "must be square");
        for (std::size_t i = 0; i < q.rows(); ++i) {
            for (std::size_t j = 0; j < i; ++j) {
                if (q(i, j) != q(j, i)) fail("observer.Q", "must be symmetric");
            }
        }
        cfg.q = SymMatrix::from_matrix(q);
    } else if (cfg.battery_preset) {
        cfg.q = battery::reference_q();
    } else {
        cfg.q = SymMatrix::identity(cfg.plant.states());
    }
    cfg.c = number_or(o, "c", "observer", 0.5);
}

void parse_trigger(const json& root, RunConfig& cfg) {
    const json t = root.value("trigger", json::object());
    auto& r = cfg.trigger;
    const std::string w = "trigger";
    if (auto a = opt_number(t, "alpha_bar_per_s", w)) {
        r.alpha_bar = *a;
        cfg.alpha_bar_given = true;
    }
    if (auto nu = opt_number(t, "nu", w)) {
        r.nu = *nu;
        cfg.nu_given = true;
    }
    r.sigma = number_or(t, "sigma", w, cfg.battery_preset ? 500.0 : 0.0);
    r.c1 = number_or(t, "c1_per_s", w, 1.0);
    r.c2 = number_or(t, "c2", w, cfg.battery_preset ? 50.0 : 0.0);
    r.c3 = number_or(t, "c3", w, 1.0);
    r.epsilon = opt_number(t, "epsilon", w);
    r.sigma_star = opt_number(t, "sigma_star", w);
    r.c2_star = opt_number(t, "c2_star", w);
    r.c1_star = opt_number(t, "c1_star_per_s", w);
    if (!cfg.nu_given && !r.epsilon) fail("trigger", "give epsilon, nu, or both");
    const json d = root.value("design", json::object());
    cfg.m_bound = opt_number(d, "M_bound", "design");
}

void parse_input(const json& root, RunConfig& cfg) {
    const json in = root.value("input", json::object());
    const std::string kind = in.value("kind", std::string(cfg.battery_preset ? "phev" : "constant"));
    auto& spec = cfg.input;
    if (kind == "phev") {
        spec.kind = InputSpec::Kind::Phev;
        if (in.contains("seed")) spec.seed = in.at("seed").get<std::uint64_t>();
        if (cfg.plant.inputs() != 1) fail("input.kind", "phev profiles drive single-input plants");
        return;
    }
    try {
        if (kind == "constant") {
            spec.kind = InputSpec::Kind::Constant;
            spec.signal = InputSignal::constant(in.contains("value") ? to_vector(in.at("value"), "input.value")
                                                                     : Vector(cfg.plant.inputs(), 0.0));
        } else if (kind == "piecewise_constant" || kind == "sampled") {
            std::vector<Vector> values;
            for (const auto& v : in.at("values")) values.push_back(v.is_array() ? to_vector(v, "input.values") : Vector{v.get<double>()});
            auto times = to_vector(in.at("breakpoints_s"), "input.breakpoints_s");
            if (kind == "sampled") {
                spec.kind = InputSpec::Kind::Sampled;
                spec.signal = InputSignal::sampled(std::move(times), std::move(values));
            } else {
                spec.kind = InputSpec::Kind::PiecewiseConstant;
                spec.signal = InputSignal::piecewise_constant(std::move(times), std::move(values));
            }
        } else {
            fail("input.kind", "expected phev, constant, piecewise_constant or sampled");
        }
    } catch (const Error& e) {
        if (e.code() == ErrorCode::ConfigError) throw;
        fail("input", e.what());
    } catch (const json::exception& e) {
        fail("input", e.what());
    }
    if (spec.signal.dim() != cfg.plant.inputs()) fail("input", "value dimension does not match B");
}

void parse_simulation(const json& root, RunConfig& cfg) {
    const json s = root.value("simulation", json::object());
    const std::string w = "simulation";
    auto& sim = cfg.sim;
    sim.t_end = number_or(s, "t_end_s", w, cfg.battery_preset ? 1500.0 : 10.0);
    sim.dt_max = number_or(s, "dt_max_s", w, 1e-2);
    sim.event_tol = number_or(s, "event_tol_s", w, 1e-9);
    if (s.contains("max_jumps")) sim.max_jumps = s.at("max_jumps").get<std::int64_t>();
    sim.eta0 = number_or(s, "eta0", w, cfg.battery_preset ? 1e6 : 0.0);
    const std::size_t n = cfg.plant.states();
    if (s.contains("x0")) {
        cfg.x0 = to_vector(s.at("x0"), "simulation.x0");
    } else {
        // U_RC = 1 V, SOC = 100 %
        cfg.x0 = cfg.battery_preset ? Vector{1.0, 1.0} : Vector(n, 0.0);
    }
    if (s.contains("xhat0")) {
        cfg.xhat0 = to_vector(s.at("xhat0"), "simulation.xhat0");
    } else {
        // xi(0,0) = (0 V, 75 %)
        cfg.xhat0 = cfg.battery_preset ? Vector{1.0, 0.25} : Vector(n, 0.0);
    }
    if (cfg.x0.size() != n || cfg.xhat0.size() != n) fail("simulation", "x0 and xhat0 must have length n");
    try {
        sim.validate();
    } catch (const Error& e) {
        fail("simulation", e.what());
    }
    const json a = root.value("analysis", json::object());
    cfg.cert_tol = number_or(a, "cert_tol", "analysis", cfg.cert_tol);
    cfg.quiescence_window = opt_number(a, "quiescence_window_s", "analysis");
}

void parse_sweep(const json& root, RunConfig& cfg) {
    if (!root.contains("sweep")) return;
    const json& s = root.at("sweep");
    const std::string w = "sweep";
    auto& sw = cfg.sweep;
    if (s.contains("trials")) sw.trials = s.at("trials").get<std::size_t>();
    sw.horizon = number_or(s, "horizon_s", w, sw.horizon);
    if (s.contains("error_window_s")) {
        const Vector win = to_vector(s.at("error_window_s"), "sweep.error_window_s");
        if (win.size() != 2) fail("sweep.error_window_s", "expected [begin, end]");
        sw.error_window = {win[0], win[1]};
    }
    if (s.contains("seed")) sw.seed = s.at("seed").get<std::uint64_t>();
    if (s.contains("profile_seed")) sw.profile_seed = s.at("profile_seed").get<std::uint64_t>();
    sw.eta0 = number_or(s, "eta0", w, sw.eta0);
    sw.dt_max = number_or(s, "dt_max_s", w, sw.dt_max);
    sw.event_tol = number_or(s, "event_tol_s", w, sw.event_tol);
    if (s.contains("max_jumps")) sw.max_jumps = s.at("max_jumps").get<std::int64_t>();
    if (s.contains("threads")) sw.threads = s.at("threads").get<unsigned>();
    if (s.contains("ic_ranges")) {
        const json& r = s.at("ic_ranges");
        auto range = [&](const char* key, battery::Range& out) {
            if (!r.contains(key)) return;
            const Vector v = to_vector(r.at(key), std::string("sweep.ic_ranges.") + key);
            if (v.size() != 2 || !(v[0] <= v[1])) fail(std::string("sweep.ic_ranges.") + key, "expected [lo, hi]");
            out = {v[0], v[1]};
        };
        range("u_rc_V", sw.ic_ranges.u_rc);
        range("soc", sw.ic_ranges.soc);
        range("xi_u_rc_V", sw.ic_ranges.xi_u_rc);
        range("xi_soc", sw.ic_ranges.xi_soc);
    }
    if (s.contains("rows")) {
        sw.rows.clear();
        for (const auto& row : s.at("rows")) {
            battery::SweepRow r;
            r.sigma = number_or(row, "sigma", "sweep.rows", r.sigma);
            r.c1 = number_or(row, "c1_per_s", "sweep.rows", r.c1);
            r.c2 = number_or(row, "c2", "sweep.rows", r.c2);
            r.c3 = number_or(row, "c3", "sweep.rows", r.c3);
            r.epsilon = number_or(row, "epsilon", "sweep.rows", r.epsilon);
            sw.rows.push_back(r);
        }
    }
    try {
        sw.validate();
    } catch (const Error& e) {
        fail("sweep", e.what());
    }
}

}  // namespace

InputSignal InputSpec::build(double horizon) const {
    if (kind == Kind::Phev) return battery::phev_profile(seed, horizon);
    return signal;
}

RunConfig parse_config(const std::string& text) {
    json root;
    try {
        root = json::parse(text);
    } catch (const json::parse_error& e) {
        fail("config", e.what());
    }
    if (!root.is_object()) fail("config", "top level must be an object");
    RunConfig cfg;
    try {
        parse_plant(root, cfg);
        parse_observer(root, cfg);
        parse_trigger(root, cfg);
        parse_simulation(root, cfg);
        parse_input(root, cfg);
        parse_sweep(root, cfg);
    } catch (const json::exception& e) {
        fail("config", e.what());
    }
    if (root.contains("output")) {
        const json& o = root.at("output");
        if (o.contains("dir")) cfg.output_dir = o.at("dir").get<std::string>();
    }
    return cfg;
}

RunConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) fail(path.string(), "cannot open config file");
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_config(buf.str());
}

TriggerRequest resolve_trigger(const RunConfig& cfg, const IssCertificate& cert) {
    TriggerRequest req = cfg.trigger;
    if (!cfg.alpha_bar_given) req.alpha_bar = cert.alpha;
    if (!cfg.nu_given) req.nu = minimal_nu(cert, req, *req.epsilon);
    return req;
}

}  // namespace etobs
