#include "wassinc/scenario.hpp"

#include <chrono>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "json.hpp"

#include "wassinc/inclusion.hpp"
#include "wassinc/ocp.hpp"
#include "wassinc/transport.hpp"

namespace wassinc {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

constexpr const char* kVersion = "1.0.0";

struct ScenarioError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ScenarioError("cannot open " + path);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

std::string fnv1a_hex(const std::string& data) {
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : data) {
        h ^= c;
        h *= 1099511628211ull;
    }
    std::ostringstream os;
    os << std::hex << h;
    return os.str();
}

int thread_cap() {
    const char* env = std::getenv("WASSINC_THREADS");
    if (env == nullptr) return 1;
    const int n = std::atoi(env);
    return n > 0 ? n : 1;
}

const json& need(const json& j, const char* key) {
    if (!j.contains(key)) throw ScenarioError(std::string("missing key: ") + key);
    return j.at(key);
}

ParticleMeasure parse_measure(const json& j) {
    const json& pts = need(j, "points");
    if (!pts.is_array() || pts.empty())
        throw ScenarioError("measure needs a non-empty points array");
    std::vector<Vec> points;
    for (const json& p : pts) points.push_back(p.get<Vec>());
    const int dim = static_cast<int>(points.front().size());
    if (j.contains("weights"))
        return ParticleMeasure(dim, std::move(points), j.at("weights").get<Vec>());
    return ParticleMeasure::uniform(dim, std::move(points));
}

PiecewiseConstant parse_envelope(const json& j, double T) {
    if (j.is_number()) return PiecewiseConstant::constant(j.get<double>(), T);
    PiecewiseConstant f;
    f.breaks = need(j, "breaks").get<std::vector<double>>();
    f.values = need(j, "values").get<std::vector<double>>();
    f.validate();
    return f;
}

HypothesisBounds parse_bounds(const json& j, double T) {
    HypothesisBounds b;
    b.T = T;
    b.r = need(j, "r").get<double>();
    b.m = parse_envelope(need(j, "m"), T);
    b.l_K = parse_envelope(need(j, "l_K"), T);
    b.L_K = parse_envelope(need(j, "L_K"), T);
    b.p = j.value("p", 1.0);
    b.validate();
    return b;
}

ControlDictionary parse_dictionary(const json& j) {
    ControlDictionary dict;
    dict.lipschitz_budget = j.value("lipschitz_budget", 0.0);
    for (const json& e : need(j, "entries")) {
        FeedbackMap omega;
        const std::string kind = need(e, "kind").get<std::string>();
        if (kind == "constant") {
            omega.kind = FeedbackMap::Kind::Constant;
            omega.u0 = need(e, "u").get<Vec>();
        } else if (kind == "affine") {
            omega.kind = FeedbackMap::Kind::AffineSaturated;
            for (const json& row : need(e, "a")) omega.a.push_back(row.get<Vec>());
            omega.b = need(e, "b").get<Vec>();
            omega.lo = need(e, "lo").get<Vec>();
            omega.hi = need(e, "hi").get<Vec>();
        } else {
            throw ScenarioError("unknown dictionary entry kind: " + kind);
        }
        dict.entries.push_back(std::move(omega));
    }
    if (dict.entries.empty()) throw ScenarioError("dictionary has no entries");
    return dict;
}

ControlledField parse_field(const json& j, const HypothesisBounds& bounds) {
    const std::string name = need(j, "name").get<std::string>();
    const int dim = need(j, "dim").get<int>();
    if (dim < 1) throw ScenarioError("field dim must be >= 1");
    std::vector<double> params;
    if (j.contains("params")) params = j.at("params").get<std::vector<double>>();
    try {
        return make_field(name, dim, params, bounds);
    } catch (const std::invalid_argument& e) {
        throw ScenarioError(e.what());
    }
}

std::vector<ControlValue> parse_controls(const json& j, std::size_t steps) {
    if (j.contains("controls")) {
        std::vector<ControlValue> u;
        for (const json& v : j.at("controls")) u.push_back(v.get<Vec>());
        if (u.size() != steps)
            throw ScenarioError("controls array must have one value per step");
        return u;
    }
    const Vec u = need(j, "control").get<Vec>();
    return std::vector<ControlValue>(steps, u);
}

json measure_json(const ParticleMeasure& mu) {
    return json{{"points", mu.points}, {"weights", mu.weights}};
}

json trajectory_json(const Trajectory& traj, const std::string& hash) {
    json j;
    j["config_hash"] = hash;
    j["grid"] = traj.grid;
    json states = json::array();
    for (const ParticleMeasure& mu : traj.states) states.push_back(measure_json(mu));
    j["states"] = std::move(states);
    j["selection"] = traj.selection;
    return j;
}

json certificate_json(const Certificate& c) {
    return json{{"name", c.name},   {"t_grid", c.t_grid},       {"lhs", c.lhs},
                {"rhs", c.rhs},     {"tolerance", c.tolerance}, {"margin", c.margin},
                {"pass", c.pass}};
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ScenarioError("cannot write " + path.string());
    out << text;
}

void write_certificates(const fs::path& dir, const std::vector<Certificate>& certs,
                        const std::string& hash) {
    json j;
    j["config_hash"] = hash;
    json arr = json::array();
    for (const Certificate& c : certs) arr.push_back(certificate_json(c));
    j["certificates"] = std::move(arr);
    write_text(dir / "certificates.json", j.dump(2) + "\n");

    std::ostringstream csv;
    csv << "name,margin,tolerance,status\n";
    for (const Certificate& c : certs) csv << c.csv_row() << "\n";
    write_text(dir / "certificates.csv", csv.str());
}

struct Loaded {
    json config;
    std::string hash;
    unsigned seed = 0;
    fs::path out;
    std::vector<double> grid;
    HypothesisBounds bounds;
    ControlledField field;
    ParticleMeasure initial;
};

Loaded load(const std::string& file) {
    Loaded s;
    const std::string raw = read_file(file);
    try {
        s.config = json::parse(raw);
    } catch (const json::exception& e) {
        throw ScenarioError(std::string("config parse error: ") + e.what());
    }
    s.hash = fnv1a_hex(raw);
    s.seed = s.config.value("seed", 0u);
    s.out = need(s.config, "output_dir").get<std::string>();

    const json& g = need(s.config, "grid");
    const double T = need(g, "T").get<double>();
    const auto steps = need(g, "steps").get<std::size_t>();
    if (!(T > 0.0) || steps == 0 || steps > 100000)
        throw ScenarioError("grid needs T > 0 and 1..100000 steps");
    s.grid = uniform_grid(T, steps);

    s.bounds = parse_bounds(need(s.config, "bounds"), T);
    s.field = parse_field(need(s.config, "field"), s.bounds);
    s.initial = parse_measure(need(s.config, "initial"));
    if (s.initial.dim != s.field.dim)
        throw ScenarioError("initial measure dimension does not match the field");
    if (support_radius(s.initial) > s.bounds.r + 1e-12)
        throw ScenarioError("initial measure exceeds the declared support radius");
    return s;
}

InclusionProblem make_problem(const Loaded& s) {
    return InclusionProblem::make(
        s.field, parse_dictionary(need(s.config, "dictionary")));
}

ReferenceFlow make_reference(const Loaded& s, const InclusionProblem& prob) {
    const json& r = need(s.config, "reference");
    ControlledField w_field = s.field;
    if (r.contains("field")) w_field = parse_field(r.at("field"), s.bounds);
    ParticleMeasure nu0 = s.initial;
    if (r.contains("initial")) nu0 = parse_measure(r.at("initial"));
    (void)prob;
    return reference_from_open_loop(w_field, parse_controls(r, s.grid.size() - 1), nu0,
                                    s.grid);
}

int run_kind(const Loaded& s, std::vector<Certificate>& certs, json& result) {
    const std::string kind = need(s.config, "kind").get<std::string>();
    result["kind"] = kind;

    if (kind == "simulate") {
        const Trajectory traj =
            flow(s.field, parse_controls(s.config, s.grid.size() - 1), s.initial,
                 s.grid);
        write_text(s.out / "trajectory.json",
                   trajectory_json(traj, s.hash).dump(2) + "\n");
        double sup_r = 0.0;
        for (const auto& st : traj.states) sup_r = std::max(sup_r, support_radius(st));
        result["max_support_radius"] = sup_r;
        result["support_bound"] = cauchy_lipschitz_envelope(s.bounds).R_r;
        return 0;
    }

    if (kind == "certify") {
        for (const json& c : need(s.config, "certificates"))
            certs.push_back(certify(need(c, "name").get<std::string>(),
                                    need(c, "t").get<std::vector<double>>(),
                                    need(c, "lhs").get<std::vector<double>>(),
                                    need(c, "rhs").get<std::vector<double>>(),
                                    c.value("tol", 0.0)));
        return 0;
    }

    if (kind == "filippov") {
        const InclusionProblem prob = make_problem(s);
        const ReferenceFlow ref = make_reference(s, prob);
        const FilippovResult res =
            filippov(prob, ref, s.initial, s.config.value("tol", 0.0),
                     s.config.value("max_iter", std::size_t{50}));
        write_text(s.out / "trajectory.json",
                   trajectory_json(res.solution.trajectory, s.hash).dump(2) + "\n");
        certs.push_back(res.state_certificate);
        certs.push_back(res.velocity_certificate);
        result["converged"] = res.converged;
        result["stage_residuals"] = res.stage_residuals;
        result["eta"] = res.eta.v;
        result["allowance"] = res.allowance;
        result["selection"] = res.solution.selection;
        if (!res.converged) {
            std::cerr << "filippov did not converge; stage residuals:";
            for (double r : res.stage_residuals) std::cerr << ' ' << r;
            std::cerr << "\n";
            return 2;
        }
        return 0;
    }

    if (kind == "relax") {
        const InclusionProblem prob = make_problem(s);
        const std::size_t M = s.grid.size() - 1;
        std::vector<Vec> plan;
        if (s.config.contains("plan")) {
            for (const json& w : s.config.at("plan")) plan.push_back(w.get<Vec>());
            if (plan.size() != M)
                throw ScenarioError("plan must carry one weight vector per step");
        } else {
            plan.assign(M, need(s.config, "weights").get<Vec>());
        }
        const RelaxResult res =
            relax(prob, plan, s.initial, s.grid, need(s.config, "delta").get<double>());
        write_text(s.out / "trajectory.json",
                   trajectory_json(res.solution.trajectory, s.hash).dump(2) + "\n");
        certs.push_back(res.landing.state_certificate);
        certs.push_back(res.landing.velocity_certificate);
        result["subdivisions"] = res.subdivisions;
        result["delta_prime"] = res.delta_prime;
        result["achieved_sup_distance"] = res.achieved_sup_distance;
        result["converged"] = res.landing.converged;
        return res.landing.converged ? 0 : 2;
    }

    if (kind == "ocp") {
        MayerProblem prob;
        prob.inclusion = make_problem(s);
        const json& c = need(s.config, "cost");
        ParticleMeasure target;
        if (c.contains("target")) target = parse_measure(c.at("target"));
        prob.terminal_cost =
            make_cost(need(c, "name").get<std::string>(),
                      c.value("params", std::vector<double>{}), target);
        if (s.config.contains("running_constraint")) {
            const json& rc = s.config.at("running_constraint");
            prob.running_violation =
                make_constraint(need(rc, "name").get<std::string>(),
                                rc.value("params", std::vector<double>{}));
        }
        if (s.config.contains("terminal_constraint")) {
            const json& tc = s.config.at("terminal_constraint");
            prob.terminal_violation =
                make_constraint(need(tc, "name").get<std::string>(),
                                tc.value("params", std::vector<double>{}));
        }
        prob.eps_K = s.config.value("eps_K", 0.0);
        prob.eps_Q = s.config.value("eps_Q", 0.0);
        const SolveResult res =
            solve_direct(prob, s.initial, s.grid,
                         s.config.value("switch_budget", std::size_t{1}));
        write_text(s.out / "trajectory.json",
                   trajectory_json(res.best.trajectory, s.hash).dump(2) + "\n");
        result["cost"] = res.cost;
        result["feasible"] = res.feasible;
        result["violation"] = res.violation;
        result["explored"] = res.explored;
        result["selection"] = res.best.selection;
        if (!res.feasible) {
            std::cerr << "no feasible control signal; least violation "
                      << res.violation << "\n";
            return 2;
        }
        return 0;
    }

    if (kind == "compactness") {
        const InclusionProblem prob = make_problem(s);
        std::vector<std::vector<int>> signals;
        for (const json& sig : need(s.config, "signals"))
            signals.push_back(sig.get<std::vector<int>>());
        for (const auto& sig : signals)
            if (sig.size() != s.grid.size() - 1)
                throw ScenarioError("each signal needs one entry per step");
        const CompactnessReport rep =
            compactness_harness(prob, s.initial, signals, s.grid,
                                need(s.config, "epsilon").get<double>());
        result["sufficient"] = rep.sufficient;
        result["diameter"] = rep.diameter;
        result["kept"] = rep.kept;
        result["admissible"] = rep.admissible;
        result["worst_selection_distance"] = rep.worst_selection_distance;
        if (rep.sufficient)
            write_text(s.out / "trajectory.json",
                       trajectory_json(rep.cluster.trajectory, s.hash).dump(2) + "\n");
        if (!rep.sufficient) {
            std::cerr << "insufficient family: no epsilon-cluster of size >= 2\n";
            return 2;
        }
        return 0;
    }

    throw ScenarioError("unknown scenario kind: " + kind);
}

}  // namespace

int run_scenario(const std::string& scenario_file) {
    const auto t0 = std::chrono::steady_clock::now();
    try {
        const Loaded s = load(scenario_file);
        fs::create_directories(s.out);

        std::vector<Certificate> certs;
        json result;
        result["config_hash"] = s.hash;
        int code = 0;
        try {
            code = run_kind(s, certs, result);
        } catch (const RefusalError& e) {
            std::cerr << "refused: " << e.what() << "\n";
            result["refused"] = e.what();
            code = 2;
        } catch (const DivergenceError& e) {
            std::cerr << "diverged: " << e.what() << "\n";
            result["diverged"] = e.what();
            code = 2;
        }

        write_certificates(s.out, certs, s.hash);
        for (const Certificate& c : certs)
            if (!c.pass) {
                std::cerr << "certificate " << c.name << " failed with margin "
                          << c.margin << " (tolerance " << c.tolerance << ")\n";
                if (code == 0) code = 1;
            }
        write_text(s.out / "result.json", result.dump(2) + "\n");

        const auto t1 = std::chrono::steady_clock::now();
        json manifest;
        manifest["config_hash"] = s.hash;
        manifest["seed"] = s.seed;
        manifest["version"] = kVersion;
        manifest["wall_time_ms"] =
            std::chrono::duration_cast<std::chrono::milliseconds>(t1 - t0).count();
        manifest["threads"] = thread_cap();
        write_text(s.out / "manifest.json", manifest.dump(2) + "\n");
        return code;
    } catch (const ScenarioError& e) {
        std::cerr << "input error: " << e.what() << "\n";
        return 3;
    } catch (const json::exception& e) {
        std::cerr << "input error: " << e.what() << "\n";
        return 3;
    } catch (const std::invalid_argument& e) {
        std::cerr << "input error: " << e.what() << "\n";
        return 3;
    }
}

int report_run(const std::string& run_dir) {
    const fs::path dir(run_dir);
    if (!fs::exists(dir / "manifest.json")) {
        std::cerr << "missing manifest in " << run_dir << "\n";
        return 3;
    }
    try {
        const json manifest = json::parse(read_file((dir / "manifest.json").string()));
        std::cout << "run " << manifest.value("config_hash", std::string("?"))
                  << " (seed " << manifest.value("seed", 0u) << ", version "
                  << manifest.value("version", std::string("?")) << ")\n";

        std::size_t total = 0, passed = 0;
        std::ostringstream table;
        std::ostringstream report_csv;
        std::ostringstream series_csv;
        report_csv << "name,margin,tolerance,status\n";
        series_csv << "certificate,t,lhs,rhs\n";
        if (fs::exists(dir / "certificates.json")) {
            const json certs =
                json::parse(read_file((dir / "certificates.json").string()));
            for (const json& c : certs.at("certificates")) {
                ++total;
                const bool ok = c.at("pass").get<bool>();
                if (ok) ++passed;
                const std::string name = c.at("name").get<std::string>();
                table << "  " << name << "  margin " << c.at("margin").get<double>()
                      << "  " << (ok ? "pass" : "FAIL") << "\n";
                report_csv << name << ',' << c.at("margin").get<double>() << ','
                           << c.at("tolerance").get<double>() << ','
                           << (ok ? "pass" : "fail") << "\n";
                const auto& t = c.at("t_grid");
                for (std::size_t k = 0; k < t.size(); ++k)
                    series_csv << name << ',' << t[k].get<double>() << ','
                               << c.at("lhs")[k].get<double>() << ','
                               << c.at("rhs")[k].get<double>() << "\n";
            }
        }
        if (total > 0 && passed == total)
            std::cout << "PASS " << passed << "/" << total << "\n";
        else if (total > 0)
            std::cout << "FAIL " << passed << "/" << total << "\n" << table.str();
        else
            std::cout << "no certificates\n";
        write_text(dir / "report.csv", report_csv.str());
        write_text(dir / "timeseries.csv", series_csv.str());
        return 0;
    } catch (const std::exception& e) {
        std::cerr << "report error: " << e.what() << "\n";
        return 3;
    }
}

int validate_scenario(const std::string& scenario_file) {
    try {
        const Loaded s = load(scenario_file);
        const std::string kind = need(s.config, "kind").get<std::string>();
        if (kind != "simulate" && kind != "certify" &&
            s.config.contains("dictionary")) {
            InclusionProblem prob = make_problem(s);
            const HypothesisReport& rep = validate_hypotheses(prob, s.seed);
            std::cout << "hypothesis battery: sublinearity "
                      << rep.worst_sublinearity << ", lipschitz "
                      << rep.worst_lipschitz << ", set-valued excess "
                      << rep.worst_setvalued << " -> "
                      << (rep.pass ? "pass" : "FAIL") << "\n";
            if (!rep.pass) return 1;
        } else {
            std::cout << "schema ok\n";
        }
        return 0;
    } catch (const ScenarioError& e) {
        std::cerr << "input error: " << e.what() << "\n";
        return 3;
    } catch (const json::exception& e) {
        std::cerr << "input error: " << e.what() << "\n";
        return 3;
    } catch (const std::invalid_argument& e) {
        std::cerr << "input error: " << e.what() << "\n";
        return 3;
    }
}

}  // namespace wassinc
