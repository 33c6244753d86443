// Acceptance gate: one pass/fail line per criterion, nonzero exit when any
// criterion fails. argv[1] = path to the command-line binary, argv[2] = the
// shipped scenario directory (both used by the determinism criterion).
#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "wassinc/inclusion.hpp"
#include "wassinc/ocp.hpp"
#include "wassinc/transport.hpp"

using namespace wassinc;
namespace fs = std::filesystem;

namespace {

HypothesisBounds bounds_const(double r, double m, double l, double L, double T,
                              double p = 1.0) {
    HypothesisBounds b;
    b.r = r;
    b.m = PiecewiseConstant::constant(m, T);
    b.l_K = PiecewiseConstant::constant(l, T);
    b.L_K = PiecewiseConstant::constant(L, T);
    b.T = T;
    b.p = p;
    return b;
}

ControlDictionary drift_dictionary(const std::vector<double>& values) {
    ControlDictionary dict;
    for (double v : values)
        dict.entries.push_back({FeedbackMap::Kind::Constant, {v}, {}, {}, {}, {}});
    return dict;
}

ParticleMeasure random_uniform_measure(std::mt19937& rng, int d, int n) {
    std::uniform_real_distribution<double> coord(-1.0, 1.0);
    std::vector<Vec> pts;
    for (int i = 0; i < n; ++i) {
        Vec x(d);
        for (double& c : x) c = coord(rng);
        pts.push_back(std::move(x));
    }
    return ParticleMeasure::uniform(d, std::move(pts));
}

ParticleMeasure random_weighted_measure(std::mt19937& rng, int d, int n) {
    std::uniform_real_distribution<double> coord(-1.0, 1.0);
    std::uniform_real_distribution<double> wgt(0.1, 1.0);
    std::vector<Vec> pts;
    std::vector<double> w;
    double total = 0.0;
    for (int i = 0; i < n; ++i) {
        Vec x(d);
        for (double& c : x) c = coord(rng);
        pts.push_back(std::move(x));
        w.push_back(wgt(rng));
        total += w.back();
    }
    for (double& wi : w) wi /= total;
    return ParticleMeasure(d, std::move(pts), std::move(w));
}

// --- criterion 1: exact solver vs permutation oracle ------------------------

bool criterion_ot_oracle() {
    std::mt19937 rng(12345);
    for (int i = 0; i < 200; ++i) {
        const int d = 1 + static_cast<int>(rng() % 3);
        const int n = 1 + static_cast<int>(rng() % 6);
        const double p = (i % 2 == 0) ? 1.0 : 2.0;
        const auto mu = random_uniform_measure(rng, d, n);
        const auto nu = random_uniform_measure(rng, d, n);
        const double fast = wasserstein_distance(mu, nu, p);
        const double slow = brute_force_wasserstein(mu, nu, p);
        if (std::abs(fast - slow) > 1e-9) return false;
    }
    return true;
}

// --- criterion 2: metric axioms and W_1 <= W_2 ------------------------------

bool criterion_metric_axioms() {
    std::mt19937 rng(54321);
    for (int i = 0; i < 200; ++i) {
        const int d = 1 + static_cast<int>(rng() % 3);
        const auto mu = random_weighted_measure(rng, d, 1 + static_cast<int>(rng() % 5));
        const auto nu = random_weighted_measure(rng, d, 1 + static_cast<int>(rng() % 5));
        const auto sg = random_weighted_measure(rng, d, 1 + static_cast<int>(rng() % 5));
        for (double p : {1.0, 2.0}) {
            const double ab = wasserstein_distance(mu, nu, p);
            const double bc = wasserstein_distance(nu, sg, p);
            const double ac = wasserstein_distance(mu, sg, p);
            if (ac > ab + bc + 1e-9) return false;
            if (wasserstein_distance(mu, mu, p) > 1e-9) return false;
            if (std::abs(ab - wasserstein_distance(nu, mu, p)) > 1e-9) return false;
        }
        if (wasserstein_distance(mu, nu, 1.0) >
            wasserstein_distance(mu, nu, 2.0) + 1e-9)
            return false;
    }
    return true;
}

// --- criteria 3 and 4: support envelope and momentum certificates -----------

struct BatteryFlow {
    std::string name;
    Trajectory traj;
};

std::vector<BatteryFlow> field_battery(double p) {
    // Every entry satisfies |v| <= m(t)(1 + |x|) with r = 1, m = 1, T = 1.
    const auto bounds = bounds_const(1.0, 1.0, 2.0, 1.0, 1.0, p);
    const auto mu0 = ParticleMeasure::uniform(1, {{0.8}, {-0.5}, {0.25}});
    const auto grid = uniform_grid(1.0, 100);
    const std::vector<ControlValue> half(100, Vec{0.5});
    const std::vector<ControlValue> none(100, Vec{});

    std::vector<BatteryFlow> flows;
    flows.push_back({"zero", flow(make_field("zero", 1, {}, bounds), none, mu0, grid)});
    flows.push_back({"linear-contraction",
                     flow(make_field("linear-contraction", 1, {1.0}, bounds), none,
                          mu0, grid)});
    flows.push_back({"mean-attraction",
                     flow(make_field("mean-attraction", 1, {1.0}, bounds), none, mu0,
                          grid)});
    flows.push_back({"kuramoto",
                     flow(make_field("kuramoto", 1, {1.0}, bounds), none, mu0, grid)});
    flows.push_back({"interaction-poly",
                     flow(make_field("interaction-poly", 1, {1.0, 0.0}, bounds), none,
                          mu0, grid)});
    flows.push_back({"constant-drift",
                     flow(make_field("constant-drift", 1, {}, bounds), half, mu0,
                          grid)});
    return flows;
}

bool criterion_support_envelope() {
    const auto bounds = bounds_const(1.0, 1.0, 2.0, 1.0, 1.0);
    const double R_r = cauchy_lipschitz_envelope(bounds).R_r;
    if (std::abs(R_r - 2.0 * std::exp(1.0)) > 1e-9) return false;
    for (const BatteryFlow& bf : field_battery(1.0))
        for (const auto& st : bf.traj.states)
            if (support_radius(st) > R_r * 1.01) return false;
    return true;
}

bool criterion_momentum_certificate() {
    const auto c1 = constants(1.0);
    const auto c2 = constants(2.0);
    if (std::abs(c1.first - 1.0) > 1e-12 || std::abs(c1.second - 1.0) > 1e-12)
        return false;
    if (std::abs(c2.first - std::sqrt(2.0)) > 1e-12 ||
        std::abs(c2.second - 1.0) > 1e-12)
        return false;

    for (double p : {1.0, 2.0}) {
        const auto bounds = bounds_const(1.0, 1.0, 2.0, 1.0, 1.0, p);
        for (const BatteryFlow& bf : field_battery(p)) {
            const double Mp0 = momentum(bf.traj.initial(), p);
            double scale = 0.0, margin = 1e300;
            for (std::size_t k = 0; k < bf.traj.grid.size(); ++k) {
                const double lhs = momentum(bf.traj.states[k], p);
                const double rhs = momentum_bound(bounds, Mp0, bf.traj.grid[k]);
                scale = std::max(scale, rhs);
                margin = std::min(margin, rhs - lhs);
            }
            if (margin < -1e-6 * scale) return false;
        }
    }
    return true;
}

// --- criterion 5: Gronwall certificate on perturbed-field pairs -------------

bool criterion_gronwall() {
    std::mt19937 rng(777);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const auto grid = uniform_grid(1.0, 100);
    for (int i = 0; i < 20; ++i) {
        const double lambda = 0.25 + 0.5 * unit(rng);
        const double eps = 0.05 + 0.45 * unit(rng);
        const double p = (i % 2 == 0) ? 1.0 : 2.0;
        auto bounds = bounds_const(1.0, lambda + eps, lambda, 0.0, 1.0, p);

        const auto base = make_field("affine", 1, {-lambda, 0.0, 0.0}, bounds);
        const auto perturbed = make_field("affine", 1, {-lambda, eps, 0.0}, bounds);

        auto mu0 = random_uniform_measure(rng, 1, 3);
        for (auto& x : mu0.points) x[0] *= 0.7;
        ParticleMeasure nu0 = mu0;
        const double shift = (i % 4 < 2) ? 0.0 : 0.1 * unit(rng);
        for (auto& x : nu0.points) x[0] += shift;

        const std::vector<ControlValue> none(100, Vec{});
        const auto mu_t = flow(base, none, mu0, grid);
        const auto nu_t = flow(perturbed, none, nu0, grid);

        TimeSeries dev;
        dev.t = grid;
        dev.v.assign(grid.size(), eps);
        const double W0 = wasserstein_distance(mu0, nu0, p);

        double scale = 0.0, margin = 1e300;
        for (std::size_t k = 0; k < grid.size(); ++k) {
            const double lhs =
                wasserstein_distance(mu_t.states[k], nu_t.states[k], p);
            const double rhs = gronwall_bound(bounds, W0, dev, grid[k]);
            scale = std::max(scale, rhs);
            margin = std::min(margin, rhs - lhs);
        }
        if (margin < -1e-6 * (1.0 + scale)) return false;
    }
    return true;
}

// --- criterion 6: Filippov on the two-drift scenario -------------------------

InclusionProblem two_drift_problem() {
    auto prob = InclusionProblem::make(
        make_field("constant-drift", 1, {}, bounds_const(1.0, 1.0, 0.0, 0.0, 1.0)),
        drift_dictionary({-1.0, 1.0}));
    validate_hypotheses(prob, 42);
    return prob;
}

bool criterion_filippov() {
    auto prob = two_drift_problem();
    if (!prob.battery || !prob.battery->pass) return false;
    const std::size_t steps = 400;
    const double h = 1.0 / steps;
    const auto grid = uniform_grid(1.0, steps);
    const auto mu0 = ParticleMeasure::dirac({0.0});
    const auto ref = reference_from_open_loop(
        prob.field, std::vector<ControlValue>(steps, Vec{0.9}), mu0, grid);
    const auto res = filippov(prob, ref, mu0);
    if (!res.converged) return false;
    if (!res.state_certificate.pass || !res.velocity_certificate.pass) return false;
    for (std::size_t k = 0; k < grid.size(); ++k)
        if (std::abs(res.state_certificate.lhs[k] - 0.1 * grid[k]) > 2.0 * h)
            return false;
    const auto env = filippov_envelopes(prob.field.bounds, 0.0, res.eta, 1.0);
    double factorial = 1.0;
    for (std::size_t n = 0; n < res.stage_residuals.size(); ++n) {
        if (n > 0) factorial *= static_cast<double>(n);
        const double bound =
            env.chi_p * std::pow(env.C_Kp, static_cast<double>(n)) / factorial;
        if (res.stage_residuals[n] > bound + res.allowance + 1e-9) return false;
    }
    return true;
}

// --- criterion 7: chattering sup-distance T/(2N) ------------------------------

bool criterion_chattering() {
    auto prob = two_drift_problem();
    const auto grid = uniform_grid(1.0, 400);
    const auto mu0 = ParticleMeasure::dirac({0.0});
    const std::vector<Vec> plan(400, Vec{0.5, 0.5});
    const auto relaxed =
        flow_relaxed(prob.field, prob.dictionary, plan, mu0, grid);
    for (std::size_t N : {10, 50, 200}) {
        const auto sel = chatter_selection(prob, plan, grid, N);
        const auto chat = flow_selection(prob.field, prob.dictionary, sel, mu0, grid);
        double sup = 0.0;
        for (std::size_t k = 0; k < grid.size(); ++k)
            sup = std::max(sup, wasserstein_distance(relaxed.states[k],
                                                     chat.states[k], 1.0));
        const double expected = 1.0 / (2.0 * static_cast<double>(N));
        if (std::abs(sup - expected) > 0.1 * expected) return false;
    }
    return true;
}

// --- criterion 8: minimizing sequence compactness/existence -------------------

bool criterion_minimizing_sequence() {
    MayerProblem prob;
    prob.inclusion = two_drift_problem();
    prob.terminal_cost = make_cost("terminal-mean", {0.0});
    const auto mu0 = ParticleMeasure::dirac({0.0});
    const auto grid = uniform_grid(1.0, 128);
    const std::vector<Vec> plan(128, Vec{0.5, 0.5});
    std::vector<std::vector<int>> family;
    for (std::size_t N : {2, 4, 8, 16, 32})
        family.push_back(chatter_selection(prob.inclusion, plan, grid, N));
    const auto rep = minimizing_sequence_experiment(prob, mu0, family, grid, 0.3);
    return rep.compactness.sufficient && rep.compactness.admissible &&
           rep.cluster_cost <= rep.liminf_cost + 1e-3 && rep.cluster_feasible;
}

// --- criterion 9: value-function equality --------------------------------------

bool criterion_value_functions() {
    MayerProblem prob;
    prob.inclusion = two_drift_problem();
    prob.terminal_cost = make_cost("terminal-mean", {0.0});
    const auto rep =
        value_functions(prob, 0.0, ParticleMeasure::dirac({0.0}), 100, 1, 4);
    return rep.direct.feasible && rep.relaxed_feasible &&
           std::abs(rep.V - rep.V_co) <= 0.02;
}

// --- criterion 10: pruned solver vs exhaustive enumeration ---------------------

bool criterion_solver_exactness() {
    const std::vector<std::vector<double>> dictionaries{{-1.0, 1.0},
                                                        {-1.0, 0.0, 1.0}};
    for (const auto& drifts : dictionaries) {
        for (std::size_t steps : {4, 6, 8}) {
            for (std::size_t budget : {0, 1, 2, 3}) {
                MayerProblem prob;
                prob.inclusion = InclusionProblem::make(
                    make_field("constant-drift", 1, {},
                               bounds_const(1.0, 1.0, 0.0, 0.0, 1.0)),
                    drift_dictionary(drifts));
                prob.terminal_cost = make_cost("terminal-mean", {0.4});
                prob.running_violation = make_constraint("support-radius", {0.6});
                const auto mu0 = ParticleMeasure::dirac({0.1});
                const auto grid = uniform_grid(1.0, steps);
                const auto fast = solve_direct(prob, mu0, grid, budget);
                const auto slow = solve_exhaustive(prob, mu0, grid, budget);
                if (fast.feasible != slow.feasible) return false;
                if (fast.cost != slow.cost) return false;
                if (fast.best.selection != slow.best.selection) return false;
            }
        }
    }
    return true;
}

// --- criterion 11: convergence order under h-halving ----------------------------

bool criterion_convergence_order() {
    // Weak residual: trapezoid-rule dominated, second order in h.
    const auto bounds = bounds_const(2.0, 2.0, 1.0, 1.0, 1.0);
    const auto field = make_field("kuramoto", 1, {0.7}, bounds);
    const auto mu0 = ParticleMeasure::uniform(1, {{-1.0}, {0.4}, {0.9}});
    ControlDictionary empty_dict;
    TestFunction fn;
    fn.phi = [](double t, const Vec& x) { return std::sin(x[0]) * t * (1.0 - t); };
    fn.dphi_dt = [](double t, const Vec& x) {
        return std::sin(x[0]) * (1.0 - 2.0 * t);
    };
    fn.grad = [](double t, const Vec& x) {
        return Vec{std::cos(x[0]) * t * (1.0 - t)};
    };
    double prev = -1.0;
    for (std::size_t steps : {50, 100, 200, 400}) {
        const auto traj = flow(field, std::vector<ControlValue>(steps, Vec{}), mu0,
                               uniform_grid(1.0, steps));
        const double res = weak_residual(traj, field, empty_dict, {fn});
        if (prev > 0.0) {
            const double ratio = prev / res;
            if (ratio < 3.0 || ratio > 5.0) return false;
        }
        prev = res;
    }

    // Final state: per-step constant controls sampled at interval midpoints
    // track u(t) = cos(2t); the quadrature error is second order in h.
    const auto drift = make_field("constant-drift", 1, {},
                                  bounds_const(1.0, 1.0, 0.0, 0.0, 1.0));
    const double exact = 0.5 * std::sin(2.0);
    prev = -1.0;
    for (std::size_t steps : {50, 100, 200, 400}) {
        const double h = 1.0 / static_cast<double>(steps);
        std::vector<ControlValue> u;
        for (std::size_t k = 0; k < steps; ++k)
            u.push_back(Vec{std::cos(2.0 * (static_cast<double>(k) + 0.5) * h)});
        const auto traj = flow(drift, u, ParticleMeasure::dirac({0.0}),
                               uniform_grid(1.0, steps));
        const double err = std::abs(traj.final_state().points[0][0] - exact);
        if (prev > 0.0) {
            const double ratio = prev / err;
            if (ratio < 3.0 || ratio > 5.0) return false;
        }
        prev = err;
    }
    return true;
}

// --- criterion 12: byte-identical repeated runs ----------------------------------

int spawn(const std::string& command) {
    const int rc = std::system(command.c_str());
    if (rc == -1 || !WIFEXITED(rc)) return -1;
    return WEXITSTATUS(rc);
}

std::string slurp(const fs::path& file) {
    std::ifstream in(file, std::ios::binary);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

bool criterion_determinism(const std::string& cli, const std::string& scenario_dir) {
    std::vector<fs::path> scenarios;
    for (const auto& e : fs::directory_iterator(scenario_dir))
        if (e.path().extension() == ".json") scenarios.push_back(e.path());
    std::sort(scenarios.begin(), scenarios.end());
    if (scenarios.empty()) return false;

    const fs::path work =
        fs::temp_directory_path() / ("wassinc-accept-" + std::to_string(::getpid()));
    fs::remove_all(work);
    fs::create_directories(work);

    bool ok = true;
    for (const fs::path& sc : scenarios) {
        const std::string cmd = "cd '" + work.string() + "' && '" + cli + "' run '" +
                                sc.string() + "' >/dev/null 2>&1";
        if (spawn(cmd) != 0) {
            std::cerr << "  scenario " << sc.filename() << " did not exit 0\n";
            ok = false;
            continue;
        }
        // Snapshot everything except the manifest (it carries wall time).
        std::map<std::string, std::string> first;
        for (const auto& e : fs::recursive_directory_iterator(work))
            if (e.is_regular_file() && e.path().filename() != "manifest.json")
                first[e.path().string()] = slurp(e.path());
        if (spawn(cmd) != 0) {
            ok = false;
            continue;
        }
        for (const auto& [path, bytes] : first)
            if (slurp(path) != bytes) {
                std::cerr << "  " << path << " differs between runs\n";
                ok = false;
            }
        fs::remove_all(work / "runs");
    }
    fs::remove_all(work);
    return ok;
}

int line(int idx, const char* name, bool ok) {
    std::printf("criterion %2d %-28s %s\n", idx, name, ok ? "PASS" : "FAIL");
    return ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    const std::string cli = argc > 1 ? argv[1] : "";
    const std::string scenarios = argc > 2 ? argv[2] : "scenarios";

    auto guard = [](bool (*fn)()) {
        try {
            return fn();
        } catch (const std::exception& e) {
            std::cerr << "  exception: " << e.what() << "\n";
            return false;
        }
    };

    int failures = 0;
    failures += line(1, "transport-oracle", guard(criterion_ot_oracle));
    failures += line(2, "metric-axioms", guard(criterion_metric_axioms));
    failures += line(3, "support-envelope", guard(criterion_support_envelope));
    failures += line(4, "momentum-certificate", guard(criterion_momentum_certificate));
    failures += line(5, "gronwall-certificate", guard(criterion_gronwall));
    failures += line(6, "filippov-two-drift", guard(criterion_filippov));
    failures += line(7, "chattering-rate", guard(criterion_chattering));
    failures += line(8, "minimizing-sequence", guard(criterion_minimizing_sequence));
    failures += line(9, "value-equality", guard(criterion_value_functions));
    failures += line(10, "solver-exactness", guard(criterion_solver_exactness));
    failures += line(11, "convergence-order", guard(criterion_convergence_order));

    bool det = false;
    try {
        det = !cli.empty() && criterion_determinism(cli, scenarios);
    } catch (const std::exception& e) {
        std::cerr << "  exception: " << e.what() << "\n";
    }
    failures += line(12, "determinism", det);

    return failures == 0 ? 0 : 1;
}
