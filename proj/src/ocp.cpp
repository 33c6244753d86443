#include "wassinc/ocp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "wassinc/transport.hpp"

namespace wassinc {

MeasureFunctional make_cost(const std::string& name, const std::vector<double>& params,
                            const ParticleMeasure& target) {
    if (name == "terminal-mean") {
        Vec star = params;
        return [star](const ParticleMeasure& mu) {
            Vec m = mean(mu);
            for (std::size_t c = 0; c < m.size() && c < star.size(); ++c)
                m[c] -= star[c];
            return norm2(m);
        };
    }
    if (name == "variance") {
        return [](const ParticleMeasure& mu) {
            const Vec m = mean(mu);
            double s = 0.0;
            for (std::size_t i = 0; i < mu.size(); ++i) {
                const double d = dist2(mu.points[i], m);
                s += mu.weights[i] * d * d;
            }
            return s;
        };
    }
    if (name == "w1-to-target") {
        target.validate();
        return [target](const ParticleMeasure& mu) {
            return wasserstein_distance(mu, target, 1.0);
        };
    }
    if (name == "constant") {
        const double c = params.empty() ? 0.0 : params[0];
        return [c](const ParticleMeasure&) { return c; };
    }
    throw std::invalid_argument("unknown cost: " + name);
}

MeasureFunctional make_constraint(const std::string& name,
                                  const std::vector<double>& params) {
    if (name.empty() || name == "none")
        return [](const ParticleMeasure&) { return 0.0; };
    if (name == "support-radius") {
        const double cap = params.at(0);
        return [cap](const ParticleMeasure& mu) {
            return std::max(0.0, support_radius(mu) - cap);
        };
    }
    if (name == "moment") {
        const double p = params.at(0);
        const double cap = params.at(1);
        return [p, cap](const ParticleMeasure& mu) {
            return std::max(0.0, momentum(mu, p) - cap);
        };
    }
    throw std::invalid_argument("unknown constraint: " + name);
}

double MayerProblem::running_tolerance() const {
    return eps_K > 0.0 ? eps_K : 1e-3 * inclusion.envelope.R_r;
}

double MayerProblem::terminal_tolerance() const {
    return eps_Q > 0.0 ? eps_Q : 1e-3 * inclusion.envelope.R_r;
}

namespace {

ParticleMeasure step_once(const InclusionProblem& prob, int entry,
                          const ParticleMeasure& state, double t0, double t1) {
    return flow_selection(prob.field, prob.dictionary, {entry}, state, {t0, t1})
        .states.back();
}

std::size_t count_switches(const std::vector<int>& sel) {
    std::size_t s = 0;
    for (std::size_t k = 1; k < sel.size(); ++k)
        if (sel[k] != sel[k - 1]) ++s;
    return s;
}

struct SearchAccumulator {
    const MayerProblem& prob;
    double eps_K, eps_Q;
    bool have_feasible = false;
    double best_cost = std::numeric_limits<double>::infinity();
    double least_violation = std::numeric_limits<double>::infinity();
    std::vector<int> best_sel;
    std::vector<ParticleMeasure> best_states;
    std::size_t explored = 0;

    SearchAccumulator(const MayerProblem& p)
        : prob(p), eps_K(p.running_tolerance()), eps_Q(p.terminal_tolerance()) {}

    double excess_running(const ParticleMeasure& mu) const {
        if (!prob.running_violation) return 0.0;
        return std::max(0.0, prob.running_violation(mu) - eps_K);
    }
    double excess_terminal(const ParticleMeasure& mu) const {
        if (!prob.terminal_violation) return 0.0;
        return std::max(0.0, prob.terminal_violation(mu) - eps_Q);
    }

    // Evaluates a fully integrated signal. Updates on strictly better values,
    // so the lexicographically first optimum wins under in-order exploration.
    void offer(const std::vector<int>& sel, const std::vector<ParticleMeasure>& states,
               double path_violation) {
        ++explored;
        const double viol = std::max(path_violation, excess_terminal(states.back()));
        if (viol == 0.0) {
            const double cost = prob.terminal_cost(states.back());
            if (!have_feasible || cost < best_cost) {
                have_feasible = true;
                best_cost = cost;
                best_sel = sel;
                best_states = states;
            }
        } else if (!have_feasible && viol < least_violation) {
            least_violation = viol;
            best_sel = sel;
            best_states = states;
        }
    }
};

void dfs(SearchAccumulator& acc, const std::vector<double>& grid, std::size_t budget,
         bool prune, std::vector<int>& sel, std::vector<ParticleMeasure>& states,
         std::size_t k, std::size_t switches, double path_violation) {
    const std::size_t M = grid.size() - 1;
    if (k == M) {
        acc.offer(sel, states, path_violation);
        return;
    }
    const std::size_t J = acc.prob.inclusion.dictionary.size();
    for (std::size_t j = 0; j < J; ++j) {
        const bool is_switch = k > 0 && static_cast<int>(j) != sel[k - 1];
        if (is_switch && switches == budget) continue;
        ParticleMeasure next = step_once(acc.prob.inclusion, static_cast<int>(j),
                                         states.back(), grid[k], grid[k + 1]);
        const double viol = std::max(path_violation, acc.excess_running(next));
        if (prune && viol > 0.0) continue;
        sel[k] = static_cast<int>(j);
        states.push_back(std::move(next));
        dfs(acc, grid, budget, prune, sel, states, k + 1,
            switches + (is_switch ? 1 : 0), viol);
        states.pop_back();
    }
}

SolveResult finish(SearchAccumulator& acc, const std::vector<double>& grid) {
    SolveResult res;
    res.feasible = acc.have_feasible;
    res.cost = acc.have_feasible ? acc.best_cost : acc.prob.terminal_cost(
                                                       acc.best_states.back());
    res.violation = acc.have_feasible ? 0.0 : acc.least_violation;
    res.explored = acc.explored;
    res.best.trajectory.grid = grid;
    res.best.trajectory.states = std::move(acc.best_states);
    res.best.trajectory.selection = acc.best_sel;
    res.best.selection = std::move(acc.best_sel);
    res.best.mismatch_curve.assign(grid.size() - 1, 0.0);
    return res;
}

}  // namespace

SolveResult solve_direct(const MayerProblem& problem, const ParticleMeasure& mu0,
                         const std::vector<double>& grid, std::size_t switch_budget) {
    if (problem.inclusion.battery && !problem.inclusion.battery->pass)
        throw RefusalError("hypothesis battery failed; refusing to solve");
    SearchAccumulator acc(problem);
    std::vector<int> sel(grid.size() - 1, 0);
    std::vector<ParticleMeasure> states{mu0};
    const double v0 = acc.excess_running(mu0);
    if (v0 == 0.0) dfs(acc, grid, switch_budget, true, sel, states, 0, 0, 0.0);
    if (acc.have_feasible) return finish(acc, grid);
    // Nothing survived pruning: rerun unpruned to attach the least-violating
    // trajectory.
    SearchAccumulator fallback(problem);
    dfs(fallback, grid, switch_budget, false, sel, states, 0, 0, v0);
    fallback.explored += acc.explored;
    return finish(fallback, grid);
}

SolveResult solve_exhaustive(const MayerProblem& problem, const ParticleMeasure& mu0,
                             const std::vector<double>& grid,
                             std::size_t switch_budget) {
    const std::size_t M = grid.size() - 1;
    const std::size_t J = problem.inclusion.dictionary.size();
    double total = 1.0;
    for (std::size_t k = 0; k < M; ++k) total *= static_cast<double>(J);
    if (total > static_cast<double>(1 << 20))
        throw std::invalid_argument("exhaustive enumeration refused: > 2^20 sequences");

    SearchAccumulator acc(problem);
    const double v0 = acc.excess_running(mu0);
    std::vector<int> sel(M, 0);
    for (;;) {
        if (count_switches(sel) <= switch_budget) {
            Trajectory traj =
                flow_selection(problem.inclusion.field, problem.inclusion.dictionary,
                               sel, mu0, grid);
            double viol = v0;
            for (const ParticleMeasure& st : traj.states)
                viol = std::max(viol, acc.excess_running(st));
            acc.offer(sel, traj.states, viol);
        }
        // Lexicographic odometer.
        std::size_t k = M;
        while (k > 0 && sel[k - 1] == static_cast<int>(J) - 1) sel[--k] = 0;
        if (k == 0) break;
        ++sel[k - 1];
    }
    if (!acc.have_feasible && acc.best_states.empty()) {
        // Degenerate guard: keep the all-zero signal as the attached witness.
        Trajectory traj = flow_selection(problem.inclusion.field,
                                         problem.inclusion.dictionary,
                                         std::vector<int>(M, 0), mu0, grid);
        acc.best_sel.assign(M, 0);
        acc.best_states = traj.states;
    }
    return finish(acc, grid);
}

namespace {

bool relaxed_feasible_cost(const MayerProblem& prob, const Trajectory& traj,
                           double& cost_out) {
    const double eps_K = prob.running_tolerance();
    const double eps_Q = prob.terminal_tolerance();
    if (prob.running_violation)
        for (const ParticleMeasure& st : traj.states)
            if (prob.running_violation(st) > eps_K) return false;
    if (prob.terminal_violation && prob.terminal_violation(traj.final_state()) > eps_Q)
        return false;
    cost_out = prob.terminal_cost(traj.final_state());
    return true;
}

void simplex_grid(std::size_t J, std::size_t res, Vec& acc, std::size_t coord,
                  std::size_t left, const std::function<void(const Vec&)>& emit) {
    if (coord + 1 == J) {
        acc[coord] = static_cast<double>(left) / static_cast<double>(res);
        emit(acc);
        return;
    }
    for (std::size_t c = 0; c <= left; ++c) {
        acc[coord] = static_cast<double>(c) / static_cast<double>(res);
        simplex_grid(J, res, acc, coord + 1, left - c, emit);
    }
}

}  // namespace

ValueReport value_functions(const MayerProblem& problem, double tau,
                            const ParticleMeasure& mu_tau, std::size_t steps,
                            std::size_t switch_budget, std::size_t resolution) {
    const double T = problem.inclusion.field.bounds.T;
    if (tau < 0.0 || tau >= T)
        throw std::invalid_argument("value_functions: tau must lie in [0, T)");
    std::vector<double> grid(steps + 1);
    for (std::size_t k = 0; k <= steps; ++k)
        grid[k] = tau + (T - tau) * static_cast<double>(k) / static_cast<double>(steps);

    ValueReport rep;
    rep.direct = solve_direct(problem, mu_tau, grid, switch_budget);
    rep.V = rep.direct.cost;

    const std::size_t J = problem.inclusion.dictionary.size();
    const std::size_t M = steps;
    double best = std::numeric_limits<double>::infinity();
    std::vector<Vec> best_plan;

    // Stage 1: constant weight vectors on a dense simplex grid.
    Vec acc(J, 0.0);
    simplex_grid(J, resolution, acc, 0, resolution, [&](const Vec& w) {
        const std::vector<Vec> plan(M, w);
        const Trajectory traj = flow_relaxed(problem.inclusion.field,
                                             problem.inclusion.dictionary, plan,
                                             mu_tau, grid);
        double cost;
        if (relaxed_feasible_cost(problem, traj, cost) && cost < best) {
            best = cost;
            best_plan = plan;
        }
    });

    // Stage 2: per-step coordinate descent, moving 1/resolution of mass
    // between entry pairs while it improves.
    if (!best_plan.empty()) {
        const double unit = 1.0 / static_cast<double>(resolution);
        for (int sweep = 0; sweep < 2; ++sweep) {
            for (std::size_t k = 0; k < M; ++k) {
                for (std::size_t a = 0; a < J; ++a) {
                    for (std::size_t b = 0; b < J; ++b) {
                        if (a == b || best_plan[k][a] < unit - 1e-12) continue;
                        std::vector<Vec> cand = best_plan;
                        cand[k][a] -= unit;
                        cand[k][b] += unit;
                        const Trajectory traj =
                            flow_relaxed(problem.inclusion.field,
                                         problem.inclusion.dictionary, cand, mu_tau,
                                         grid);
                        double cost;
                        if (relaxed_feasible_cost(problem, traj, cost) && cost < best) {
                            best = cost;
                            best_plan = std::move(cand);
                        }
                    }
                }
            }
        }
    }
    rep.relaxed_feasible = !best_plan.empty();
    rep.V_co = best;
    rep.relaxed_plan = std::move(best_plan);
    return rep;
}

bool verify_control_inclusion_equivalence(const InclusionProblem& problem,
                                          const ReferenceFlow& reference, double tol) {
    const Trajectory& traj = reference.trajectory;
    for (std::size_t k = 0; k + 1 < traj.grid.size(); ++k) {
        const double t = traj.grid[k];
        const ParticleMeasure& mu_k = traj.states[k];
        const std::vector<Vec> pts = eval_points(problem, mu_k);
        std::vector<Vec> w(pts.size());
        for (std::size_t i = 0; i < pts.size(); ++i)
            w[i] = reference.velocity(t, mu_k, pts[i]);
        if (nearest_selection(problem, t, mu_k, pts, w).second > tol) return false;
    }
    return true;
}

bool verify_control_inclusion_equivalence(const InclusionProblem& problem,
                                          const TrajectorySelection& traj, double tol) {
    ReferenceFlow ref;
    ref.trajectory = traj.trajectory;
    const ControlledField field = problem.field;
    const ControlDictionary dict = problem.dictionary;
    const std::vector<int> sel = traj.selection;
    const std::vector<double> grid = traj.trajectory.grid;
    ref.velocity = [field, dict, sel, grid](double t, const ParticleMeasure& mu,
                                            const Vec& x) {
        const auto it = std::upper_bound(grid.begin(), grid.end(), t);
        std::size_t k = it == grid.begin() ? 0 : (it - grid.begin()) - 1;
        k = std::min(k, sel.size() - 1);
        return field.eval(t, mu, dict.entries[sel[k]](x), x);
    };
    return verify_control_inclusion_equivalence(problem, ref, tol);
}

MinimizingSequenceReport minimizing_sequence_experiment(
    const MayerProblem& problem, const ParticleMeasure& mu0,
    const std::vector<std::vector<int>>& signals, const std::vector<double>& grid,
    double epsilon, double tol) {
    MinimizingSequenceReport rep;
    for (const auto& sig : signals) {
        const Trajectory traj = flow_selection(problem.inclusion.field,
                                               problem.inclusion.dictionary, sig, mu0,
                                               grid);
        rep.costs.push_back(problem.terminal_cost(traj.final_state()));
    }
    rep.liminf_cost = *std::min_element(rep.costs.begin(), rep.costs.end());

    rep.compactness = compactness_harness(problem.inclusion, mu0, signals, grid, epsilon);
    if (!rep.compactness.sufficient) return rep;

    const Trajectory& cluster = rep.compactness.cluster.trajectory;
    rep.cluster_cost = problem.terminal_cost(cluster.final_state());
    rep.lower_semicontinuous = rep.cluster_cost <= rep.liminf_cost + tol;

    rep.cluster_feasible = true;
    const double eps_K = problem.running_tolerance();
    const double eps_Q = problem.terminal_tolerance();
    if (problem.running_violation)
        for (const ParticleMeasure& st : cluster.states)
            if (problem.running_violation(st) > eps_K) rep.cluster_feasible = false;
    if (problem.terminal_violation &&
        problem.terminal_violation(cluster.final_state()) > eps_Q)
        rep.cluster_feasible = false;

    // Convexity probe: midpoints of dictionary velocities at t = 0 over mu0
    // must be reproducible by some entry on the lattice.
    const InclusionProblem& inc = problem.inclusion;
    const std::vector<Vec> pts = eval_points(inc, mu0);
    rep.sampled_convexity = true;
    for (std::size_t a = 0; a < inc.dictionary.size() && rep.sampled_convexity; ++a)
        for (std::size_t b = a + 1; b < inc.dictionary.size(); ++b) {
            std::vector<Vec> mid(pts.size());
            for (std::size_t i = 0; i < pts.size(); ++i) {
                const Vec va = inc.field.eval(0.0, mu0,
                                              inc.dictionary.entries[a](pts[i]), pts[i]);
                const Vec vb = inc.field.eval(0.0, mu0,
                                              inc.dictionary.entries[b](pts[i]), pts[i]);
                mid[i] = 0.5 * (va + vb);
            }
            if (nearest_selection(inc, 0.0, mu0, pts, mid).second > 1e-6) {
                rep.sampled_convexity = false;
                break;
            }
        }
    return rep;
}

}  // namespace wassinc
