#pragma once

#include <functional>
#include <string>
#include <vector>

#include "wassinc/inclusion.hpp"

namespace wassinc {

using MeasureFunctional = std::function<double(const ParticleMeasure&)>;

// Terminal-cost library: "terminal-mean" |mean(mu) - x*|, "variance"
// sum_i w_i |x_i - mean|^2, "w1-to-target" W_1(mu, target), "constant".
MeasureFunctional make_cost(const std::string& name, const std::vector<double>& params,
                            const ParticleMeasure& target = {});

// Constraint library, returned as violation functionals (0 when satisfied):
// "support-radius" (excess of support_radius over params[0]), "moment"
// (excess of M_{params[0]} over params[1]), "none".
MeasureFunctional make_constraint(const std::string& name,
                                  const std::vector<double>& params);

// Constrained Mayer problem over the inclusion's control dictionary.
struct MayerProblem {
    InclusionProblem inclusion;
    MeasureFunctional terminal_cost;
    MeasureFunctional running_violation;   // checked at every grid node vs eps_K
    MeasureFunctional terminal_violation;  // checked at the final node vs eps_Q
    double eps_K = 0.0;                    // 0 selects the default 1e-3 * R_r
    double eps_Q = 0.0;

    double running_tolerance() const;
    double terminal_tolerance() const;
};

struct SolveResult {
    TrajectorySelection best;
    double cost = 0.0;
    bool feasible = false;
    double violation = 0.0;   // least violation found when infeasible
    std::size_t explored = 0; // signals fully evaluated
};

// Direct method: enumerates piecewise-constant dictionary signals with at most
// switch_budget control changes, depth-first, pruning every prefix that
// already violates the running constraint beyond eps_K. The returned cost is
// the exact minimum over the enumerated class; ties go to the
// lexicographically smallest signal. When nothing is feasible the
// least-violating trajectory is returned with feasible = false.
SolveResult solve_direct(const MayerProblem& problem, const ParticleMeasure& mu0,
                         const std::vector<double>& grid, std::size_t switch_budget);

// Independent cross-check: materializes the full |U|^M cross-product, filters
// by switch budget, and simulates every survivor. Refuses more than 2^20
// sequences.
SolveResult solve_exhaustive(const MayerProblem& problem, const ParticleMeasure& mu0,
                             const std::vector<double>& grid,
                             std::size_t switch_budget);

struct ValueReport {
    double V = 0.0;       // over pure dictionary signals
    double V_co = 0.0;    // over relaxed per-step weight plans (best found)
    SolveResult direct;
    std::vector<Vec> relaxed_plan;
    bool relaxed_feasible = false;
};

// V from solve_direct on [tau, T]; V_co from a dense simplex grid over
// constant weight vectors (resolution steps per coordinate) refined by
// per-step coordinate descent. V_co is best-found, global only when the
// simplex grid is exhaustive.
ValueReport value_functions(const MayerProblem& problem, double tau,
                            const ParticleMeasure& mu_tau, std::size_t steps,
                            std::size_t switch_budget, std::size_t resolution);

// True iff the driving velocity matches some dictionary entry within tol on
// the evaluation points at every grid time.
bool verify_control_inclusion_equivalence(const InclusionProblem& problem,
                                          const ReferenceFlow& reference,
                                          double tol = 1e-9);
bool verify_control_inclusion_equivalence(const InclusionProblem& problem,
                                          const TrajectorySelection& traj,
                                          double tol = 1e-9);

struct MinimizingSequenceReport {
    CompactnessReport compactness;
    std::vector<double> costs;
    double liminf_cost = 0.0;
    double cluster_cost = 0.0;
    bool lower_semicontinuous = false;  // cluster_cost <= liminf + tol
    bool cluster_feasible = false;
    // Sampled probe of dictionary-image convexity on the lattice; informative
    // only, never gating.
    bool sampled_convexity = false;
};

MinimizingSequenceReport minimizing_sequence_experiment(
    const MayerProblem& problem, const ParticleMeasure& mu0,
    const std::vector<std::vector<int>>& signals, const std::vector<double>& grid,
    double epsilon, double tol = 1e-3);

}  // namespace wassinc
