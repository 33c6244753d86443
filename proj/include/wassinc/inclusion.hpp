#pragma once

#include <optional>
#include <stdexcept>
#include <utility>
#include <vector>

#include "wassinc/dynamics.hpp"
#include "wassinc/estimates.hpp"

namespace wassinc {

// Thrown when a construction declines to run: hypothesis battery failure,
// a subdivision finer than the grid can carry, and similar preconditions.
struct RefusalError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// A set-valued velocity V(t, mu) = {x -> v(t, mu, omega_j(x))(x) : j} given by
// a field and a finite dictionary, together with the evaluation lattice on
// B(0, R_r) used for all C0-norm computations.
struct InclusionProblem {
    ControlledField field;
    ControlDictionary dictionary;
    CauchyLipschitzEnvelope envelope;
    EvalLattice lattice;
    std::optional<HypothesisReport> battery;

    static InclusionProblem make(ControlledField field, ControlDictionary dictionary);

    double p() const { return field.bounds.p; }
};

// Seeded random sample battery for the sublinearity / Lipschitz / set-valued
// Lipschitz checks. The report is stored on the problem; constructions refuse
// to run against a stored failing report.
const HypothesisReport& validate_hypotheses(InclusionProblem& problem, unsigned seed);

// Admissible pair (mu(.), v(.)): a trajectory driven at every step by a
// dictionary entry, so selection membership is exact by construction.
// mismatch_curve holds the per-step nearest-distance values measured when the
// selection was made.
struct TrajectorySelection {
    Trajectory trajectory;
    std::vector<int> selection;
    std::vector<double> mismatch_curve;
};

// Reference curve nu(.) with an explicit driving velocity w; the velocity
// callback receives the reference state at the queried time.
struct ReferenceFlow {
    Trajectory trajectory;
    std::function<Vec(double t, const ParticleMeasure& nu_t, const Vec& x)> velocity;
};

ReferenceFlow reference_from_open_loop(const ControlledField& w_field,
                                       const std::vector<ControlValue>& per_step_u,
                                       const ParticleMeasure& nu0,
                                       const std::vector<double>& grid);
ReferenceFlow reference_from_selection(const ControlledField& field,
                                       const ControlDictionary& dict,
                                       const std::vector<int>& per_step_entry,
                                       const ParticleMeasure& nu0,
                                       const std::vector<double>& grid);

// Sup-norm evaluation points near mu: the K-lattice union mu's atoms, radially
// clamped onto B(0, R_r).
std::vector<Vec> eval_points(const InclusionProblem& problem, const ParticleMeasure& mu);

// argmin over dictionary entries of sup_x |vhat(t, mu, omega_j)(x) - w(x)|
// over the given points (w sampled as w_values); ties break to the smallest
// index. Returns (index, distance).
std::pair<int, double> nearest_selection(const InclusionProblem& problem, double t,
                                         const ParticleMeasure& mu,
                                         const std::vector<Vec>& points,
                                         const std::vector<Vec>& w_values);

// Mismatch function eta_nu(t_k): distance from the reference velocity to the
// admissible set along the reference curve.
TimeSeries mismatch(const InclusionProblem& problem, const ReferenceFlow& reference);

struct FilippovResult {
    TrajectorySelection solution;
    Certificate state_certificate;     // W_p(mu, nu) vs chi_p exp(C_Kp)
    Certificate velocity_certificate;  // velocity gap vs L_K chi_p exp(C_Kp) + eta
    TimeSeries eta;
    std::vector<double> stage_residuals;  // sup_k W_p(mu_{n+1}, mu_n) per stage
    bool converged = false;
    double allowance = 0.0;  // C * h discretization allowance used in both certificates
};

// Picard scheme: mu_0 := nu; stage n+1 selects per step the dictionary entry
// nearest (on the evaluation points) to the previous driving velocity, flows
// it from mu0, and stops when successive stages are sup-W_p closer than tol
// (default 1e-6 * R_r). The returned trajectory is the self-consistent flow of
// the converged selection.
FilippovResult filippov(const InclusionProblem& problem, const ReferenceFlow& reference,
                        const ParticleMeasure& mu0, double tol = 0.0,
                        std::size_t max_iter = 50);

// Chattering realization of a relaxed plan: [0, T] is split into `subdivisions`
// equal subintervals; each subinterval plays the dictionary entries in order,
// for step counts proportional to the plan's average weights on it.
std::vector<int> chatter_selection(const InclusionProblem& problem,
                                   const std::vector<Vec>& relaxed_plan,
                                   const std::vector<double>& grid,
                                   std::size_t subdivisions);

struct RelaxResult {
    Trajectory relaxed;            // convex-combination flow
    TrajectorySelection solution;  // admissible chattering trajectory
    FilippovResult landing;        // certificates of the landing step
    double achieved_sup_distance = 0.0;
    std::size_t subdivisions = 0;
    double delta_prime = 0.0;
};

// Integrates the relaxed flow of per-step weight vectors, picks the
// subdivision count from delta (sup_i int_i m <= delta'/(2(1+2R_r))), chatters
// it, and lands on an admissible trajectory via filippov. Refuses when the
// required subdivision outruns the grid.
RelaxResult relax(const InclusionProblem& problem, const std::vector<Vec>& relaxed_plan,
                  const ParticleMeasure& mu0, const std::vector<double>& grid,
                  double delta);

struct CompactnessReport {
    bool sufficient = false;  // an epsilon-cluster of size >= 2 was found
    std::vector<std::size_t> kept;
    double diameter = 0.0;
    TrajectorySelection cluster;
    bool admissible = false;
    double worst_selection_distance = 0.0;
};

// Integrates all signals, repeatedly halves the family keeping the subset of
// smallest pairwise sup-W_p diameter, and checks the surviving candidate's
// driving velocity for admissibility via nearest_selection.
CompactnessReport compactness_harness(const InclusionProblem& problem,
                                      const ParticleMeasure& mu0,
                                      const std::vector<std::vector<int>>& signals,
                                      const std::vector<double>& grid, double epsilon,
                                      double tol = 0.0);

}  // namespace wassinc
