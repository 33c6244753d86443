#pragma once

#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "wassinc/estimates.hpp"
#include "wassinc/measures.hpp"

namespace wassinc {

// Control values live in a box U of R^m (m = 1 for every built-in field).
using ControlValue = Vec;

// Feedback map omega : R^d -> U. Open-loop entries are constant; closed-loop
// entries are affine-saturated templates clamp(a x + b) whose Lipschitz
// constant is bounded by |a|.
struct FeedbackMap {
    enum class Kind { Constant, AffineSaturated };
    Kind kind = Kind::Constant;
    ControlValue u0;            // Constant
    std::vector<Vec> a;        // AffineSaturated: one row of length d per control coord
    Vec b;
    Vec lo, hi;                // clamp box per control coordinate

    ControlValue operator()(const Vec& x) const;
    double lipschitz_estimate() const;
};

// Finite realization of the admissible control class: the set-valued velocity
// V(t, mu) is {x -> v(t, mu, omega_j(x))(x) : j}.
struct ControlDictionary {
    std::vector<FeedbackMap> entries;
    double lipschitz_budget = 0.0;

    std::size_t size() const { return entries.size(); }
    // Sampled Lipschitz check Lip(omega_j) <= L_U + 1e-9 on given point pairs.
    void check_lipschitz(const std::vector<std::pair<Vec, Vec>>& pairs) const;
};

// Control-parametrized non-local Caratheodory field with declared bounds.
struct ControlledField {
    int dim = 0;
    std::function<Vec(double t, const ParticleMeasure& mu, const ControlValue& u,
                      const Vec& x)>
        eval;
    HypothesisBounds bounds;
};

// Time-gridded curve of measures plus the driving control. Atoms never merge
// during a flow, so states[k].points[i] is the characteristic of atom i.
struct Trajectory {
    std::vector<double> grid;
    std::vector<ParticleMeasure> states;
    // Per-step driver: dictionary index (selection) or -1 when driven by
    // explicit open-loop control values stored in open_loop_controls.
    std::vector<int> selection;
    std::vector<ControlValue> open_loop_controls;

    std::size_t steps() const { return grid.size() - 1; }
    const ParticleMeasure& initial() const { return states.front(); }
    const ParticleMeasure& final_state() const { return states.back(); }
    // Position history of one atom across the grid.
    std::vector<Vec> characteristic(std::size_t atom) const;
};

struct DivergenceError : std::runtime_error {
    double time;
    std::size_t atom;
    DivergenceError(double t, std::size_t i)
        : std::runtime_error("flow diverged at t=" + std::to_string(t) + " atom " +
                             std::to_string(i)),
          time(t), atom(i) {}
};

std::vector<double> uniform_grid(double T, std::size_t steps);

// Classical one-step 4th-order integration of the coupled particle system
// xdot_i = v(t, mu(t), u(t, x_i))(x_i); the measure argument is the empirical
// measure of the current stage state.
Trajectory flow(const ControlledField& field, const std::vector<ControlValue>& per_step_u,
                const ParticleMeasure& mu0, const std::vector<double>& grid);

// Same flow driven by per-step dictionary entries (closed-loop capable).
Trajectory flow_selection(const ControlledField& field, const ControlDictionary& dict,
                          const std::vector<int>& per_step_entry,
                          const ParticleMeasure& mu0, const std::vector<double>& grid);

// Relaxed flow: each step is driven by the convex combination
// sum_j lambda_j v(t, mu, omega_j(x))(x) of the dictionary velocities, with
// per-step weight vectors lambda over the dictionary.
Trajectory flow_relaxed(const ControlledField& field, const ControlDictionary& dict,
                        const std::vector<Vec>& per_step_weights,
                        const ParticleMeasure& mu0, const std::vector<double>& grid);

// Sample battery element for hypothesis checks.
struct HypothesisSample {
    double t = 0.0;
    Vec x, y;
    ParticleMeasure mu;
    ControlValue u;
};

struct HypothesisReport {
    double worst_sublinearity = 0.0;  // |v| / (m(t)(1+|x|)) or the (DI) variant
    double worst_lipschitz = 0.0;     // |v(x)-v(y)| / (l_K(t)|x-y|)
    double worst_setvalued = 0.0;     // (DI)-(iv) excess over L_K(t) W_p(mu,nu)
    bool pass = false;
};

HypothesisReport check_C1_C2(const ControlledField& field,
                             const std::vector<HypothesisSample>& samples);

struct MeasurePairSample {
    double t = 0.0;
    ParticleMeasure mu, nu;
};

// Fixed lattice on the ball B(0, R) used for C0-norm evaluation. The spacing
// defaults to R/32 but grows if the point count would exceed max_points.
struct EvalLattice {
    double radius = 0.0;
    double spacing = 0.0;
    std::vector<Vec> points;

    static EvalLattice ball(int dim, double radius, double spacing,
                            std::size_t max_points = 20000);
};

HypothesisReport check_DI(const ControlledField& field, const ControlDictionary& dict,
                          const std::vector<HypothesisSample>& samples,
                          const std::vector<MeasurePairSample>& pairs,
                          const EvalLattice& lattice);

// Smooth compactly supported test function with analytic derivatives.
struct TestFunction {
    std::function<double(double, const Vec&)> phi;
    std::function<double(double, const Vec&)> dphi_dt;
    std::function<Vec(double, const Vec&)> grad;
};

// max over test functions of |int int (d_t phi + <grad phi, v>) dmu dt| by the
// trapezoid rule on the trajectory grid.
double weak_residual(const Trajectory& traj, const ControlledField& field,
                     const ControlDictionary& dict,
                     const std::vector<TestFunction>& testfns);

// Built-in field library, selected by name in scenario configs.
ControlledField make_field(const std::string& name, int dim,
                           const std::vector<double>& params,
                           const HypothesisBounds& bounds);

}  // namespace wassinc
