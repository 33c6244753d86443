#include "wassinc/inclusion.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "wassinc/transport.hpp"

namespace wassinc {

namespace {

std::size_t step_of(const std::vector<double>& grid, double t) {
    const auto it = std::upper_bound(grid.begin(), grid.end(), t);
    const std::size_t k = it == grid.begin() ? 0 : (it - grid.begin()) - 1;
    return std::min(k, grid.size() - 2);
}

Vec vhat(const InclusionProblem& prob, double t, const ParticleMeasure& mu, int entry,
         const Vec& x) {
    return prob.field.eval(t, mu, prob.dictionary.entries[entry](x), x);
}

double sup_values(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s = std::max(s, x);
    return s;
}

double max_step(const std::vector<double>& grid) {
    double h = 0.0;
    for (std::size_t k = 1; k < grid.size(); ++k) h = std::max(h, grid[k] - grid[k - 1]);
    return h;
}

}  // namespace

InclusionProblem InclusionProblem::make(ControlledField field,
                                        ControlDictionary dictionary) {
    if (dictionary.entries.empty())
        throw std::invalid_argument("inclusion problem needs a non-empty dictionary");
    field.bounds.validate();
    InclusionProblem prob;
    prob.envelope = cauchy_lipschitz_envelope(field.bounds);
    prob.lattice = EvalLattice::ball(field.dim, prob.envelope.R_r,
                                     prob.envelope.R_r / 32.0);
    prob.field = std::move(field);
    prob.dictionary = std::move(dictionary);
    return prob;
}

const HypothesisReport& validate_hypotheses(InclusionProblem& problem, unsigned seed) {
    std::mt19937 rng(seed);
    const double R = problem.envelope.R_r;
    const double T = problem.field.bounds.T;
    const int d = problem.field.dim;
    std::uniform_real_distribution<double> td(0.0, T);
    std::uniform_real_distribution<double> xd(-R, R);
    std::uniform_int_distribution<int> nd(1, 4);
    std::uniform_int_distribution<std::size_t> jd(0, problem.dictionary.size() - 1);

    auto point = [&] { Vec x(d); for (double& c : x) c = xd(rng); return clamp_to_ball(x, R); };
    auto measure = [&] {
        std::vector<Vec> pts(nd(rng));
        for (Vec& x : pts) x = point();
        return ParticleMeasure::uniform(d, std::move(pts));
    };

    std::vector<HypothesisSample> samples;
    for (int i = 0; i < 24; ++i) {
        HypothesisSample s;
        s.t = td(rng);
        s.x = point();
        s.y = point();
        s.mu = measure();
        s.u = problem.dictionary.entries[jd(rng)](s.x);
        samples.push_back(std::move(s));
    }
    std::vector<MeasurePairSample> pairs;
    for (int i = 0; i < 8; ++i) pairs.push_back({td(rng), measure(), measure()});

    problem.battery = check_DI(problem.field, problem.dictionary, samples, pairs,
                               problem.lattice);
    return *problem.battery;
}

ReferenceFlow reference_from_open_loop(const ControlledField& w_field,
                                       const std::vector<ControlValue>& per_step_u,
                                       const ParticleMeasure& nu0,
                                       const std::vector<double>& grid) {
    ReferenceFlow ref;
    ref.trajectory = flow(w_field, per_step_u, nu0, grid);
    ref.velocity = [w_field, per_step_u, grid](double t, const ParticleMeasure& nu_t,
                                               const Vec& x) {
        return w_field.eval(t, nu_t, per_step_u[step_of(grid, t)], x);
    };
    return ref;
}

ReferenceFlow reference_from_selection(const ControlledField& field,
                                       const ControlDictionary& dict,
                                       const std::vector<int>& per_step_entry,
                                       const ParticleMeasure& nu0,
                                       const std::vector<double>& grid) {
    ReferenceFlow ref;
    ref.trajectory = flow_selection(field, dict, per_step_entry, nu0, grid);
    ref.velocity = [field, dict, per_step_entry, grid](double t,
                                                       const ParticleMeasure& nu_t,
                                                       const Vec& x) {
        const FeedbackMap& omega = dict.entries[per_step_entry[step_of(grid, t)]];
        return field.eval(t, nu_t, omega(x), x);
    };
    return ref;
}

std::vector<Vec> eval_points(const InclusionProblem& problem, const ParticleMeasure& mu) {
    std::vector<Vec> pts = problem.lattice.points;
    pts.reserve(pts.size() + mu.size());
    for (const Vec& x : mu.points) pts.push_back(clamp_to_ball(x, problem.envelope.R_r));
    return pts;
}

std::pair<int, double> nearest_selection(const InclusionProblem& problem, double t,
                                         const ParticleMeasure& mu,
                                         const std::vector<Vec>& points,
                                         const std::vector<Vec>& w_values) {
    if (points.size() != w_values.size())
        throw std::invalid_argument("nearest_selection: snapshot size mismatch");
    int best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < problem.dictionary.size(); ++j) {
        double d = 0.0;
        for (std::size_t i = 0; i < points.size(); ++i) {
            d = std::max(d, dist2(vhat(problem, t, mu, static_cast<int>(j), points[i]),
                                  w_values[i]));
            if (d >= best_d) break;
        }
        if (d < best_d) {
            best_d = d;
            best = static_cast<int>(j);
        }
    }
    return {best, best_d};
}

TimeSeries mismatch(const InclusionProblem& problem, const ReferenceFlow& reference) {
    const Trajectory& nu = reference.trajectory;
    TimeSeries eta;
    eta.t = nu.grid;
    eta.v.resize(nu.grid.size());
    for (std::size_t k = 0; k < nu.grid.size(); ++k) {
        const double t = nu.grid[k];
        const ParticleMeasure& nu_k = nu.states[k];
        const std::vector<Vec> pts = eval_points(problem, nu_k);
        std::vector<Vec> w(pts.size());
        for (std::size_t i = 0; i < pts.size(); ++i)
            w[i] = reference.velocity(t, nu_k, pts[i]);
        eta.v[k] = nearest_selection(problem, t, nu_k, pts, w).second;
    }
    return eta;
}

FilippovResult filippov(const InclusionProblem& problem, const ReferenceFlow& reference,
                        const ParticleMeasure& mu0, double tol, std::size_t max_iter) {
    if (problem.battery && !problem.battery->pass)
        throw RefusalError("hypothesis battery failed; refusing to run the iteration");
    const std::vector<double>& grid = reference.trajectory.grid;
    const std::size_t M = grid.size() - 1;
    const double p = problem.p();
    if (tol <= 0.0) tol = 1e-6 * problem.envelope.R_r;

    FilippovResult res;
    res.eta = mismatch(problem, reference);
    const double W0 =
        wasserstein_distance(mu0, reference.trajectory.states.front(), p);

    // Stage state: candidates are evaluated on cand (mu_n); the previous
    // driving velocity is evaluated on the measures it was selected over.
    const Trajectory* cand = &reference.trajectory;
    const Trajectory* prev_meas = nullptr;  // mu_{n-1}; null means "reference drives"
    std::vector<int> prev_sel;
    Trajectory current;  // owns mu_{n+1} across iterations
    Trajectory prev_own;  // owns mu_n once it is no longer the reference

    std::vector<int> sel(M);
    std::vector<double> sel_dist(M);
    for (std::size_t stage = 0; stage < max_iter; ++stage) {
        for (std::size_t k = 0; k < M; ++k) {
            const double t = grid[k];
            const ParticleMeasure& mu_k = cand->states[k];
            const std::vector<Vec> pts = eval_points(problem, mu_k);
            std::vector<Vec> w(pts.size());
            for (std::size_t i = 0; i < pts.size(); ++i) {
                w[i] = prev_meas == nullptr
                           ? reference.velocity(t, cand->states[k], pts[i])
                           : vhat(problem, t, prev_meas->states[k], prev_sel[k], pts[i]);
            }
            const auto [j, d] = nearest_selection(problem, t, mu_k, pts, w);
            sel[k] = j;
            sel_dist[k] = d;
        }
        Trajectory next = flow_selection(problem.field, problem.dictionary, sel, mu0, grid);
        double residual = 0.0;
        for (std::size_t k = 0; k < grid.size(); ++k)
            residual = std::max(
                residual, wasserstein_distance(next.states[k], cand->states[k], p));
        res.stage_residuals.push_back(residual);

        const bool done = residual < tol;
        prev_own = (prev_meas == nullptr) ? reference.trajectory : std::move(current);
        prev_meas = cand == &reference.trajectory ? &reference.trajectory : &prev_own;
        // mu_{n+1} becomes the next stage's candidate curve.
        current = std::move(next);
        cand = &current;
        prev_sel = sel;
        if (done) {
            res.converged = true;
            break;
        }
    }

    res.solution.trajectory = std::move(current);
    res.solution.selection = sel;
    res.solution.mismatch_curve = sel_dist;

    // Certificates against the explicit envelopes.
    const Trajectory& mu = res.solution.trajectory;
    const HypothesisBounds& b = problem.field.bounds;
    const double h = max_step(grid);
    const double C_all = 2.0 * (1.0 + problem.envelope.R_r) * sup_values(b.m.values);
    res.allowance = C_all * h;

    std::vector<double> lhs_state(grid.size()), rhs_state(grid.size());
    std::vector<double> lhs_vel(grid.size()), rhs_vel(grid.size());
    for (std::size_t k = 0; k < grid.size(); ++k) {
        const double t = grid[k];
        const auto env = filippov_envelopes(b, W0, res.eta, t);
        lhs_state[k] = wasserstein_distance(mu.states[k],
                                            reference.trajectory.states[k], p);
        rhs_state[k] = env.chi_p * std::exp(env.C_Kp);

        const std::size_t step = std::min(k, M - 1);
        const std::vector<Vec> pts = eval_points(problem, mu.states[k]);
        double gap = 0.0;
        for (const Vec& x : pts)
            gap = std::max(gap, dist2(vhat(problem, t, mu.states[k], sel[step], x),
                                      reference.velocity(
                                          t, reference.trajectory.states[k], x)));
        lhs_vel[k] = gap;
        rhs_vel[k] = b.L_K.at(std::min(t, b.T)) * env.chi_p * std::exp(env.C_Kp) +
                     res.eta.v[k];
    }
    const double lat_allow = sup_values(b.l_K.values) * problem.lattice.spacing;
    res.state_certificate =
        certify("filippov-state", grid, lhs_state, rhs_state,
                1e-6 * (1.0 + sup_values(rhs_state)) + res.allowance);
    res.velocity_certificate =
        certify("filippov-velocity", grid, lhs_vel, rhs_vel,
                1e-6 * (1.0 + sup_values(rhs_vel)) + res.allowance + lat_allow);
    return res;
}

std::vector<int> chatter_selection(const InclusionProblem& problem,
                                   const std::vector<Vec>& relaxed_plan,
                                   const std::vector<double>& grid,
                                   std::size_t subdivisions) {
    const std::size_t M = grid.size() - 1;
    const std::size_t J = problem.dictionary.size();
    if (relaxed_plan.size() != M)
        throw std::invalid_argument("chatter: one weight vector per step required");
    if (subdivisions == 0 || subdivisions > M)
        throw RefusalError("chatter: grid too coarse, need at least " +
                           std::to_string(subdivisions) + " steps, have " +
                           std::to_string(M));

    std::vector<int> sel(M, 0);
    for (std::size_t i = 0; i < subdivisions; ++i) {
        const std::size_t lo = (i * M) / subdivisions;
        const std::size_t hi = ((i + 1) * M) / subdivisions;
        if (hi <= lo)
            throw RefusalError("chatter: grid too coarse for " +
                               std::to_string(subdivisions) + " subdivisions");
        Vec avg(J, 0.0);
        for (std::size_t k = lo; k < hi; ++k)
            for (std::size_t j = 0; j < J; ++j) avg[j] += relaxed_plan[k][j];
        for (double& a : avg) a /= static_cast<double>(hi - lo);

        // Consecutive blocks in dictionary order, cumulative rounding so the
        // step counts telescope to exactly hi - lo.
        double cum = 0.0;
        std::size_t assigned = lo;
        for (std::size_t j = 0; j < J; ++j) {
            cum += avg[j];
            const std::size_t upto =
                lo + static_cast<std::size_t>(
                         std::llround(cum * static_cast<double>(hi - lo)));
            for (; assigned < std::min(upto, hi); ++assigned)
                sel[assigned] = static_cast<int>(j);
        }
        for (; assigned < hi; ++assigned) sel[assigned] = static_cast<int>(J - 1);
    }
    return sel;
}

RelaxResult relax(const InclusionProblem& problem, const std::vector<Vec>& relaxed_plan,
                  const ParticleMeasure& mu0, const std::vector<double>& grid,
                  double delta) {
    if (delta <= 0.0) throw std::invalid_argument("relax: delta must be positive");
    if (problem.battery && !problem.battery->pass)
        throw RefusalError("hypothesis battery failed; refusing to relax");

    RelaxResult res;
    res.relaxed = flow_relaxed(problem.field, problem.dictionary, relaxed_plan, mu0, grid);

    const HypothesisBounds& b = problem.field.bounds;
    const double l1_l = b.l_K.l1();
    const double l1_L = b.L_K.l1();
    const double C_K1 = l1_L * std::exp(l1_l);
    res.delta_prime = delta / ((1.0 + l1_L * std::exp(C_K1 + l1_l)) * (2.0 + l1_l) *
                               std::exp(l1_l));
    const double target = res.delta_prime / (2.0 * (1.0 + 2.0 * problem.envelope.R_r));

    const double sup_m = sup_values(b.m.values);
    std::size_t N = 1;
    if (sup_m > 0.0 && target > 0.0)
        N = static_cast<std::size_t>(std::ceil(sup_m * b.T / target));
    N = std::max<std::size_t>(N, 1);
    const std::size_t M = grid.size() - 1;
    if (N > M)
        throw RefusalError("relax: subdivision needs " + std::to_string(N) +
                           " subintervals but the grid has only " + std::to_string(M) +
                           " steps; refine the grid");
    res.subdivisions = N;

    const std::vector<int> sel = chatter_selection(problem, relaxed_plan, grid, N);
    const ReferenceFlow chat =
        reference_from_selection(problem.field, problem.dictionary, sel, mu0, grid);
    res.landing = filippov(problem, chat, mu0);
    res.solution = res.landing.solution;

    double sup = 0.0;
    for (std::size_t k = 0; k < grid.size(); ++k)
        sup = std::max(sup,
                       wasserstein_distance(res.relaxed.states[k],
                                            res.solution.trajectory.states[k],
                                            problem.p()));
    res.achieved_sup_distance = sup;
    return res;
}

CompactnessReport compactness_harness(const InclusionProblem& problem,
                                      const ParticleMeasure& mu0,
                                      const std::vector<std::vector<int>>& signals,
                                      const std::vector<double>& grid, double epsilon,
                                      double tol) {
    if (signals.size() < 2)
        throw std::invalid_argument("compactness: need a family of at least 2 signals");
    if (tol <= 0.0) tol = 1e-6 * problem.envelope.R_r;
    const double p = problem.p();

    std::vector<Trajectory> trajs;
    trajs.reserve(signals.size());
    for (const auto& sig : signals)
        trajs.push_back(flow_selection(problem.field, problem.dictionary, sig, mu0, grid));

    const std::size_t n = trajs.size();
    std::vector<std::vector<double>> dist(n, std::vector<double>(n, 0.0));
    for (std::size_t a = 0; a < n; ++a)
        for (std::size_t b2 = a + 1; b2 < n; ++b2) {
            double d = 0.0;
            for (std::size_t k = 0; k < grid.size(); ++k)
                d = std::max(d, wasserstein_distance(trajs[a].states[k],
                                                     trajs[b2].states[k], p));
            dist[a][b2] = dist[b2][a] = d;
        }

    // Halving refinement: keep the half of smallest pairwise diameter, chosen
    // as the best center with its nearest companions.
    std::vector<std::size_t> kept(n);
    for (std::size_t i = 0; i < n; ++i) kept[i] = i;
    while (kept.size() > 2) {
        const std::size_t half = (kept.size() + 1) / 2;
        double best_diam = std::numeric_limits<double>::infinity();
        std::vector<std::size_t> best_subset;
        for (std::size_t center : kept) {
            std::vector<std::size_t> order = kept;
            std::stable_sort(order.begin(), order.end(),
                             [&](std::size_t a, std::size_t b2) {
                                 return dist[center][a] < dist[center][b2];
                             });
            order.resize(half);
            double diam = 0.0;
            for (std::size_t a = 0; a < order.size(); ++a)
                for (std::size_t b2 = a + 1; b2 < order.size(); ++b2)
                    diam = std::max(diam, dist[order[a]][order[b2]]);
            if (diam < best_diam) {
                best_diam = diam;
                std::sort(order.begin(), order.end());
                best_subset = std::move(order);
            }
        }
        kept = std::move(best_subset);
    }

    CompactnessReport rep;
    rep.kept = kept;
    rep.diameter = dist[kept[0]][kept[1]];
    rep.sufficient = rep.diameter <= epsilon;
    if (!rep.sufficient) return rep;

    // Candidate limit: the member closest to the rest of the cluster.
    const std::size_t pick =
        dist[kept[0]][kept[1]] == 0.0 ? kept[0]
                                      : (kept[0] < kept[1] ? kept[0] : kept[1]);
    rep.cluster.trajectory = trajs[pick];
    rep.cluster.selection = signals[pick];
    rep.cluster.mismatch_curve.resize(grid.size() - 1);
    double worst = 0.0;
    for (std::size_t k = 0; k + 1 < grid.size(); ++k) {
        const double t = grid[k];
        const ParticleMeasure& mu_k = rep.cluster.trajectory.states[k];
        const std::vector<Vec> pts = eval_points(problem, mu_k);
        std::vector<Vec> w(pts.size());
        for (std::size_t i = 0; i < pts.size(); ++i)
            w[i] = vhat(problem, t, mu_k, rep.cluster.selection[k], pts[i]);
        const double d = nearest_selection(problem, t, mu_k, pts, w).second;
        rep.cluster.mismatch_curve[k] = d;
        worst = std::max(worst, d);
    }
    rep.worst_selection_distance = worst;
    rep.admissible = worst <= tol;
    return rep;
}

}  // namespace wassinc
