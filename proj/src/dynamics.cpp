#include "wassinc/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "wassinc/transport.hpp"

namespace wassinc {

namespace {

double safe_ratio(double num, double denom) {
    if (denom <= 0.0) return num > 0.0 ? std::numeric_limits<double>::infinity() : 0.0;
    return num / denom;
}

}  // namespace

ControlValue FeedbackMap::operator()(const Vec& x) const {
    if (kind == Kind::Constant) return u0;
    ControlValue u(b.size());
    for (std::size_t m = 0; m < b.size(); ++m) {
        double s = b[m] + dot(a[m], x);
        s = std::min(std::max(s, lo[m]), hi[m]);
        u[m] = s;
    }
    return u;
}

double FeedbackMap::lipschitz_estimate() const {
    if (kind == Kind::Constant) return 0.0;
    double s = 0.0;
    for (const Vec& row : a) s += dot(row, row);
    return std::sqrt(s);
}

void ControlDictionary::check_lipschitz(
    const std::vector<std::pair<Vec, Vec>>& pairs) const {
    for (const FeedbackMap& omega : entries) {
        for (const auto& [x, y] : pairs) {
            const double dx = dist2(x, y);
            if (dx == 0.0) continue;
            const double du = dist2(omega(x), omega(y));
            if (du > (lipschitz_budget + 1e-9) * dx)
                throw std::invalid_argument(
                    "dictionary entry violates the sampled Lipschitz budget");
        }
    }
}

std::vector<Vec> Trajectory::characteristic(std::size_t atom) const {
    std::vector<Vec> path;
    path.reserve(states.size());
    for (const ParticleMeasure& mu : states) path.push_back(mu.points[atom]);
    return path;
}

std::vector<double> uniform_grid(double T, std::size_t steps) {
    if (steps == 0 || T <= 0.0) throw std::invalid_argument("grid needs T > 0, steps > 0");
    std::vector<double> g(steps + 1);
    for (std::size_t k = 0; k <= steps; ++k)
        g[k] = T * static_cast<double>(k) / static_cast<double>(steps);
    return g;
}

namespace {

// Per-atom velocity law active on one step.
using StepVelocity = std::function<Vec(double t, const ParticleMeasure& stage, const Vec& x)>;
// Per-atom control law active on one step.
using StepControl = std::function<ControlValue(const Vec&)>;

Trajectory flow_core(const ControlledField& field,
                     const std::function<StepVelocity(std::size_t)>& velocity_at,
                     const ParticleMeasure& mu0, const std::vector<double>& grid) {
    if (grid.size() < 2) throw std::invalid_argument("flow grid needs at least one step");
    for (std::size_t k = 1; k < grid.size(); ++k)
        if (!(grid[k] > grid[k - 1]))
            throw std::invalid_argument("flow grid must be strictly increasing");
    mu0.validate();

    Trajectory traj;
    traj.grid = grid;
    traj.states.reserve(grid.size());
    traj.states.push_back(mu0);

    std::vector<Vec> X = mu0.points;
    const std::vector<double>& w = mu0.weights;

    auto deriv = [&](double t, const std::vector<Vec>& pos, const StepVelocity& vel) {
        const ParticleMeasure stage(field.dim, pos, w);
        std::vector<Vec> dX(pos.size());
        for (std::size_t i = 0; i < pos.size(); ++i) {
            dX[i] = vel(t, stage, pos[i]);
            if (!all_finite(dX[i])) throw DivergenceError(t, i);
        }
        return dX;
    };

    for (std::size_t k = 0; k + 1 < grid.size(); ++k) {
        const double t = grid[k];
        const double h = grid[k + 1] - t;
        const StepVelocity ctrl = velocity_at(k);

        const std::vector<Vec> k1 = deriv(t, X, ctrl);
        std::vector<Vec> tmp(X.size());
        for (std::size_t i = 0; i < X.size(); ++i) tmp[i] = X[i] + (0.5 * h) * k1[i];
        const std::vector<Vec> k2 = deriv(t + 0.5 * h, tmp, ctrl);
        for (std::size_t i = 0; i < X.size(); ++i) tmp[i] = X[i] + (0.5 * h) * k2[i];
        const std::vector<Vec> k3 = deriv(t + 0.5 * h, tmp, ctrl);
        for (std::size_t i = 0; i < X.size(); ++i) tmp[i] = X[i] + h * k3[i];
        const std::vector<Vec> k4 = deriv(t + h, tmp, ctrl);

        for (std::size_t i = 0; i < X.size(); ++i) {
            for (int c = 0; c < field.dim; ++c)
                X[i][c] += h / 6.0 *
                           (k1[i][c] + 2.0 * k2[i][c] + 2.0 * k3[i][c] + k4[i][c]);
            if (!all_finite(X[i])) throw DivergenceError(grid[k + 1], i);
        }
        traj.states.emplace_back(field.dim, X, w);
    }
    return traj;
}

}  // namespace

Trajectory flow(const ControlledField& field, const std::vector<ControlValue>& per_step_u,
                const ParticleMeasure& mu0, const std::vector<double>& grid) {
    if (per_step_u.size() != grid.size() - 1)
        throw std::invalid_argument("flow: one control value per step required");
    Trajectory traj = flow_core(
        field,
        [&](std::size_t k) {
            const ControlValue& u = per_step_u[k];
            return StepVelocity([&field, u](double t, const ParticleMeasure& stage,
                                            const Vec& x) {
                return field.eval(t, stage, u, x);
            });
        },
        mu0, grid);
    traj.selection.assign(per_step_u.size(), -1);
    traj.open_loop_controls = per_step_u;
    return traj;
}

Trajectory flow_selection(const ControlledField& field, const ControlDictionary& dict,
                          const std::vector<int>& per_step_entry,
                          const ParticleMeasure& mu0, const std::vector<double>& grid) {
    if (per_step_entry.size() != grid.size() - 1)
        throw std::invalid_argument("flow_selection: one entry per step required");
    for (int j : per_step_entry)
        if (j < 0 || static_cast<std::size_t>(j) >= dict.size())
            throw std::invalid_argument("flow_selection: entry index out of range");
    Trajectory traj = flow_core(
        field,
        [&](std::size_t k) {
            const FeedbackMap& omega = dict.entries[per_step_entry[k]];
            return StepVelocity([&field, &omega](double t, const ParticleMeasure& stage,
                                                 const Vec& x) {
                return field.eval(t, stage, omega(x), x);
            });
        },
        mu0, grid);
    traj.selection = per_step_entry;
    return traj;
}

Trajectory flow_relaxed(const ControlledField& field, const ControlDictionary& dict,
                        const std::vector<Vec>& per_step_weights,
                        const ParticleMeasure& mu0, const std::vector<double>& grid) {
    if (per_step_weights.size() != grid.size() - 1)
        throw std::invalid_argument("flow_relaxed: one weight vector per step required");
    for (const Vec& lambda : per_step_weights) {
        if (lambda.size() != dict.size())
            throw std::invalid_argument("flow_relaxed: weight vector size mismatch");
        double total = 0.0;
        for (double l : lambda) {
            if (l < -1e-12) throw std::invalid_argument("flow_relaxed: negative weight");
            total += l;
        }
        if (std::abs(total - 1.0) > 1e-9)
            throw std::invalid_argument("flow_relaxed: weights must sum to 1");
    }
    Trajectory traj = flow_core(
        field,
        [&](std::size_t k) {
            const Vec& lambda = per_step_weights[k];
            return StepVelocity([&field, &dict, lambda](double t,
                                                        const ParticleMeasure& stage,
                                                        const Vec& x) {
                Vec v(field.dim, 0.0);
                for (std::size_t j = 0; j < dict.size(); ++j) {
                    if (lambda[j] == 0.0) continue;
                    v += lambda[j] * field.eval(t, stage, dict.entries[j](x), x);
                }
                return v;
            });
        },
        mu0, grid);
    traj.selection.assign(per_step_weights.size(), -1);
    return traj;
}

HypothesisReport check_C1_C2(const ControlledField& field,
                             const std::vector<HypothesisSample>& samples) {
    HypothesisReport rep;
    for (const HypothesisSample& s : samples) {
        const Vec vx = field.eval(s.t, s.mu, s.u, s.x);
        rep.worst_sublinearity =
            std::max(rep.worst_sublinearity,
                     safe_ratio(norm2(vx), field.bounds.m.at(s.t) * (1.0 + norm2(s.x))));
        if (!s.y.empty() && s.y != s.x) {
            const Vec vy = field.eval(s.t, s.mu, s.u, s.y);
            rep.worst_lipschitz = std::max(
                rep.worst_lipschitz,
                safe_ratio(dist2(vx, vy), field.bounds.l_K.at(s.t) * dist2(s.x, s.y)));
        }
    }
    rep.pass = rep.worst_sublinearity <= 1.0 + 1e-6 && rep.worst_lipschitz <= 1.0 + 1e-6;
    return rep;
}

EvalLattice EvalLattice::ball(int dim, double radius, double spacing,
                              std::size_t max_points) {
    EvalLattice lat;
    lat.radius = radius;
    if (radius <= 0.0 || spacing <= 0.0) {
        lat.spacing = spacing;
        lat.points.push_back(Vec(dim, 0.0));
        return lat;
    }
    for (;;) {
        const std::size_t per_axis =
            static_cast<std::size_t>(std::floor(2.0 * radius / spacing)) + 1;
        double count = 1.0;
        for (int c = 0; c < dim; ++c) count *= static_cast<double>(per_axis);
        if (count <= static_cast<double>(max_points)) break;
        spacing *= std::pow(count / static_cast<double>(max_points), 1.0 / dim);
    }
    lat.spacing = spacing;
    const int per_axis = static_cast<int>(std::floor(2.0 * radius / spacing)) + 1;
    std::vector<int> idx(dim, 0);
    for (;;) {
        Vec x(dim);
        for (int c = 0; c < dim; ++c) x[c] = -radius + idx[c] * spacing;
        if (norm2(x) <= radius + 1e-12) lat.points.push_back(std::move(x));
        int c = 0;
        while (c < dim && ++idx[c] >= per_axis) idx[c++] = 0;
        if (c == dim) break;
    }
    if (lat.points.empty()) lat.points.push_back(Vec(dim, 0.0));
    return lat;
}

namespace {

// sup over the lattice plus both measures' atoms of |vhat_mu - vhat_nu|,
// where vhat(t, mu, omega)(x) = v(t, mu, omega(x))(x).
double sup_field_gap(const ControlledField& field, double t, const ParticleMeasure& mu,
                     const FeedbackMap& om_mu, const ParticleMeasure& nu,
                     const FeedbackMap& om_nu, const EvalLattice& lattice) {
    double sup = 0.0;
    auto visit = [&](const Vec& x) {
        const Vec a = field.eval(t, mu, om_mu(x), x);
        const Vec b = field.eval(t, nu, om_nu(x), x);
        sup = std::max(sup, dist2(a, b));
    };
    for (const Vec& x : lattice.points) visit(x);
    for (const Vec& x : mu.points) visit(x);
    for (const Vec& x : nu.points) visit(x);
    return sup;
}

}  // namespace

HypothesisReport check_DI(const ControlledField& field, const ControlDictionary& dict,
                          const std::vector<HypothesisSample>& samples,
                          const std::vector<MeasurePairSample>& pairs,
                          const EvalLattice& lattice) {
    HypothesisReport rep;
    for (const HypothesisSample& s : samples) {
        const Vec vx = field.eval(s.t, s.mu, s.u, s.x);
        const double denom =
            field.bounds.m.at(s.t) * (1.0 + norm2(s.x) + momentum(s.mu, 1.0));
        rep.worst_sublinearity = std::max(rep.worst_sublinearity, safe_ratio(norm2(vx), denom));
        if (!s.y.empty() && s.y != s.x) {
            const Vec vy = field.eval(s.t, s.mu, s.u, s.y);
            rep.worst_lipschitz = std::max(
                rep.worst_lipschitz,
                safe_ratio(dist2(vx, vy), field.bounds.l_K.at(s.t) * dist2(s.x, s.y)));
        }
    }
    // (DI)-(iv): every admissible velocity at mu has a companion at nu within
    // L_K(t) W_p(mu, nu) in the lattice sup-norm.
    for (const MeasurePairSample& s : pairs) {
        const double wp = wasserstein_distance(s.mu, s.nu, field.bounds.p);
        for (std::size_t j = 0; j < dict.size(); ++j) {
            double best = std::numeric_limits<double>::infinity();
            for (std::size_t jj = 0; jj < dict.size(); ++jj)
                best = std::min(best,
                                sup_field_gap(field, s.t, s.mu, dict.entries[j], s.nu,
                                              dict.entries[jj], lattice));
            rep.worst_setvalued =
                std::max(rep.worst_setvalued, best - field.bounds.L_K.at(s.t) * wp);
        }
    }
    rep.pass = rep.worst_sublinearity <= 1.0 + 1e-6 &&
               rep.worst_lipschitz <= 1.0 + 1e-6 && rep.worst_setvalued <= 1e-6;
    return rep;
}

double weak_residual(const Trajectory& traj, const ControlledField& field,
                     const ControlDictionary& dict,
                     const std::vector<TestFunction>& testfns) {
    const std::size_t M = traj.steps();
    auto control_at = [&](std::size_t step, const Vec& x) -> ControlValue {
        if (!traj.selection.empty() && traj.selection[step] >= 0)
            return dict.entries[traj.selection[step]](x);
        if (!traj.open_loop_controls.empty()) return traj.open_loop_controls[step];
        return ControlValue{};
    };
    double worst = 0.0;
    for (const TestFunction& fn : testfns) {
        std::vector<double> integrand(traj.grid.size());
        for (std::size_t k = 0; k < traj.grid.size(); ++k) {
            const double t = traj.grid[k];
            const std::size_t step = std::min(k, M - 1);
            const ParticleMeasure& mu = traj.states[k];
            double s = 0.0;
            for (std::size_t i = 0; i < mu.size(); ++i) {
                const Vec& x = mu.points[i];
                const Vec v = field.eval(t, mu, control_at(step, x), x);
                s += mu.weights[i] * (fn.dphi_dt(t, x) + dot(fn.grad(t, x), v));
            }
            integrand[k] = s;
        }
        double total = 0.0;
        for (std::size_t k = 0; k + 1 < traj.grid.size(); ++k)
            total += 0.5 * (integrand[k] + integrand[k + 1]) *
                     (traj.grid[k + 1] - traj.grid[k]);
        worst = std::max(worst, std::abs(total));
    }
    return worst;
}

ControlledField make_field(const std::string& name, int dim,
                           const std::vector<double>& params,
                           const HypothesisBounds& bounds) {
    ControlledField f;
    f.dim = dim;
    f.bounds = bounds;
    auto param = [&](std::size_t i, double fallback) {
        return i < params.size() ? params[i] : fallback;
    };

    if (name == "zero") {
        f.eval = [dim](double, const ParticleMeasure&, const ControlValue&, const Vec&) {
            return Vec(dim, 0.0);
        };
    } else if (name == "constant-drift") {
        // v = u, the control value itself (scalar controls broadcast in d = 1).
        f.eval = [dim](double, const ParticleMeasure&, const ControlValue& u, const Vec&) {
            Vec v(dim, 0.0);
            for (int c = 0; c < dim && c < static_cast<int>(u.size()); ++c) v[c] = u[c];
            return v;
        };
    } else if (name == "control-translation") {
        // v = u[0] * dir, dir from params (defaults to e1).
        Vec dir(dim, 0.0);
        dir[0] = 1.0;
        if (params.size() >= static_cast<std::size_t>(dim))
            for (int c = 0; c < dim; ++c) dir[c] = params[c];
        f.eval = [dir](double, const ParticleMeasure&, const ControlValue& u, const Vec&) {
            return (u.empty() ? 0.0 : u[0]) * dir;
        };
    } else if (name == "linear-contraction") {
        const double lambda = param(0, 1.0);
        f.eval = [lambda](double, const ParticleMeasure&, const ControlValue&,
                          const Vec& x) { return -lambda * x; };
    } else if (name == "mean-attraction") {
        const double gain = param(0, 1.0);
        f.eval = [gain](double, const ParticleMeasure& mu, const ControlValue&,
                        const Vec& x) { return -gain * (x - mean(mu)); };
    } else if (name == "kuramoto") {
        const double coupling = param(0, 1.0);
        f.eval = [coupling, dim](double, const ParticleMeasure& mu, const ControlValue&,
                                 const Vec& x) {
            Vec v(dim, 0.0);
            for (std::size_t j = 0; j < mu.size(); ++j)
                for (int c = 0; c < dim; ++c)
                    v[c] += coupling * mu.weights[j] * std::sin(mu.points[j][c] - x[c]);
            return v;
        };
    } else if (name == "affine") {
        // v = A x + b + g u; params = [A row-major, b, g].
        const std::size_t d = static_cast<std::size_t>(dim);
        std::vector<Vec> A(d, Vec(d, 0.0));
        Vec b(d, 0.0);
        double g = 0.0;
        for (std::size_t r = 0; r < d; ++r)
            for (std::size_t c = 0; c < d; ++c) A[r][c] = param(r * d + c, 0.0);
        for (std::size_t r = 0; r < d; ++r) b[r] = param(d * d + r, 0.0);
        g = param(d * d + d, 0.0);
        f.eval = [A, b, g, dim](double, const ParticleMeasure&, const ControlValue& u,
                                const Vec& x) {
            Vec v(dim);
            for (int r = 0; r < dim; ++r) {
                v[r] = b[r] + dot(A[r], x);
                if (r < static_cast<int>(u.size())) v[r] += g * u[r];
            }
            return v;
        };
    } else if (name == "interaction-poly") {
        // v(x) = sum_j w_j (c1 (y_j - x) + c3 |y_j - x|^2 (y_j - x)).
        const double c1 = param(0, 1.0);
        const double c3 = param(1, 0.0);
        f.eval = [c1, c3, dim](double, const ParticleMeasure& mu, const ControlValue&,
                               const Vec& x) {
            Vec v(dim, 0.0);
            for (std::size_t j = 0; j < mu.size(); ++j) {
                const Vec diff = mu.points[j] - x;
                const double scale = c1 + c3 * dot(diff, diff);
                for (int c = 0; c < dim; ++c) v[c] += mu.weights[j] * scale * diff[c];
            }
            return v;
        };
    } else {
        throw std::invalid_argument("unknown field name: " + name);
    }
    return f;
}

}  // namespace wassinc
