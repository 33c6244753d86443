#include "wassinc/estimates.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace wassinc {

PiecewiseConstant PiecewiseConstant::constant(double v, double horizon) {
    PiecewiseConstant f;
    f.breaks = {0.0, horizon};
    f.values = {v};
    return f;
}

void PiecewiseConstant::validate() const {
    if (breaks.size() < 2 || values.size() + 1 != breaks.size())
        throw std::invalid_argument("envelope breakpoint/value count mismatch");
    if (breaks.front() != 0.0)
        throw std::invalid_argument("envelope must start at t = 0");
    for (std::size_t i = 1; i < breaks.size(); ++i)
        if (!(breaks[i] > breaks[i - 1]))
            throw std::invalid_argument("envelope breakpoints must be strictly increasing");
    for (double v : values)
        if (!(v >= 0.0)) throw std::invalid_argument("envelope values must be >= 0");
}

double PiecewiseConstant::at(double t) const {
    if (t <= breaks.front()) return values.front();
    if (t >= breaks.back()) return values.back();
    const auto it = std::upper_bound(breaks.begin(), breaks.end(), t);
    return values[static_cast<std::size_t>(it - breaks.begin()) - 1];
}

double PiecewiseConstant::integral(double a, double b) const {
    a = std::max(a, breaks.front());
    b = std::min(b, breaks.back());
    if (b <= a) return 0.0;
    double s = 0.0;
    for (std::size_t i = 0; i + 1 < breaks.size(); ++i) {
        const double lo = std::max(a, breaks[i]);
        const double hi = std::min(b, breaks[i + 1]);
        if (hi > lo) s += values[i] * (hi - lo);
    }
    return s;
}

double TimeSeries::trapezoid(double upto) const {
    if (t.size() != v.size() || t.empty())
        throw std::invalid_argument("time series grid/value mismatch");
    double s = 0.0;
    for (std::size_t k = 0; k + 1 < t.size(); ++k) {
        if (t[k + 1] > upto + 1e-12) break;
        s += 0.5 * (v[k] + v[k + 1]) * (t[k + 1] - t[k]);
    }
    return s;
}

void HypothesisBounds::validate() const {
    if (!(r > 0.0)) throw std::invalid_argument("initial support radius must be > 0");
    if (!(T > 0.0)) throw std::invalid_argument("horizon must be > 0");
    if (p < 1.0) throw std::invalid_argument("order p must be >= 1");
    m.validate();
    l_K.validate();
    L_K.validate();
}

std::pair<double, double> constants(double p) {
    if (p < 1.0) throw std::domain_error("constants: p must be >= 1");
    return {std::pow(2.0, (p - 1.0) / p), std::pow(2.0, p - 1.0) / p};
}

CauchyLipschitzEnvelope cauchy_lipschitz_envelope(const HypothesisBounds& bounds) {
    const double m1 = bounds.m.l1();
    CauchyLipschitzEnvelope env;
    env.R_r = (bounds.r + m1) * std::exp(m1);
    env.m_r = bounds.m;
    for (double& v : env.m_r.values) v *= (1.0 + env.R_r);
    return env;
}

double momentum_bound(const HypothesisBounds& bounds, double Mp0, double t) {
    const auto [Cp, Cpp] = constants(bounds.p);
    const double m_int = bounds.m.integral(0.0, t);
    return Cp * (Mp0 + m_int) * std::exp(Cpp * std::pow(m_int, bounds.p));
}

double momentum_bound_generalized(const HypothesisBounds& bounds, double Mp0,
                                  const TimeSeries& M, double t) {
    const auto [Cp, Cpp] = constants(bounds.p);
    TimeSeries growth;
    growth.t = M.t;
    growth.v.resize(M.v.size());
    for (std::size_t k = 0; k < M.v.size(); ++k)
        growth.v[k] = bounds.m.at(M.t[k]) * (1.0 + M.v[k]);
    const double m_int = bounds.m.integral(0.0, t);
    return Cp * (Mp0 + growth.trapezoid(t)) * std::exp(Cpp * std::pow(m_int, bounds.p));
}

double gronwall_bound(const HypothesisBounds& bounds, double W0, const TimeSeries& dev,
                      double t) {
    const auto [Cp, Cpp] = constants(bounds.p);
    const double l_int = bounds.l_K.integral(0.0, t);
    return Cp * (W0 + dev.trapezoid(t)) * std::exp(Cpp * std::pow(l_int, bounds.p));
}

FilippovEnvelopes filippov_envelopes(const HypothesisBounds& bounds, double W0,
                                     const TimeSeries& eta, double t) {
    const auto [Cp, Cpp] = constants(bounds.p);
    const double l_int = bounds.l_K.integral(0.0, t);
    const double growth = std::exp(Cpp * std::pow(l_int, bounds.p));
    FilippovEnvelopes env;
    env.chi_p = Cp * (W0 + eta.trapezoid(t)) * growth;
    env.C_Kp = Cp * bounds.L_K.integral(0.0, t) * growth;
    return env;
}

double chained_bound(double f0_sup, double alpha, double m_norm1) {
    if (f0_sup < 0.0 || alpha < 0.0 || m_norm1 < 0.0)
        throw std::domain_error("chained_bound arguments must be >= 0");
    return (alpha + f0_sup) * std::exp(alpha * m_norm1);
}

Certificate certify(const std::string& name, const std::vector<double>& t_grid,
                    const std::vector<double>& lhs, const std::vector<double>& rhs,
                    double tol) {
    if (t_grid.size() != lhs.size() || t_grid.size() != rhs.size())
        throw std::invalid_argument("certify: curves must share the grid");
    Certificate c;
    c.name = name;
    c.t_grid = t_grid;
    c.lhs = lhs;
    c.rhs = rhs;
    c.tolerance = tol;
    c.margin = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < t_grid.size(); ++k)
        c.margin = std::min(c.margin, rhs[k] - lhs[k]);
    c.pass = c.margin >= -tol;
    return c;
}

std::string Certificate::to_json() const {
    nlohmann::json j;
    j["name"] = name;
    j["t_grid"] = t_grid;
    j["lhs"] = lhs;
    j["rhs"] = rhs;
    j["tolerance"] = tolerance;
    j["margin"] = margin;
    j["pass"] = pass;
    return j.dump();
}

std::string Certificate::csv_row() const {
    std::ostringstream os;
    os.precision(17);
    os << name << ',' << margin << ',' << tolerance << ',' << (pass ? "pass" : "fail");
    return os.str();
}

}  // namespace wassinc
