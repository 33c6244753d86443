#pragma once

#include <string>
#include <utility>
#include <vector>

namespace wassinc {

// Piecewise-constant nonnegative time envelope on [0, T]. Breakpoints are
// sorted with breaks.front() == 0; values[i] holds on [breaks[i], breaks[i+1]).
// L1 norms and partial integrals are exact sums.
struct PiecewiseConstant {
    std::vector<double> breaks;
    std::vector<double> values;

    static PiecewiseConstant constant(double v, double horizon);

    double horizon() const { return breaks.back(); }
    double at(double t) const;
    double integral(double a, double b) const;
    double l1() const { return integral(0.0, horizon()); }

    void validate() const;
};

// Sampled time series on a simulation grid, with trapezoid-rule integration.
struct TimeSeries {
    std::vector<double> t;
    std::vector<double> v;

    double at_index(std::size_t k) const { return v[k]; }
    // Trapezoid integral of v over [t.front(), upto]; upto must be a grid node.
    double trapezoid(double upto) const;
    double trapezoid() const { return trapezoid(t.back()); }
};

// Declared hypothesis data: initial support radius, the envelopes m, l_K, L_K
// on [0, T], and the Wasserstein order p.
struct HypothesisBounds {
    double r = 0.0;
    PiecewiseConstant m;
    PiecewiseConstant l_K;
    PiecewiseConstant L_K;
    double T = 0.0;
    double p = 1.0;

    void validate() const;
};

// Bound-vs-actual comparison of two curves on a common grid.
struct Certificate {
    std::string name;
    std::vector<double> t_grid;
    std::vector<double> lhs;
    std::vector<double> rhs;
    double tolerance = 0.0;
    double margin = 0.0;  // min over the grid of rhs - lhs
    bool pass = false;

    std::string to_json() const;
    std::string csv_row() const;
};

// (C_p, C_p') = (2^((p-1)/p), 2^(p-1)/p). Requires p >= 1.
std::pair<double, double> constants(double p);

struct CauchyLipschitzEnvelope {
    double R_r = 0.0;           // (r + |m|_1) exp(|m|_1)
    PiecewiseConstant m_r;      // (1 + R_r) m(t)
};
CauchyLipschitzEnvelope cauchy_lipschitz_envelope(const HypothesisBounds& bounds);

// C_p (M_p0 + int_0^t m) exp(C_p' |m|_{L1[0,t]}^p).
double momentum_bound(const HypothesisBounds& bounds, double Mp0, double t);

// Generalized variant: the growth integrand becomes m(s)(1 + M(s)) for a
// sampled momentum curve M.
double momentum_bound_generalized(const HypothesisBounds& bounds, double Mp0,
                                  const TimeSeries& M, double t);

// C_p (W0 + int_0^t dev) exp(C_p' |l_K|_{L1[0,t]}^p), dev integrated by the
// trapezoid rule on its grid.
double gronwall_bound(const HypothesisBounds& bounds, double W0,
                      const TimeSeries& dev, double t);

struct FilippovEnvelopes {
    double chi_p = 0.0;
    double C_Kp = 0.0;
};
FilippovEnvelopes filippov_envelopes(const HypothesisBounds& bounds, double W0,
                                     const TimeSeries& eta, double t);

// Explicit unrolled constant (alpha + f0_sup) exp(alpha * m_norm1) dominating
// any family of curves satisfying the chained integral inequality.
double chained_bound(double f0_sup, double alpha, double m_norm1);

Certificate certify(const std::string& name, const std::vector<double>& t_grid,
                    const std::vector<double>& lhs, const std::vector<double>& rhs,
                    double tol);

}  // namespace wassinc
