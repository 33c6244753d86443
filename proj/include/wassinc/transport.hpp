#pragma once

#include <functional>
#include <string>
#include <vector>

#include "wassinc/measures.hpp"

namespace wassinc {

// Discrete coupling between two particle measures. Entries hold only the
// nonzero masses of the M x N plan matrix.
struct TransportPlan {
    struct Entry {
        int row = 0;
        int col = 0;
        double mass = 0.0;
    };
    int rows = 0;
    int cols = 0;
    std::vector<Entry> entries;
    double cost = 0.0;  // sum gamma_ij |x_i - y_j|^p, before the 1/p root

    // Marginal checks against the coupled measures (tolerance 1e-9).
    void validate(const ParticleMeasure& source, const ParticleMeasure& target) const;

    std::string to_json() const;
};

struct WassersteinResult {
    double distance = 0.0;
    TransportPlan plan;
};

// Exact W_p distance and an optimal plan. Dispatch: sorted-quantile coupling
// for d = 1, unit-supply assignment for equal-size uniform measures, and
// exact min-cost flow with integer-scaled weights otherwise.
WassersteinResult wasserstein(const ParticleMeasure& mu, const ParticleMeasure& nu,
                              double p);

inline double wasserstein_distance(const ParticleMeasure& mu, const ParticleMeasure& nu,
                                   double p) {
    return wasserstein(mu, nu, p).distance;
}

// Permutation-enumeration oracle for uniform measures with equal atom counts.
// Refuses N > 8.
double brute_force_wasserstein(const ParticleMeasure& mu, const ParticleMeasure& nu,
                               double p);

// W_1(mu, nu) - integral of phi d(mu - nu) for a 1-Lipschitz test map phi.
// The Lipschitz property is checked numerically on all support atom pairs;
// violations are rejected with std::invalid_argument. The result is >= -1e-9
// by Kantorovich-Rubinstein duality.
double kantorovich_gap(const ParticleMeasure& mu, const ParticleMeasure& nu,
                       const std::function<double(const Vec&)>& phi);

}  // namespace wassinc
