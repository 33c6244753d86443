#pragma once

#include <functional>
#include <string>
#include <vector>

#include "wassinc/geometry.hpp"

namespace wassinc {

// Weighted point cloud representing a compactly supported probability
// measure on R^d. Immutable by convention: operations return new values.
struct ParticleMeasure {
    int dim = 0;
    std::vector<Vec> points;
    std::vector<double> weights;

    ParticleMeasure() = default;
    ParticleMeasure(int d, std::vector<Vec> pts, std::vector<double> w);

    // Dirac mass at x, and the uniform measure over a list of atoms.
    static ParticleMeasure dirac(Vec x);
    static ParticleMeasure uniform(int d, std::vector<Vec> pts);

    std::size_t size() const { return points.size(); }

    // Throws std::invalid_argument if the invariants fail: weights
    // nonnegative and summing to 1 within 1e-12, finite coordinates, N >= 1.
    void validate() const;
};

// (sum_i w_i |x_i|^p)^(1/p). Requires p >= 1.
double momentum(const ParticleMeasure& mu, double p);

// max_i |x_i| (Euclidean norm of the farthest atom).
double support_radius(const ParticleMeasure& mu);

// sum_i w_i x_i.
Vec mean(const ParticleMeasure& mu);

// Image measure: points mapped by f, weights unchanged. When merge_atoms is
// set, atoms whose images coincide within 1e-12 are merged, summing weights.
ParticleMeasure pushforward(const ParticleMeasure& mu,
                            const std::function<Vec(const Vec&)>& f,
                            bool merge_atoms = false);

// Merge coincident atoms (pairwise distance <= tol), summing weights.
ParticleMeasure merge_close_atoms(const ParticleMeasure& mu, double tol = 1e-12);

// JSON object {dim, points, weights} round-trip.
std::string to_json(const ParticleMeasure& mu);
ParticleMeasure measure_from_json(const std::string& text);

// CSV import: one atom per row, last column is the weight.
ParticleMeasure measure_from_csv(const std::string& text);

}  // namespace wassinc
