#include "wassinc/measures.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace wassinc {

ParticleMeasure::ParticleMeasure(int d, std::vector<Vec> pts, std::vector<double> w)
    : dim(d), points(std::move(pts)), weights(std::move(w)) {
    validate();
}

ParticleMeasure ParticleMeasure::dirac(Vec x) {
    const int d = static_cast<int>(x.size());
    return ParticleMeasure(d, {std::move(x)}, {1.0});
}

ParticleMeasure ParticleMeasure::uniform(int d, std::vector<Vec> pts) {
    const std::size_t n = pts.size();
    if (n == 0) throw std::invalid_argument("uniform measure needs at least one atom");
    std::vector<double> w(n, 1.0 / static_cast<double>(n));
    return ParticleMeasure(d, std::move(pts), std::move(w));
}

void ParticleMeasure::validate() const {
    if (dim < 1) throw std::invalid_argument("measure dimension must be positive");
    if (points.empty()) throw std::invalid_argument("measure needs at least one atom");
    if (points.size() != weights.size())
        throw std::invalid_argument("points/weights size mismatch");
    double total = 0.0;
    for (std::size_t i = 0; i < points.size(); ++i) {
        if (static_cast<int>(points[i].size()) != dim)
            throw std::invalid_argument("atom dimension mismatch");
        if (!all_finite(points[i]))
            throw std::invalid_argument("non-finite atom coordinate");
        if (!(weights[i] >= 0.0))
            throw std::invalid_argument("negative or non-finite weight");
        total += weights[i];
    }
    if (std::abs(total - 1.0) > 1e-12)
        throw std::invalid_argument("weights must sum to 1 within 1e-12");
}

double momentum(const ParticleMeasure& mu, double p) {
    if (p < 1.0) throw std::domain_error("momentum order p must be >= 1");
    double s = 0.0;
    for (std::size_t i = 0; i < mu.size(); ++i)
        s += mu.weights[i] * std::pow(norm2(mu.points[i]), p);
    return std::pow(s, 1.0 / p);
}

double support_radius(const ParticleMeasure& mu) {
    double r = 0.0;
    for (const Vec& x : mu.points) r = std::max(r, norm2(x));
    return r;
}

Vec mean(const ParticleMeasure& mu) {
    Vec m(mu.dim, 0.0);
    for (std::size_t i = 0; i < mu.size(); ++i)
        for (int k = 0; k < mu.dim; ++k) m[k] += mu.weights[i] * mu.points[i][k];
    return m;
}

ParticleMeasure merge_close_atoms(const ParticleMeasure& mu, double tol) {
    std::vector<Vec> pts;
    std::vector<double> w;
    for (std::size_t i = 0; i < mu.size(); ++i) {
        bool merged = false;
        for (std::size_t j = 0; j < pts.size(); ++j) {
            if (dist2(pts[j], mu.points[i]) <= tol) {
                w[j] += mu.weights[i];
                merged = true;
                break;
            }
        }
        if (!merged) {
            pts.push_back(mu.points[i]);
            w.push_back(mu.weights[i]);
        }
    }
    return ParticleMeasure(mu.dim, std::move(pts), std::move(w));
}

ParticleMeasure pushforward(const ParticleMeasure& mu,
                            const std::function<Vec(const Vec&)>& f,
                            bool merge_atoms) {
    std::vector<Vec> pts;
    pts.reserve(mu.size());
    for (const Vec& x : mu.points) {
        Vec y = f(x);
        if (!all_finite(y))
            throw std::domain_error("pushforward map produced a non-finite value");
        pts.push_back(std::move(y));
    }
    const int dim = static_cast<int>(pts.front().size());
    ParticleMeasure out(dim, std::move(pts), mu.weights);
    return merge_atoms ? merge_close_atoms(out) : out;
}

std::string to_json(const ParticleMeasure& mu) {
    nlohmann::json j;
    j["dim"] = mu.dim;
    j["points"] = mu.points;
    j["weights"] = mu.weights;
    return j.dump();
}

ParticleMeasure measure_from_json(const std::string& text) {
    const auto j = nlohmann::json::parse(text);
    return ParticleMeasure(j.at("dim").get<int>(),
                           j.at("points").get<std::vector<Vec>>(),
                           j.at("weights").get<std::vector<double>>());
}

ParticleMeasure measure_from_csv(const std::string& text) {
    std::vector<Vec> pts;
    std::vector<double> w;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<double> row;
        std::istringstream ls(line);
        std::string cell;
        while (std::getline(ls, cell, ',')) row.push_back(std::stod(cell));
        if (row.size() < 2) throw std::invalid_argument("csv row needs coordinates and a weight");
        w.push_back(row.back());
        row.pop_back();
        pts.push_back(std::move(row));
    }
    if (pts.empty()) throw std::invalid_argument("empty csv measure");
    const int dim = static_cast<int>(pts.front().size());
    return ParticleMeasure(dim, std::move(pts), std::move(w));
}

}  // namespace wassinc
