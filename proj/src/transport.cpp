#include "wassinc/transport.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <queue>
#include <stdexcept>

#include "json.hpp"

namespace wassinc {

namespace {

double pair_cost(const Vec& x, const Vec& y, double p) {
    return std::pow(dist2(x, y), p);
}

bool is_uniform(const ParticleMeasure& mu) {
    const double w = 1.0 / static_cast<double>(mu.size());
    for (double wi : mu.weights)
        if (std::abs(wi - w) > 1e-12) return false;
    return true;
}

// Sorted-quantile coupling, optimal in one dimension for the convex cost
// |x - y|^p with p >= 1.
WassersteinResult wasserstein_1d(const ParticleMeasure& mu, const ParticleMeasure& nu,
                                 double p) {
    std::vector<int> si(mu.size()), ti(nu.size());
    std::iota(si.begin(), si.end(), 0);
    std::iota(ti.begin(), ti.end(), 0);
    auto by_coord = [](const ParticleMeasure& m) {
        return [&m](int a, int b) {
            if (m.points[a][0] != m.points[b][0]) return m.points[a][0] < m.points[b][0];
            return a < b;  // lexicographic tie-break for reproducible plans
        };
    };
    std::sort(si.begin(), si.end(), by_coord(mu));
    std::sort(ti.begin(), ti.end(), by_coord(nu));

    TransportPlan plan;
    plan.rows = static_cast<int>(mu.size());
    plan.cols = static_cast<int>(nu.size());
    std::size_t a = 0, b = 0;
    double ra = mu.weights[si[0]], rb = nu.weights[ti[0]];
    while (a < si.size() && b < ti.size()) {
        const double m = std::min(ra, rb);
        if (m > 0.0) {
            plan.entries.push_back({si[a], ti[b], m});
            plan.cost += m * pair_cost(mu.points[si[a]], nu.points[ti[b]], p);
        }
        ra -= m;
        rb -= m;
        if (ra <= rb) {
            ++a;
            if (a < si.size()) ra = mu.weights[si[a]];
        }
        if (rb <= 0.0) {
            ++b;
            if (b < ti.size()) rb = nu.weights[ti[b]];
        }
    }
    return {std::pow(plan.cost, 1.0 / p), std::move(plan)};
}

// Successive shortest paths with Dijkstra potentials on the complete
// bipartite transportation graph. Supplies/demands are nonnegative integers;
// each augmentation exhausts a source or a sink, so at most M + N rounds run.
TransportPlan min_cost_transport(const ParticleMeasure& mu, const ParticleMeasure& nu,
                                 double p, std::vector<std::int64_t> supply,
                                 std::vector<std::int64_t> demand) {
    const int M = static_cast<int>(mu.size());
    const int N = static_cast<int>(nu.size());
    std::vector<std::vector<double>> cost(M, std::vector<double>(N));
    for (int i = 0; i < M; ++i)
        for (int j = 0; j < N; ++j) cost[i][j] = pair_cost(mu.points[i], nu.points[j], p);

    std::vector<std::vector<std::int64_t>> flow(M, std::vector<std::int64_t>(N, 0));
    std::vector<double> pot_src(M, 0.0), pot_snk(N, 0.0);
    const double inf = std::numeric_limits<double>::infinity();

    std::int64_t remaining = std::accumulate(supply.begin(), supply.end(), std::int64_t{0});
    while (remaining > 0) {
        // Multi-source Dijkstra over reduced costs. Node ids: sources [0, M),
        // sinks [M, M + N).
        std::vector<double> dist(M + N, inf);
        std::vector<int> prev(M + N, -1);
        using Item = std::pair<double, int>;
        std::priority_queue<Item, std::vector<Item>, std::greater<Item>> pq;
        for (int i = 0; i < M; ++i)
            if (supply[i] > 0) {
                dist[i] = 0.0;
                pq.push({0.0, i});
            }
        while (!pq.empty()) {
            auto [d, u] = pq.top();
            pq.pop();
            if (d > dist[u]) continue;
            if (u < M) {
                for (int j = 0; j < N; ++j) {
                    const double rc = cost[u][j] - pot_src[u] + pot_snk[j];
                    if (dist[u] + rc < dist[M + j] - 1e-15) {
                        dist[M + j] = dist[u] + rc;
                        prev[M + j] = u;
                        pq.push({dist[M + j], M + j});
                    }
                }
            } else {
                const int j = u - M;
                for (int i = 0; i < M; ++i) {
                    if (flow[i][j] <= 0) continue;
                    const double rc = -cost[i][j] + pot_src[i] - pot_snk[j];
                    if (dist[u] + rc < dist[i] - 1e-15) {
                        dist[i] = dist[u] + rc;
                        prev[i] = u;
                        pq.push({dist[i], i});
                    }
                }
            }
        }

        // Cheapest reachable sink with unmet demand; ties by index.
        int best = -1;
        for (int j = 0; j < N; ++j)
            if (demand[j] > 0 && dist[M + j] < inf &&
                (best < 0 || dist[M + j] < dist[M + best] - 1e-15))
                best = j;
        if (best < 0)
            throw std::runtime_error("internal error: min-cost flow ran out of paths");

        // Johnson-style potential update, capped at the target distance so
        // unreachable nodes keep nonnegative reduced costs.
        const double dcap = dist[M + best];
        for (int i = 0; i < M; ++i) pot_src[i] -= std::min(dist[i], dcap);
        for (int j = 0; j < N; ++j) pot_snk[j] -= std::min(dist[M + j], dcap);

        // Bottleneck along the shortest path.
        std::int64_t push = demand[best];
        for (int u = M + best; prev[u] >= 0; u = prev[u]) {
            const int v = prev[u];
            if (v < M) {
                if (prev[v] < 0) push = std::min(push, supply[v]);
            } else {
                push = std::min(push, flow[u][v - M]);
            }
        }
        for (int u = M + best; prev[u] >= 0; u = prev[u]) {
            const int v = prev[u];
            if (v < M)
                flow[v][u - M] += push;
            else
                flow[u][v - M] -= push;
        }
        int src = M + best;
        while (prev[src] >= 0) src = prev[src];
        supply[src] -= push;
        demand[best] -= push;
        remaining -= push;
    }

    TransportPlan plan;
    plan.rows = M;
    plan.cols = N;
    for (int i = 0; i < M; ++i)
        for (int j = 0; j < N; ++j)
            if (flow[i][j] > 0)
                plan.entries.push_back({i, j, static_cast<double>(flow[i][j])});
    for (const auto& e : plan.entries) plan.cost += e.mass * cost[e.row][e.col];
    return plan;
}

// Scale real weights to integers on a 2^40 grid, repairing the rounding
// residue on the heaviest atom so supplies and demands balance exactly.
std::vector<std::int64_t> integerize(const std::vector<double>& w) {
    const double S = static_cast<double>(std::int64_t{1} << 40);
    std::vector<std::int64_t> n(w.size());
    std::int64_t total = 0;
    for (std::size_t i = 0; i < w.size(); ++i) {
        n[i] = static_cast<std::int64_t>(std::llround(w[i] * S));
        total += n[i];
    }
    const std::int64_t target = std::int64_t{1} << 40;
    const std::size_t heaviest =
        static_cast<std::size_t>(std::max_element(w.begin(), w.end()) - w.begin());
    n[heaviest] += target - total;
    if (n[heaviest] < 0) throw std::runtime_error("weight integerization failed");
    return n;
}

}  // namespace

void TransportPlan::validate(const ParticleMeasure& source,
                             const ParticleMeasure& target) const {
    std::vector<double> row(rows, 0.0), col(cols, 0.0);
    for (const auto& e : entries) {
        if (e.mass < 0.0) throw std::invalid_argument("negative plan entry");
        row[e.row] += e.mass;
        col[e.col] += e.mass;
    }
    for (int i = 0; i < rows; ++i)
        if (std::abs(row[i] - source.weights[i]) > 1e-9)
            throw std::invalid_argument("plan row marginal mismatch");
    for (int j = 0; j < cols; ++j)
        if (std::abs(col[j] - target.weights[j]) > 1e-9)
            throw std::invalid_argument("plan column marginal mismatch");
}

std::string TransportPlan::to_json() const {
    nlohmann::json j;
    j["rows"] = rows;
    j["cols"] = cols;
    auto& arr = j["entries"] = nlohmann::json::array();
    for (const auto& e : entries) arr.push_back({e.row, e.col, e.mass});
    return j.dump();
}

WassersteinResult wasserstein(const ParticleMeasure& mu, const ParticleMeasure& nu,
                              double p) {
    if (mu.dim != nu.dim)
        throw std::invalid_argument("wasserstein: dimension mismatch");
    if (p < 1.0) throw std::domain_error("wasserstein order p must be >= 1");
    if (mu.dim == 1) return wasserstein_1d(mu, nu, p);

    if (mu.size() == nu.size() && is_uniform(mu) && is_uniform(nu)) {
        // Assignment: unit supplies, one atom to one atom.
        const std::int64_t one = 1;
        TransportPlan plan = min_cost_transport(
            mu, nu, p, std::vector<std::int64_t>(mu.size(), one),
            std::vector<std::int64_t>(nu.size(), one));
        const double w = 1.0 / static_cast<double>(mu.size());
        plan.cost = 0.0;
        for (auto& e : plan.entries) {
            e.mass = w;
            plan.cost += w * pair_cost(mu.points[e.row], nu.points[e.col], p);
        }
        return {std::pow(plan.cost, 1.0 / p), std::move(plan)};
    }

    TransportPlan plan =
        min_cost_transport(mu, nu, p, integerize(mu.weights), integerize(nu.weights));
    const double S = static_cast<double>(std::int64_t{1} << 40);
    plan.cost = 0.0;
    for (auto& e : plan.entries) {
        e.mass /= S;
        plan.cost += e.mass * pair_cost(mu.points[e.row], nu.points[e.col], p);
    }
    return {std::pow(plan.cost, 1.0 / p), std::move(plan)};
}

double brute_force_wasserstein(const ParticleMeasure& mu, const ParticleMeasure& nu,
                               double p) {
    if (mu.dim != nu.dim)
        throw std::invalid_argument("brute_force_wasserstein: dimension mismatch");
    if (mu.size() != nu.size() || !is_uniform(mu) || !is_uniform(nu))
        throw std::invalid_argument("brute_force_wasserstein needs equal-size uniform measures");
    const std::size_t n = mu.size();
    if (n > 8) throw std::invalid_argument("brute_force_wasserstein refuses N > 8");

    std::vector<int> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    double best = std::numeric_limits<double>::infinity();
    do {
        double c = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            c += pair_cost(mu.points[i], nu.points[perm[i]], p);
        best = std::min(best, c / static_cast<double>(n));
    } while (std::next_permutation(perm.begin(), perm.end()));
    return std::pow(best, 1.0 / p);
}

double kantorovich_gap(const ParticleMeasure& mu, const ParticleMeasure& nu,
                       const std::function<double(const Vec&)>& phi) {
    std::vector<const Vec*> support;
    for (const Vec& x : mu.points) support.push_back(&x);
    for (const Vec& y : nu.points) support.push_back(&y);
    for (std::size_t a = 0; a < support.size(); ++a)
        for (std::size_t b = a + 1; b < support.size(); ++b) {
            const double gap = std::abs(phi(*support[a]) - phi(*support[b]));
            if (gap > dist2(*support[a], *support[b]) + 1e-9)
                throw std::invalid_argument("test map violates the 1-Lipschitz check");
        }
    double pairing = 0.0;
    for (std::size_t i = 0; i < mu.size(); ++i) pairing += mu.weights[i] * phi(mu.points[i]);
    for (std::size_t j = 0; j < nu.size(); ++j) pairing -= nu.weights[j] * phi(nu.points[j]);
    return wasserstein_distance(mu, nu, 1.0) - pairing;
}

}  // namespace wassinc
