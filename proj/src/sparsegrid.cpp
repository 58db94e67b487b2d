#include "msflow/sparsegrid.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <mutex>
#include <ostream>
#include <unordered_map>

namespace msflow {

namespace {

constexpr int kMaxLevel = 20;

std::vector<double> cc_nodes(int level) {
    if (level == 0) return {0.0};
    const int n = 1 << level;  // m-1 intervals
    std::vector<double> x(n + 1);
    // Compute the negative half and mirror so the set is exactly symmetric;
    // the arguments pi*k/2^l reproduce bit-identically across levels.
    for (int k = 0; k < n / 2; ++k) {
        x[k] = -std::cos(M_PI * k / n);
        x[n - k] = -x[k];
    }
    x[0] = -1.0;
    x[n] = 1.0;
    x[n / 2] = 0.0;
    return x;
}

// Clenshaw-Curtis weights for integrating against the uniform probability
// density on [-1,1] (classic closed formula for an even interval count,
// divided by the interval length 2).
std::vector<double> cc_weights(int level) {
    if (level == 0) return {1.0};
    const int n = 1 << level;
    std::vector<double> w(n + 1, 0.0);
    w[0] = w[n] = 1.0 / (static_cast<double>(n) * n - 1.0);
    for (int k = 1; k < n; ++k) {
        double v = 1.0;
        const double theta = M_PI * k / n;
        for (int j = 1; j < n / 2; ++j) v -= 2.0 * std::cos(2.0 * j * theta) / (4.0 * j * j - 1.0);
        v -= std::cos(n * theta) / (static_cast<double>(n) * n - 1.0);
        w[k] = 2.0 * v / n;
    }
    for (double& wk : w) wk *= 0.5;
    // Enforce exact symmetry of the weight vector.
    for (int k = 0; k < (n + 1) / 2; ++k) {
        const double s = 0.5 * (w[k] + w[n - k]);
        w[k] = w[n - k] = s;
    }
    return w;
}

std::vector<double> cc_delta_weights(int level) {
    if (level == 0) return {1.0};
    std::vector<double> dw = cc_weights(level);
    const std::vector<double> prev = cc_weights(level - 1);
    for (std::size_t s = 0; s < prev.size(); ++s) dw[2 * s] -= prev[s];
    return dw;
}

std::uint64_t checked_mul(std::uint64_t a, std::uint64_t b) {
    std::uint64_t r;
    if (__builtin_mul_overflow(a, b, &r)) throw BudgetError("node count overflows 64-bit range");
    return r;
}

std::uint64_t checked_add(std::uint64_t a, std::uint64_t b) {
    std::uint64_t r;
    if (__builtin_add_overflow(a, b, &r)) throw BudgetError("node count overflows 64-bit range");
    return r;
}

// Nodes first appearing at 1-D level t: 1, 2, 2, 4, 8, ...
std::uint64_t new_nodes_1d(int t) {
    if (t == 0) return 1;
    if (t == 1) return 2;
    return 1ull << (t - 1);
}

struct PointKey {
    std::vector<double> coords;
    bool operator==(const PointKey& o) const { return coords == o.coords; }
};

struct PointKeyHash {
    std::size_t operator()(const PointKey& k) const {
        std::size_t h = 1469598103934665603ull;
        for (double v : k.coords) {
            if (v == 0.0) v = 0.0;  // collapse -0.0
            std::uint64_t bits;
            std::memcpy(&bits, &v, sizeof(bits));
            h ^= bits;
            h *= 1099511628211ull;
        }
        return h;
    }
};

// Enumerates multi-index level assignments {(dim, level>=1)} with total level
// sum <= hi, dims strictly ascending; calls fn for each assignment (including
// the empty one). Dimensions not listed sit at level 0.
template <typename Fn>
void enumerate_level_sets(int dim, int hi, Fn&& fn) {
    std::vector<std::pair<int, int>> current;
    auto rec = [&](auto&& self, int start_dim, int used) -> void {
        fn(current);
        if (used == hi) return;
        for (int d = start_dim; d < dim; ++d) {
            for (int lev = 1; used + lev <= hi; ++lev) {
                current.emplace_back(d, lev);
                self(self, d + 1, used + lev);
                current.pop_back();
            }
        }
    };
    rec(rec, 0, 0);
}

}  // namespace

int Rule1D::node_count(int level) {
    if (level < 0) throw InvalidArgument("rule level must be >= 0");
    if (level == 0) return 1;
    if (level > kMaxLevel) throw InvalidArgument("rule level too large");
    return (1 << level) + 1;
}

const Rule1D& Rule1D::get(int level) {
    if (level < 0 || level > kMaxLevel) throw InvalidArgument("rule level out of range");
    static std::vector<Rule1D> cache(kMaxLevel + 1);
    static std::once_flag flags[kMaxLevel + 1];
    std::call_once(flags[level], [level] {
        Rule1D r;
        r.level = level;
        r.nodes = cc_nodes(level);
        r.weights = cc_weights(level);
        r.delta_weights = cc_delta_weights(level);
        cache[level] = std::move(r);
    });
    return cache[level];
}

std::vector<double> lagrange_basis(const Rule1D& rule, double x) {
    const int m = static_cast<int>(rule.nodes.size());
    std::vector<double> basis(m, 0.0);
    if (m == 1) {
        basis[0] = 1.0;
        return basis;
    }
    for (int k = 0; k < m; ++k) {
        if (x == rule.nodes[k]) {
            basis[k] = 1.0;
            return basis;
        }
    }
    // Barycentric weights of Chebyshev-Gauss-Lobatto nodes: alternating signs,
    // halved at the endpoints (common scale cancels).
    double denom = 0.0;
    std::vector<double> term(m);
    for (int k = 0; k < m; ++k) {
        double bw = (k % 2 == 0) ? 1.0 : -1.0;
        if (k == 0 || k == m - 1) bw *= 0.5;
        term[k] = bw / (x - rule.nodes[k]);
        denom += term[k];
    }
    for (int k = 0; k < m; ++k) basis[k] = term[k] / denom;
    return basis;
}

std::uint64_t count_nodes(int dim, int level, std::uint64_t max_nodes) {
    if (dim < 1) throw InvalidArgument("count_nodes: dim must be >= 1");
    if (level < 0 || level > kMaxLevel) throw InvalidArgument("count_nodes: level out of range");
    // Each node is identified by the per-dimension level at which it first
    // appears; sum over level vectors with total <= level of the product of
    // per-level new-node counts. Accumulated as polynomial coefficients.
    std::vector<std::uint64_t> acc(level + 1, 0);
    acc[0] = 1;
    for (int d = 0; d < dim; ++d) {
        std::vector<std::uint64_t> next(level + 1, 0);
        for (int a = 0; a <= level; ++a) {
            if (acc[a] == 0) continue;
            for (int t = 0; a + t <= level; ++t)
                next[a + t] = checked_add(next[a + t], checked_mul(acc[a], new_nodes_1d(t)));
        }
        acc.swap(next);
    }
    std::uint64_t total = 0;
    for (std::uint64_t c : acc) total = checked_add(total, c);
    if (total > max_nodes)
        throw BudgetError("sparse grid of dim " + std::to_string(dim) + ", level " +
                          std::to_string(level) + " needs " + std::to_string(total) +
                          " nodes, over budget " + std::to_string(max_nodes));
    return total;
}

SparseGrid build_sparse_grid(int dim, int level, std::uint64_t node_budget) {
    const std::uint64_t expected = count_nodes(dim, level, node_budget);

    SparseGrid grid;
    grid.dim = dim;
    grid.level = level;

    std::unordered_map<PointKey, int, PointKeyHash> index;
    index.reserve(expected * 2);
    std::vector<std::vector<double>> coords;
    std::vector<double> weights;
    coords.reserve(expected);
    weights.reserve(expected);

    enumerate_level_sets(dim, level, [&](const std::vector<std::pair<int, int>>& levels) {
        TensorTerm term;
        term.active = levels;

        const int na = static_cast<int>(levels.size());
        std::vector<const Rule1D*> rules(na);
        std::vector<int> radix(na), counter(na, 0);
        std::uint64_t prod = 1;
        for (int a = 0; a < na; ++a) {
            rules[a] = &Rule1D::get(levels[a].second);
            radix[a] = static_cast<int>(rules[a]->nodes.size());
            prod *= radix[a];
        }
        term.node_ids.reserve(prod);

        PointKey key;
        key.coords.assign(dim, 0.0);
        for (std::uint64_t it = 0; it < prod; ++it) {
            double w = 1.0;
            for (int a = 0; a < na; ++a) {
                key.coords[levels[a].first] = rules[a]->nodes[counter[a]];
                w *= rules[a]->delta_weights[counter[a]];
            }
            auto [pos, inserted] = index.try_emplace(key, static_cast<int>(coords.size()));
            if (inserted) {
                coords.push_back(key.coords);
                weights.push_back(0.0);
            }
            weights[pos->second] += w;
            term.node_ids.push_back(pos->second);
            // Multi-radix increment, last dimension fastest.
            for (int a = na - 1; a >= 0; --a) {
                if (++counter[a] < radix[a]) break;
                counter[a] = 0;
            }
        }
        grid.terms.push_back(std::move(term));
    });

    const int n = static_cast<int>(coords.size());
    if (static_cast<std::uint64_t>(n) != expected)
        throw Error("sparse grid construction produced " + std::to_string(n) +
                    " nodes, expected " + std::to_string(expected));
    grid.nodes.resize(n, dim);
    grid.weights.resize(n);
    for (int j = 0; j < n; ++j) {
        for (int d = 0; d < dim; ++d) grid.nodes(j, d) = coords[j][d];
        grid.weights[j] = weights[j];
    }
    return grid;
}

double quadrature(const SparseGrid& grid, const Eigen::VectorXd& values) {
    if (values.size() != grid.size()) throw InvalidArgument("quadrature: values length mismatch");
    return grid.weights.dot(values);
}

Eigen::VectorXd quadrature(const SparseGrid& grid, const Eigen::MatrixXd& values) {
    if (values.rows() != grid.size()) throw InvalidArgument("quadrature: values row count mismatch");
    return values.transpose() * grid.weights;
}

VarianceEstimate variance_from_grid(const SparseGrid& grid, const Eigen::VectorXd& values) {
    if (values.size() != grid.size())
        throw InvalidArgument("variance_from_grid: values length mismatch");
    const double m1 = grid.weights.dot(values);
    const double m2 = grid.weights.dot(values.cwiseProduct(values));
    VarianceEstimate est;
    est.raw = m2 - m1 * m1;
    est.value = std::max(0.0, est.raw);
    return est;
}

void variance_from_grid(const SparseGrid& grid, const Eigen::MatrixXd& values,
                        Eigen::VectorXd& clipped, Eigen::VectorXd& raw) {
    if (values.rows() != grid.size())
        throw InvalidArgument("variance_from_grid: values row count mismatch");
    const Eigen::VectorXd m1 = values.transpose() * grid.weights;
    const Eigen::VectorXd m2 = values.cwiseProduct(values).transpose() * grid.weights;
    raw = m2 - m1.cwiseProduct(m1);
    clipped = raw.cwiseMax(0.0);
}

Eigen::VectorXd interpolation_weights(const SparseGrid& grid, const Eigen::VectorXd& point) {
    if (point.size() != grid.dim) throw InvalidArgument("interpolate: point dimension mismatch");
    for (int d = 0; d < grid.dim; ++d)
        if (std::abs(point[d]) > 1.0 + 1e-12)
            throw ThetaRangeError("interpolate: point component outside [-1,1]");

    Eigen::VectorXd c = Eigen::VectorXd::Zero(grid.size());
    std::vector<std::vector<double>> basis;
    for (const TensorTerm& term : grid.terms) {
        const int na = static_cast<int>(term.active.size());
        basis.assign(na, {});
        std::vector<int> radix(na), counter(na, 0);
        std::uint64_t prod = 1;
        for (int a = 0; a < na; ++a) {
            const Rule1D& rule = Rule1D::get(term.active[a].second);
            basis[a] = lagrange_basis(rule, point[term.active[a].first]);
            radix[a] = static_cast<int>(basis[a].size());
            prod *= radix[a];
        }
        for (std::uint64_t it = 0; it < prod; ++it) {
            double v = term.coeff;
            for (int a = 0; a < na; ++a) v *= basis[a][counter[a]];
            c[term.node_ids[it]] += v;
            for (int a = na - 1; a >= 0; --a) {
                if (++counter[a] < radix[a]) break;
                counter[a] = 0;
            }
        }
    }
    return c;
}

double interpolate(const SparseGrid& grid, const Eigen::VectorXd& values,
                   const Eigen::VectorXd& point) {
    if (values.size() != grid.size()) throw InvalidArgument("interpolate: values length mismatch");
    return interpolation_weights(grid, point).dot(values);
}

void write_grid_csv(std::ostream& os, const SparseGrid& grid) {
    os.precision(17);
    for (int j = 0; j < grid.size(); ++j) {
        for (int d = 0; d < grid.dim; ++d) os << grid.nodes(j, d) << ',';
        os << grid.weights[j] << '\n';
    }
}

}  // namespace msflow
