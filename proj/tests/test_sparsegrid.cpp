#include <doctest.h>

#include <cmath>
#include <functional>
#include <map>
#include <random>
#include <set>
#include <sstream>

#include "msflow/sparsegrid.hpp"

using namespace msflow;

namespace {

// Exact uniform moment of a monomial prod theta_d^{alpha_d} on [-1,1]^N.
double uniform_moment(const std::vector<int>& alpha) {
    double m = 1.0;
    for (int a : alpha) {
        if (a % 2 == 1) return 0.0;
        m /= a + 1;
    }
    return m;
}

Eigen::VectorXd monomial_values(const SparseGrid& grid, const std::vector<int>& alpha) {
    Eigen::VectorXd v = Eigen::VectorXd::Ones(grid.size());
    for (int j = 0; j < grid.size(); ++j)
        for (int d = 0; d < grid.dim; ++d)
            for (int p = 0; p < alpha[d]; ++p) v[j] *= grid.nodes(j, d);
    return v;
}

}  // namespace

TEST_CASE("1-D rule nodes: nesting, symmetry, exact center") {
    for (int level = 0; level <= 5; ++level) {
        const Rule1D& rule = Rule1D::get(level);
        CHECK(static_cast<int>(rule.nodes.size()) == Rule1D::node_count(level));
        const int m = static_cast<int>(rule.nodes.size());
        // symmetric about zero, center exactly zero
        for (int k = 0; k < m; ++k) CHECK(rule.nodes[k] == -rule.nodes[m - 1 - k]);
        CHECK(rule.nodes[(m - 1) / 2] == 0.0);
        if (level >= 1) {
            CHECK(rule.nodes.front() == -1.0);
            CHECK(rule.nodes.back() == 1.0);
            // bit-exact nesting into the next level
            const Rule1D& next = Rule1D::get(level + 1);
            for (int k = 0; k < m; ++k) CHECK(rule.nodes[k] == next.nodes[2 * k]);
        }
        double sum = 0.0;
        for (double w : rule.weights) sum += w;
        CHECK(std::abs(sum - 1.0) <= 1e-14);
    }
}

TEST_CASE("level-2 1-D nodes are the five CGL points") {
    const Rule1D& rule = Rule1D::get(2);
    REQUIRE(rule.nodes.size() == 5);
    const double r = 1.0 / std::sqrt(2.0);
    CHECK(rule.nodes[0] == doctest::Approx(-1.0).epsilon(1e-15));
    CHECK(rule.nodes[1] == doctest::Approx(-r).epsilon(1e-15));
    CHECK(rule.nodes[2] == 0.0);
    CHECK(rule.nodes[3] == doctest::Approx(r).epsilon(1e-15));
    CHECK(rule.nodes[4] == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("node counts: closed form vs construction") {
    for (int n : {1, 2, 5, 10, 31, 80}) {
        const std::uint64_t count = count_nodes(n, 2);
        CHECK(count == static_cast<std::uint64_t>(2 * n * n + 2 * n + 1));
    }
    CHECK(count_nodes(80, 2) == 12961);
    CHECK(count_nodes(2, 2) == 13);
    CHECK(count_nodes(1, 2) == 5);

    for (int n : {1, 2, 3, 5}) {
        for (int level : {0, 1, 2, 3}) {
            const SparseGrid grid = build_sparse_grid(n, level);
            CHECK(static_cast<std::uint64_t>(grid.size()) == count_nodes(n, level));
        }
    }
}

TEST_CASE("dim=80 level=2 grid has 12961 deduplicated nodes") {
    const SparseGrid grid = build_sparse_grid(80, 2);
    CHECK(grid.size() == 12961);
    CHECK(std::abs(grid.weights.sum() - 1.0) <= 1e-12);
}

TEST_CASE("level 0 grid is the single center node") {
    const SparseGrid grid = build_sparse_grid(2, 0);
    REQUIRE(grid.size() == 1);
    CHECK(grid.nodes(0, 0) == 0.0);
    CHECK(grid.nodes(0, 1) == 0.0);
    CHECK(grid.weights[0] == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("weights sum to one") {
    for (int n : {1, 10, 80}) {
        const SparseGrid grid = build_sparse_grid(n, 2);
        CHECK(std::abs(grid.weights.sum() - 1.0) <= 1e-12);
    }
}

TEST_CASE("node budget guard") {
    CHECK_THROWS_AS(build_sparse_grid(80, 2, 1000), BudgetError);
    CHECK_THROWS_AS(count_nodes(80, 2, 12960), BudgetError);
    CHECK_NOTHROW(count_nodes(80, 2, 12961));
}

TEST_CASE("quadrature basics") {
    const SparseGrid grid = build_sparse_grid(3, 2);
    CHECK(std::abs(quadrature(grid, Eigen::VectorXd(Eigen::VectorXd::Ones(grid.size()))) - 1.0) <= 1e-12);
    CHECK(std::abs(quadrature(grid, Eigen::VectorXd(grid.nodes.col(0))) - 0.0) <= 1e-12);
    const Eigen::VectorXd sq = grid.nodes.col(0).cwiseProduct(grid.nodes.col(0));
    CHECK(std::abs(quadrature(grid, sq) - 1.0 / 3.0) <= 1e-12);
    CHECK_THROWS_AS(quadrature(grid, Eigen::VectorXd(Eigen::VectorXd::Ones(3))), InvalidArgument);
}

TEST_CASE("level-2 quadrature integrates all monomials of total degree <= 5") {
    for (int n : {1, 2, 3}) {
        const SparseGrid grid = build_sparse_grid(n, 2);
        std::vector<int> alpha(n, 0);
        // enumerate all alpha with total degree <= 5
        const int max_total = 5;
        std::function<void(int, int)> rec = [&](int d, int remaining) {
            if (d == n) {
                const double exact = uniform_moment(alpha);
                const double approx = quadrature(grid, monomial_values(grid, alpha));
                CHECK(std::abs(approx - exact) <= 1e-10);
                return;
            }
            for (int a = 0; a <= remaining; ++a) {
                alpha[d] = a;
                rec(d + 1, remaining - a);
            }
            alpha[d] = 0;
        };
        rec(0, max_total);
    }
}

TEST_CASE("variance from grid") {
    const SparseGrid grid = build_sparse_grid(2, 2);
    SUBCASE("constant has zero variance") {
        const auto est = variance_from_grid(grid, Eigen::VectorXd(Eigen::VectorXd::Constant(grid.size(), 3.25)));
        CHECK(std::abs(est.value) <= 1e-12);
    }
    SUBCASE("theta_1 has variance 1/3") {
        const auto est = variance_from_grid(grid, Eigen::VectorXd(grid.nodes.col(0)));
        CHECK(std::abs(est.value - 1.0 / 3.0) <= 1e-12);
    }
    SUBCASE("theta_1 + theta_2 has variance 2/3") {
        const Eigen::VectorXd v = grid.nodes.col(0) + grid.nodes.col(1);
        const auto est = variance_from_grid(grid, v);
        CHECK(std::abs(est.value - 2.0 / 3.0) <= 1e-12);
    }
}

TEST_CASE("interpolation reproduces nodal values and polynomial exactness") {
    SUBCASE("grid nodes are reproduced exactly") {
        const SparseGrid grid = build_sparse_grid(2, 2);
        std::mt19937_64 rng(42);
        std::uniform_real_distribution<double> unif(-1.0, 1.0);
        Eigen::VectorXd values(grid.size());
        for (int j = 0; j < grid.size(); ++j) values[j] = unif(rng);
        for (int j = 0; j < grid.size(); ++j) {
            const double v = interpolate(grid, values, grid.nodes.row(j).transpose());
            CHECK(std::abs(v - values[j]) <= 1e-12);
        }
    }
    SUBCASE("linear functions are exact at level >= 1") {
        const SparseGrid grid = build_sparse_grid(3, 1);
        auto f = [](const Eigen::VectorXd& x) { return 0.7 - 1.3 * x[0] + 0.4 * x[1] - x[2]; };
        Eigen::VectorXd values(grid.size());
        for (int j = 0; j < grid.size(); ++j) values[j] = f(grid.nodes.row(j).transpose());
        std::mt19937_64 rng(7);
        std::uniform_real_distribution<double> unif(-1.0, 1.0);
        for (int t = 0; t < 50; ++t) {
            Eigen::VectorXd x(3);
            x << unif(rng), unif(rng), unif(rng);
            CHECK(std::abs(interpolate(grid, values, x) - f(x)) <= 1e-10);
        }
    }
    SUBCASE("1-D level 2 interpolates degree 4 exactly") {
        const SparseGrid grid = build_sparse_grid(1, 2);
        Eigen::VectorXd values(grid.size());
        for (int j = 0; j < grid.size(); ++j) values[j] = std::pow(grid.nodes(j, 0), 4);
        std::mt19937_64 rng(11);
        std::uniform_real_distribution<double> unif(-1.0, 1.0);
        for (int t = 0; t < 50; ++t) {
            Eigen::VectorXd x(1);
            x << unif(rng);
            CHECK(std::abs(interpolate(grid, values, x) - std::pow(x[0], 4)) <= 1e-10);
        }
    }
    SUBCASE("out-of-range point rejected") {
        const SparseGrid grid = build_sparse_grid(2, 1);
        Eigen::VectorXd x(2);
        x << 1.5, 0.0;
        CHECK_THROWS_AS(interpolation_weights(grid, x), ThetaRangeError);
    }
}

TEST_CASE("nesting of sparse node sets and symmetry") {
    for (int n : {1, 2, 3}) {
        const SparseGrid lo = build_sparse_grid(n, 1);
        const SparseGrid hi = build_sparse_grid(n, 2);
        std::set<std::vector<double>> hi_nodes;
        for (int j = 0; j < hi.size(); ++j) {
            std::vector<double> key(n);
            for (int d = 0; d < n; ++d) key[d] = hi.nodes(j, d);
            hi_nodes.insert(key);
        }
        for (int j = 0; j < lo.size(); ++j) {
            std::vector<double> key(n);
            for (int d = 0; d < n; ++d) key[d] = lo.nodes(j, d);
            CHECK(hi_nodes.count(key) == 1);
        }
        // symmetry: negating a node gives a node with the same weight
        std::map<std::vector<double>, double> weight_of;
        for (int j = 0; j < hi.size(); ++j) {
            std::vector<double> key(n);
            for (int d = 0; d < n; ++d) key[d] = hi.nodes(j, d);
            weight_of[key] = hi.weights[j];
        }
        for (const auto& [key, w] : weight_of) {
            std::vector<double> neg(n);
            for (int d = 0; d < n; ++d) neg[d] = key[d] == 0.0 ? 0.0 : -key[d];
            REQUIRE(weight_of.count(neg) == 1);
            CHECK(std::abs(weight_of[neg] - w) <= 1e-15);
        }
    }
}

TEST_CASE("grid CSV export") {
    const SparseGrid grid = build_sparse_grid(2, 1);
    std::ostringstream os;
    write_grid_csv(os, grid);
    std::istringstream is(os.str());
    std::string line;
    int rows = 0;
    while (std::getline(is, line)) ++rows;
    CHECK(rows == grid.size());
}
