#pragma once

#include <cstdint>
#include <iosfwd>
#include <vector>

#include <Eigen/Dense>

#include "msflow/errors.hpp"

namespace msflow {

/// Nested 1-D Chebyshev-Gauss-Lobatto rule on [-1,1] with quadrature
/// weights taken against the uniform probability density (rho = 1/2).
///
/// Node counts grow as m(0)=1 and m(l)=2^l+1, so the node set of every
/// level is a bit-exact subset of the next level's. The center node is
/// exactly 0 and the set is exactly symmetric about 0.
struct Rule1D {
    int level = 0;
    std::vector<double> nodes;    // ascending, -1 .. 1
    std::vector<double> weights;  // sum to 1
    // Difference-rule weights (this level minus the previous one on shared
    // nodes); level 0 holds {1}. Tensor products of these build the Smolyak
    // operator with unit coefficients.
    std::vector<double> delta_weights;

    static int node_count(int level);
    /// Cached immutable rule for a level (levels 0..20 supported).
    static const Rule1D& get(int level);
};

/// Values of the m Lagrange cardinal polynomials through a rule's nodes,
/// evaluated at x (barycentric form; exact at nodes).
std::vector<double> lagrange_basis(const Rule1D& rule, double x);

/// One tensor product of 1-D difference rules in the Smolyak sum.
struct TensorTerm {
    // dims carrying a 1-D level >= 1, ascending dim order; remaining dims
    // sit at the level-0 center node.
    std::vector<std::pair<int, int>> active;  // (dim, level)
    // Global node ids in multi-radix product order (last active dim fastest).
    std::vector<int> node_ids;
};

/// Smolyak sparse grid on [-1,1]^dim with deduplicated nodes and
/// quadrature weights for the uniform probability density.
struct SparseGrid {
    int dim = 0;
    int level = 0;
    Eigen::MatrixXd nodes;    // n x dim, one point per row
    Eigen::VectorXd weights;  // n, sums to 1
    std::vector<TensorTerm> terms;

    int size() const { return static_cast<int>(nodes.rows()); }
    Eigen::VectorXd node(int j) const { return nodes.row(j).transpose(); }
};

/// Number of distinct collocation points of the (dim, level) grid.
/// Throws BudgetError when the count overflows or exceeds max_nodes.
std::uint64_t count_nodes(int dim, int level, std::uint64_t max_nodes = UINT64_MAX);

constexpr std::uint64_t kDefaultNodeBudget = 1000000;

SparseGrid build_sparse_grid(int dim, int level, std::uint64_t node_budget = kDefaultNodeBudget);

/// Integral of f against the uniform density from per-node samples.
double quadrature(const SparseGrid& grid, const Eigen::VectorXd& values);
/// Column-wise quadrature for vector-valued samples (rows = nodes).
Eigen::VectorXd quadrature(const SparseGrid& grid, const Eigen::MatrixXd& values);

struct VarianceEstimate {
    double value = 0.0;  // clipped at zero
    double raw = 0.0;    // may be slightly negative from quadrature error
};

VarianceEstimate variance_from_grid(const SparseGrid& grid, const Eigen::VectorXd& values);
/// Column-wise variant; raw values returned alongside clipped ones.
void variance_from_grid(const SparseGrid& grid, const Eigen::MatrixXd& values,
                        Eigen::VectorXd& clipped, Eigen::VectorXd& raw);

/// Coefficients c with  A[f](point) = c . values  for any nodal values.
Eigen::VectorXd interpolation_weights(const SparseGrid& grid, const Eigen::VectorXd& point);

double interpolate(const SparseGrid& grid, const Eigen::VectorXd& values,
                   const Eigen::VectorXd& point);

/// Writes "x0,...,x{d-1},weight" rows, one per node.
void write_grid_csv(std::ostream& os, const SparseGrid& grid);

}  // namespace msflow
