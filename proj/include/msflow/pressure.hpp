#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "msflow/grid.hpp"

namespace msflow {

/// Cell pressures (mean-zero) and signed integrated edge fluxes of a
/// locally conservative mixed solve.
struct MixedSolution {
    Eigen::VectorXd pressure;  // per cell, mean zero
    Eigen::VectorXd flux;      // per edge, fixed +x/+y orientation
};

/// Pressure solve with no-flow outer boundary:
///   -div(coeff grad p) = q,  flux = -coeff grad p.
///
/// Lowest-order conforming flux discretization on the rectangular grid
/// (one flux unknown per edge, one pressure per cell, harmonic-average
/// transmissibilities). `source` is a per-cell rate density; compatibility
/// sum(q * area) = 0 is required.
MixedSolution solve_fine_mixed(const StructuredGrid& grid, const Eigen::VectorXd& coeff,
                               const Eigen::VectorXd& source);

/// Unit-mobility solve used as global velocity information.
MixedSolution solve_singlephase_global(const StructuredGrid& grid, const Eigen::VectorXd& perm,
                                       const Eigen::VectorXd& source);

/// Uniform coarse blocks over the fine grid; the coarse counts must divide
/// the fine counts exactly.
struct CoarseEdge {
    int axis = 0;                 // 0: normal +x, 1: normal +y
    int block_lo = 0;             // left/bottom adjacent block
    int block_hi = 0;             // right/top adjacent block
    std::vector<int> fine_edges;  // fine edges composing this face, in order
};

struct CoarsePartition {
    StructuredGrid fine;
    int cnx = 1, cny = 1;
    std::vector<int> block_of_cell;           // fine cell -> block
    std::vector<std::vector<int>> block_cells;
    std::vector<CoarseEdge> interior_edges;

    CoarsePartition() = default;
    CoarsePartition(const StructuredGrid& fine_grid, int coarse_nx, int coarse_ny);

    int block_count() const { return cnx * cny; }
    int block(int bi, int bj) const { return bj * cnx + bi; }
    double block_area() const { return fine.domain_area() / block_count(); }
    // Fine-cell index rectangle [i0,i1) x [j0,j1) of a block.
    void block_rect(int b, int& i0, int& i1, int& j0, int& j1) const;
};

/// Velocity basis attached to one interior coarse face: a fine-edge flux
/// field supported on the two adjacent blocks, with total flux exactly 1
/// through the defining face (oriented low block -> high block) and
/// divergence +w_lo / -w_hi inside the adjacent blocks, where w defaults
/// to the uniform 1/|K| and follows the source profile in blocks carrying
/// net source.
struct MsBasis {
    int edge_index = -1;  // into CoarsePartition::interior_edges
    std::vector<std::pair<int, double>> flux;  // (fine edge id, value)
};

enum class BasisFlavor { local, global };

struct MsBasisSet {
    BasisFlavor flavor = BasisFlavor::local;
    std::vector<MsBasis> basis;       // one per interior coarse edge
    std::vector<int> fallback_edges;  // faces where degenerate data fell back to b=n
};

/// Per-block divergence profile of the basis functions: cells of blocks
/// with |net source| > tol carry the normalized source shape, others the
/// uniform 1/|K|. Pass an empty source for the plain uniform profile.
struct BlockWeights {
    Eigen::VectorXd cell_weight;  // per fine cell; sums to 1 over each block
};

BlockWeights make_block_weights(const CoarsePartition& part, const Eigen::VectorXd& source);

/// Solves the two local problems of one basis function. boundary_data maps
/// the face's fine edges (in CoarseEdge order) to flux samples; it is
/// normalized to unit total. Throws InvalidArgument when the net flux is
/// below 1e-12.
MsBasis build_ms_basis(const CoarsePartition& part, int edge_index, const Eigen::VectorXd& perm,
                       const Eigen::VectorXd& boundary_data, const BlockWeights& weights);

/// Builds the whole basis set. For the local flavor the face profile is the
/// constant normal trace; for the global flavor it is taken from
/// `global_flux` (a fine edge-flux field, e.g. single-phase velocity data),
/// falling back to the constant profile on faces where the net flux
/// degenerates (recorded in fallback_edges).
MsBasisSet assemble_ms_basis_set(const CoarsePartition& part, const Eigen::VectorXd& perm,
                                 BasisFlavor flavor, const Eigen::VectorXd& global_flux,
                                 const BlockWeights& weights);

struct CoarseSolution {
    Eigen::VectorXd coarse_flux;      // coefficient per interior coarse edge
    Eigen::VectorXd block_pressure;   // per block, mean zero
    Eigen::VectorXd fine_flux;        // reconstructed, per fine edge
};

/// Mixed solve on the span of the basis set with piecewise-constant block
/// pressures; the bilinear form uses the current cell coefficient (for
/// two-phase flow: total mobility times permeability).
CoarseSolution solve_coarse(const CoarsePartition& part, const MsBasisSet& set,
                            const Eigen::VectorXd& coeff, const Eigen::VectorXd& source);

/// Row-major CSV (one value per line after an "nx,ny" header).
void write_field_csv(std::ostream& os, const StructuredGrid& grid, const Eigen::VectorXd& field);
Eigen::VectorXd read_field_csv(std::istream& is, int& nx, int& ny);

/// Legacy-format structured-points text for visualization.
void write_field_vtk(std::ostream& os, const StructuredGrid& grid, const Eigen::VectorXd& field,
                     const std::string& name);

}  // namespace msflow
