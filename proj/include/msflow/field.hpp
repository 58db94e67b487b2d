#pragma once

#include <iosfwd>
#include <string>

#include <Eigen/Dense>

#include "msflow/grid.hpp"

namespace msflow {

/// Two-point exponential covariance parameters for the log field.
struct CovarianceSpec {
    double sigma2 = 1.0;
    double corr_x = 0.1;
    double corr_y = 0.1;

    void validate() const {
        if (!(sigma2 > 0.0)) throw InvalidArgument("covariance: sigma2 must be positive");
        if (!(corr_x > 0.0) || !(corr_y > 0.0))
            throw InvalidArgument("covariance: correlation lengths must be positive");
    }
};

/// Truncated Karhunen-Loeve basis of the log-permeability field.
///
/// Eigenfunctions are sampled at fine cell centers and are orthonormal in
/// the cell-area weighted discrete L2 inner product. total_trace keeps the
/// full trace of the weighted covariance operator for energy accounting.
struct KLBasis {
    int nx = 0, ny = 0;
    double lx = 1.0, ly = 1.0;
    Eigen::VectorXd eigenvalues;     // descending, >= 0
    Eigen::MatrixXd eigenfunctions;  // n_terms x n_cells, row-major terms
    Eigen::VectorXd mean_field;      // E[a] at cell centers
    double total_trace = 0.0;

    int n_terms() const { return static_cast<int>(eigenvalues.size()); }
    int n_cells() const { return nx * ny; }
    StructuredGrid grid() const { return StructuredGrid(nx, ny, lx, ly); }
};

/// Strictly positive permeability samples at fine cell centers.
struct PermField {
    Eigen::VectorXd values;
};

/// Dense covariance matrix over cell centers; symmetric, diagonal sigma2.
Eigen::MatrixXd build_covariance(const StructuredGrid& grid, const CovarianceSpec& spec);

/// Nystrom discretization of the covariance operator with cell-area
/// quadrature weights; returns the leading n_terms eigenpairs.
///
/// Eigenvalues in [-eps, 0) with eps = 1e-10 * trace are clipped to zero;
/// anything below -eps reports a non-PSD input. The sign of each
/// eigenfunction is fixed so its largest-magnitude entry is positive.
KLBasis compute_kle(const Eigen::MatrixXd& cov, const StructuredGrid& grid, int n_terms);

/// Fraction of total spectral energy captured by the leading m terms.
double energy_fraction(const KLBasis& klb, int m);

/// k = exp(E[a] + sum_i sqrt(lambda_i) b_i theta_i), theta in [-1,1]^N.
PermField realize_field(const KLBasis& klb, const Eigen::VectorXd& theta);

/// Log field (without exponentiation); realize_field = exp of this.
Eigen::VectorXd realize_log_field(const KLBasis& klb, const Eigen::VectorXd& theta);

/// Synthetic channelized mean log-permeability: three anisotropic Gaussian
/// ridges running across the domain (fixed amplitudes/positions).
Eigen::VectorXd channelized_mean_field(const StructuredGrid& grid);

/// Binary container round-trip for caching expensive eigen-solves.
void save_kl_basis(const std::string& path, const KLBasis& klb);
KLBasis load_kl_basis(const std::string& path);

}  // namespace msflow
