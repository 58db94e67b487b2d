#pragma once

#include <Eigen/Dense>

#include "msflow/errors.hpp"

namespace msflow {

/// Uniform rectangular cell grid on [0,lx] x [0,ly].
///
/// Cells are indexed row-major with the x index fastest:
/// cell(i,j) = j*nx + i, i in [0,nx), j in [0,ny).
/// Edge fluxes are stored as integrated volumetric rates with a fixed
/// global orientation (+x for vertical faces, +y for horizontal faces).
struct StructuredGrid {
    int nx = 1;
    int ny = 1;
    double lx = 1.0;
    double ly = 1.0;

    StructuredGrid() = default;
    StructuredGrid(int nx_, int ny_, double lx_ = 1.0, double ly_ = 1.0)
        : nx(nx_), ny(ny_), lx(lx_), ly(ly_) {
        if (nx < 1 || ny < 1) throw InvalidArgument("grid: nx, ny must be >= 1");
        if (!(lx > 0.0) || !(ly > 0.0)) throw InvalidArgument("grid: domain lengths must be positive");
    }

    int cell_count() const { return nx * ny; }
    double hx() const { return lx / nx; }
    double hy() const { return ly / ny; }
    double cell_area() const { return hx() * hy(); }
    double domain_area() const { return lx * ly; }

    int cell(int i, int j) const { return j * nx + i; }
    int cell_i(int c) const { return c % nx; }
    int cell_j(int c) const { return c / nx; }

    double center_x(int i) const { return (i + 0.5) * hx(); }
    double center_y(int j) const { return (j + 0.5) * hy(); }

    // Faces with normal +x sit between cells (i-1,j) and (i,j); i in [0,nx].
    int n_xedges() const { return (nx + 1) * ny; }
    // Faces with normal +y sit between cells (i,j-1) and (i,j); j in [0,ny].
    int n_yedges() const { return nx * (ny + 1); }
    int n_edges() const { return n_xedges() + n_yedges(); }

    int xedge(int i, int j) const { return j * (nx + 1) + i; }
    int yedge(int i, int j) const { return n_xedges() + j * nx + i; }

    bool xedge_is_boundary(int i) const { return i == 0 || i == nx; }
    bool yedge_is_boundary(int j) const { return j == 0 || j == ny; }
};

/// Signed divergence of an edge-flux vector: per cell, net outflow.
inline Eigen::VectorXd flux_divergence(const StructuredGrid& g, const Eigen::VectorXd& flux) {
    if (flux.size() != g.n_edges()) throw InvalidArgument("flux_divergence: edge vector size mismatch");
    Eigen::VectorXd div = Eigen::VectorXd::Zero(g.cell_count());
    for (int j = 0; j < g.ny; ++j)
        for (int i = 0; i < g.nx; ++i) {
            const int c = g.cell(i, j);
            div[c] += flux[g.xedge(i + 1, j)] - flux[g.xedge(i, j)];
            div[c] += flux[g.yedge(i, j + 1)] - flux[g.yedge(i, j)];
        }
    return div;
}

}  // namespace msflow
