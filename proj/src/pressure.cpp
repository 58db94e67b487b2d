#include "msflow/pressure.hpp"

#include <cmath>
#include <ostream>
#include <istream>
#include <sstream>
#include <unordered_map>

#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>
#include <Eigen/SparseLU>

namespace msflow {

namespace {

double harmonic(double a, double b) { return 2.0 * a * b / (a + b); }

/// Conforming-flux mixed solve on the cell rectangle [i0,i1) x [j0,j1) with
/// prescribed integrated fluxes (global +x/+y orientation) on its boundary
/// edges and integrated cell sources. Writes interior-edge fluxes and cell
/// pressures (mean zero over the rectangle) into the global vectors.
void solve_rect_neumann(const StructuredGrid& g, int i0, int i1, int j0, int j1,
                        const Eigen::VectorXd& coeff, const Eigen::VectorXd& int_source,
                        const std::unordered_map<int, double>& prescribed,
                        Eigen::VectorXd& pressure_global, Eigen::VectorXd& flux_global) {
    const int w = i1 - i0, h = j1 - j0;
    const int n = w * h;
    auto local = [&](int i, int j) { return (j - j0) * w + (i - i0); };
    auto pres = [&](int edge) {
        auto it = prescribed.find(edge);
        return it == prescribed.end() ? 0.0 : it->second;
    };

    // Right-hand side: source minus prescribed outflow.
    Eigen::VectorXd rhs = int_source;
    double scale = int_source.cwiseAbs().sum();
    for (int j = j0; j < j1; ++j) {
        rhs[local(i0, j)] += pres(g.xedge(i0, j));   // left face: +x flux enters
        rhs[local(i1 - 1, j)] -= pres(g.xedge(i1, j));
    }
    for (int i = i0; i < i1; ++i) {
        rhs[local(i, j0)] += pres(g.yedge(i, j0));
        rhs[local(i, j1 - 1)] -= pres(g.yedge(i, j1));
    }
    for (const auto& [e, v] : prescribed) scale += std::abs(v);
    if (std::abs(rhs.sum()) > 1e-10 * std::max(1.0, scale))
        throw InvalidArgument("mixed solve: incompatible source/boundary data (net " +
                              std::to_string(rhs.sum()) + ")");

    Eigen::VectorXd p_local = Eigen::VectorXd::Zero(n);
    if (n > 1) {
        // Pin the first cell; the dropped balance row is implied by
        // compatibility. Remaining system is SPD.
        const double tx = g.hy() / g.hx();
        const double ty = g.hx() / g.hy();
        std::vector<Eigen::Triplet<double>> trip;
        trip.reserve(5 * n);
        auto unknown = [&](int lc) { return lc - 1; };  // cell 0 pinned to 0
        auto add_pair = [&](int lc_a, int lc_b, double t) {
            if (lc_a > 0) trip.emplace_back(unknown(lc_a), unknown(lc_a), t);
            if (lc_b > 0) trip.emplace_back(unknown(lc_b), unknown(lc_b), t);
            if (lc_a > 0 && lc_b > 0) {
                trip.emplace_back(unknown(lc_a), unknown(lc_b), -t);
                trip.emplace_back(unknown(lc_b), unknown(lc_a), -t);
            }
        };
        for (int j = j0; j < j1; ++j)
            for (int i = i0 + 1; i < i1; ++i)
                add_pair(local(i - 1, j), local(i, j),
                         tx * harmonic(coeff[g.cell(i - 1, j)], coeff[g.cell(i, j)]));
        for (int j = j0 + 1; j < j1; ++j)
            for (int i = i0; i < i1; ++i)
                add_pair(local(i, j - 1), local(i, j),
                         ty * harmonic(coeff[g.cell(i, j - 1)], coeff[g.cell(i, j)]));

        Eigen::SparseMatrix<double> A(n - 1, n - 1);
        A.setFromTriplets(trip.begin(), trip.end());
        Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> solver(A);
        if (solver.info() != Eigen::Success)
            throw SolverError("mixed solve: factorization failed (singular or ill-conditioned)");
        const Eigen::VectorXd b = rhs.tail(n - 1);
        const Eigen::VectorXd x = solver.solve(b);
        const double res = (A * x - b).cwiseAbs().maxCoeff();
        if (!(res <= 1e-10 * std::max(1.0, b.cwiseAbs().maxCoeff())))
            throw SolverError("mixed solve: residual " + std::to_string(res) +
                              " exceeds tolerance");
        p_local.tail(n - 1) = x;
    }
    p_local.array() -= p_local.mean();

    for (int j = j0; j < j1; ++j)
        for (int i = i0; i < i1; ++i)
            pressure_global[g.cell(i, j)] = p_local[local(i, j)];

    const double tx = g.hy() / g.hx();
    const double ty = g.hx() / g.hy();
    for (int j = j0; j < j1; ++j)
        for (int i = i0 + 1; i < i1; ++i)
            flux_global[g.xedge(i, j)] =
                tx * harmonic(coeff[g.cell(i - 1, j)], coeff[g.cell(i, j)]) *
                (p_local[local(i - 1, j)] - p_local[local(i, j)]);
    for (int j = j0 + 1; j < j1; ++j)
        for (int i = i0; i < i1; ++i)
            flux_global[g.yedge(i, j)] =
                ty * harmonic(coeff[g.cell(i, j - 1)], coeff[g.cell(i, j)]) *
                (p_local[local(i, j - 1)] - p_local[local(i, j)]);
}

}  // namespace

MixedSolution solve_fine_mixed(const StructuredGrid& grid, const Eigen::VectorXd& coeff,
                               const Eigen::VectorXd& source) {
    const int n = grid.cell_count();
    if (coeff.size() != n || source.size() != n)
        throw InvalidArgument("solve_fine_mixed: field size mismatch");
    if ((coeff.array() <= 0.0).any())
        throw InvalidArgument("solve_fine_mixed: coefficient must be positive everywhere");
    const double area = grid.cell_area();
    const double net = source.sum() * area;
    if (std::abs(net) > 1e-12 * std::max(1.0, source.cwiseAbs().sum() * area))
        throw InvalidArgument("solve_fine_mixed: source violates pure-Neumann compatibility");

    MixedSolution sol;
    sol.pressure = Eigen::VectorXd::Zero(n);
    sol.flux = Eigen::VectorXd::Zero(grid.n_edges());
    solve_rect_neumann(grid, 0, grid.nx, 0, grid.ny, coeff, source * area, {}, sol.pressure,
                       sol.flux);
    return sol;
}

MixedSolution solve_singlephase_global(const StructuredGrid& grid, const Eigen::VectorXd& perm,
                                       const Eigen::VectorXd& source) {
    return solve_fine_mixed(grid, perm, source);
}

CoarsePartition::CoarsePartition(const StructuredGrid& fine_grid, int coarse_nx, int coarse_ny)
    : fine(fine_grid), cnx(coarse_nx), cny(coarse_ny) {
    if (cnx < 1 || cny < 1) throw InvalidArgument("coarse partition: counts must be >= 1");
    if (fine.nx % cnx != 0 || fine.ny % cny != 0)
        throw InvalidArgument("coarse partition: coarse counts must divide fine counts");
    const int mx = fine.nx / cnx, my = fine.ny / cny;

    block_of_cell.resize(fine.cell_count());
    block_cells.assign(block_count(), {});
    for (int j = 0; j < fine.ny; ++j)
        for (int i = 0; i < fine.nx; ++i) {
            const int b = block(i / mx, j / my);
            block_of_cell[fine.cell(i, j)] = b;
            block_cells[b].push_back(fine.cell(i, j));
        }

    for (int bj = 0; bj < cny; ++bj)
        for (int bi = 1; bi < cnx; ++bi) {
            CoarseEdge e;
            e.axis = 0;
            e.block_lo = block(bi - 1, bj);
            e.block_hi = block(bi, bj);
            const int i = bi * mx;
            for (int j = bj * my; j < (bj + 1) * my; ++j)
                e.fine_edges.push_back(fine.xedge(i, j));
            interior_edges.push_back(std::move(e));
        }
    for (int bj = 1; bj < cny; ++bj)
        for (int bi = 0; bi < cnx; ++bi) {
            CoarseEdge e;
            e.axis = 1;
            e.block_lo = block(bi, bj - 1);
            e.block_hi = block(bi, bj);
            const int j = bj * my;
            for (int i = bi * mx; i < (bi + 1) * mx; ++i)
                e.fine_edges.push_back(fine.yedge(i, j));
            interior_edges.push_back(std::move(e));
        }
}

void CoarsePartition::block_rect(int b, int& i0, int& i1, int& j0, int& j1) const {
    const int mx = fine.nx / cnx, my = fine.ny / cny;
    const int bi = b % cnx, bj = b / cnx;
    i0 = bi * mx;
    i1 = i0 + mx;
    j0 = bj * my;
    j1 = j0 + my;
}

BlockWeights make_block_weights(const CoarsePartition& part, const Eigen::VectorXd& source) {
    const int n = part.fine.cell_count();
    BlockWeights weights;
    weights.cell_weight.resize(n);
    const double area = part.fine.cell_area();
    for (int b = 0; b < part.block_count(); ++b) {
        const auto& cells = part.block_cells[b];
        double net = 0.0, mass = 0.0;
        if (source.size() == n)
            for (int c : cells) {
                net += source[c] * area;
                mass += std::abs(source[c]) * area;
            }
        if (std::abs(net) > 1e-12 * std::max(1.0, mass)) {
            // Divergence follows the source profile in blocks carrying wells
            // so the span can represent the fine solution there.
            for (int c : cells) weights.cell_weight[c] = source[c] * area / net;
        } else {
            for (int c : cells) weights.cell_weight[c] = 1.0 / cells.size();
        }
    }
    return weights;
}

MsBasis build_ms_basis(const CoarsePartition& part, int edge_index, const Eigen::VectorXd& perm,
                       const Eigen::VectorXd& boundary_data, const BlockWeights& weights) {
    if (edge_index < 0 || edge_index >= static_cast<int>(part.interior_edges.size()))
        throw InvalidArgument("build_ms_basis: edge index out of range");
    const CoarseEdge& edge = part.interior_edges[edge_index];
    const int nf = static_cast<int>(edge.fine_edges.size());
    if (boundary_data.size() != nf)
        throw InvalidArgument("build_ms_basis: boundary data length mismatch");
    const double net = boundary_data.sum();
    if (std::abs(net) <= 1e-12 * std::max(1.0, boundary_data.cwiseAbs().sum()))
        throw InvalidArgument("build_ms_basis: boundary data has vanishing net flux");
    const Eigen::VectorXd profile = boundary_data / net;  // unit total, lo -> hi

    const StructuredGrid& g = part.fine;
    Eigen::VectorXd pressure = Eigen::VectorXd::Zero(g.cell_count());
    Eigen::VectorXd flux = Eigen::VectorXd::Zero(g.n_edges());

    std::unordered_map<int, double> prescribed;
    for (int k = 0; k < nf; ++k) prescribed[edge.fine_edges[k]] = profile[k];

    for (int side = 0; side < 2; ++side) {
        const int b = side == 0 ? edge.block_lo : edge.block_hi;
        const double sign = side == 0 ? 1.0 : -1.0;
        int i0, i1, j0, j1;
        part.block_rect(b, i0, i1, j0, j1);
        const int nb = (i1 - i0) * (j1 - j0);
        Eigen::VectorXd src(nb);
        int t = 0;
        for (int j = j0; j < j1; ++j)
            for (int i = i0; i < i1; ++i) src[t++] = sign * weights.cell_weight[g.cell(i, j)];
        solve_rect_neumann(g, i0, i1, j0, j1, perm, src, prescribed, pressure, flux);
    }
    for (int k = 0; k < nf; ++k) flux[edge.fine_edges[k]] = profile[k];

    MsBasis basis;
    basis.edge_index = edge_index;
    for (int e = 0; e < g.n_edges(); ++e)
        if (flux[e] != 0.0) basis.flux.emplace_back(e, flux[e]);
    return basis;
}

MsBasisSet assemble_ms_basis_set(const CoarsePartition& part, const Eigen::VectorXd& perm,
                                 BasisFlavor flavor, const Eigen::VectorXd& global_flux,
                                 const BlockWeights& weights) {
    MsBasisSet set;
    set.flavor = flavor;
    const int ne = static_cast<int>(part.interior_edges.size());
    set.basis.reserve(ne);
    for (int e = 0; e < ne; ++e) {
        const CoarseEdge& edge = part.interior_edges[e];
        const int nf = static_cast<int>(edge.fine_edges.size());
        Eigen::VectorXd data = Eigen::VectorXd::Ones(nf);
        if (flavor == BasisFlavor::global) {
            if (global_flux.size() != part.fine.n_edges())
                throw InvalidArgument("assemble_ms_basis_set: global flux field size mismatch");
            for (int k = 0; k < nf; ++k) data[k] = global_flux[edge.fine_edges[k]];
            const double net = data.sum();
            if (std::abs(net) <= 1e-12 * std::max(1.0, data.cwiseAbs().sum())) {
                // Stagnation face: normalization undefined, use the constant
                // normal profile instead.
                data.setOnes();
                set.fallback_edges.push_back(e);
            }
        }
        set.basis.push_back(build_ms_basis(part, e, perm, data, weights));
    }
    return set;
}

CoarseSolution solve_coarse(const CoarsePartition& part, const MsBasisSet& set,
                            const Eigen::VectorXd& coeff, const Eigen::VectorXd& source) {
    const StructuredGrid& g = part.fine;
    const int ne = static_cast<int>(set.basis.size());
    const int nk = part.block_count();
    if (ne != static_cast<int>(part.interior_edges.size()))
        throw InvalidArgument("solve_coarse: basis set does not match partition");
    if (coeff.size() != g.cell_count() || source.size() != g.cell_count())
        throw InvalidArgument("solve_coarse: field size mismatch");
    if ((coeff.array() <= 0.0).any())
        throw InvalidArgument("solve_coarse: coefficient must be positive everywhere");

    // Edge resistances of the lumped mixed inner product for the current
    // coefficient.
    auto resistance = [&](int e) {
        if (e < g.n_xedges()) {
            const int i = e % (g.nx + 1), j = e / (g.nx + 1);
            if (g.xedge_is_boundary(i)) return 0.0;
            return g.hx() / (g.hy() * harmonic(coeff[g.cell(i - 1, j)], coeff[g.cell(i, j)]));
        }
        const int e2 = e - g.n_xedges();
        const int i = e2 % g.nx, j = e2 / g.nx;
        if (g.yedge_is_boundary(j)) return 0.0;
        return g.hy() / (g.hx() * harmonic(coeff[g.cell(i, j - 1)], coeff[g.cell(i, j)]));
    };

    // Fine edge -> basis entries sharing it.
    std::unordered_map<int, std::vector<std::pair<int, double>>> edge_users;
    for (int b = 0; b < ne; ++b)
        for (const auto& [e, v] : set.basis[b].flux) edge_users[e].emplace_back(b, v);

    Eigen::MatrixXd A = Eigen::MatrixXd::Zero(ne, ne);
    for (const auto& [e, users] : edge_users) {
        const double r = resistance(e);
        if (r == 0.0) continue;
        for (std::size_t a = 0; a < users.size(); ++a)
            for (std::size_t b = a; b < users.size(); ++b) {
                const double v = r * users[a].second * users[b].second;
                A(users[a].first, users[b].first) += v;
                if (a != b) A(users[b].first, users[a].first) += v;
            }
    }

    Eigen::VectorXd block_source = Eigen::VectorXd::Zero(nk);
    const double area = g.cell_area();
    for (int c = 0; c < g.cell_count(); ++c) block_source[part.block_of_cell[c]] += source[c] * area;

    // Saddle system with block 0 pressure pinned to zero.
    const int nu = ne + nk - 1;
    Eigen::MatrixXd S = Eigen::MatrixXd::Zero(nu, nu);
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(nu);
    S.topLeftCorner(ne, ne) = A;
    for (int b = 0; b < ne; ++b) {
        const CoarseEdge& edge = part.interior_edges[b];
        // (div psi_b, 1_K) = +1 on the low block, -1 on the high block.
        if (edge.block_lo != 0) {
            S(b, ne + edge.block_lo - 1) = -1.0;
            S(ne + edge.block_lo - 1, b) = 1.0;
        }
        if (edge.block_hi != 0) {
            S(b, ne + edge.block_hi - 1) = 1.0;
            S(ne + edge.block_hi - 1, b) = -1.0;
        }
    }
    for (int k = 1; k < nk; ++k) rhs[ne + k - 1] = block_source[k];

    Eigen::FullPivLU<Eigen::MatrixXd> lu(S);
    if (!lu.isInvertible()) throw SolverError("solve_coarse: singular coarse saddle system");
    const Eigen::VectorXd x = lu.solve(rhs);
    const double res = (S * x - rhs).cwiseAbs().maxCoeff();
    if (!(res <= 1e-10 * std::max(1.0, rhs.cwiseAbs().maxCoeff())))
        throw SolverError("solve_coarse: residual " + std::to_string(res) + " exceeds tolerance");

    CoarseSolution sol;
    sol.coarse_flux = x.head(ne);
    sol.block_pressure = Eigen::VectorXd::Zero(nk);
    for (int k = 1; k < nk; ++k) sol.block_pressure[k] = x[ne + k - 1];
    sol.block_pressure.array() -= sol.block_pressure.mean();
    sol.fine_flux = Eigen::VectorXd::Zero(g.n_edges());
    for (int b = 0; b < ne; ++b)
        for (const auto& [e, v] : set.basis[b].flux) sol.fine_flux[e] += sol.coarse_flux[b] * v;
    return sol;
}

void write_field_csv(std::ostream& os, const StructuredGrid& grid, const Eigen::VectorXd& field) {
    if (field.size() != grid.cell_count())
        throw InvalidArgument("write_field_csv: field size mismatch");
    os << "nx,ny\n" << grid.nx << ',' << grid.ny << '\n';
    os.precision(17);
    for (int c = 0; c < grid.cell_count(); ++c) os << field[c] << '\n';
}

Eigen::VectorXd read_field_csv(std::istream& is, int& nx, int& ny) {
    std::string line;
    if (!std::getline(is, line) || line.rfind("nx,ny", 0) != 0)
        throw IoError("field CSV: missing nx,ny header");
    char comma;
    if (!std::getline(is, line)) throw IoError("field CSV: missing dimensions");
    std::istringstream dims(line);
    if (!(dims >> nx >> comma >> ny) || nx < 1 || ny < 1)
        throw IoError("field CSV: bad dimensions line");
    Eigen::VectorXd field(static_cast<Eigen::Index>(nx) * ny);
    for (Eigen::Index c = 0; c < field.size(); ++c) {
        if (!std::getline(is, line)) throw IoError("field CSV: truncated");
        field[c] = std::stod(line);
    }
    return field;
}

void write_field_vtk(std::ostream& os, const StructuredGrid& grid, const Eigen::VectorXd& field,
                     const std::string& name) {
    if (field.size() != grid.cell_count())
        throw InvalidArgument("write_field_vtk: field size mismatch");
    os << "# vtk DataFile Version 3.0\n" << name << "\nASCII\nDATASET STRUCTURED_POINTS\n";
    os << "DIMENSIONS " << grid.nx + 1 << ' ' << grid.ny + 1 << " 1\n";
    os << "ORIGIN 0 0 0\nSPACING " << grid.hx() << ' ' << grid.hy() << " 1\n";
    os << "CELL_DATA " << grid.cell_count() << "\nSCALARS " << name << " double 1\n";
    os << "LOOKUP_TABLE default\n";
    os.precision(12);
    for (int c = 0; c < grid.cell_count(); ++c) os << field[c] << '\n';
}

}  // namespace msflow
