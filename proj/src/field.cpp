#include "msflow/field.hpp"

#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>

namespace msflow {

Eigen::MatrixXd build_covariance(const StructuredGrid& grid, const CovarianceSpec& spec) {
    spec.validate();
    const int n = grid.cell_count();
    Eigen::VectorXd cx(n), cy(n);
    for (int j = 0; j < grid.ny; ++j)
        for (int i = 0; i < grid.nx; ++i) {
            cx[grid.cell(i, j)] = grid.center_x(i);
            cy[grid.cell(i, j)] = grid.center_y(j);
        }
    const double ax = 1.0 / (2.0 * spec.corr_x * spec.corr_x);
    const double ay = 1.0 / (2.0 * spec.corr_y * spec.corr_y);
    Eigen::MatrixXd cov(n, n);
    for (int r = 0; r < n; ++r) {
        cov(r, r) = spec.sigma2;
        for (int c = r + 1; c < n; ++c) {
            const double dx = cx[r] - cx[c];
            const double dy = cy[r] - cy[c];
            const double v = spec.sigma2 * std::exp(-dx * dx * ax - dy * dy * ay);
            cov(r, c) = v;
            cov(c, r) = v;
        }
    }
    return cov;
}

KLBasis compute_kle(const Eigen::MatrixXd& cov, const StructuredGrid& grid, int n_terms) {
    const int n = grid.cell_count();
    if (cov.rows() != n || cov.cols() != n)
        throw InvalidArgument("compute_kle: covariance size does not match grid");
    if (n_terms < 1 || n_terms > n)
        throw InvalidArgument("compute_kle: n_terms must be in [1, n_cells]");

    // Cell-area quadrature turns the integral eigenproblem into the
    // symmetric problem for w*C (uniform cells), with eigenvectors rescaled
    // to unit discrete L2 norm.
    const double w = grid.cell_area();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(w * cov);
    if (solver.info() != Eigen::Success) throw EigenSolveError("compute_kle: eigen-solver failed");

    const Eigen::VectorXd& all_vals = solver.eigenvalues();  // ascending
    const double trace = all_vals.sum();
    const double floor = -1e-10 * cov.trace() * w;  // = -1e-10 * sigma2 * |D|
    if (all_vals[0] < floor)
        throw NonPsdError("compute_kle: eigenvalue " + std::to_string(all_vals[0]) +
                          " below clipping floor " + std::to_string(floor));

    KLBasis klb;
    klb.nx = grid.nx;
    klb.ny = grid.ny;
    klb.lx = grid.lx;
    klb.ly = grid.ly;
    klb.total_trace = trace;
    klb.eigenvalues.resize(n_terms);
    klb.eigenfunctions.resize(n_terms, n);
    klb.mean_field = Eigen::VectorXd::Zero(n);

    const double inv_sqrt_w = 1.0 / std::sqrt(w);
    for (int t = 0; t < n_terms; ++t) {
        const int src = n - 1 - t;  // descending order
        klb.eigenvalues[t] = std::max(0.0, all_vals[src]);
        Eigen::VectorXd b = solver.eigenvectors().col(src) * inv_sqrt_w;
        // Deterministic sign: largest-magnitude entry positive.
        int arg = 0;
        b.cwiseAbs().maxCoeff(&arg);
        if (b[arg] < 0.0) b = -b;
        klb.eigenfunctions.row(t) = b.transpose();
    }
    return klb;
}

double energy_fraction(const KLBasis& klb, int m) {
    if (m < 0 || m > klb.n_terms())
        throw InvalidArgument("energy_fraction: m must be in [0, n_terms]");
    if (m == 0) return 0.0;
    return klb.eigenvalues.head(m).sum() / klb.total_trace;
}

Eigen::VectorXd realize_log_field(const KLBasis& klb, const Eigen::VectorXd& theta) {
    if (theta.size() != klb.n_terms())
        throw InvalidArgument("realize_field: theta length must equal n_terms");
    for (int i = 0; i < theta.size(); ++i)
        if (std::abs(theta[i]) > 1.0 + 1e-12)
            throw ThetaRangeError("realize_field: theta component " + std::to_string(i) +
                                  " outside [-1,1]");
    Eigen::VectorXd a = klb.mean_field;
    for (int t = 0; t < klb.n_terms(); ++t)
        a += (std::sqrt(klb.eigenvalues[t]) * theta[t]) * klb.eigenfunctions.row(t).transpose();
    return a;
}

PermField realize_field(const KLBasis& klb, const Eigen::VectorXd& theta) {
    PermField field;
    field.values = realize_log_field(klb, theta).array().exp();
    return field;
}

Eigen::VectorXd channelized_mean_field(const StructuredGrid& grid) {
    // Three tilted high-permeability ridges spanning the domain in x.
    struct Ridge {
        double amp, y0, tilt, width;
    };
    const Ridge ridges[3] = {{2.0, 0.20, 0.15, 0.05}, {1.6, 0.50, -0.10, 0.07},
                             {2.2, 0.80, 0.05, 0.05}};
    Eigen::VectorXd mean(grid.cell_count());
    for (int j = 0; j < grid.ny; ++j)
        for (int i = 0; i < grid.nx; ++i) {
            const double x = grid.center_x(i) / grid.lx;
            const double y = grid.center_y(j) / grid.ly;
            double v = 0.0;
            for (const Ridge& r : ridges) {
                const double d = y - (r.y0 + r.tilt * (x - 0.5));
                v += r.amp * std::exp(-d * d / (2.0 * r.width * r.width));
            }
            mean[grid.cell(i, j)] = v;
        }
    return mean;
}

namespace {

constexpr char kMagic[8] = {'M', 'S', 'F', 'K', 'L', 'B', '0', '1'};

void write_bytes(std::ostream& os, const void* p, std::size_t n) {
    os.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
}

void read_bytes(std::istream& is, void* p, std::size_t n) {
    is.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
    if (!is) throw IoError("KL basis file truncated");
}

}  // namespace

void save_kl_basis(const std::string& path, const KLBasis& klb) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw IoError("cannot open " + path + " for writing");
    write_bytes(os, kMagic, sizeof(kMagic));
    const std::int64_t dims[3] = {klb.nx, klb.ny, klb.n_terms()};
    write_bytes(os, dims, sizeof(dims));
    const double scal[3] = {klb.lx, klb.ly, klb.total_trace};
    write_bytes(os, scal, sizeof(scal));
    write_bytes(os, klb.eigenvalues.data(), sizeof(double) * klb.n_terms());
    write_bytes(os, klb.mean_field.data(), sizeof(double) * klb.n_cells());
    for (int t = 0; t < klb.n_terms(); ++t) {
        const Eigen::VectorXd row = klb.eigenfunctions.row(t).transpose();
        write_bytes(os, row.data(), sizeof(double) * klb.n_cells());
    }
    if (!os) throw IoError("write failed for " + path);
}

KLBasis load_kl_basis(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open " + path);
    char magic[8];
    read_bytes(is, magic, sizeof(magic));
    if (std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
        throw IoError(path + " is not a KL basis file");
    std::int64_t dims[3];
    read_bytes(is, dims, sizeof(dims));
    double scal[3];
    read_bytes(is, scal, sizeof(scal));
    KLBasis klb;
    klb.nx = static_cast<int>(dims[0]);
    klb.ny = static_cast<int>(dims[1]);
    const int n_terms = static_cast<int>(dims[2]);
    klb.lx = scal[0];
    klb.ly = scal[1];
    klb.total_trace = scal[2];
    if (klb.nx < 1 || klb.ny < 1 || n_terms < 1) throw IoError(path + ": corrupt header");
    const int n = klb.nx * klb.ny;
    klb.eigenvalues.resize(n_terms);
    read_bytes(is, klb.eigenvalues.data(), sizeof(double) * n_terms);
    klb.mean_field.resize(n);
    read_bytes(is, klb.mean_field.data(), sizeof(double) * n);
    klb.eigenfunctions.resize(n_terms, n);
    for (int t = 0; t < n_terms; ++t) {
        Eigen::VectorXd row(n);
        read_bytes(is, row.data(), sizeof(double) * n);
        klb.eigenfunctions.row(t) = row.transpose();
    }
    return klb;
}

}  // namespace msflow
