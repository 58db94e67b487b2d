#include "msflow/transport.hpp"

#include <array>
#include <cmath>

#include <Eigen/Sparse>
#include <Eigen/SparseLU>

namespace msflow {

void FracFlowModel::fractional_flow(double s, double& fw, double& dfw) const {
    if (s < -1e-12 || s > 1.0 + 1e-12)
        throw InvalidArgument("fractional_flow: saturation outside [0,1]");
    s = std::min(1.0, std::max(0.0, s));
    if (kind == Kind::linear) {
        fw = s;
        dfw = 1.0;
        return;
    }
    const double m = viscosity_ratio;
    const double a = s * s;
    const double b = m * (1.0 - s) * (1.0 - s);
    const double denom = a + b;
    if (denom == 0.0) {  // s = 0 with m = 0 cannot happen (ratio > 0)
        fw = 0.0;
        dfw = 0.0;
        return;
    }
    fw = a / denom;
    // d/ds [s^2 / (s^2 + m(1-s)^2)]
    dfw = (2.0 * s * b + a * 2.0 * m * (1.0 - s)) / (denom * denom);
}

double FracFlowModel::total_mobility(double s) const {
    if (s < -1e-12 || s > 1.0 + 1e-12)
        throw InvalidArgument("total_mobility: saturation outside [0,1]");
    s = std::min(1.0, std::max(0.0, s));
    if (kind == Kind::linear) return 1.0;
    return s * s / viscosity_ratio + (1.0 - s) * (1.0 - s);
}

Wells Wells::corner_five_spot(const StructuredGrid& grid, double rate_) {
    Wells w;
    w.injector = grid.cell(0, grid.ny - 1);
    w.producer = grid.cell(grid.nx - 1, 0);
    w.rate = rate_;
    return w;
}

Eigen::VectorXd Wells::source_density(const StructuredGrid& grid) const {
    Eigen::VectorXd q = Eigen::VectorXd::Zero(grid.cell_count());
    q[injector] += rate / grid.cell_area();
    q[producer] -= rate / grid.cell_area();
    return q;
}

namespace {

struct UpwindStencil {
    // Directed interior edges as (upwind cell, downwind cell, |flux|); the
    // pattern is fixed by the flux signs for the whole step.
    std::vector<std::array<int, 2>> cells;
    std::vector<double> magnitude;
};

UpwindStencil build_stencil(const StructuredGrid& g, const Eigen::VectorXd& flux) {
    UpwindStencil st;
    st.cells.reserve(g.n_edges());
    st.magnitude.reserve(g.n_edges());
    auto add = [&](int c_lo, int c_hi, double f) {
        if (f == 0.0) return;
        if (f > 0.0)
            st.cells.push_back({c_lo, c_hi});
        else
            st.cells.push_back({c_hi, c_lo});
        st.magnitude.push_back(std::abs(f));
    };
    for (int j = 0; j < g.ny; ++j)
        for (int i = 1; i < g.nx; ++i) add(g.cell(i - 1, j), g.cell(i, j), flux[g.xedge(i, j)]);
    for (int j = 1; j < g.ny; ++j)
        for (int i = 0; i < g.nx; ++i) add(g.cell(i, j - 1), g.cell(i, j), flux[g.yedge(i, j)]);
    return st;
}

// One implicit step at fixed dt; returns false on Newton failure.
bool implicit_step(const StructuredGrid& g, const UpwindStencil& st,
                   const Eigen::VectorXd& inflow, const Eigen::VectorXd& outflow,
                   const Eigen::VectorXd& s_old, double dt, const FracFlowModel& model,
                   const TransportOptions& opts, Eigen::VectorXd& s_out) {
    const int n = g.cell_count();
    const double acc = g.cell_area() / dt;
    // Residual scale: accumulation plus total through-flow.
    double scale = acc * n;
    for (double m : st.magnitude) scale += m;
    scale += inflow.sum() + outflow.sum();

    Eigen::VectorXd s = s_old;
    Eigen::VectorXd residual(n), fw(n), dfw(n);
    Eigen::SparseMatrix<double> jac(n, n);
    std::vector<Eigen::Triplet<double>> trip;
    Eigen::SparseLU<Eigen::SparseMatrix<double>> solver;

    for (int iter = 0; iter < opts.max_newton_iters; ++iter) {
        for (int c = 0; c < n; ++c) model.fractional_flow(s[c], fw[c], dfw[c]);
        residual = acc * (s - s_old);
        residual -= inflow;  // injected fluid is water
        residual += outflow.cwiseProduct(fw);
        for (std::size_t e = 0; e < st.cells.size(); ++e) {
            const double m = st.magnitude[e];
            const int up = st.cells[e][0], down = st.cells[e][1];
            residual[up] += m * fw[up];
            residual[down] -= m * fw[up];
        }
        const double rnorm = residual.cwiseAbs().maxCoeff();
        if (rnorm <= opts.newton_tol * std::max(1.0, scale)) {
            s_out = s;
            return true;
        }

        trip.clear();
        for (int c = 0; c < n; ++c)
            trip.emplace_back(c, c, acc + outflow[c] * dfw[c]);
        for (std::size_t e = 0; e < st.cells.size(); ++e) {
            const double m = st.magnitude[e];
            const int up = st.cells[e][0], down = st.cells[e][1];
            trip.emplace_back(up, up, m * dfw[up]);
            trip.emplace_back(down, up, -m * dfw[up]);
        }
        jac.setFromTriplets(trip.begin(), trip.end());
        if (iter == 0) solver.analyzePattern(jac);
        solver.factorize(jac);
        if (solver.info() != Eigen::Success) return false;
        s -= solver.solve(residual);
        // Keep iterates inside the physical box; the converged solution is
        // interior, clipping only guards transient overshoot.
        s = s.cwiseMax(0.0).cwiseMin(1.0);
    }
    return false;
}

Eigen::VectorXd advance_fixed_flux(const StructuredGrid& g, const UpwindStencil& st,
                                   const Eigen::VectorXd& inflow, const Eigen::VectorXd& outflow,
                                   const Eigen::VectorXd& s0, double dt,
                                   const FracFlowModel& model, const TransportOptions& opts,
                                   int depth) {
    Eigen::VectorXd s_new;
    if (implicit_step(g, st, inflow, outflow, s0, dt, model, opts, s_new)) {
        for (int c = 0; c < s_new.size(); ++c) {
            if (s_new[c] < -1e-12 || s_new[c] > 1.0 + 1e-12)
                throw SolverError("transport: accepted step violates saturation bounds");
            s_new[c] = std::min(1.0, std::max(0.0, s_new[c]));
        }
        return s_new;
    }
    if (depth >= opts.max_dt_halvings)
        throw SolverError("transport: Newton failed after " + std::to_string(depth) +
                          " step halvings");
    const Eigen::VectorXd mid =
        advance_fixed_flux(g, st, inflow, outflow, s0, 0.5 * dt, model, opts, depth + 1);
    return advance_fixed_flux(g, st, inflow, outflow, mid, 0.5 * dt, model, opts, depth + 1);
}

}  // namespace

Eigen::VectorXd advance_saturation(const StructuredGrid& grid, const Eigen::VectorXd& saturation,
                                   const Eigen::VectorXd& flux, double dt,
                                   const FracFlowModel& model, const TransportOptions& opts) {
    if (saturation.size() != grid.cell_count())
        throw InvalidArgument("advance_saturation: saturation size mismatch");
    if (flux.size() != grid.n_edges())
        throw InvalidArgument("advance_saturation: flux size mismatch");
    if (!(dt > 0.0)) throw InvalidArgument("advance_saturation: dt must be positive");

    // Sources consistent with the given flux: its per-cell divergence.
    const Eigen::VectorXd div = flux_divergence(grid, flux);
    const Eigen::VectorXd inflow = div.cwiseMax(0.0);
    const Eigen::VectorXd outflow = (-div).cwiseMax(0.0);
    const UpwindStencil st = build_stencil(grid, flux);
    return advance_fixed_flux(grid, st, inflow, outflow, saturation, dt, model, opts, 0);
}

double water_cut(const Eigen::VectorXd& saturation, const FracFlowModel& model,
                 int producer_cell) {
    if (producer_cell < 0 || producer_cell >= saturation.size())
        throw InvalidArgument("water_cut: producer cell out of range");
    return model.fw(saturation[producer_cell]);
}

double pvi_clock(double rate, double pore_volume, double t) {
    if (!(pore_volume > 0.0)) throw InvalidArgument("pvi_clock: pore volume must be positive");
    return rate * t / pore_volume;
}

ImpesResult impes_run(const StructuredGrid& grid, const PressureBackend& pressure,
                      const FracFlowModel& model, double dt_pvi, double t_end_pvi,
                      const std::vector<double>& snapshot_pvis, const Wells& wells,
                      const TransportOptions& opts) {
    if (!(dt_pvi > 0.0)) throw InvalidArgument("impes_run: dt must be positive");
    if (t_end_pvi < 0.0) throw InvalidArgument("impes_run: end time must be non-negative");

    ImpesResult result;
    result.watercut.producer_cell = wells.producer;
    result.watercut.pore_volume = grid.domain_area();

    Eigen::VectorXd s = Eigen::VectorXd::Zero(grid.cell_count());
    Eigen::VectorXd mobility(grid.cell_count());
    for (int c = 0; c < grid.cell_count(); ++c) mobility[c] = model.total_mobility(s[c]);
    Eigen::VectorXd flux = pressure(mobility);
    result.pressure_solves = 1;

    result.watercut.pvi.push_back(0.0);
    result.watercut.value.push_back(water_cut(s, model, wells.producer));

    const int n_steps = static_cast<int>(std::llround(t_end_pvi / dt_pvi));
    if (std::abs(n_steps * dt_pvi - t_end_pvi) > 1e-9 * std::max(1.0, t_end_pvi))
        throw InvalidArgument("impes_run: end time must be a multiple of the step");

    auto snap_step = [&](double pvi) { return static_cast<int>(std::llround(pvi / dt_pvi)); };
    for (double pvi : snapshot_pvis)
        if (std::abs(snap_step(pvi) * dt_pvi - pvi) > 1e-9 * std::max(1.0, pvi) ||
            snap_step(pvi) > n_steps || pvi < 0.0)
            throw InvalidArgument("impes_run: snapshot time not on the step grid");
    if (n_steps == 0) return result;

    // PVI with unit pore volume and unit rate equals simulation time; the
    // step in physical time follows from the clock definition.
    const double dt = dt_pvi * result.watercut.pore_volume / wells.rate;

    for (int step = 1; step <= n_steps; ++step) {
        if (!model.is_linear() && step > 1) {
            for (int c = 0; c < grid.cell_count(); ++c) mobility[c] = model.total_mobility(s[c]);
            flux = pressure(mobility);
            ++result.pressure_solves;
        }
        s = advance_saturation(grid, s, flux, dt, model, opts);
        const double pvi = step * dt_pvi;
        result.watercut.pvi.push_back(pvi);
        result.watercut.value.push_back(water_cut(s, model, wells.producer));
        for (double want : snapshot_pvis)
            if (snap_step(want) == step) result.snapshots.emplace_back(want, s);
    }
    return result;
}

}  // namespace msflow
