#pragma once

#include <functional>
#include <vector>

#include <Eigen/Dense>

#include "msflow/grid.hpp"

namespace msflow {

/// Water fractional-flow model. The linear kind has unit total mobility;
/// the quadratic kind uses lambda_w = S^2/mu_w, lambda_o = (1-S)^2/mu_o
/// with mu_w = ratio, mu_o = 1.
struct FracFlowModel {
    enum class Kind { linear, quadratic };
    Kind kind = Kind::linear;
    double viscosity_ratio = 0.1;  // mu_w / mu_o, quadratic only

    bool is_linear() const { return kind == Kind::linear; }

    /// f_w and its derivative at a saturation in [0,1].
    void fractional_flow(double s, double& fw, double& dfw) const;
    double fw(double s) const {
        double f, df;
        fractional_flow(s, f, df);
        return f;
    }
    /// Total mobility lambda(S).
    double total_mobility(double s) const;
};

/// Quarter five-spot wells: injection in the top-left cell, production in
/// the bottom-right cell, equal and opposite rates.
struct Wells {
    int injector = 0;
    int producer = 0;
    double rate = 1.0;

    static Wells corner_five_spot(const StructuredGrid& grid, double rate = 1.0);
    /// Per-cell rate density (sums to zero against cell areas).
    Eigen::VectorXd source_density(const StructuredGrid& grid) const;
};

struct TransportOptions {
    double newton_tol = 1e-12;  // on the max-norm of the scaled residual
    int max_newton_iters = 25;
    int max_dt_halvings = 10;
};

/// One implicit Euler step of first-order upwind transport driven by a
/// conservative edge-flux field. Cell sources are taken from the flux
/// divergence: cells with net outflow produce at the local fractional flow,
/// cells with net inflow inject pure water. Newton uses the analytic
/// derivative; non-convergence halves the step and substeps, up to
/// max_dt_halvings, then fails.
Eigen::VectorXd advance_saturation(const StructuredGrid& grid, const Eigen::VectorXd& saturation,
                                   const Eigen::VectorXd& flux, double dt,
                                   const FracFlowModel& model, const TransportOptions& opts = {});

/// Fraction of water in the produced fluid at the producer cell.
double water_cut(const Eigen::VectorXd& saturation, const FracFlowModel& model, int producer_cell);

/// Pore volumes injected after time t at a constant injection rate.
double pvi_clock(double rate, double pore_volume, double t);

struct WaterCutSeries {
    std::vector<double> pvi;
    std::vector<double> value;
    int producer_cell = 0;
    double pore_volume = 1.0;
};

/// Pressure backend: maps per-cell total mobility to a conservative edge
/// flux field (the permeability is owned by the backend).
using PressureBackend = std::function<Eigen::VectorXd(const Eigen::VectorXd& mobility)>;

struct ImpesResult {
    // Saturation fields keyed by the requested snapshot times (PVI).
    std::vector<std::pair<double, Eigen::VectorXd>> snapshots;
    WaterCutSeries watercut;
    int pressure_solves = 0;
};

/// Sequential pressure/transport loop in PVI time from S = 0. For the
/// linear model the velocity from t=0 is reused for every step; otherwise
/// the pressure backend is re-invoked each step with the updated mobility.
ImpesResult impes_run(const StructuredGrid& grid, const PressureBackend& pressure,
                      const FracFlowModel& model, double dt_pvi, double t_end_pvi,
                      const std::vector<double>& snapshot_pvis, const Wells& wells,
                      const TransportOptions& opts = {});

}  // namespace msflow
