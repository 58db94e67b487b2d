#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "msflow/field.hpp"
#include "msflow/hdmr.hpp"
#include "msflow/pressure.hpp"
#include "msflow/transport.hpp"

namespace msflow {

enum class MethodKind {
    mfem_full,
    lmsfem_full,
    gmsfem_full,
    lmsfem_hybrid,
    gmsfem_hybrid,
    lmsfem_adaptive,
    gmsfem_adaptive,
};

std::string method_name(MethodKind kind);
MethodKind method_from_name(const std::string& name);

enum class SensitivityQoI { saturation, watercut };

struct ExperimentConfig {
    // Physical grids.
    int fine_nx = 60, fine_ny = 60;
    int coarse_nx = 6, coarse_ny = 6;
    double lx = 1.0, ly = 1.0;
    // Random field.
    CovarianceSpec covariance;
    int n_terms = 20;
    std::string mean_field = "zero";  // zero | channelized
    std::string distribution = "uniform";
    // Stochastic discretization.
    double zeta = 0.9;
    int level = 2;
    int level_inactive = 2;
    int adaptive_order = 2;
    std::uint64_t node_budget = kDefaultNodeBudget;
    SensitivityQoI sensitivity_qoi = SensitivityQoI::saturation;
    // Flow model and clock.
    FracFlowModel flow;
    double dt_pvi = 0.02;
    double t_end_pvi = 0.4;
    std::vector<double> snapshots = {0.4};
    double well_rate = 1.0;
    // Execution.
    MethodKind method = MethodKind::mfem_full;
    std::string output_dir = "out";
    std::string cache_dir;  // empty: no caching; env MSFLOW_CACHE overrides
    int workers = 0;        // 0: hardware concurrency
    std::uint64_t seed = 20240901;

    void validate() const;
};

/// Strict parser: unknown keys anywhere in the document are rejected.
ExperimentConfig load_config(const std::string& path);
void save_config(const std::string& path, const ExperimentConfig& config);

/// Layout of the flat QoI vector produced by one model run: saturation
/// fields at the snapshot times followed by the water-cut series.
struct QoILayout {
    int n_cells = 0;
    std::vector<double> snapshot_pvis;
    int n_watercut = 0;  // t_end/dt + 1 samples including t = 0

    int dim() const { return static_cast<int>(snapshot_pvis.size()) * n_cells + n_watercut; }
    int snapshot_offset(int s) const { return s * n_cells; }
    int watercut_offset() const { return static_cast<int>(snapshot_pvis.size()) * n_cells; }
};

/// Single-phase global velocity library: fine flux fields at the 1-D
/// collocation nodes of every dimension plus the anchor field, keyed by
/// (dimension, node index within the level's rule). Node 0 coordinates are
/// shared across dimensions through the anchor entry.
struct GlobalVelocityLibrary {
    int level = 2;
    Eigen::VectorXd anchor_flux;
    // (dim, rule node index) -> flux field; center index maps to anchor.
    std::map<std::pair<int, int>, Eigen::VectorXd> entries;

    const Eigen::VectorXd& lookup(int dim, int node_index) const;
    /// 1-D interpolation of the library fluxes of `dim` at theta.
    Eigen::VectorXd interpolate_dim(int dim, double theta) const;
};

struct LibraryBuildInfo {
    int solves_performed = 0;  // fresh fine solves (cache misses)
    int entries = 0;
};

/// Builds (or loads from cache) the library for all dimensions at the
/// union level max(level, level_inactive).
GlobalVelocityLibrary precompute_global_library(const ExperimentConfig& config,
                                                const KLBasis& klb, LibraryBuildInfo* info = nullptr);

struct PhaseTimings {
    double precompute_s = 0.0;
    double solves_s = 0.0;
    double stats_s = 0.0;
};

struct QoIStats {
    MethodKind method = MethodKind::mfem_full;
    QoILayout layout;
    Eigen::VectorXd mean;  // layout.dim()
    Eigen::VectorXd std_dev;
    Eigen::VectorXd variance_raw;
    std::uint64_t model_solves = 0;      // ledger per the counting convention
    std::uint64_t unique_solves = 0;     // deduplicated actual runs
    std::uint64_t interpolation_count = 0;
    int active_count = 0;                // J (HDMR methods)
    std::vector<int> active;             // selected dimensions
    PhaseTimings timings;

    Eigen::VectorXd mean_saturation(int snapshot) const;
    Eigen::VectorXd std_saturation(int snapshot) const;
    WaterCutSeries mean_watercut(double dt_pvi) const;
    WaterCutSeries std_watercut(double dt_pvi) const;
};

/// Builds the KL basis for the configured covariance (with the configured
/// mean field), loading/saving through the cache directory when set.
KLBasis build_or_load_kle(const ExperimentConfig& config);

QoIStats run_experiment(const ExperimentConfig& config, MethodKind method);

/// Sensitivity screening with the configured scalar functional; the
/// returned slices (per-dimension 1-D projected values) can seed the
/// decomposition builds.
struct SensitivityPass {
    SensitivityReport report;
    Eigen::VectorXd f0;
    std::vector<ComponentGrid> slices;
    std::vector<int> slice_dims;
    std::uint64_t unique_solves = 0;
};

struct ErrorReport {
    double mean_sat = 0.0;   // relative L1 over the domain at the pvi time
    double std_sat = 0.0;
    double mean_watercut = 0.0;  // relative L2 over the PVI interval
    double std_watercut = 0.0;
};

ErrorReport relative_errors(const QoIStats& reference, const QoIStats& test, double pvi);

/// Output artifacts under dir: sat_{mean,std}_<pvi>.csv,
/// watercut_{mean,std}.csv, ledger.csv. Writes to temporaries first and
/// renames, so partial runs never clobber completed artifacts.
void write_qoi_stats(const std::string& dir, const QoIStats& stats, const ExperimentConfig& config);
QoIStats read_qoi_stats(const std::string& dir, const ExperimentConfig& config);

void write_error_report(const std::string& path, const ErrorReport& report);

}  // namespace msflow
