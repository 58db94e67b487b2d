#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "msflow/sparsegrid.hpp"

namespace msflow {

/// Model evaluated at a stochastic point; returns a (possibly vector) QoI.
/// All decomposition formulas apply component-wise over shared node sets.
using Evaluator = std::function<Eigen::VectorXd(const Eigen::VectorXd&)>;

/// Anchor point of the anchored (cut) decomposition with its cached value.
struct Anchor {
    Eigen::VectorXd point;  // default: center of the cube
    Eigen::VectorXd value;  // f(point)
};

struct HdmrOptions {
    int workers = 1;
    std::uint64_t node_budget = kDefaultNodeBudget;
};

/// Values of f with all coordinates at the anchor except those in `dims`,
/// which run over the tensor structure of a sparse grid on the subspace.
struct ComponentGrid {
    std::vector<int> dims;   // original dimension indices, ascending
    SparseGrid grid;         // over dims.size() coordinates
    Eigen::MatrixXd values;  // grid.size() x qoi_dim
};

/// First-order variance screening result.
struct SensitivityReport {
    Eigen::VectorXd variances;  // per original dimension
    std::vector<int> order;     // dims sorted by descending variance (stable)
    double zeta = 0.0;
    int selected_count = 0;    // J
    std::vector<int> active;   // the J selected dims, ascending
};

/// Model-evaluation bookkeeping. `nominal` follows the counting convention
/// where the anchor run is +1 and center nodes shared through nesting are
/// not deduplicated; `unique_runs` is the deduplicated actual count.
struct EvalLedger {
    std::uint64_t nominal = 0;
    std::uint64_t unique_runs = 0;
};

enum class Framing { cut, anova };

/// Complete decomposition on the active dimensions plus first-order
/// components on the remaining ones.
///
/// In cut framing the stored blocks hold raw projected values and
/// evaluation subtracts (N-J) anchor values; in anova framing (after
/// cut_to_anova) the blocks hold re-centered components and no anchor
/// correction applies.
struct HybridDecomposition {
    int dim = 0;
    std::vector<int> active;  // ascending
    int level = 2;
    int level_inactive = 2;
    Eigen::VectorXd anchor_point;
    Eigen::VectorXd f0;
    ComponentGrid active_block;
    std::vector<ComponentGrid> inactive;  // one per dim not in active
    Framing framing = Framing::cut;
    Eigen::VectorXd f0_anova;  // set by cut_to_anova: E[f^cut]
    EvalLedger ledger;

    int qoi_dim() const { return static_cast<int>(f0.size()); }
    int active_count() const { return static_cast<int>(active.size()); }
};

/// Order-q truncation on the active set plus first-order components on the
/// rest. Stores projected values per subset; evaluation combines them with
/// collapsed inclusion-exclusion coefficients.
struct AdaptiveDecomposition {
    int dim = 0;
    std::vector<int> active;
    int order = 2;  // q
    int level = 2;
    int level_inactive = 2;
    Eigen::VectorXd anchor_point;
    Eigen::VectorXd f0;
    std::vector<ComponentGrid> subsets;  // all v in active, 1 <= |v| <= q
    std::vector<double> subset_coeff;    // collapsed coefficient per subset
    double empty_coeff = 1.0;            // collapsed coefficient on f0
    std::vector<ComponentGrid> inactive;
    EvalLedger ledger;

    int qoi_dim() const { return static_cast<int>(f0.size()); }
};

struct StatsResult {
    Eigen::VectorXd mean;
    Eigen::VectorXd variance;      // clipped at 0
    Eigen::VectorXd variance_raw;  // before clipping
    std::uint64_t interpolation_count = 0;
};

/// Embeds a subspace point into the full cube, all other slots at anchor.
Eigen::VectorXd embed_point(const Eigen::VectorXd& anchor, const std::vector<int>& dims,
                            const Eigen::VectorXd& sub);

/// Evaluates f over the sparse grid of the subspace spanned by `dims`
/// (remaining coordinates at the anchor). The center node reuses the
/// cached anchor value when supplied.
ComponentGrid project_onto_dims(const Evaluator& f, const Eigen::VectorXd& anchor,
                                const std::vector<int>& dims, int level,
                                const Eigen::VectorXd* f0 = nullptr,
                                const HdmrOptions& opts = {});

/// First-order component values f_i at the 1-D rule nodes (anchored
/// framing: f evaluated on the line through the anchor, minus f(anchor)).
/// The center-node row is exactly zero.
ComponentGrid first_order_component(const Evaluator& f, const Eigen::VectorXd& anchor,
                                    int dim_index, int level, const Eigen::VectorXd* f0 = nullptr,
                                    const HdmrOptions& opts = {});

/// Picks the smallest leading set of dimensions whose cumulative share of
/// total first-order variance reaches zeta. Ties keep original order.
SensitivityReport sensitivity_select(const Eigen::VectorXd& variances, double zeta);

/// Precomputed material shared between decompositions (the anchor value and
/// per-dimension first-order grids from a sensitivity pass can be reused).
struct HdmrReuse {
    const Eigen::VectorXd* f0 = nullptr;
    // 1-D projected-value grids by original dimension (level must match the
    // inactive level requested by the build).
    const std::vector<ComponentGrid>* slices = nullptr;
    const std::vector<int>* slice_dims = nullptr;
};

HybridDecomposition build_hybrid(const Evaluator& f, int dim, const std::vector<int>& active,
                                 int level, int level_inactive, const Eigen::VectorXd& anchor,
                                 const HdmrOptions& opts = {}, const HdmrReuse& reuse = {});

Eigen::VectorXd evaluate_hybrid(const HybridDecomposition& dec, const Eigen::VectorXd& point);

/// Mean and variance by direct summation over the decomposition components.
StatsResult hybrid_stats(const HybridDecomposition& dec);

/// Re-centers the components against the probability measure: first-order
/// parts get zero mean, the shift moves into the active block. The
/// represented function, its mean and its variance are unchanged.
HybridDecomposition cut_to_anova(const HybridDecomposition& dec);

AdaptiveDecomposition build_adaptive(const Evaluator& f, int dim, const std::vector<int>& active,
                                     int order, int level, int level_inactive,
                                     const Eigen::VectorXd& anchor, const HdmrOptions& opts = {},
                                     const HdmrReuse& reuse = {});

Eigen::VectorXd evaluate_adaptive(const AdaptiveDecomposition& dec, const Eigen::VectorXd& point);

/// Mean by component-wise quadrature; variance by interpolating every
/// component at each node of the full-dimension outer grid and applying
/// the quadrature variance formula. Records the interpolation count.
StatsResult adaptive_stats(const AdaptiveDecomposition& dec, const SparseGrid& outer_grid);

/// Collocation-point ledgers for the method family at a given level.
/// Hybrid and adaptive include +1 for the separate anchor run; `full` and
/// `truncated_q` follow the plain closed-form counts.
struct ComplexityLedger {
    std::uint64_t full = 0;
    std::uint64_t truncated_q = 0;
    std::uint64_t hybrid = 0;
    std::uint64_t adaptive = 0;
    // Leading-order approximations (2N^2, 13N^2, 2J^2+5(N-J), 13J^2+5N for
    // level 2) used for the coarse efficiency-ordering comparisons.
    double full_approx = 0.0;
    double truncated_q_approx = 0.0;
    double hybrid_approx = 0.0;
    double adaptive_approx = 0.0;
};

ComplexityLedger complexity_counts(int dim, int active_count, int level, int order);

/// Binary round-trip so decompositions can be reused across CLI runs.
void save_hybrid(const std::string& path, const HybridDecomposition& dec);
HybridDecomposition load_hybrid(const std::string& path);

}  // namespace msflow
