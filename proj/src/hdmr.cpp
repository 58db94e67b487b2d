#include "msflow/hdmr.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>

#include "msflow/util.hpp"

namespace msflow {

namespace {

void check_active_set(int dim, const std::vector<int>& active, bool proper) {
    if (active.empty()) throw InvalidArgument("active set must be nonempty");
    for (std::size_t k = 0; k < active.size(); ++k) {
        if (active[k] < 0 || active[k] >= dim)
            throw InvalidArgument("active dimension index out of range");
        if (k > 0 && active[k] <= active[k - 1])
            throw InvalidArgument("active set must be strictly ascending");
    }
    if (proper && static_cast<int>(active.size()) >= dim)
        throw InvalidArgument("active set must be a proper subset of the dimensions");
}

std::vector<int> complement(int dim, const std::vector<int>& active) {
    std::vector<int> out;
    out.reserve(dim - active.size());
    std::size_t k = 0;
    for (int d = 0; d < dim; ++d) {
        if (k < active.size() && active[k] == d) {
            ++k;
            continue;
        }
        out.push_back(d);
    }
    return out;
}

Eigen::VectorXd call_model(const Evaluator& f, const Eigen::VectorXd& point) {
    try {
        return f(point);
    } catch (const EvaluatorError&) {
        throw;
    } catch (const std::exception& e) {
        throw EvaluatorError(std::string("model evaluation failed: ") + e.what(),
                             std::vector<double>(point.data(), point.data() + point.size()));
    }
}

Eigen::MatrixXd evaluate_on_grid(const Evaluator& f, const Eigen::VectorXd& anchor,
                                 const std::vector<int>& dims, const SparseGrid& grid,
                                 const Eigen::VectorXd* f0, const HdmrOptions& opts,
                                 std::uint64_t& unique_runs) {
    const int n = grid.size();
    // The grid center embeds to the anchor point only when the anchor sits
    // at the subspace origin; only then can the cached value be reused.
    bool anchor_at_origin = true;
    for (int d : dims)
        if (anchor[d] != 0.0) anchor_at_origin = false;
    int center = -1;
    if (f0 && anchor_at_origin)
        for (int j = 0; j < n && center < 0; ++j)
            if ((grid.nodes.row(j).array() == 0.0).all()) center = j;

    Eigen::MatrixXd values;
    int start = 0;
    if (f0) {
        values.resize(n, f0->size());
        if (center >= 0) values.row(center) = f0->transpose();
    } else {
        const Eigen::VectorXd out =
            call_model(f, embed_point(anchor, dims, grid.nodes.row(0).transpose()));
        values.resize(n, out.size());
        values.row(0) = out.transpose();
        start = 1;
        ++unique_runs;
    }
    parallel_for(n - start, opts.workers, [&](int idx) {
        const int j = idx + start;
        if (j == center) return;
        const Eigen::VectorXd point = embed_point(anchor, dims, grid.nodes.row(j).transpose());
        const Eigen::VectorXd out = call_model(f, point);
        if (out.size() != values.cols())
            throw EvaluatorError("model returned inconsistent QoI size",
                                 std::vector<double>(point.data(), point.data() + point.size()));
        values.row(j) = out.transpose();
    });
    unique_runs += static_cast<std::uint64_t>(n - start - (center >= start ? 1 : 0));
    return values;
}

std::uint64_t binom_u64(int n, int k) {
    if (k < 0 || k > n) return 0;
    std::uint64_t r = 1;
    for (int t = 0; t < k; ++t) r = r * static_cast<std::uint64_t>(n - t) / (t + 1);
    return r;
}

// Collapsed inclusion-exclusion coefficient: the weight a stored projection
// onto a subset of size s receives when all components of order <= q over J
// active dimensions are summed.
double collapsed_coeff(int J, int q, int s) {
    double c = 0.0;
    for (int t = 0; t + s <= q; ++t)
        c += (t % 2 == 0 ? 1.0 : -1.0) * static_cast<double>(binom_u64(J - s, t));
    return c;
}

void enumerate_subsets(const std::vector<int>& active, int order,
                       std::vector<std::vector<int>>& out) {
    const int J = static_cast<int>(active.size());
    std::vector<int> pick;
    auto rec = [&](auto&& self, int start, int remaining) -> void {
        if (!pick.empty()) {
            std::vector<int> subset(pick.size());
            for (std::size_t t = 0; t < pick.size(); ++t) subset[t] = active[pick[t]];
            out.push_back(std::move(subset));
        }
        if (remaining == 0) return;
        for (int i = start; i < J; ++i) {
            pick.push_back(i);
            self(self, i + 1, remaining - 1);
            pick.pop_back();
        }
    };
    rec(rec, 0, order);
    std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
        if (a.size() != b.size()) return a.size() < b.size();
        return a < b;
    });
}

Eigen::VectorXd sub_point(const Eigen::VectorXd& point, const std::vector<int>& dims) {
    Eigen::VectorXd sub(dims.size());
    for (std::size_t k = 0; k < dims.size(); ++k) sub[k] = point[dims[k]];
    return sub;
}

void check_point_range(const Eigen::VectorXd& point, int dim) {
    if (point.size() != dim) throw InvalidArgument("point dimension mismatch");
    for (int d = 0; d < dim; ++d)
        if (std::abs(point[d]) > 1.0 + 1e-12)
            throw ThetaRangeError("evaluation point outside [-1,1]^N");
}

}  // namespace

Eigen::VectorXd embed_point(const Eigen::VectorXd& anchor, const std::vector<int>& dims,
                            const Eigen::VectorXd& sub) {
    Eigen::VectorXd point = anchor;
    for (std::size_t k = 0; k < dims.size(); ++k) point[dims[k]] = sub[k];
    return point;
}

namespace {

ComponentGrid project_onto_dims_counted(const Evaluator& f, const Eigen::VectorXd& anchor,
                                        const std::vector<int>& dims, int level,
                                        const Eigen::VectorXd* f0, const HdmrOptions& opts,
                                        std::uint64_t& unique_runs) {
    check_active_set(static_cast<int>(anchor.size()), dims, false);
    ComponentGrid comp;
    comp.dims = dims;
    comp.grid = build_sparse_grid(static_cast<int>(dims.size()), level, opts.node_budget);
    comp.values = evaluate_on_grid(f, anchor, dims, comp.grid, f0, opts, unique_runs);
    return comp;
}

}  // namespace

ComponentGrid project_onto_dims(const Evaluator& f, const Eigen::VectorXd& anchor,
                                const std::vector<int>& dims, int level,
                                const Eigen::VectorXd* f0, const HdmrOptions& opts) {
    std::uint64_t unique = 0;
    return project_onto_dims_counted(f, anchor, dims, level, f0, opts, unique);
}

ComponentGrid first_order_component(const Evaluator& f, const Eigen::VectorXd& anchor,
                                    int dim_index, int level, const Eigen::VectorXd* f0,
                                    const HdmrOptions& opts) {
    Eigen::VectorXd anchor_value;
    if (!f0) {
        anchor_value = f(anchor);
        f0 = &anchor_value;
    }
    ComponentGrid comp = project_onto_dims(f, anchor, {dim_index}, level, f0, opts);
    comp.values.rowwise() -= f0->transpose();
    // The anchor sits on the line, so its row is exactly zero by construction.
    return comp;
}

SensitivityReport sensitivity_select(const Eigen::VectorXd& variances, double zeta) {
    const int n = static_cast<int>(variances.size());
    if (n < 1) throw InvalidArgument("sensitivity_select: empty variance vector");
    if (!(zeta > 0.0 && zeta < 1.0)) throw InvalidArgument("sensitivity_select: zeta must be in (0,1)");
    double total = 0.0;
    for (int i = 0; i < n; ++i) {
        if (variances[i] < 0.0)
            throw InvalidArgument("sensitivity_select: variances must be non-negative");
        total += variances[i];
    }
    if (total == 0.0)
        throw InvalidArgument("sensitivity_select: all variances zero, no active dimension");

    SensitivityReport report;
    report.variances = variances;
    report.zeta = zeta;
    report.order.resize(n);
    std::iota(report.order.begin(), report.order.end(), 0);
    std::stable_sort(report.order.begin(), report.order.end(),
                     [&](int a, int b) { return variances[a] > variances[b]; });
    double cum = 0.0;
    int J = n;
    for (int k = 0; k < n; ++k) {
        cum += variances[report.order[k]];
        if (cum / total >= zeta) {
            J = k + 1;
            break;
        }
    }
    report.selected_count = J;
    report.active.assign(report.order.begin(), report.order.begin() + J);
    std::sort(report.active.begin(), report.active.end());
    return report;
}

HybridDecomposition build_hybrid(const Evaluator& f, int dim, const std::vector<int>& active,
                                 int level, int level_inactive, const Eigen::VectorXd& anchor,
                                 const HdmrOptions& opts, const HdmrReuse& reuse) {
    check_active_set(dim, active, true);
    if (anchor.size() != dim) throw InvalidArgument("build_hybrid: anchor size mismatch");

    HybridDecomposition dec;
    dec.dim = dim;
    dec.active = active;
    dec.level = level;
    dec.level_inactive = level_inactive;
    dec.anchor_point = anchor;
    dec.f0 = reuse.f0 ? *reuse.f0 : f(anchor);
    dec.ledger.unique_runs = reuse.f0 ? 0 : 1;

    const int J = static_cast<int>(active.size());
    const int N = dim;
    // Nominal convention: active block + per-inactive 1-D grids + anchor,
    // shared center nodes counted every time.
    dec.ledger.nominal = count_nodes(J, level) +
                         static_cast<std::uint64_t>(N - J) * count_nodes(1, level_inactive) + 1;

    dec.active_block =
        project_onto_dims_counted(f, anchor, active, level, &dec.f0, opts, dec.ledger.unique_runs);

    for (int d : complement(dim, active)) {
        bool reused = false;
        if (reuse.slices && reuse.slice_dims) {
            for (std::size_t s = 0; s < reuse.slice_dims->size(); ++s) {
                if ((*reuse.slice_dims)[s] == d &&
                    (*reuse.slices)[s].grid.level == level_inactive) {
                    dec.inactive.push_back((*reuse.slices)[s]);
                    reused = true;
                    break;
                }
            }
        }
        if (!reused)
            dec.inactive.push_back(project_onto_dims_counted(f, anchor, {d}, level_inactive,
                                                             &dec.f0, opts,
                                                             dec.ledger.unique_runs));
    }
    return dec;
}

Eigen::VectorXd evaluate_hybrid(const HybridDecomposition& dec, const Eigen::VectorXd& point) {
    check_point_range(point, dec.dim);
    const Eigen::VectorXd ca =
        interpolation_weights(dec.active_block.grid, sub_point(point, dec.active));
    Eigen::VectorXd out = dec.active_block.values.transpose() * ca;
    for (const ComponentGrid& comp : dec.inactive) {
        const Eigen::VectorXd c1 = interpolation_weights(comp.grid, sub_point(point, comp.dims));
        out += comp.values.transpose() * c1;
    }
    if (dec.framing == Framing::cut)
        out -= static_cast<double>(dec.inactive.size()) * dec.f0;
    return out;
}

StatsResult hybrid_stats(const HybridDecomposition& dec) {
    StatsResult stats;
    stats.mean = quadrature(dec.active_block.grid, dec.active_block.values);
    Eigen::VectorXd var, raw;
    variance_from_grid(dec.active_block.grid, dec.active_block.values, var, raw);
    stats.variance = var;
    stats.variance_raw = raw;
    for (const ComponentGrid& comp : dec.inactive) {
        stats.mean += quadrature(comp.grid, comp.values);
        variance_from_grid(comp.grid, comp.values, var, raw);
        stats.variance += var;
        stats.variance_raw += raw;
    }
    if (dec.framing == Framing::cut)
        stats.mean -= static_cast<double>(dec.inactive.size()) * dec.f0;
    return stats;
}

HybridDecomposition cut_to_anova(const HybridDecomposition& dec) {
    if (dec.framing != Framing::cut) throw InvalidArgument("cut_to_anova: already transformed");
    HybridDecomposition out = dec;
    out.framing = Framing::anova;

    // Per inactive dimension: mean of the centered first-order component.
    Eigen::VectorXd shift = Eigen::VectorXd::Zero(dec.qoi_dim());
    for (std::size_t s = 0; s < dec.inactive.size(); ++s) {
        const ComponentGrid& comp = dec.inactive[s];
        const Eigen::VectorXd mean_slice = quadrature(comp.grid, comp.values);  // E[P_i f]
        const Eigen::VectorXd mean_component = mean_slice - dec.f0;             // E[f_i]
        // f_i^anova = (P_i f - f0) - E[f_i]
        out.inactive[s].values =
            comp.values.rowwise() - (dec.f0 + mean_component).transpose();
        shift += mean_component;
    }
    // Active block absorbs the shifts so the represented function is unchanged.
    out.active_block.values = dec.active_block.values.rowwise() + shift.transpose();
    out.f0_anova = quadrature(out.active_block.grid, out.active_block.values);
    for (const ComponentGrid& comp : out.inactive)
        out.f0_anova += quadrature(comp.grid, comp.values);
    return out;
}

AdaptiveDecomposition build_adaptive(const Evaluator& f, int dim, const std::vector<int>& active,
                                     int order, int level, int level_inactive,
                                     const Eigen::VectorXd& anchor, const HdmrOptions& opts,
                                     const HdmrReuse& reuse) {
    check_active_set(dim, active, true);
    if (anchor.size() != dim) throw InvalidArgument("build_adaptive: anchor size mismatch");
    const int J = static_cast<int>(active.size());
    if (order < 1 || order > J)
        throw InvalidArgument("build_adaptive: order must be in [1, |active|]");

    AdaptiveDecomposition dec;
    dec.dim = dim;
    dec.active = active;
    dec.order = order;
    dec.level = level;
    dec.level_inactive = level_inactive;
    dec.anchor_point = anchor;
    dec.f0 = reuse.f0 ? *reuse.f0 : f(anchor);
    dec.ledger.unique_runs = reuse.f0 ? 0 : 1;

    const int N = dim;
    dec.ledger.nominal = 1;
    for (int j = 1; j <= order; ++j)
        dec.ledger.nominal += binom_u64(J, j) * count_nodes(j, level);
    dec.ledger.nominal += static_cast<std::uint64_t>(N - J) * count_nodes(1, level_inactive);

    std::vector<std::vector<int>> subsets;
    enumerate_subsets(active, order, subsets);
    dec.empty_coeff = collapsed_coeff(J, order, 0);
    for (const std::vector<int>& v : subsets) {
        bool reused = false;
        if (v.size() == 1 && level == level_inactive && reuse.slices && reuse.slice_dims) {
            for (std::size_t s = 0; s < reuse.slice_dims->size(); ++s) {
                if ((*reuse.slice_dims)[s] == v[0] && (*reuse.slices)[s].grid.level == level) {
                    dec.subsets.push_back((*reuse.slices)[s]);
                    reused = true;
                    break;
                }
            }
        }
        if (!reused)
            dec.subsets.push_back(
                project_onto_dims_counted(f, anchor, v, level, &dec.f0, opts,
                                          dec.ledger.unique_runs));
        dec.subset_coeff.push_back(collapsed_coeff(J, order, static_cast<int>(v.size())));
    }

    for (int d : complement(dim, active)) {
        bool reused = false;
        if (reuse.slices && reuse.slice_dims) {
            for (std::size_t s = 0; s < reuse.slice_dims->size(); ++s) {
                if ((*reuse.slice_dims)[s] == d &&
                    (*reuse.slices)[s].grid.level == level_inactive) {
                    dec.inactive.push_back((*reuse.slices)[s]);
                    reused = true;
                    break;
                }
            }
        }
        if (!reused)
            dec.inactive.push_back(project_onto_dims_counted(f, anchor, {d}, level_inactive,
                                                             &dec.f0, opts,
                                                             dec.ledger.unique_runs));
    }
    return dec;
}

Eigen::VectorXd evaluate_adaptive(const AdaptiveDecomposition& dec, const Eigen::VectorXd& point) {
    check_point_range(point, dec.dim);
    Eigen::VectorXd out = dec.empty_coeff * dec.f0;
    for (std::size_t s = 0; s < dec.subsets.size(); ++s) {
        const ComponentGrid& comp = dec.subsets[s];
        const Eigen::VectorXd c = interpolation_weights(comp.grid, sub_point(point, comp.dims));
        out += dec.subset_coeff[s] * (comp.values.transpose() * c);
    }
    for (const ComponentGrid& comp : dec.inactive) {
        const Eigen::VectorXd c = interpolation_weights(comp.grid, sub_point(point, comp.dims));
        out += comp.values.transpose() * c - dec.f0;
    }
    return out;
}

StatsResult adaptive_stats(const AdaptiveDecomposition& dec, const SparseGrid& outer_grid) {
    if (outer_grid.dim != dec.dim)
        throw InvalidArgument("adaptive_stats: outer grid dimension mismatch");

    StatsResult stats;
    // Mean: component-wise quadrature against the probability measure.
    stats.mean = dec.empty_coeff * dec.f0;
    for (std::size_t s = 0; s < dec.subsets.size(); ++s)
        stats.mean += dec.subset_coeff[s] * quadrature(dec.subsets[s].grid, dec.subsets[s].values);
    for (const ComponentGrid& comp : dec.inactive)
        stats.mean += quadrature(comp.grid, comp.values) - dec.f0;

    // Variance: evaluate the truncated representation at every outer node by
    // interpolating each stored component, then apply the quadrature formula.
    const int n = outer_grid.size();
    const int q = dec.qoi_dim();
    Eigen::VectorXd m1 = Eigen::VectorXd::Zero(q);
    Eigen::VectorXd m2 = Eigen::VectorXd::Zero(q);
    std::uint64_t interps = 0;
    for (int j = 0; j < n; ++j) {
        const Eigen::VectorXd point = outer_grid.nodes.row(j).transpose();
        Eigen::VectorXd value = dec.empty_coeff * dec.f0;
        for (std::size_t s = 0; s < dec.subsets.size(); ++s) {
            const ComponentGrid& comp = dec.subsets[s];
            const Eigen::VectorXd c =
                interpolation_weights(comp.grid, sub_point(point, comp.dims));
            value += dec.subset_coeff[s] * (comp.values.transpose() * c);
            ++interps;
        }
        for (const ComponentGrid& comp : dec.inactive) {
            const Eigen::VectorXd c =
                interpolation_weights(comp.grid, sub_point(point, comp.dims));
            value += comp.values.transpose() * c - dec.f0;
            ++interps;
        }
        const double w = outer_grid.weights[j];
        m1 += w * value;
        m2 += w * value.cwiseProduct(value);
    }
    stats.variance_raw = m2 - m1.cwiseProduct(m1);
    stats.variance = stats.variance_raw.cwiseMax(0.0);
    stats.interpolation_count = interps;
    return stats;
}

ComplexityLedger complexity_counts(int dim, int active_count, int level, int order) {
    if (active_count < 1 || active_count > dim)
        throw InvalidArgument("complexity_counts: need 1 <= J <= N");
    const int N = dim, J = active_count;
    ComplexityLedger ledger;
    ledger.full = count_nodes(N, level);
    ledger.truncated_q = 0;
    for (int j = 1; j <= order; ++j)
        ledger.truncated_q += binom_u64(N, j) * count_nodes(j, level);
    ledger.hybrid = count_nodes(J, level) +
                    static_cast<std::uint64_t>(N - J) * count_nodes(1, level) + 1;
    ledger.adaptive = 1 + static_cast<std::uint64_t>(N - J) * count_nodes(1, level);
    for (int j = 1; j <= order; ++j)
        ledger.adaptive += binom_u64(J, j) * count_nodes(j, level);

    // Leading-order expressions used for the level-2 ordering discussion.
    ledger.full_approx = 2.0 * N * N;
    ledger.truncated_q_approx = 13.0 * N * N;
    ledger.hybrid_approx = 2.0 * J * J + 5.0 * (N - J);
    ledger.adaptive_approx = 13.0 * J * J + 5.0 * N;
    return ledger;
}

namespace {

constexpr char kHybridMagic[8] = {'M', 'S', 'F', 'H', 'Y', 'B', '0', '1'};

void put_bytes(std::ostream& os, const void* p, std::size_t n) {
    os.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
}

void get_bytes(std::istream& is, void* p, std::size_t n) {
    is.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
    if (!is) throw IoError("decomposition file truncated");
}

void put_matrix(std::ostream& os, const Eigen::MatrixXd& m) {
    const std::int64_t shape[2] = {m.rows(), m.cols()};
    put_bytes(os, shape, sizeof(shape));
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        const Eigen::VectorXd row = m.row(r).transpose();
        put_bytes(os, row.data(), sizeof(double) * m.cols());
    }
}

Eigen::MatrixXd get_matrix(std::istream& is) {
    std::int64_t shape[2];
    get_bytes(is, shape, sizeof(shape));
    Eigen::MatrixXd m(shape[0], shape[1]);
    Eigen::VectorXd row(shape[1]);
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        get_bytes(is, row.data(), sizeof(double) * m.cols());
        m.row(r) = row.transpose();
    }
    return m;
}

void put_component(std::ostream& os, const ComponentGrid& comp) {
    const std::int64_t nd = static_cast<std::int64_t>(comp.dims.size());
    put_bytes(os, &nd, sizeof(nd));
    for (int d : comp.dims) {
        const std::int64_t v = d;
        put_bytes(os, &v, sizeof(v));
    }
    const std::int64_t level = comp.grid.level;
    put_bytes(os, &level, sizeof(level));
    put_matrix(os, comp.values);
}

ComponentGrid get_component(std::istream& is) {
    ComponentGrid comp;
    std::int64_t nd;
    get_bytes(is, &nd, sizeof(nd));
    comp.dims.resize(nd);
    for (std::int64_t k = 0; k < nd; ++k) {
        std::int64_t v;
        get_bytes(is, &v, sizeof(v));
        comp.dims[k] = static_cast<int>(v);
    }
    std::int64_t level;
    get_bytes(is, &level, sizeof(level));
    comp.grid = build_sparse_grid(static_cast<int>(nd), static_cast<int>(level));
    comp.values = get_matrix(is);
    if (comp.values.rows() != comp.grid.size())
        throw IoError("decomposition file: value rows do not match grid size");
    return comp;
}

}  // namespace

void save_hybrid(const std::string& path, const HybridDecomposition& dec) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw IoError("cannot open " + path + " for writing");
    put_bytes(os, kHybridMagic, sizeof(kHybridMagic));
    const std::int64_t head[6] = {dec.dim,
                                  static_cast<std::int64_t>(dec.active.size()),
                                  dec.level,
                                  dec.level_inactive,
                                  dec.framing == Framing::cut ? 0 : 1,
                                  static_cast<std::int64_t>(dec.ledger.nominal)};
    put_bytes(os, head, sizeof(head));
    const std::int64_t unique = static_cast<std::int64_t>(dec.ledger.unique_runs);
    put_bytes(os, &unique, sizeof(unique));
    for (int d : dec.active) {
        const std::int64_t v = d;
        put_bytes(os, &v, sizeof(v));
    }
    put_matrix(os, Eigen::MatrixXd(dec.anchor_point.transpose()));
    put_matrix(os, Eigen::MatrixXd(dec.f0.transpose()));
    put_matrix(os, dec.f0_anova.size() ? Eigen::MatrixXd(dec.f0_anova.transpose())
                                       : Eigen::MatrixXd(0, 0));
    put_component(os, dec.active_block);
    const std::int64_t ni = static_cast<std::int64_t>(dec.inactive.size());
    put_bytes(os, &ni, sizeof(ni));
    for (const ComponentGrid& comp : dec.inactive) put_component(os, comp);
    if (!os) throw IoError("write failed for " + path);
}

HybridDecomposition load_hybrid(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open " + path);
    char magic[8];
    get_bytes(is, magic, sizeof(magic));
    if (std::memcmp(magic, kHybridMagic, sizeof(kHybridMagic)) != 0)
        throw IoError(path + " is not a hybrid decomposition file");
    std::int64_t head[6];
    get_bytes(is, head, sizeof(head));
    std::int64_t unique;
    get_bytes(is, &unique, sizeof(unique));
    HybridDecomposition dec;
    dec.dim = static_cast<int>(head[0]);
    dec.active.resize(head[1]);
    dec.level = static_cast<int>(head[2]);
    dec.level_inactive = static_cast<int>(head[3]);
    dec.framing = head[4] == 0 ? Framing::cut : Framing::anova;
    dec.ledger.nominal = static_cast<std::uint64_t>(head[5]);
    dec.ledger.unique_runs = static_cast<std::uint64_t>(unique);
    for (std::size_t k = 0; k < dec.active.size(); ++k) {
        std::int64_t v;
        get_bytes(is, &v, sizeof(v));
        dec.active[k] = static_cast<int>(v);
    }
    dec.anchor_point = get_matrix(is).row(0).transpose();
    dec.f0 = get_matrix(is).row(0).transpose();
    const Eigen::MatrixXd f0a = get_matrix(is);
    if (f0a.size() > 0) dec.f0_anova = f0a.row(0).transpose();
    dec.active_block = get_component(is);
    std::int64_t ni;
    get_bytes(is, &ni, sizeof(ni));
    dec.inactive.resize(ni);
    for (std::int64_t k = 0; k < ni; ++k) dec.inactive[k] = get_component(is);
    return dec;
}

}  // namespace msflow
