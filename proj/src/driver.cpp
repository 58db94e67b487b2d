#include "msflow/driver.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "msflow/util.hpp"

namespace msflow {

namespace fs = std::filesystem;
using json = nlohmann::json;

std::string method_name(MethodKind kind) {
    switch (kind) {
        case MethodKind::mfem_full: return "mfem_full";
        case MethodKind::lmsfem_full: return "lmsfem_full";
        case MethodKind::gmsfem_full: return "gmsfem_full";
        case MethodKind::lmsfem_hybrid: return "lmsfem_hybrid";
        case MethodKind::gmsfem_hybrid: return "gmsfem_hybrid";
        case MethodKind::lmsfem_adaptive: return "lmsfem_adaptive";
        case MethodKind::gmsfem_adaptive: return "gmsfem_adaptive";
    }
    throw InvalidArgument("unknown method kind");
}

MethodKind method_from_name(const std::string& name) {
    for (MethodKind k :
         {MethodKind::mfem_full, MethodKind::lmsfem_full, MethodKind::gmsfem_full,
          MethodKind::lmsfem_hybrid, MethodKind::gmsfem_hybrid, MethodKind::lmsfem_adaptive,
          MethodKind::gmsfem_adaptive})
        if (method_name(k) == name) return k;
    throw ConfigError("unknown method '" + name + "'");
}

void ExperimentConfig::validate() const {
    StructuredGrid fine(fine_nx, fine_ny, lx, ly);
    if (fine_nx % coarse_nx != 0 || fine_ny % coarse_ny != 0)
        throw ConfigError("coarse grid must partition the fine grid");
    covariance.validate();
    if (n_terms < 1 || n_terms > fine.cell_count())
        throw ConfigError("n_terms must be in [1, fine cell count]");
    if (mean_field != "zero" && mean_field != "channelized")
        throw ConfigError("mean_field must be 'zero' or 'channelized'");
    if (distribution != "uniform") throw ConfigError("only the uniform distribution is supported");
    if (!(zeta > 0.0 && zeta < 1.0)) throw ConfigError("zeta must be in (0,1)");
    if (level < 0 || level_inactive < 0) throw ConfigError("levels must be >= 0");
    if (level_inactive > level) throw ConfigError("inactive level must not exceed the active level");
    if (adaptive_order < 1 || adaptive_order > 3)
        throw ConfigError("adaptive order must be 1, 2 or 3");
    if (!(dt_pvi > 0.0) || t_end_pvi < 0.0) throw ConfigError("bad time parameters");
    if (!(well_rate > 0.0)) throw ConfigError("well rate must be positive");
    for (std::size_t s = 0; s < snapshots.size(); ++s) {
        if (snapshots[s] < 0.0 || snapshots[s] > t_end_pvi + 1e-12)
            throw ConfigError("snapshot times must lie in [0, t_end]");
        if (s > 0 && snapshots[s] <= snapshots[s - 1])
            throw ConfigError("snapshot times must be strictly increasing");
    }
    if (flow.kind == FracFlowModel::Kind::quadratic && !(flow.viscosity_ratio > 0.0))
        throw ConfigError("viscosity ratio must be positive");
}

namespace {

void require_keys(const json& obj, const std::string& scope,
                  std::initializer_list<const char*> allowed) {
    for (auto it = obj.begin(); it != obj.end(); ++it) {
        bool ok = false;
        for (const char* key : allowed)
            if (it.key() == key) ok = true;
        if (!ok) throw ConfigError("unknown key '" + it.key() + "' in " + scope);
    }
}

template <typename T>
void get_to(const json& obj, const char* key, T& out) {
    if (obj.contains(key)) obj.at(key).get_to(out);
}

}  // namespace

ExperimentConfig load_config(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw ConfigError("cannot open config file " + path);
    json doc;
    try {
        doc = json::parse(is);
    } catch (const json::exception& e) {
        throw ConfigError(path + ": " + e.what());
    }
    ExperimentConfig c;
    try {
        require_keys(doc, "config",
                     {"grid", "covariance", "kle", "stochastic", "flow", "time", "wells", "run"});
        if (doc.contains("grid")) {
            const json& g = doc["grid"];
            require_keys(g, "grid", {"fine_nx", "fine_ny", "coarse_nx", "coarse_ny", "lx", "ly"});
            get_to(g, "fine_nx", c.fine_nx);
            get_to(g, "fine_ny", c.fine_ny);
            get_to(g, "coarse_nx", c.coarse_nx);
            get_to(g, "coarse_ny", c.coarse_ny);
            get_to(g, "lx", c.lx);
            get_to(g, "ly", c.ly);
        }
        if (doc.contains("covariance")) {
            const json& g = doc["covariance"];
            require_keys(g, "covariance", {"sigma2", "corr_x", "corr_y"});
            get_to(g, "sigma2", c.covariance.sigma2);
            get_to(g, "corr_x", c.covariance.corr_x);
            get_to(g, "corr_y", c.covariance.corr_y);
        }
        if (doc.contains("kle")) {
            const json& g = doc["kle"];
            require_keys(g, "kle", {"n_terms", "mean_field"});
            get_to(g, "n_terms", c.n_terms);
            get_to(g, "mean_field", c.mean_field);
        }
        if (doc.contains("stochastic")) {
            const json& g = doc["stochastic"];
            require_keys(g, "stochastic",
                         {"distribution", "zeta", "level", "level_inactive", "adaptive_order",
                          "node_budget", "sensitivity_qoi"});
            get_to(g, "distribution", c.distribution);
            get_to(g, "zeta", c.zeta);
            get_to(g, "level", c.level);
            get_to(g, "level_inactive", c.level_inactive);
            get_to(g, "adaptive_order", c.adaptive_order);
            get_to(g, "node_budget", c.node_budget);
            if (g.contains("sensitivity_qoi")) {
                const std::string s = g["sensitivity_qoi"].get<std::string>();
                if (s == "saturation")
                    c.sensitivity_qoi = SensitivityQoI::saturation;
                else if (s == "watercut")
                    c.sensitivity_qoi = SensitivityQoI::watercut;
                else
                    throw ConfigError("sensitivity_qoi must be 'saturation' or 'watercut'");
            }
        }
        if (doc.contains("flow")) {
            const json& g = doc["flow"];
            require_keys(g, "flow", {"model", "viscosity_ratio"});
            if (g.contains("model")) {
                const std::string m = g["model"].get<std::string>();
                if (m == "linear")
                    c.flow.kind = FracFlowModel::Kind::linear;
                else if (m == "quadratic")
                    c.flow.kind = FracFlowModel::Kind::quadratic;
                else
                    throw ConfigError("flow.model must be 'linear' or 'quadratic'");
            }
            get_to(g, "viscosity_ratio", c.flow.viscosity_ratio);
        }
        if (doc.contains("time")) {
            const json& g = doc["time"];
            require_keys(g, "time", {"dt_pvi", "t_end_pvi", "snapshots"});
            get_to(g, "dt_pvi", c.dt_pvi);
            get_to(g, "t_end_pvi", c.t_end_pvi);
            get_to(g, "snapshots", c.snapshots);
        }
        if (doc.contains("wells")) {
            const json& g = doc["wells"];
            require_keys(g, "wells", {"rate"});
            get_to(g, "rate", c.well_rate);
        }
        if (doc.contains("run")) {
            const json& g = doc["run"];
            require_keys(g, "run", {"method", "output_dir", "cache_dir", "workers", "seed"});
            if (g.contains("method")) c.method = method_from_name(g["method"].get<std::string>());
            get_to(g, "output_dir", c.output_dir);
            get_to(g, "cache_dir", c.cache_dir);
            get_to(g, "workers", c.workers);
            get_to(g, "seed", c.seed);
        }
    } catch (const json::exception& e) {
        throw ConfigError(path + ": " + e.what());
    }
    c.validate();
    return c;
}

void save_config(const std::string& path, const ExperimentConfig& c) {
    json doc;
    doc["grid"] = {{"fine_nx", c.fine_nx}, {"fine_ny", c.fine_ny}, {"coarse_nx", c.coarse_nx},
                   {"coarse_ny", c.coarse_ny}, {"lx", c.lx}, {"ly", c.ly}};
    doc["covariance"] = {{"sigma2", c.covariance.sigma2}, {"corr_x", c.covariance.corr_x},
                         {"corr_y", c.covariance.corr_y}};
    doc["kle"] = {{"n_terms", c.n_terms}, {"mean_field", c.mean_field}};
    doc["stochastic"] = {
        {"distribution", c.distribution},
        {"zeta", c.zeta},
        {"level", c.level},
        {"level_inactive", c.level_inactive},
        {"adaptive_order", c.adaptive_order},
        {"node_budget", c.node_budget},
        {"sensitivity_qoi", c.sensitivity_qoi == SensitivityQoI::saturation ? "saturation" : "watercut"}};
    doc["flow"] = {{"model", c.flow.kind == FracFlowModel::Kind::linear ? "linear" : "quadratic"},
                   {"viscosity_ratio", c.flow.viscosity_ratio}};
    doc["time"] = {{"dt_pvi", c.dt_pvi}, {"t_end_pvi", c.t_end_pvi}, {"snapshots", c.snapshots}};
    doc["wells"] = {{"rate", c.well_rate}};
    doc["run"] = {{"method", method_name(c.method)}, {"output_dir", c.output_dir},
                  {"cache_dir", c.cache_dir}, {"workers", c.workers}, {"seed", c.seed}};
    std::ofstream os(path, std::ios::trunc);
    if (!os) throw IoError("cannot write " + path);
    os << doc.dump(2) << '\n';
}

// ---------------------------------------------------------------------------
// Caching helpers
// ---------------------------------------------------------------------------

namespace {

std::string resolved_cache_dir(const ExperimentConfig& config) {
    if (const char* env = std::getenv("MSFLOW_CACHE"); env && *env) return env;
    return config.cache_dir;
}

std::uint64_t fnv_mix(std::uint64_t h, const void* data, std::size_t n) {
    const unsigned char* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
        h ^= p[i];
        h *= 1099511628211ull;
    }
    return h;
}

std::uint64_t kle_key(const ExperimentConfig& c) {
    std::uint64_t h = 1469598103934665603ull;
    const double nums[9] = {static_cast<double>(c.fine_nx), static_cast<double>(c.fine_ny),
                            c.lx, c.ly, c.covariance.sigma2, c.covariance.corr_x,
                            c.covariance.corr_y, static_cast<double>(c.n_terms),
                            c.mean_field == "zero" ? 0.0 : 1.0};
    return fnv_mix(h, nums, sizeof(nums));
}

std::string hex(std::uint64_t v) {
    std::ostringstream os;
    os << std::hex << v;
    return os.str();
}

double now_seconds() {
    using clock = std::chrono::steady_clock;
    return std::chrono::duration<double>(clock::now().time_since_epoch()).count();
}

}  // namespace

KLBasis build_or_load_kle(const ExperimentConfig& config) {
    const std::string dir = resolved_cache_dir(config);
    const std::string path =
        dir.empty() ? "" : (fs::path(dir) / ("kle_" + hex(kle_key(config)) + ".bin")).string();
    if (!path.empty() && fs::exists(path)) return load_kl_basis(path);

    StructuredGrid grid(config.fine_nx, config.fine_ny, config.lx, config.ly);
    const Eigen::MatrixXd cov = build_covariance(grid, config.covariance);
    KLBasis klb = compute_kle(cov, grid, config.n_terms);
    if (config.mean_field == "channelized") klb.mean_field = channelized_mean_field(grid);
    if (!path.empty()) {
        fs::create_directories(dir);
        save_kl_basis(path + ".tmp", klb);
        fs::rename(path + ".tmp", path);
    }
    return klb;
}

// ---------------------------------------------------------------------------
// Global velocity library
// ---------------------------------------------------------------------------

const Eigen::VectorXd& GlobalVelocityLibrary::lookup(int dim, int node_index) const {
    const Rule1D& rule = Rule1D::get(level);
    if (rule.nodes[node_index] == 0.0) return anchor_flux;
    auto it = entries.find({dim, node_index});
    if (it == entries.end())
        throw MissingLibraryEntry("global velocity library misses dimension " +
                                  std::to_string(dim) + ", node " + std::to_string(node_index));
    return it->second;
}

Eigen::VectorXd GlobalVelocityLibrary::interpolate_dim(int dim, double theta) const {
    const Rule1D& rule = Rule1D::get(level);
    const std::vector<double> basis = lagrange_basis(rule, theta);
    Eigen::VectorXd out = Eigen::VectorXd::Zero(anchor_flux.size());
    for (std::size_t k = 0; k < basis.size(); ++k) {
        if (basis[k] == 0.0) continue;
        out += basis[k] * lookup(dim, static_cast<int>(k));
    }
    return out;
}

namespace {

constexpr char kLibMagic[8] = {'M', 'S', 'F', 'U', 'S', 'G', '0', '1'};

void save_library(const std::string& path, const GlobalVelocityLibrary& lib) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw IoError("cannot open " + path + " for writing");
    os.write(kLibMagic, sizeof(kLibMagic));
    const std::int64_t head[3] = {lib.level, lib.anchor_flux.size(),
                                  static_cast<std::int64_t>(lib.entries.size())};
    os.write(reinterpret_cast<const char*>(head), sizeof(head));
    os.write(reinterpret_cast<const char*>(lib.anchor_flux.data()),
             sizeof(double) * lib.anchor_flux.size());
    for (const auto& [key, flux] : lib.entries) {
        const std::int64_t meta[2] = {key.first, key.second};
        os.write(reinterpret_cast<const char*>(meta), sizeof(meta));
        os.write(reinterpret_cast<const char*>(flux.data()), sizeof(double) * flux.size());
    }
    if (!os) throw IoError("write failed for " + path);
}

bool load_library(const std::string& path, GlobalVelocityLibrary& lib, Eigen::Index n_edges) {
    std::ifstream is(path, std::ios::binary);
    if (!is) return false;
    char magic[8];
    is.read(magic, sizeof(magic));
    if (!is || std::memcmp(magic, kLibMagic, sizeof(kLibMagic)) != 0) return false;
    std::int64_t head[3];
    is.read(reinterpret_cast<char*>(head), sizeof(head));
    if (!is || head[1] != n_edges) return false;
    lib.level = static_cast<int>(head[0]);
    lib.anchor_flux.resize(head[1]);
    is.read(reinterpret_cast<char*>(lib.anchor_flux.data()), sizeof(double) * head[1]);
    for (std::int64_t e = 0; e < head[2]; ++e) {
        std::int64_t meta[2];
        is.read(reinterpret_cast<char*>(meta), sizeof(meta));
        Eigen::VectorXd flux(head[1]);
        is.read(reinterpret_cast<char*>(flux.data()), sizeof(double) * head[1]);
        if (!is) return false;
        lib.entries[{static_cast<int>(meta[0]), static_cast<int>(meta[1])}] = std::move(flux);
    }
    return static_cast<bool>(is);
}

}  // namespace

GlobalVelocityLibrary precompute_global_library(const ExperimentConfig& config, const KLBasis& klb,
                                                LibraryBuildInfo* info) {
    StructuredGrid grid(config.fine_nx, config.fine_ny, config.lx, config.ly);
    const Wells wells = Wells::corner_five_spot(grid, config.well_rate);
    const Eigen::VectorXd q = wells.source_density(grid);
    const int level = std::max(config.level, config.level_inactive);
    const Rule1D& rule = Rule1D::get(level);

    const std::string dir = resolved_cache_dir(config);
    std::string path;
    if (!dir.empty()) {
        std::uint64_t h = kle_key(config);
        const double extra[2] = {static_cast<double>(level), config.well_rate};
        h = fnv_mix(h, extra, sizeof(extra));
        path = (fs::path(dir) / ("usg_" + hex(h) + ".bin")).string();
    }

    GlobalVelocityLibrary lib;
    lib.level = level;
    if (!path.empty() && load_library(path, lib, grid.n_edges())) {
        if (info) {
            info->solves_performed = 0;
            info->entries = static_cast<int>(lib.entries.size()) + 1;
        }
        return lib;
    }

    int solves = 0;
    Eigen::VectorXd theta = Eigen::VectorXd::Zero(klb.n_terms());
    lib.anchor_flux = solve_singlephase_global(grid, realize_field(klb, theta).values, q).flux;
    ++solves;

    struct Job {
        int dim;
        int node;
    };
    std::vector<Job> jobs;
    for (int d = 0; d < klb.n_terms(); ++d)
        for (int k = 0; k < static_cast<int>(rule.nodes.size()); ++k)
            if (rule.nodes[k] != 0.0) jobs.push_back({d, k});
    std::vector<Eigen::VectorXd> results(jobs.size());
    parallel_for(static_cast<int>(jobs.size()), config.workers, [&](int j) {
        Eigen::VectorXd point = Eigen::VectorXd::Zero(klb.n_terms());
        point[jobs[j].dim] = rule.nodes[jobs[j].node];
        try {
            results[j] =
                solve_singlephase_global(grid, realize_field(klb, point).values, q).flux;
        } catch (const std::exception& e) {
            throw SolverError("global velocity solve failed at dimension " +
                              std::to_string(jobs[j].dim) + ", node " +
                              std::to_string(jobs[j].node) + ": " + e.what());
        }
    });
    for (std::size_t j = 0; j < jobs.size(); ++j)
        lib.entries[{jobs[j].dim, jobs[j].node}] = std::move(results[j]);
    solves += static_cast<int>(jobs.size());

    if (!path.empty()) {
        fs::create_directories(dir);
        save_library(path + ".tmp", lib);
        fs::rename(path + ".tmp", path);
    }
    if (info) {
        info->solves_performed = solves;
        info->entries = static_cast<int>(lib.entries.size()) + 1;
    }
    return lib;
}

// ---------------------------------------------------------------------------
// Flow model evaluator
// ---------------------------------------------------------------------------

namespace {

enum class SpatialScheme { fine, local_ms, global_ms_exact, global_ms_hier };

SpatialScheme scheme_for(MethodKind method) {
    switch (method) {
        case MethodKind::mfem_full: return SpatialScheme::fine;
        case MethodKind::lmsfem_full:
        case MethodKind::lmsfem_hybrid:
        case MethodKind::lmsfem_adaptive: return SpatialScheme::local_ms;
        case MethodKind::gmsfem_full: return SpatialScheme::global_ms_exact;
        case MethodKind::gmsfem_hybrid:
        case MethodKind::gmsfem_adaptive: return SpatialScheme::global_ms_hier;
    }
    throw InvalidArgument("unknown method kind");
}

bool is_full_method(MethodKind method) {
    return method == MethodKind::mfem_full || method == MethodKind::lmsfem_full ||
           method == MethodKind::gmsfem_full;
}

bool is_adaptive_method(MethodKind method) {
    return method == MethodKind::lmsfem_adaptive || method == MethodKind::gmsfem_adaptive;
}

struct FlowModel {
    const ExperimentConfig* config = nullptr;
    const KLBasis* klb = nullptr;
    const GlobalVelocityLibrary* library = nullptr;  // hier scheme only
    StructuredGrid grid;
    CoarsePartition partition;
    Wells wells;
    Eigen::VectorXd source;
    BlockWeights weights;
    SpatialScheme scheme = SpatialScheme::fine;
    QoILayout layout;

    FlowModel(const ExperimentConfig& cfg, const KLBasis& basis,
              const GlobalVelocityLibrary* lib, SpatialScheme sch)
        : config(&cfg),
          klb(&basis),
          library(lib),
          grid(cfg.fine_nx, cfg.fine_ny, cfg.lx, cfg.ly),
          scheme(sch) {
        if (scheme != SpatialScheme::fine)
            partition = CoarsePartition(grid, cfg.coarse_nx, cfg.coarse_ny);
        wells = Wells::corner_five_spot(grid, cfg.well_rate);
        source = wells.source_density(grid);
        if (scheme != SpatialScheme::fine) weights = make_block_weights(partition, source);
        layout.n_cells = grid.cell_count();
        layout.snapshot_pvis = cfg.snapshots;
        layout.n_watercut = static_cast<int>(std::llround(cfg.t_end_pvi / cfg.dt_pvi)) + 1;
    }

    /// Boundary data for the hierarchical global scheme: first-order
    /// anchored combination of the per-dimension velocity interpolants over
    /// the dimensions excited by this point.
    Eigen::VectorXd hierarchical_global_flux(const Eigen::VectorXd& theta) const {
        Eigen::VectorXd out = library->anchor_flux;
        for (int d = 0; d < theta.size(); ++d) {
            if (theta[d] == 0.0) continue;
            out += library->interpolate_dim(d, theta[d]) - library->anchor_flux;
        }
        return out;
    }

    Eigen::VectorXd operator()(const Eigen::VectorXd& theta) const {
        const Eigen::VectorXd perm = realize_field(*klb, theta).values;

        PressureBackend backend;
        if (scheme == SpatialScheme::fine) {
            backend = [&](const Eigen::VectorXd& mobility) {
                return solve_fine_mixed(grid, mobility.cwiseProduct(perm), source).flux;
            };
        } else {
            Eigen::VectorXd global_flux;
            BasisFlavor flavor = BasisFlavor::local;
            if (scheme == SpatialScheme::global_ms_exact) {
                flavor = BasisFlavor::global;
                global_flux = solve_singlephase_global(grid, perm, source).flux;
            } else if (scheme == SpatialScheme::global_ms_hier) {
                flavor = BasisFlavor::global;
                global_flux = hierarchical_global_flux(theta);
            }
            // Basis functions are built once per stochastic point and reused
            // for every time step.
            const MsBasisSet set =
                assemble_ms_basis_set(partition, perm, flavor, global_flux, weights);
            backend = [&, set](const Eigen::VectorXd& mobility) {
                return solve_coarse(partition, set, mobility.cwiseProduct(perm), source).fine_flux;
            };
        }

        const ImpesResult run = impes_run(grid, backend, config->flow, config->dt_pvi,
                                          config->t_end_pvi, config->snapshots, wells);
        Eigen::VectorXd qoi(layout.dim());
        for (std::size_t s = 0; s < layout.snapshot_pvis.size(); ++s) {
            bool found = false;
            for (const auto& [pvi, field] : run.snapshots) {
                if (pvi == layout.snapshot_pvis[s]) {
                    qoi.segment(layout.snapshot_offset(static_cast<int>(s)), layout.n_cells) =
                        field;
                    found = true;
                }
            }
            if (!found) throw Error("internal: missing snapshot");
        }
        if (static_cast<int>(run.watercut.value.size()) != layout.n_watercut)
            throw Error("internal: watercut length mismatch");
        for (int t = 0; t < layout.n_watercut; ++t)
            qoi[layout.watercut_offset() + t] = run.watercut.value[t];
        return qoi;
    }
};

/// Scalar screening functional over per-component first-order variances.
double sensitivity_functional(const ExperimentConfig& config, const QoILayout& layout,
                              const ComponentGrid& slice) {
    Eigen::VectorXd var, raw;
    variance_from_grid(slice.grid, slice.values, var, raw);
    if (config.sensitivity_qoi == SensitivityQoI::saturation) {
        if (layout.snapshot_pvis.empty()) throw ConfigError("sensitivity needs a snapshot");
        const int s = static_cast<int>(layout.snapshot_pvis.size()) - 1;
        const double area = config.lx * config.ly / layout.n_cells;
        return var.segment(layout.snapshot_offset(s), layout.n_cells).sum() * area;
    }
    return var.segment(layout.watercut_offset(), layout.n_watercut).sum() * config.dt_pvi;
}

SensitivityPass run_sensitivity(const ExperimentConfig& config, const FlowModel& model) {
    SensitivityPass pass;
    const int N = config.n_terms;
    const Eigen::VectorXd anchor = Eigen::VectorXd::Zero(N);
    HdmrOptions opts;
    opts.workers = config.workers;
    opts.node_budget = config.node_budget;

    pass.f0 = model(anchor);
    pass.unique_solves = 1;
    Eigen::VectorXd variances(N);
    pass.slices.resize(N);
    pass.slice_dims.resize(N);
    for (int d = 0; d < N; ++d) {
        pass.slices[d] =
            project_onto_dims(model, anchor, {d}, config.level_inactive, &pass.f0, opts);
        pass.slice_dims[d] = d;
        pass.unique_solves += pass.slices[d].grid.size() - 1;
        variances[d] = sensitivity_functional(config, model.layout, pass.slices[d]);
    }
    pass.report = sensitivity_select(variances, config.zeta);
    return pass;
}

}  // namespace

Eigen::VectorXd QoIStats::mean_saturation(int snapshot) const {
    return mean.segment(layout.snapshot_offset(snapshot), layout.n_cells);
}

Eigen::VectorXd QoIStats::std_saturation(int snapshot) const {
    return std_dev.segment(layout.snapshot_offset(snapshot), layout.n_cells);
}

WaterCutSeries QoIStats::mean_watercut(double dt_pvi) const {
    WaterCutSeries series;
    for (int t = 0; t < layout.n_watercut; ++t) {
        series.pvi.push_back(t * dt_pvi);
        series.value.push_back(mean[layout.watercut_offset() + t]);
    }
    return series;
}

WaterCutSeries QoIStats::std_watercut(double dt_pvi) const {
    WaterCutSeries series;
    for (int t = 0; t < layout.n_watercut; ++t) {
        series.pvi.push_back(t * dt_pvi);
        series.value.push_back(std_dev[layout.watercut_offset() + t]);
    }
    return series;
}

QoIStats run_experiment(const ExperimentConfig& config, MethodKind method) {
    config.validate();
    const double t0 = now_seconds();

    const KLBasis klb = build_or_load_kle(config);
    const SpatialScheme scheme = scheme_for(method);
    GlobalVelocityLibrary library;
    if (scheme == SpatialScheme::global_ms_hier)
        library = precompute_global_library(config, klb);
    const FlowModel model(config, klb,
                          scheme == SpatialScheme::global_ms_hier ? &library : nullptr, scheme);

    QoIStats stats;
    stats.method = method;
    stats.layout = model.layout;
    stats.timings.precompute_s = now_seconds() - t0;

    const int N = config.n_terms;
    HdmrOptions opts;
    opts.workers = config.workers;
    opts.node_budget = config.node_budget;

    if (is_full_method(method)) {
        const double ts = now_seconds();
        const SparseGrid grid = build_sparse_grid(N, config.level, config.node_budget);
        Eigen::MatrixXd values(grid.size(), model.layout.dim());
        parallel_for(grid.size(), config.workers, [&](int j) {
            values.row(j) = model(grid.nodes.row(j).transpose()).transpose();
        });
        stats.timings.solves_s = now_seconds() - ts;
        const double tv = now_seconds();
        stats.mean = quadrature(grid, values);
        Eigen::VectorXd var;
        variance_from_grid(grid, values, var, stats.variance_raw);
        stats.std_dev = var.cwiseSqrt();
        stats.timings.stats_s = now_seconds() - tv;
        stats.model_solves = grid.size();
        stats.unique_solves = grid.size();
        return stats;
    }

    // HDMR methods: sensitivity screening, then the decomposition build.
    const double ts = now_seconds();
    const SensitivityPass pass = run_sensitivity(config, model);
    if (pass.report.selected_count >= N)
        throw ConfigError("sensitivity selected every dimension; lower zeta or raise n_terms");
    stats.active = pass.report.active;
    stats.active_count = pass.report.selected_count;

    HdmrReuse reuse;
    reuse.f0 = &pass.f0;
    reuse.slices = &pass.slices;
    reuse.slice_dims = &pass.slice_dims;
    const Eigen::VectorXd anchor = Eigen::VectorXd::Zero(N);

    if (!is_adaptive_method(method)) {
        const HybridDecomposition dec =
            build_hybrid(model, N, pass.report.active, config.level, config.level_inactive,
                         anchor, opts, reuse);
        stats.timings.solves_s = now_seconds() - ts;
        const double tv = now_seconds();
        const StatsResult res = hybrid_stats(dec);
        stats.mean = res.mean;
        stats.std_dev = res.variance.cwiseSqrt();
        stats.variance_raw = res.variance_raw;
        stats.timings.stats_s = now_seconds() - tv;
        stats.model_solves = dec.ledger.nominal;
        stats.unique_solves = pass.unique_solves + dec.ledger.unique_runs;
        return stats;
    }

    const AdaptiveDecomposition dec =
        build_adaptive(model, N, pass.report.active, config.adaptive_order, config.level,
                       config.level_inactive, anchor, opts, reuse);
    stats.timings.solves_s = now_seconds() - ts;
    const double tv = now_seconds();
    const SparseGrid outer = build_sparse_grid(N, config.level, config.node_budget);
    const StatsResult res = adaptive_stats(dec, outer);
    stats.mean = res.mean;
    stats.std_dev = res.variance.cwiseSqrt();
    stats.variance_raw = res.variance_raw;
    stats.interpolation_count = res.interpolation_count;
    stats.timings.stats_s = now_seconds() - tv;
    stats.model_solves = dec.ledger.nominal;
    stats.unique_solves = pass.unique_solves + dec.ledger.unique_runs;
    return stats;
}

ErrorReport relative_errors(const QoIStats& reference, const QoIStats& test, double pvi) {
    if (reference.layout.n_cells != test.layout.n_cells ||
        reference.layout.n_watercut != test.layout.n_watercut)
        throw InvalidArgument("relative_errors: mismatched discretizations");
    int snap = -1;
    for (std::size_t s = 0; s < reference.layout.snapshot_pvis.size(); ++s)
        if (reference.layout.snapshot_pvis[s] == pvi &&
            s < test.layout.snapshot_pvis.size() && test.layout.snapshot_pvis[s] == pvi)
            snap = static_cast<int>(s);
    if (snap < 0) throw InvalidArgument("relative_errors: snapshot time not present in both runs");

    ErrorReport report;
    const Eigen::VectorXd rm = reference.mean_saturation(snap);
    const Eigen::VectorXd tm = test.mean_saturation(snap);
    const Eigen::VectorXd rs = reference.std_saturation(snap);
    const Eigen::VectorXd tsd = test.std_saturation(snap);
    const double rm_norm = rm.cwiseAbs().sum();
    const double rs_norm = rs.cwiseAbs().sum();
    report.mean_sat = rm_norm > 0.0 ? (rm - tm).cwiseAbs().sum() / rm_norm : 0.0;
    report.std_sat = rs_norm > 0.0 ? (rs - tsd).cwiseAbs().sum() / rs_norm : 0.0;

    const int off_r = reference.layout.watercut_offset();
    const int off_t = test.layout.watercut_offset();
    const int nw = reference.layout.n_watercut;
    const Eigen::VectorXd rw = reference.mean.segment(off_r, nw);
    const Eigen::VectorXd tw = test.mean.segment(off_t, nw);
    const Eigen::VectorXd rws = reference.std_dev.segment(off_r, nw);
    const Eigen::VectorXd tws = test.std_dev.segment(off_t, nw);
    const double rw_norm = rw.norm();
    const double rws_norm = rws.norm();
    report.mean_watercut = rw_norm > 0.0 ? (rw - tw).norm() / rw_norm : 0.0;
    report.std_watercut = rws_norm > 0.0 ? (rws - tws).norm() / rws_norm : 0.0;
    return report;
}

// ---------------------------------------------------------------------------
// Artifact output
// ---------------------------------------------------------------------------

namespace {

std::string pvi_tag(double pvi) {
    std::ostringstream os;
    os << pvi;
    std::string s = os.str();
    for (char& ch : s)
        if (ch == '.') ch = 'p';
    return s;
}

void write_series_csv(const std::string& path, const WaterCutSeries& series) {
    std::ofstream os(path, std::ios::trunc);
    if (!os) throw IoError("cannot write " + path);
    os << "pvi,value\n";
    os.precision(17);
    for (std::size_t t = 0; t < series.pvi.size(); ++t)
        os << series.pvi[t] << ',' << series.value[t] << '\n';
}

void commit(const std::string& tmp, const std::string& final_path) {
    fs::rename(tmp, final_path);
}

}  // namespace

void write_qoi_stats(const std::string& dir, const QoIStats& stats,
                     const ExperimentConfig& config) {
    fs::create_directories(dir);
    const StructuredGrid grid(config.fine_nx, config.fine_ny, config.lx, config.ly);
    auto target = [&](const std::string& name) { return (fs::path(dir) / name).string(); };

    auto write_field = [&](const std::string& name, const Eigen::VectorXd& field) {
        const std::string path = target(name);
        std::ofstream os(path + ".tmp", std::ios::trunc);
        if (!os) throw IoError("cannot write " + path);
        write_field_csv(os, grid, field);
        os.close();
        commit(path + ".tmp", path);
    };
    for (std::size_t s = 0; s < stats.layout.snapshot_pvis.size(); ++s) {
        const std::string tag = pvi_tag(stats.layout.snapshot_pvis[s]);
        write_field("sat_mean_" + tag + ".csv", stats.mean_saturation(static_cast<int>(s)));
        write_field("sat_std_" + tag + ".csv", stats.std_saturation(static_cast<int>(s)));
    }
    write_series_csv(target("watercut_mean.csv") + ".tmp", stats.mean_watercut(config.dt_pvi));
    commit(target("watercut_mean.csv") + ".tmp", target("watercut_mean.csv"));
    write_series_csv(target("watercut_std.csv") + ".tmp", stats.std_watercut(config.dt_pvi));
    commit(target("watercut_std.csv") + ".tmp", target("watercut_std.csv"));

    {
        const std::string path = target("ledger.csv");
        std::ofstream os(path + ".tmp", std::ios::trunc);
        if (!os) throw IoError("cannot write " + path);
        os << "method,model_solves,unique_solves,active_count,interpolations,"
              "precompute_s,solves_s,stats_s\n";
        os << method_name(stats.method) << ',' << stats.model_solves << ','
           << stats.unique_solves << ',' << stats.active_count << ','
           << stats.interpolation_count << ',' << stats.timings.precompute_s << ','
           << stats.timings.solves_s << ',' << stats.timings.stats_s << '\n';
        os.close();
        commit(path + ".tmp", path);
    }
}

QoIStats read_qoi_stats(const std::string& dir, const ExperimentConfig& config) {
    QoIStats stats;
    stats.layout.n_cells = config.fine_nx * config.fine_ny;
    stats.layout.snapshot_pvis = config.snapshots;
    stats.layout.n_watercut = static_cast<int>(std::llround(config.t_end_pvi / config.dt_pvi)) + 1;
    stats.mean.resize(stats.layout.dim());
    stats.std_dev.resize(stats.layout.dim());

    auto source = [&](const std::string& name) {
        const std::string path = (fs::path(dir) / name).string();
        std::ifstream is(path);
        if (!is) throw IoError("cannot open " + path);
        return is;
    };

    for (std::size_t s = 0; s < config.snapshots.size(); ++s) {
        const std::string tag = pvi_tag(config.snapshots[s]);
        int nx, ny;
        {
            std::ifstream is = source("sat_mean_" + tag + ".csv");
            stats.mean.segment(stats.layout.snapshot_offset(static_cast<int>(s)),
                               stats.layout.n_cells) = read_field_csv(is, nx, ny);
        }
        {
            std::ifstream is = source("sat_std_" + tag + ".csv");
            stats.std_dev.segment(stats.layout.snapshot_offset(static_cast<int>(s)),
                                  stats.layout.n_cells) = read_field_csv(is, nx, ny);
        }
    }
    auto read_series = [&](const std::string& name, Eigen::VectorXd& out, int offset) {
        std::ifstream is = source(name);
        std::string line;
        if (!std::getline(is, line) || line != "pvi,value") throw IoError(name + ": bad header");
        for (int t = 0; t < stats.layout.n_watercut; ++t) {
            if (!std::getline(is, line)) throw IoError(name + ": truncated");
            const auto comma = line.find(',');
            out[offset + t] = std::stod(line.substr(comma + 1));
        }
    };
    read_series("watercut_mean.csv", stats.mean, stats.layout.watercut_offset());
    read_series("watercut_std.csv", stats.std_dev, stats.layout.watercut_offset());
    return stats;
}

void write_error_report(const std::string& path, const ErrorReport& report) {
    std::ofstream os(path, std::ios::trunc);
    if (!os) throw IoError("cannot write " + path);
    os << "metric,value\n";
    os.precision(17);
    os << "mean_saturation_L1," << report.mean_sat << '\n';
    os << "std_saturation_L1," << report.std_sat << '\n';
    os << "mean_watercut_L2," << report.mean_watercut << '\n';
    os << "std_watercut_L2," << report.std_watercut << '\n';
}

}  // namespace msflow
