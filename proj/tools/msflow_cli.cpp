#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "msflow/driver.hpp"

namespace fs = std::filesystem;
using namespace msflow;

namespace {

struct CommonOpts {
    std::string config_path;
    std::string method;
    int n_terms = -1;
    double zeta = -1.0;
    int level = -1;
    std::string output;
    int workers = -1;
    std::string cache_dir;
};

void add_common(CLI::App* cmd, CommonOpts& opts, bool need_config = true) {
    auto* c = cmd->add_option("-c,--config", opts.config_path, "experiment config (JSON)");
    if (need_config) c->required();
    cmd->add_option("--method", opts.method, "override run.method");
    cmd->add_option("--n-terms", opts.n_terms, "override kle.n_terms");
    cmd->add_option("--zeta", opts.zeta, "override stochastic.zeta");
    cmd->add_option("--level", opts.level, "override stochastic.level");
    cmd->add_option("-o,--output", opts.output, "override run.output_dir");
    cmd->add_option("--workers", opts.workers, "override run.workers");
    cmd->add_option("--cache-dir", opts.cache_dir, "override run.cache_dir");
}

ExperimentConfig resolve_config(const CommonOpts& opts) {
    ExperimentConfig config =
        opts.config_path.empty() ? ExperimentConfig{} : load_config(opts.config_path);
    if (!opts.method.empty()) config.method = method_from_name(opts.method);
    if (opts.n_terms > 0) config.n_terms = opts.n_terms;
    if (opts.zeta > 0.0) config.zeta = opts.zeta;
    if (opts.level >= 0) config.level = opts.level;
    if (!opts.output.empty()) config.output_dir = opts.output;
    if (opts.workers >= 0) config.workers = opts.workers;
    if (!opts.cache_dir.empty()) config.cache_dir = opts.cache_dir;
    config.validate();
    return config;
}

int cmd_kle(const CommonOpts& opts, const std::string& out_path) {
    ExperimentConfig config = resolve_config(opts);
    const KLBasis klb = build_or_load_kle(config);
    if (!out_path.empty()) save_kl_basis(out_path, klb);
    std::printf("kle: %d terms on %dx%d grid, energy fraction %.6f\n", klb.n_terms(), klb.nx,
                klb.ny, energy_fraction(klb, klb.n_terms()));
    return 0;
}

int cmd_sensitivity(const CommonOpts& opts, const std::string& out_path) {
    ExperimentConfig config = resolve_config(opts);
    // Screening always runs on the method's own solver family.
    QoIStats stats = run_experiment(config, config.method);
    std::ofstream os(out_path.empty() ? "sensitivity.csv" : out_path, std::ios::trunc);
    if (!os) throw IoError("cannot write sensitivity CSV");
    os << "rank,dimension,selected\n";
    for (std::size_t r = 0; r < stats.active.size(); ++r)
        os << r << ',' << stats.active[r] << ",1\n";
    std::printf("sensitivity: selected %d of %d dimensions\n", stats.active_count,
                config.n_terms);
    return 0;
}

int cmd_run(const CommonOpts& opts) {
    ExperimentConfig config = resolve_config(opts);
    const QoIStats stats = run_experiment(config, config.method);
    write_qoi_stats(config.output_dir, stats, config);
    std::printf("run: %s -> %s (ledger %llu solves, %llu unique)\n",
                method_name(config.method).c_str(), config.output_dir.c_str(),
                static_cast<unsigned long long>(stats.model_solves),
                static_cast<unsigned long long>(stats.unique_solves));
    return 0;
}

int cmd_stats(const CommonOpts& opts, const std::string& dir) {
    ExperimentConfig config = resolve_config(opts);
    const QoIStats stats = read_qoi_stats(dir, config);
    for (std::size_t s = 0; s < stats.layout.snapshot_pvis.size(); ++s) {
        const Eigen::VectorXd mean = stats.mean_saturation(static_cast<int>(s));
        const Eigen::VectorXd sd = stats.std_saturation(static_cast<int>(s));
        std::printf("pvi %.4f: mean saturation in [%.4f, %.4f], std max %.4f\n",
                    stats.layout.snapshot_pvis[s], mean.minCoeff(), mean.maxCoeff(),
                    sd.maxCoeff());
    }
    const int off = stats.layout.watercut_offset();
    std::printf("watercut final: mean %.4f, std %.4f\n",
                stats.mean[off + stats.layout.n_watercut - 1],
                stats.std_dev[off + stats.layout.n_watercut - 1]);
    return 0;
}

int cmd_compare(const CommonOpts& opts, const std::string& ref_dir, const std::string& test_dir,
                double pvi, const std::string& out_path) {
    ExperimentConfig config = resolve_config(opts);
    const QoIStats ref = read_qoi_stats(ref_dir, config);
    const QoIStats test = read_qoi_stats(test_dir, config);
    const ErrorReport report = relative_errors(ref, test, pvi);
    write_error_report(out_path.empty() ? "errors.csv" : out_path, report);
    std::printf("compare: mean_sat %.6e std_sat %.6e mean_wc %.6e std_wc %.6e\n",
                report.mean_sat, report.std_sat, report.mean_watercut, report.std_watercut);
    return 0;
}

int cmd_counts(int n, int j, int level, int order) {
    const ComplexityLedger ledger = complexity_counts(n, j, level, order);
    std::printf("method,collocation_points\n");
    std::printf("full,%llu\n", static_cast<unsigned long long>(ledger.full));
    std::printf("truncated_%d,%llu\n", order, static_cast<unsigned long long>(ledger.truncated_q));
    std::printf("hybrid,%llu\n", static_cast<unsigned long long>(ledger.hybrid));
    std::printf("adaptive,%llu\n", static_cast<unsigned long long>(ledger.adaptive));
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Stochastic multiscale two-phase flow simulator"};
    app.require_subcommand(1);

    CommonOpts opts;
    std::string out_path, dir, ref_dir, test_dir;
    double pvi = 0.4;
    int n = 80, j = 31, level = 2, order = 2;

    auto* kle = app.add_subcommand("kle", "build and cache the KL basis");
    add_common(kle, opts);
    kle->add_option("--out", out_path, "also save the basis to this file");

    auto* sens = app.add_subcommand("sensitivity", "run the first-order screening");
    add_common(sens, opts);
    sens->add_option("--out", out_path, "CSV output path");

    auto* run = app.add_subcommand("run", "run an experiment, write QoI artifacts");
    add_common(run, opts);

    auto* stats = app.add_subcommand("stats", "summarize a QoI artifact directory");
    add_common(stats, opts);
    stats->add_option("--dir", dir, "artifact directory")->required();

    auto* compare = app.add_subcommand("compare", "error report between two runs");
    add_common(compare, opts);
    compare->add_option("--ref", ref_dir, "reference artifact directory")->required();
    compare->add_option("--test", test_dir, "test artifact directory")->required();
    compare->add_option("--pvi", pvi, "saturation comparison time");
    compare->add_option("--out", out_path, "errors CSV path");

    auto* counts = app.add_subcommand("counts", "collocation-point ledger table");
    counts->add_option("--n", n, "stochastic dimension");
    counts->add_option("--j", j, "active dimension count");
    counts->add_option("--level", level, "sparse grid level");
    counts->add_option("--q", order, "truncation order");

    CLI11_PARSE(app, argc, argv);

    try {
        if (kle->parsed()) return cmd_kle(opts, out_path);
        if (sens->parsed()) return cmd_sensitivity(opts, out_path);
        if (run->parsed()) return cmd_run(opts);
        if (stats->parsed()) return cmd_stats(opts, dir);
        if (compare->parsed()) return cmd_compare(opts, ref_dir, test_dir, pvi, out_path);
        if (counts->parsed()) return cmd_counts(n, j, level, order);
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
