// eve: train / sweep / ablate / analyze / gradcheck entry point.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include "CLI11.hpp"

#include "eve/config.hpp"
#include "eve/sweep.hpp"
#include "eve/trainer.hpp"

namespace fs = std::filesystem;
using namespace eve;

namespace {

FullConfig load_config(const std::string& path) {
    FullConfig cfg = parse_config_file(path);
    return cfg;
}

Dataset build_dataset(FullConfig& cfg) {
    Dataset ds = cfg.data.build();
    cfg.train.layer.input_dim = ds.feat_dim;  // csv width known only now
    return ds;
}

int cmd_train(const std::string& config_path, const std::string& out_dir) {
    FullConfig cfg = load_config(config_path);
    Dataset ds = build_dataset(cfg);
    fs::create_directories(out_dir);
    {
        std::ofstream mf(out_dir + "/manifest.json");
        mf << ds.manifest().dump(2) << "\n";
    }
    std::vector<RunRecord> runs;
    for (auto seed : cfg.train.seeds) {
        std::ofstream metrics(out_dir + "/metrics_" + std::to_string(seed) +
                              ".jsonl");
        RunRecord r = fit(cfg.train, ds, seed, &metrics);
        r.save(out_dir + "/run_" + std::to_string(seed) + ".json");
        if (r.aborted)
            std::cerr << "seed " << seed << " aborted: " << r.abort_reason
                      << "\n";
        runs.push_back(std::move(r));
    }
    AggregateReport rep = aggregate_runs(std::move(runs));
    {
        std::ofstream af(out_dir + "/aggregate.json");
        af << rep.to_json().dump(2) << "\n";
    }
    std::cout << "completed " << rep.n_completed << "/"
              << (rep.n_completed + rep.n_aborted) << " runs; test_mse "
              << rep.metrics["test_mse"]["mean"].get<double>() << " +/- "
              << rep.metrics["test_mse"]["std"].get<double>() << "\n";
    return 0;
}

int cmd_sweep(const std::string& config_path, const std::string& out_dir,
              int workers, std::uint64_t base_seed, bool ablate_mode) {
    FullConfig cfg = load_config(config_path);
    Dataset ds = build_dataset(cfg);
    if (ablate_mode) {
        // AR ON/OFF comparison at the configured (k, regime) point
        cfg.sweep.ks = {cfg.train.layer.latent_dim};
        cfg.sweep.regimes = {cfg.train.control.regime};
        cfg.sweep.ar_flags = {false, true};
    }
    fs::create_directories(out_dir);
    SweepResult res = run_sweep(cfg, ds, out_dir, workers, base_seed);
    std::cout << "sweep finished: " << res.cells.size() << " cells -> "
              << out_dir << "/sweep_table.csv\n";
    return 0;
}

int cmd_analyze(const std::string& records_dir, const std::string& out_dir) {
    std::vector<RunRecord> records = load_run_records(records_dir);
    fs::create_directories(out_dir);
    AnalysisReport rep = analyze_runs(records, out_dir + "/scatter.csv");
    {
        std::ofstream f(out_dir + "/analysis.json");
        f << rep.to_json().dump(2) << "\n";
    }
    std::cout << "out vs normalized test MSE: r = " << rep.correlation.r
              << ", p = " << rep.correlation.p << ", n = " << rep.n_runs
              << " runs across " << rep.n_datasets << " dataset(s)\n";
    return 0;
}

int cmd_gradcheck(int trials, double tolerance) {
    GradCheckReport rep = run_gradcheck(trials, tolerance);
    std::cout << "gradcheck: " << rep.trials << " trials, " << rep.failures
              << " failures\n"
              << "  max rel err  task  " << rep.max_rel_err_task << "\n"
              << "               kl    " << rep.max_rel_err_kl << "\n"
              << "               band  " << rep.max_rel_err_band << "\n"
              << "               ar    " << rep.max_rel_err_ar << "\n"
              << "               total " << rep.max_rel_err_total << "\n"
              << (rep.passed ? "PASS" : "FAIL") << " at tolerance "
              << tolerance << "\n";
    return rep.passed ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"EVE variational neuron: training, sweeps and analysis"};
    app.require_subcommand(1);

    std::string config_path, out_dir = "out", records_dir;
    int workers = 0;
    std::uint64_t base_seed = 42;
    int trials = 20;
    double tolerance = 1e-4;

    auto* train = app.add_subcommand("train", "run fit + multi-seed aggregation");
    train->add_option("--config", config_path, "config file")->required();
    train->add_option("--out-dir", out_dir, "output directory");

    auto* sweep = app.add_subcommand("sweep", "structured (k, regime, ar) sweep");
    sweep->add_option("--config", config_path, "config file")->required();
    sweep->add_option("--out-dir", out_dir, "output directory");
    sweep->add_option("--workers", workers, "worker pool size (0 = cores)");
    sweep->add_option("--seed", base_seed, "base seed for cell derivation");

    auto* ablate = app.add_subcommand("ablate", "AR ON/OFF comparison");
    ablate->add_option("--config", config_path, "config file")->required();
    ablate->add_option("--out-dir", out_dir, "output directory");
    ablate->add_option("--workers", workers, "worker pool size (0 = cores)");
    ablate->add_option("--seed", base_seed, "base seed for cell derivation");

    auto* analyze = app.add_subcommand("analyze", "pool run records, out-vs-MSE correlation");
    analyze->add_option("--records", records_dir, "directory of run records")->required();
    analyze->add_option("--out-dir", out_dir, "output directory");

    auto* gradcheck = app.add_subcommand("gradcheck", "analytic vs finite-difference gradients");
    gradcheck->add_option("--trials", trials, "number of random instances");
    gradcheck->add_option("--tolerance", tolerance, "relative tolerance");

    CLI11_PARSE(app, argc, argv);

    try {
        if (app.got_subcommand(train)) return cmd_train(config_path, out_dir);
        if (app.got_subcommand(sweep))
            return cmd_sweep(config_path, out_dir, workers, base_seed, false);
        if (app.got_subcommand(ablate))
            return cmd_sweep(config_path, out_dir, workers, base_seed, true);
        if (app.got_subcommand(analyze)) return cmd_analyze(records_dir, out_dir);
        if (app.got_subcommand(gradcheck)) return cmd_gradcheck(trials, tolerance);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 1;
}
