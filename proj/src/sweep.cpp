#include "eve/sweep.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <stdexcept>
#include <thread>

namespace fs = std::filesystem;

namespace eve {

std::string cell_tag(std::size_t k, Regime regime, bool ar) {
    return "k=" + std::to_string(k) + "|regime=" + regime_name(regime) +
           "|ar=" + (ar ? std::string("on") : std::string("off"));
}

static TrainConfig cell_config(const FullConfig& base, std::size_t k,
                               Regime regime, bool ar,
                               std::uint64_t base_seed) {
    TrainConfig cfg = base.train;
    // keep the free-bits default proportional to k unless explicitly set
    bool tau_is_default =
        std::fabs(cfg.control.tau_free -
                  0.1 * static_cast<double>(cfg.layer.latent_dim)) < 1e-12;
    cfg.layer.latent_dim = k;
    if (tau_is_default) cfg.control.tau_free = 0.1 * static_cast<double>(k);
    cfg.control.regime = regime;
    cfg.ar.enabled = ar;
    if (ar && cfg.ar.alpha == 0.0) cfg.ar.alpha = 0.1;
    std::string tag = cell_tag(k, regime, ar);
    cfg.seeds.clear();
    for (std::size_t i = 0; i < base.sweep.seeds_per_cell; ++i)
        cfg.seeds.push_back(derive_seed(base_seed, tag + "|seed=" + std::to_string(i)));
    return cfg;
}

static void write_cell_outputs(const CellResult& cell, const std::string& dir) {
    fs::create_directories(dir);
    for (std::size_t i = 0; i < cell.report.runs.size(); ++i) {
        const RunRecord& r = cell.report.runs[i];
        r.save(dir + "/run_" + std::to_string(i) + ".json");
        std::ofstream m(dir + "/metrics_" + std::to_string(i) + ".jsonl");
        for (const auto& e : r.epochs) m << e.to_json().dump() << "\n";
    }
    std::ofstream agg(dir + "/aggregate.json");
    nlohmann::json j{{"cell", cell.cell_name},
                     {"k", cell.k},
                     {"regime", regime_name(cell.regime)},
                     {"ar", cell.ar},
                     {"n_completed", cell.report.n_completed},
                     {"n_aborted", cell.report.n_aborted},
                     {"metrics", cell.report.metrics}};
    agg << j.dump(2) << "\n";
}

SweepResult run_sweep(const FullConfig& base, const Dataset& ds,
                      const std::string& out_dir, int workers,
                      std::uint64_t base_seed) {
    struct Cell {
        std::size_t k;
        Regime regime;
        bool ar;
    };
    std::vector<Cell> cells;
    for (auto k : base.sweep.ks)
        for (auto regime : base.sweep.regimes)
            for (bool ar : base.sweep.ar_flags) cells.push_back({k, regime, ar});
    if (cells.empty()) throw std::invalid_argument("sweep: empty cell grid");

    SweepResult res;
    res.cells.resize(cells.size());
    if (workers < 1)
        workers = std::max(1u, std::thread::hardware_concurrency());

    std::atomic<std::size_t> next{0};
    std::mutex io_mutex;
    auto worker = [&] {
        for (;;) {
            std::size_t i = next.fetch_add(1);
            if (i >= cells.size()) return;
            const Cell& c = cells[i];
            CellResult cr;
            cr.k = c.k;
            cr.regime = c.regime;
            cr.ar = c.ar;
            cr.cell_name = cell_tag(c.k, c.regime, c.ar);
            TrainConfig cfg = cell_config(base, c.k, c.regime, c.ar, base_seed);
            try {
                cr.report = multi_seed(cfg, ds);
            } catch (const std::exception& e) {
                // cell failure is recorded, the sweep continues
                std::lock_guard<std::mutex> lk(io_mutex);
                cr.report.metrics = nlohmann::json{{"error", e.what()}};
            }
            if (!out_dir.empty()) {
                std::string dir = out_dir + "/cell_k" + std::to_string(c.k) +
                                  "_" + regime_name(c.regime) + "_" +
                                  (c.ar ? "arON" : "arOFF");
                write_cell_outputs(cr, dir);
            }
            res.cells[i] = std::move(cr);
        }
    };
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) pool.emplace_back(worker);
    for (auto& t : pool) t.join();

    if (!out_dir.empty()) write_sweep_table(res, out_dir + "/sweep_table.csv");
    return res;
}

static double median_of(std::vector<double> v) {
    if (v.empty()) return 0.0;
    std::sort(v.begin(), v.end());
    std::size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

void write_sweep_table(const SweepResult& res, const std::string& csv_path) {
    std::ofstream f(csv_path);
    if (!f) throw std::runtime_error("cannot write sweep table: " + csv_path);
    f << "k,regime,ar,n_seeds,best_val_mse_mean,best_val_mse_std,"
         "best_score_mean,best_score_std,inside_mass_mean,frac_high_mean,"
         "kl_final_mean,kl_final_median,out_final_mean\n";
    char buf[64];
    auto num = [&](double v) {
        std::snprintf(buf, sizeof buf, "%.9g", v);
        return std::string(buf);
    };
    for (const auto& c : res.cells) {
        std::vector<double> val_mse, score, inside, frac_high, kl_final, out_final;
        for (const auto& r : c.report.runs) {
            if (!r.completed) continue;
            const auto& best = r.epochs[static_cast<std::size_t>(r.best_epoch)];
            val_mse.push_back(r.val_mse);
            score.push_back(best.selection_score);
            inside.push_back(best.inside_mass);
            frac_high.push_back(best.frac_high);
            kl_final.push_back(r.epochs.back().kl_mean);
            out_final.push_back(r.final_out);
        }
        auto mean = [](const std::vector<double>& v) {
            double s = 0.0;
            for (double x : v) s += x;
            return v.empty() ? 0.0 : s / static_cast<double>(v.size());
        };
        auto stdev = [&](const std::vector<double>& v) {
            if (v.size() < 2) return 0.0;
            double m = mean(v), s = 0.0;
            for (double x : v) s += (x - m) * (x - m);
            return std::sqrt(s / static_cast<double>(v.size() - 1));
        };
        f << c.k << "," << regime_name(c.regime) << ","
          << (c.ar ? "on" : "off") << "," << val_mse.size() << ","
          << num(mean(val_mse)) << "," << num(stdev(val_mse)) << ","
          << num(mean(score)) << "," << num(stdev(score)) << ","
          << num(mean(inside)) << "," << num(mean(frac_high)) << ","
          << num(mean(kl_final)) << "," << num(median_of(kl_final)) << ","
          << num(mean(out_final)) << "\n";
    }
}

std::vector<RunRecord> load_run_records(const std::string& dir) {
    std::vector<RunRecord> out;
    if (!fs::exists(dir))
        throw std::runtime_error("records directory not found: " + dir);
    std::vector<std::string> paths;
    for (const auto& e : fs::recursive_directory_iterator(dir))
        if (e.is_regular_file() && e.path().extension() == ".json")
            paths.push_back(e.path().string());
    std::sort(paths.begin(), paths.end());
    for (const auto& p : paths) {
        try {
            RunRecord r = RunRecord::load(p);
            if (r.completed) out.push_back(std::move(r));
        } catch (const std::exception&) {
            // not a run record (e.g. aggregate.json); skip
        }
    }
    return out;
}

nlohmann::json AnalysisReport::to_json() const {
    return nlohmann::json{{"r", correlation.r},
                          {"p", correlation.p},
                          {"n_runs", n_runs},
                          {"n_datasets", n_datasets}};
}

AnalysisReport analyze_runs(const std::vector<RunRecord>& records,
                            const std::string& scatter_csv_path) {
    if (records.size() < 3)
        throw std::invalid_argument(
            "analyze: need at least 3 completed run records, got " +
            std::to_string(records.size()));

    // z-score test MSE within each dataset before pooling
    std::vector<std::string> datasets;
    for (const auto& r : records)
        if (std::find(datasets.begin(), datasets.end(), r.dataset_name) ==
            datasets.end())
            datasets.push_back(r.dataset_name);

    std::vector<double> out_frac(records.size()), norm_mse(records.size());
    for (const auto& name : datasets) {
        std::vector<std::size_t> idx;
        for (std::size_t i = 0; i < records.size(); ++i)
            if (records[i].dataset_name == name) idx.push_back(i);
        double m = 0.0;
        for (auto i : idx) m += records[i].test_mse;
        m /= static_cast<double>(idx.size());
        double sd = 0.0;
        for (auto i : idx) {
            double d = records[i].test_mse - m;
            sd += d * d;
        }
        sd = idx.size() > 1
                 ? std::sqrt(sd / static_cast<double>(idx.size() - 1))
                 : 0.0;
        for (auto i : idx) {
            out_frac[i] = records[i].final_out;
            norm_mse[i] = sd > 0.0 ? (records[i].test_mse - m) / sd : 0.0;
        }
    }

    if (!scatter_csv_path.empty()) {
        std::ofstream f(scatter_csv_path);
        f << "dataset,out,test_mse,normalized_mse\n";
        for (std::size_t i = 0; i < records.size(); ++i)
            f << records[i].dataset_name << "," << out_frac[i] << ","
              << records[i].test_mse << "," << norm_mse[i] << "\n";
    }

    AnalysisReport rep;
    rep.n_runs = records.size();
    rep.n_datasets = datasets.size();
    rep.correlation = pearson(out_frac, norm_mse);
    return rep;
}

nlohmann::json GradCheckReport::to_json() const {
    return nlohmann::json{{"trials", trials},
                          {"failures", failures},
                          {"max_rel_err_task", max_rel_err_task},
                          {"max_rel_err_kl", max_rel_err_kl},
                          {"max_rel_err_band", max_rel_err_band},
                          {"max_rel_err_ar", max_rel_err_ar},
                          {"max_rel_err_total", max_rel_err_total},
                          {"passed", passed}};
}

GradCheckReport run_gradcheck(int trials, double tolerance,
                              std::uint64_t seed) {
    if (trials < 1) throw std::invalid_argument("gradcheck: trials must be >= 1");
    Rng rng(seed);
    GradCheckReport rep;
    rep.trials = trials;

    for (int trial = 0; trial < trials; ++trial) {
        TrainConfig cfg;
        cfg.layer.n_neurons = 1 + rng.next_u64() % 4;
        cfg.layer.latent_dim = 1 + rng.next_u64() % 3;
        cfg.layer.input_dim = 1 + rng.next_u64() % 5;
        cfg.layer.readout_source = ReadoutSource::Samples;
        cfg.layer.sigma_floor = 1e-6;
        std::size_t batch = 2 + rng.next_u64() % 5;
        std::size_t steps = 2 + rng.next_u64() % 2;
        cfg.control.beta = 0.3;
        cfg.control.lambda_band = 0.7;
        cfg.ar.enabled = true;
        cfg.ar.tau_time = 1.0;
        cfg.ar.dt = 0.5;
        cfg.ar.alpha = 0.4;

        BatchView bv;
        bv.input_len = steps;
        bv.feat_dim = cfg.layer.input_dim;
        bv.inputs = rng.normal_tensor({batch, steps * cfg.layer.input_dim});
        bv.targets = rng.normal_tensor({batch});

        Rng prng(rng.next_u64());
        EveLayerParams params = EveLayerParams::init(cfg.layer, prng);
        std::vector<Tensor> eps = {prng.normal_tensor(
            {batch, cfg.layer.n_neurons, cfg.layer.latent_dim})};

        // place the band so the hinge is active but away from its kink
        double energy = 0.0;
        for (std::size_t t = 0; t < steps; ++t) {
            Tensor mu, logvar;
            std::size_t width = bv.feat_dim;
            Tensor h({batch, width});
            for (std::size_t r = 0; r < batch; ++r)
                for (std::size_t c = 0; c < width; ++c)
                    h[r * width + c] =
                        bv.inputs[r * steps * width + t * width + c];
            posterior(params, h, cfg.layer, mu, logvar);
            energy += latent_energy(mu).mu2_bar;
        }
        energy /= static_cast<double>(steps);
        if (trial % 2 == 0) {
            cfg.control.band_low = 0.4 * energy;
            cfg.control.band_high = 0.7 * energy;  // energy above band
        } else {
            cfg.control.band_low = 1.5 * energy + 0.1;
            cfg.control.band_high = 2.0 * energy + 0.2;  // energy below band
        }

        auto component = [&](int which) {
            return [&, which](Graph& g, const std::vector<VarId>& ids) {
                LossGraphVars lv =
                    build_loss_graph(g, ids, bv, cfg, eps, cfg.control.beta);
                switch (which) {
                    case 0: return lv.task;
                    case 1: return lv.kl;
                    case 2: return lv.band;
                    case 3: return lv.ar;
                    default: return lv.total;
                }
            };
        };

        std::vector<Tensor> pvec = params.to_vector();
        double* maxima[5] = {&rep.max_rel_err_task, &rep.max_rel_err_kl,
                             &rep.max_rel_err_band, &rep.max_rel_err_ar,
                             &rep.max_rel_err_total};
        bool trial_failed = false;
        for (int which = 0; which < 5; ++which) {
            std::vector<Tensor> analytic = grad(component(which), pvec);
            std::vector<Tensor> numeric = fd_gradient(component(which), pvec, 1e-5);
            // absolute floor 1e-7 at the reference tolerance 1e-4
            const double denom_floor = 1e-3;
            for (std::size_t p = 0; p < analytic.size(); ++p)
                for (std::size_t i = 0; i < analytic[p].size(); ++i) {
                    double err = std::fabs(analytic[p][i] - numeric[p][i]) /
                                 std::max(std::fabs(numeric[p][i]), denom_floor);
                    *maxima[which] = std::max(*maxima[which], err);
                    if (err >= tolerance) trial_failed = true;
                }
        }
        if (trial_failed) ++rep.failures;
    }
    rep.passed = rep.failures == 0;
    return rep;
}

}  // namespace eve
