#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "eve/config.hpp"
#include "eve/diagnostics.hpp"
#include "eve/trainer.hpp"

namespace eve {

struct CellResult {
    std::size_t k = 1;
    Regime regime = Regime::ProjOff;
    bool ar = false;
    AggregateReport report;
    std::string cell_name;
};

struct SweepResult {
    std::vector<CellResult> cells;
};

std::string cell_tag(std::size_t k, Regime regime, bool ar);

// Runs every (k, regime, ar) cell of the sweep under the shared budget in
// base.train. Per-run seeds are derived from (base_seed, cell tag, seed
// index), so cell ordering and worker count never affect results. Writes
// one subdirectory per cell plus sweep_table.csv when out_dir is
// non-empty.
SweepResult run_sweep(const FullConfig& base, const Dataset& ds,
                      const std::string& out_dir, int workers,
                      std::uint64_t base_seed);

void write_sweep_table(const SweepResult& res, const std::string& csv_path);

struct AnalysisReport {
    PearsonResult correlation;
    std::size_t n_runs = 0;
    std::size_t n_datasets = 0;
    nlohmann::json to_json() const;
};

// Pools completed run records from a directory: test MSE z-scored within
// each dataset, correlated against final out fractions. Optionally writes
// the pooled scatter points as CSV.
AnalysisReport analyze_runs(const std::vector<RunRecord>& records,
                            const std::string& scatter_csv_path = "");
std::vector<RunRecord> load_run_records(const std::string& dir);

struct GradCheckReport {
    int trials = 0;
    int failures = 0;
    double max_rel_err_task = 0.0;
    double max_rel_err_kl = 0.0;
    double max_rel_err_band = 0.0;
    double max_rel_err_ar = 0.0;
    double max_rel_err_total = 0.0;
    bool passed = false;
    nlohmann::json to_json() const;
};

// Random small instances of the full objective (all components active,
// sampled readout) checked against the finite-difference oracle.
GradCheckReport run_gradcheck(int trials, double tolerance,
                              std::uint64_t seed = 12345);

}  // namespace eve
