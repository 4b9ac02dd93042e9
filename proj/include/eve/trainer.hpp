#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "eve/control.hpp"
#include "eve/data.hpp"
#include "eve/diagnostics.hpp"
#include "eve/layer.hpp"
#include "eve/loss.hpp"
#include "eve/optimizer.hpp"
#include "eve/temporal.hpp"

namespace eve {

struct SelectionWeights {
    double w_out = 0.5;
    double w_kl = 0.0;
};

struct TrainConfig {
    int epochs = 50;
    std::size_t batch_size = 32;
    OptimizerConfig opt;
    double clip_norm = 1.0;
    LayerConfig layer;
    ControlConfig control;
    ARConfig ar;
    std::vector<std::uint64_t> seeds = {1};
    SelectionWeights selection;
    bool deterministic_mode = false;  // DET baseline (sigma -> 0 path)
    bool shuffle_each_epoch = true;
    int mc_eval_samples = 128;  // test-time samples for CRPS / pinball
    double eps_collapse = 0.01;
    int drift_window = 10;

    void validate() const;
    nlohmann::json to_json() const;
};

// One mini-batch as seen by the loss builder. For sequential data the
// inputs hold input_len time-major steps of feat_dim features each.
struct BatchView {
    Tensor inputs;   // (B, input_len * feat_dim)
    Tensor targets;  // (B)
    std::size_t input_len = 1;
    std::size_t feat_dim = 0;
};

// Graph nodes of the full objective on one batch; components are the
// weighted terms, total their sum.
struct LossGraphVars {
    VarId task = -1, kl = -1, band = -1, ar = -1, total = -1;
    VarId y_hat = -1;
    VarId mu2_bar = -1;
    std::vector<VarId> mu_steps;
};

// eps_samples: one standard-normal (B,N,k) tensor per Monte Carlo sample
// for the prediction step; empty when the readout uses means or the run
// is deterministic.
LossGraphVars build_loss_graph(Graph& g, const std::vector<VarId>& param_ids,
                               const BatchView& batch, const TrainConfig& cfg,
                               const std::vector<Tensor>& eps_samples,
                               double beta_now);

LossBreakdown read_breakdown(const Graph& g, const LossGraphVars& lv);

// Value-level recomputation of the objective from a forward trace;
// convenience for tests and diagnostics.
LossBreakdown total_loss(const std::vector<Tensor>& mu_steps,
                         const std::vector<Tensor>& logvar_steps,
                         const Tensor& y_hat, const Tensor& targets,
                         const TrainConfig& cfg, double beta_now);

struct StepResult {
    LossBreakdown loss;
    double grad_norm = 0.0;
    ProjectionEvent projection;
    bool projected = false;
};

struct TrainState {
    TrainConfig cfg;
    EveLayerParams params;
    Optimizer opt;
    Rng rng;
    double beta = 0.0;

    TrainState(const TrainConfig& c, std::uint64_t seed);
};

// One optimization step: forward, loss, backward, clip, apply, and for
// projON the hard projection on the batch statistic. Throws on non-finite
// loss or gradients without touching the parameters.
StepResult train_step(TrainState& st, const BatchView& batch);

// Parameter snapshots from a completed fit: the best-epoch selection and
// the end-of-training state.
struct FitOutputs {
    EveLayerParams best;
    EveLayerParams final;
};

RunRecord fit(const TrainConfig& cfg, const Dataset& ds, std::uint64_t seed,
              std::ostream* metrics_jsonl = nullptr,
              FitOutputs* outputs = nullptr);

struct AggregateReport {
    std::size_t n_completed = 0;
    std::size_t n_aborted = 0;
    // metric -> {mean, std (n-1 denominator, 0 when n == 1)}
    nlohmann::json metrics;
    std::vector<RunRecord> runs;

    nlohmann::json to_json() const;
};

// Mean and sample standard deviation per metric over completed runs;
// throws when every run aborted.
AggregateReport aggregate_runs(std::vector<RunRecord> runs);

AggregateReport multi_seed(const TrainConfig& cfg, const Dataset& ds);

// Evaluation helpers.
double eval_mse(const EveLayerParams& p, const TrainConfig& cfg,
                const Dataset& ds, const std::vector<std::size_t>& idx);

}  // namespace eve
