// Trainer: loss decomposition against the value-level oracle, training
// step behavior, fit determinism, abort handling, multi-seed aggregation.

#include <cmath>
#include <limits>
#include <sstream>
#include <vector>

#include "doctest.h"

#include "eve/config.hpp"
#include "eve/trainer.hpp"

using namespace eve;

namespace {

TrainConfig base_config(std::size_t n, std::size_t k, std::size_t d) {
    TrainConfig cfg;
    cfg.layer.n_neurons = n;
    cfg.layer.latent_dim = k;
    cfg.layer.input_dim = d;
    cfg.epochs = 3;
    cfg.batch_size = 16;
    return cfg;
}

Dataset tiny_dataset(std::uint64_t seed = 7, std::size_t n = 120,
                     std::size_t d = 3) {
    Rng rng(seed);
    Dataset ds = synth_tabular(rng, n, d, NoiseKind::Homoscedastic, 0.1);
    ds.splits = make_splits(ds.rows(), true, nullptr);
    standardize(ds);
    return ds;
}

BatchView full_batch(const Dataset& ds) {
    BatchView b;
    b.inputs = ds.gather_features(ds.splits.train);
    b.targets = ds.gather_targets(ds.splits.train);
    b.input_len = ds.input_length;
    b.feat_dim = ds.feat_dim;
    return b;
}

}  // namespace

TEST_CASE("train config validation and snapshot") {
    TrainConfig cfg = base_config(2, 1, 3);
    CHECK_NOTHROW(cfg.validate());
    cfg.epochs = 0;
    CHECK_THROWS(cfg.validate());
    cfg = base_config(2, 1, 3);
    cfg.seeds.clear();
    CHECK_THROWS(cfg.validate());

    cfg = base_config(2, 4, 3);
    auto j = cfg.to_json();
    CHECK(j["layer"]["latent_dim"] == 4);
    CHECK(j["control"]["regime"] == "projOFF");
    CHECK(j["optimizer"]["kind"] == "adam");
}

TEST_CASE("graph loss matches the value-level oracle") {
    Rng rng(33);
    TrainConfig cfg = base_config(3, 2, 4);
    cfg.control.beta = 0.3;
    cfg.control.lambda_band = 0.7;
    cfg.ar.enabled = true;
    cfg.ar.alpha = 0.4;
    cfg.ar.dt = 0.5;
    cfg.ar.tau_time = 1.5;

    // two-step sequential batch
    BatchView batch;
    batch.input_len = 2;
    batch.feat_dim = 4;
    batch.inputs = rng.normal_tensor({5, 8});
    batch.targets = rng.normal_tensor({5});

    EveLayerParams p = EveLayerParams::init(cfg.layer, rng);
    Graph g;
    std::vector<VarId> ids;
    for (const auto& t : p.to_vector()) ids.push_back(g.input(t));
    LossGraphVars lv = build_loss_graph(g, ids, batch, cfg, {}, cfg.control.beta);
    LossBreakdown graph_loss = read_breakdown(g, lv);

    // independent value-level recomputation
    std::vector<Tensor> mu_steps, logvar_steps;
    for (std::size_t t = 0; t < 2; ++t) {
        Tensor h({5, 4});
        for (std::size_t r = 0; r < 5; ++r)
            for (std::size_t c = 0; c < 4; ++c)
                h[r * 4 + c] = batch.inputs[r * 8 + t * 4 + c];
        Tensor mu, logvar;
        posterior(p, h, cfg.layer, mu, logvar);
        mu_steps.push_back(mu);
        logvar_steps.push_back(logvar);
    }
    Tensor m = mu_steps.back();
    m.shape = {5, 6};
    Tensor y = readout_value(m, p.w, p.b0.item(), 3);
    LossBreakdown oracle =
        total_loss(mu_steps, logvar_steps, y, batch.targets, cfg,
                   cfg.control.beta);

    CHECK(graph_loss.task == doctest::Approx(oracle.task).epsilon(1e-12));
    CHECK(graph_loss.kl == doctest::Approx(oracle.kl).epsilon(1e-12));
    CHECK(graph_loss.band == doctest::Approx(oracle.band).epsilon(1e-12));
    CHECK(graph_loss.ar == doctest::Approx(oracle.ar).epsilon(1e-12));
    CHECK(graph_loss.total == doctest::Approx(oracle.total).epsilon(1e-12));
    CHECK(graph_loss.total ==
          doctest::Approx(graph_loss.task + graph_loss.kl + graph_loss.band +
                          graph_loss.ar)
              .epsilon(1e-12));
}

TEST_CASE("loss terms vanish with their weights") {
    Rng rng(44);
    TrainConfig cfg = base_config(2, 1, 3);
    cfg.control.beta = 0.0;
    cfg.control.lambda_band = 0.0;
    cfg.ar.enabled = false;

    BatchView batch;
    batch.input_len = 1;
    batch.feat_dim = 3;
    batch.inputs = rng.normal_tensor({8, 3});
    batch.targets = rng.normal_tensor({8});

    EveLayerParams p = EveLayerParams::init(cfg.layer, rng);
    Graph g;
    std::vector<VarId> ids;
    for (const auto& t : p.to_vector()) ids.push_back(g.input(t));
    LossGraphVars lv = build_loss_graph(g, ids, batch, cfg, {}, 0.0);
    LossBreakdown b = read_breakdown(g, lv);
    CHECK(b.kl == 0.0);
    CHECK(b.band == 0.0);
    CHECK(b.ar == 0.0);
    CHECK(b.total == doctest::Approx(b.task).epsilon(1e-15));
}

TEST_CASE("free bits in the loss clamps small KL to zero") {
    Rng rng(45);
    TrainConfig cfg = base_config(2, 1, 3);
    cfg.control.kl_eff_in_loss = true;
    cfg.control.tau_free = 1e6;  // everything below threshold
    cfg.control.beta = 1.0;

    BatchView batch;
    batch.input_len = 1;
    batch.feat_dim = 3;
    batch.inputs = rng.normal_tensor({4, 3});
    batch.targets = rng.normal_tensor({4});
    EveLayerParams p = EveLayerParams::init(cfg.layer, rng);
    Graph g;
    std::vector<VarId> ids;
    for (const auto& t : p.to_vector()) ids.push_back(g.input(t));
    LossGraphVars lv = build_loss_graph(g, ids, batch, cfg, {}, 1.0);
    CHECK(read_breakdown(g, lv).kl == 0.0);
}

TEST_CASE("train steps reduce the task loss on easy regression") {
    Dataset ds = tiny_dataset();
    TrainConfig cfg = base_config(4, 2, 3);
    cfg.deterministic_mode = true;
    cfg.control.beta = 0.0;
    cfg.control.homeo.beta_min = 0.0;
    cfg.control.lambda_band = 0.0;
    cfg.opt.lr = 0.05;

    TrainState st(cfg, 1);
    BatchView batch = full_batch(ds);
    double first = train_step(st, batch).loss.task;
    double last = first;
    for (int i = 0; i < 30; ++i) last = train_step(st, batch).loss.task;
    CHECK(last < 0.5 * first);
}

TEST_CASE("hard projection keeps the batch statistic in the band") {
    Dataset ds = tiny_dataset();
    TrainConfig cfg = base_config(3, 2, 3);
    cfg.control.regime = Regime::ProjOn;
    cfg.control.band_low = 0.5;
    cfg.control.band_high = 2.0;

    TrainState st(cfg, 5);
    // blow the mean head far above the band before stepping
    for (auto& v : st.params.a_mu.data) v *= 50.0;
    BatchView batch = full_batch(ds);
    StepResult sr = train_step(st, batch);
    CHECK(sr.projected);
    CHECK(sr.projection.scale < 1.0);

    Tensor h({batch.targets.size(), 3});
    for (std::size_t i = 0; i < h.size(); ++i) h[i] = batch.inputs[i];
    Tensor mu, logvar;
    posterior(st.params, h, cfg.layer, mu, logvar);
    double e = latent_energy(mu).mu2_bar;
    CHECK(e >= cfg.control.band_low * (1.0 - 1e-9));
    CHECK(e <= cfg.control.band_high * (1.0 + 1e-9));
}

TEST_CASE("fit is deterministic and records diagnostics") {
    Dataset ds = tiny_dataset();
    TrainConfig cfg = base_config(4, 2, 3);
    cfg.epochs = 4;

    std::ostringstream jsonl;
    RunRecord a = fit(cfg, ds, 11, &jsonl);
    RunRecord b = fit(cfg, ds, 11);
    CHECK(a.completed);
    CHECK(a.to_json() == b.to_json());
    CHECK(a.to_json().dump() == b.to_json().dump());
    CHECK(a.epochs.size() == 4);
    CHECK(a.best_epoch >= 0);
    CHECK(a.val_mse == a.epochs[static_cast<std::size_t>(a.best_epoch)].val_mse);
    CHECK(a.test_mse > 0.0);
    CHECK(a.test_crps > 0.0);

    // one JSONL line per epoch, parseable
    int lines = 0;
    std::istringstream in(jsonl.str());
    std::string line;
    while (std::getline(in, line)) {
        auto j = nlohmann::json::parse(line);
        CHECK(j["epoch"] == lines);
        ++lines;
    }
    CHECK(lines == 4);

    // different seeds give different runs
    RunRecord c = fit(cfg, ds, 12);
    CHECK(a.test_mse != c.test_mse);

    // exposed parameter snapshots reproduce the recorded metrics
    FitOutputs outs;
    RunRecord d = fit(cfg, ds, 11, nullptr, &outs);
    CHECK(eval_mse(outs.best, cfg, ds, ds.splits.val) ==
          doctest::Approx(d.val_mse).epsilon(1e-12));
}

TEST_CASE("selection picks the best validation epoch when weights are zero") {
    Dataset ds = tiny_dataset();
    TrainConfig cfg = base_config(4, 1, 3);
    cfg.epochs = 6;
    cfg.selection.w_out = 0.0;
    cfg.selection.w_kl = 0.0;
    RunRecord r = fit(cfg, ds, 3);
    double best = r.epochs[static_cast<std::size_t>(r.best_epoch)].val_mse;
    for (const auto& e : r.epochs) CHECK(best <= e.val_mse + 1e-15);
}

TEST_CASE("fit aborts cleanly on non-finite data") {
    Dataset ds = tiny_dataset();
    ds.features[0] = std::numeric_limits<double>::infinity();
    TrainConfig cfg = base_config(2, 1, 3);
    cfg.shuffle_each_epoch = false;
    RunRecord r = fit(cfg, ds, 1);
    CHECK(r.aborted);
    CHECK(!r.completed);
    CHECK(!r.abort_reason.empty());
}

TEST_CASE("homeostatic regime moves beta") {
    Dataset ds = tiny_dataset();
    TrainConfig cfg = base_config(3, 2, 3);
    cfg.epochs = 5;
    cfg.control.regime = Regime::Homeo;
    cfg.control.beta = 0.01;
    cfg.control.homeo.eta = 2.0;
    // band far above the operating point so beta keeps shrinking
    cfg.control.band_low = 5.0;
    cfg.control.band_high = 9.0;
    RunRecord r = fit(cfg, ds, 2);
    CHECK(r.epochs.front().beta == doctest::Approx(0.01));
    CHECK(r.epochs.back().beta < 0.01);
}

TEST_CASE("aggregation over seeds") {
    // crafted records: metric mean and sample std with n-1 denominator
    RunRecord a, b;
    for (RunRecord* r : {&a, &b}) {
        r->completed = true;
        EpochDiagnostics e;
        r->epochs.push_back(e);
        r->best_epoch = 0;
    }
    a.test_mse = 0.1;
    b.test_mse = 0.3;
    AggregateReport rep = aggregate_runs({a, b});
    CHECK(rep.n_completed == 2);
    CHECK(rep.metrics["test_mse"]["mean"].get<double>() ==
          doctest::Approx(0.2));
    CHECK(rep.metrics["test_mse"]["std"].get<double>() ==
          doctest::Approx(std::sqrt(0.02)));  // sqrt(((0.1)^2+(0.1)^2)/1)

    // single run: std is zero
    AggregateReport one = aggregate_runs({a});
    CHECK(one.metrics["test_mse"]["std"].get<double>() == 0.0);

    // aborted runs are counted but excluded from statistics
    RunRecord bad;
    bad.aborted = true;
    AggregateReport mixed = aggregate_runs({a, bad});
    CHECK(mixed.n_completed == 1);
    CHECK(mixed.n_aborted == 1);
    CHECK(mixed.metrics["test_mse"]["mean"].get<double>() ==
          doctest::Approx(0.1));
    CHECK_THROWS((void)aggregate_runs({bad}));
}

TEST_CASE("multi seed runs every configured seed") {
    Dataset ds = tiny_dataset();
    TrainConfig cfg = base_config(2, 1, 3);
    cfg.epochs = 2;
    cfg.seeds = {1, 2, 3};
    AggregateReport rep = multi_seed(cfg, ds);
    CHECK(rep.runs.size() == 3);
    CHECK(rep.n_completed == 3);
    CHECK(rep.metrics["test_mse"]["n"] == 3);
}

TEST_CASE("sequential batches feed the AR term") {
    Rng rng(10);
    Tensor series = synth_ar_sequence(rng, 300, 0.8, 0.5);
    WindowSpec spec{6, 1, 1};
    Dataset ds = make_windows(series, spec, 0);
    ds.splits = make_splits(ds.rows(), true, nullptr);
    standardize(ds);

    TrainConfig cfg = base_config(3, 2, 1);
    cfg.ar.enabled = true;
    cfg.ar.alpha = 0.5;
    cfg.ar.dt = 1.0;
    cfg.ar.tau_time = 4.4814;  // phi close to the generator's 0.8
    cfg.epochs = 2;
    RunRecord r = fit(cfg, ds, 1);
    CHECK(r.completed);
    CHECK(r.epochs.back().ar_term > 0.0);
    CHECK(r.epochs.back().ar_share > 0.0);
    CHECK(r.epochs.back().ar_share < 1.0);
}
