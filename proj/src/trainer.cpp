#include "eve/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <stdexcept>

namespace eve {

void TrainConfig::validate() const {
    if (epochs < 1) throw std::invalid_argument("train: epochs must be >= 1");
    if (batch_size < 1) throw std::invalid_argument("train: batch_size must be >= 1");
    if (seeds.empty()) throw std::invalid_argument("train: seeds must be non-empty");
    if (mc_eval_samples < 1)
        throw std::invalid_argument("train: mc_eval_samples must be >= 1");
    layer.validate();
    control.validate();
    ar.validate();
}

nlohmann::json TrainConfig::to_json() const {
    return nlohmann::json{
        {"epochs", epochs},
        {"batch_size", batch_size},
        {"optimizer",
         {{"kind", opt.kind == OptimizerKind::Adam ? "adam" : "adamw"},
          {"lr", opt.lr},
          {"beta1", opt.beta1},
          {"beta2", opt.beta2},
          {"eps", opt.eps},
          {"weight_decay", opt.weight_decay}}},
        {"clip_norm", clip_norm},
        {"layer",
         {{"neurons", layer.n_neurons},
          {"latent_dim", layer.latent_dim},
          {"input_dim", layer.input_dim},
          {"readout",
           layer.readout_source == ReadoutSource::Means ? "means" : "samples"},
          {"sigma_floor", layer.sigma_floor},
          {"mc_samples", layer.mc_samples}}},
        {"control",
         {{"band_low", control.band_low},
          {"band_high", control.band_high},
          {"lambda_band", control.lambda_band},
          {"regime", regime_name(control.regime)},
          {"tau_free", control.tau_free},
          {"kl_eff_in_loss", control.kl_eff_in_loss},
          {"beta", control.beta},
          {"homeo_eta", control.homeo.eta},
          {"beta_min", control.homeo.beta_min},
          {"beta_max", control.homeo.beta_max},
          {"projection_per_epoch", control.projection_per_epoch}}},
        {"ar",
         {{"enabled", ar.enabled},
          {"tau_time", ar.tau_time},
          {"dt", ar.dt},
          {"alpha", ar.alpha},
          {"sigma_ar", ar.sigma_ar}}},
        {"seeds", seeds},
        {"selection", {{"w_out", selection.w_out}, {"w_kl", selection.w_kl}}},
        {"deterministic_mode", deterministic_mode},
        {"shuffle_each_epoch", shuffle_each_epoch},
        {"mc_eval_samples", mc_eval_samples},
        {"eps_collapse", eps_collapse},
        {"drift_window", drift_window}};
}

static Tensor step_slice(const BatchView& b, std::size_t t) {
    std::size_t rows = b.targets.size();
    Tensor h({rows, b.feat_dim});
    std::size_t width = b.input_len * b.feat_dim;
    for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < b.feat_dim; ++c)
            h[r * b.feat_dim + c] = b.inputs[r * width + t * b.feat_dim + c];
    return h;
}

LossGraphVars build_loss_graph(Graph& g, const std::vector<VarId>& param_ids,
                               const BatchView& batch, const TrainConfig& cfg,
                               const std::vector<Tensor>& eps_samples,
                               double beta_now) {
    LayerVars lv = params_from_ids(param_ids);
    const ControlConfig& ctl = cfg.control;
    std::size_t steps = batch.input_len;
    std::size_t rows = batch.targets.size();
    if (rows == 0) throw std::invalid_argument("loss: empty batch");

    LossGraphVars out;
    VarId kl_acc = -1, energy_acc = -1;
    std::vector<VarId> logvar_steps;
    for (std::size_t t = 0; t < steps; ++t) {
        VarId h = g.constant(step_slice(batch, t));
        VarId mu = g.neuron_affine(lv.a_mu, lv.b_mu, h);
        VarId logvar_raw = g.neuron_affine(lv.a_logvar, lv.b_logvar, h);
        VarId logvar = cfg.layer.sigma_floor > 0.0
                           ? g.clamp_min(logvar_raw, cfg.layer.logvar_floor())
                           : logvar_raw;
        out.mu_steps.push_back(mu);
        logvar_steps.push_back(logvar);
        VarId kl_t = kl_mean_graph(g, mu, logvar);
        VarId e_t = g.mean(g.square(mu));  // == mean_{b,i} ||mu_i||^2 / k
        kl_acc = (kl_acc < 0) ? kl_t : g.add(kl_acc, kl_t);
        energy_acc = (energy_acc < 0) ? e_t : g.add(energy_acc, e_t);
    }
    double inv_steps = 1.0 / static_cast<double>(steps);
    VarId kl_scalar = g.scale(kl_acc, inv_steps);
    out.mu2_bar = g.scale(energy_acc, inv_steps);

    // prediction from the last time step
    VarId mu_last = out.mu_steps.back();
    VarId logvar_last = logvar_steps.back();
    std::size_t width = cfg.layer.n_neurons * cfg.layer.latent_dim;
    VarId m;
    if (!eps_samples.empty()) {
        VarId sigma = g.exp(g.scale(logvar_last, 0.5));
        VarId y_acc = -1;
        for (const Tensor& eps : eps_samples) {
            VarId z = g.add(mu_last, g.mul(sigma, g.constant(eps)));
            VarId ms = g.reshape(z, {rows, width});
            VarId y = g.readout(ms, lv.w, lv.b0, cfg.layer.n_neurons);
            y_acc = (y_acc < 0) ? y : g.add(y_acc, y);
        }
        out.y_hat = g.scale(y_acc, 1.0 / static_cast<double>(eps_samples.size()));
    } else {
        m = g.reshape(mu_last, {rows, width});
        out.y_hat = g.readout(m, lv.w, lv.b0, cfg.layer.n_neurons);
    }

    out.task = g.mse(out.y_hat, g.constant(batch.targets));

    VarId kl_used = ctl.kl_eff_in_loss
                        ? g.clamp_min(g.add_scalar(kl_scalar, -ctl.tau_free), 0.0)
                        : kl_scalar;
    out.kl = g.scale(kl_used, beta_now);

    // (ell - e)_+^2 + (e - u)_+^2
    VarId lo = g.clamp_min(g.add_scalar(g.scale(out.mu2_bar, -1.0), ctl.band_low), 0.0);
    VarId hi = g.clamp_min(g.add_scalar(out.mu2_bar, -ctl.band_high), 0.0);
    out.band = g.scale(g.add(g.square(lo), g.square(hi)), ctl.lambda_band);

    if (cfg.ar.enabled && steps >= 2) {
        double phi = cfg.ar.phi();
        VarId acc = -1;
        for (std::size_t t = 1; t < steps; ++t) {
            VarId d = g.sub(out.mu_steps[t], g.scale(out.mu_steps[t - 1], phi));
            VarId term = g.scale(g.sum(g.square(d)),
                                 1.0 / static_cast<double>(rows));
            acc = (acc < 0) ? term : g.add(acc, term);
        }
        VarId penalty = g.scale(acc, 1.0 / static_cast<double>(steps - 1));
        out.ar = g.scale(penalty, cfg.ar.alpha);
    } else {
        out.ar = g.constant(Tensor::scalar(0.0));
    }

    out.total = g.add(g.add(out.task, out.kl), g.add(out.band, out.ar));
    return out;
}

LossBreakdown read_breakdown(const Graph& g, const LossGraphVars& lv) {
    LossBreakdown b;
    b.task = g.scalar(lv.task);
    b.kl = g.scalar(lv.kl);
    b.band = g.scalar(lv.band);
    b.ar = g.scalar(lv.ar);
    b.total = g.scalar(lv.total);
    return b;
}

LossBreakdown total_loss(const std::vector<Tensor>& mu_steps,
                         const std::vector<Tensor>& logvar_steps,
                         const Tensor& y_hat, const Tensor& targets,
                         const TrainConfig& cfg, double beta_now) {
    if (mu_steps.empty() || mu_steps.size() != logvar_steps.size())
        throw std::invalid_argument("total_loss: bad step lists");
    const ControlConfig& ctl = cfg.control;
    LossBreakdown b;
    double kl_sum = 0.0, energy_sum = 0.0;
    for (std::size_t t = 0; t < mu_steps.size(); ++t) {
        kl_sum += kl_mean(kl_diag(mu_steps[t], logvar_steps[t]).per_neuron);
        energy_sum += latent_energy(mu_steps[t]).mu2_bar;
    }
    double kl_scalar = kl_sum / static_cast<double>(mu_steps.size());
    double mu2_bar = energy_sum / static_cast<double>(mu_steps.size());

    if (!same_shape(y_hat, targets))
        throw std::invalid_argument("total_loss: prediction/target mismatch");
    double mse = 0.0;
    for (std::size_t i = 0; i < y_hat.size(); ++i) {
        double d = y_hat[i] - targets[i];
        mse += d * d;
    }
    b.task = mse / static_cast<double>(y_hat.size());

    double kl_used = ctl.kl_eff_in_loss ? kl_eff(kl_scalar, ctl.tau_free)
                                        : kl_scalar;
    b.kl = beta_now * kl_used;
    b.band = ctl.lambda_band * band_penalty(mu2_bar, ctl.band_low, ctl.band_high);
    if (cfg.ar.enabled && mu_steps.size() >= 2)
        b.ar = cfg.ar.alpha * ar_penalty(mu_steps, cfg.ar.phi());
    b.total = b.task + b.kl + b.band + b.ar;
    if (!std::isfinite(b.total))
        throw std::runtime_error("total_loss: non-finite objective");
    return b;
}

TrainState::TrainState(const TrainConfig& c, std::uint64_t seed)
    : cfg(c), params(), opt(c.opt), rng(seed), beta(c.control.beta) {
    cfg.validate();
    params = EveLayerParams::init(cfg.layer, rng);
}

// Batch-statistic energy with the current parameters (mean over steps).
static double batch_energy(const EveLayerParams& p, const BatchView& batch,
                           const LayerConfig& lcfg) {
    double acc = 0.0;
    for (std::size_t t = 0; t < batch.input_len; ++t) {
        Tensor mu, logvar;
        posterior(p, step_slice(batch, t), lcfg, mu, logvar);
        acc += latent_energy(mu).mu2_bar;
    }
    return acc / static_cast<double>(batch.input_len);
}

StepResult train_step(TrainState& st, const BatchView& batch) {
    const TrainConfig& cfg = st.cfg;
    std::size_t rows = batch.targets.size();

    std::vector<Tensor> eps;
    bool sample_path = !cfg.deterministic_mode &&
                       cfg.layer.readout_source == ReadoutSource::Samples;
    if (sample_path) {
        for (int s = 0; s < cfg.layer.mc_samples; ++s)
            eps.push_back(st.rng.normal_tensor(
                {rows, cfg.layer.n_neurons, cfg.layer.latent_dim}));
    }

    Graph g;
    std::vector<Tensor> pvec = st.params.to_vector();
    std::vector<VarId> ids;
    for (const auto& t : pvec) ids.push_back(g.input(t));
    LossGraphVars lv = build_loss_graph(g, ids, batch, cfg, eps, st.beta);
    g.backward(lv.total);

    std::vector<Tensor> grads;
    for (VarId id : ids) grads.push_back(g.grad(id));

    StepResult res;
    res.loss = read_breakdown(g, lv);
    res.grad_norm = global_norm(grads);

    st.opt.apply(pvec, std::move(grads), cfg.clip_norm);
    st.params.from_vector(pvec);

    if (cfg.control.regime == Regime::ProjOn && !cfg.control.projection_per_epoch) {
        double e = batch_energy(st.params, batch, cfg.layer);
        res.projection = project_mean_head(st.params, e, cfg.control.band_low,
                                           cfg.control.band_high);
        res.projected = res.projection.scale != 1.0 ||
                        res.projection.skipped_degenerate;
    }
    return res;
}

static BatchView make_batch(const Dataset& ds,
                            const std::vector<std::size_t>& idx) {
    BatchView b;
    b.inputs = ds.gather_features(idx);
    b.targets = ds.gather_targets(idx);
    b.input_len = ds.input_length;
    b.feat_dim = ds.feat_dim;
    return b;
}

// Deterministic point predictions (posterior means through the readout).
static Tensor predict(const EveLayerParams& p, const TrainConfig& cfg,
                      const BatchView& batch) {
    Tensor mu, logvar;
    posterior(p, step_slice(batch, batch.input_len - 1), cfg.layer, mu, logvar);
    std::size_t rows = batch.targets.size();
    Tensor m = mu;
    m.shape = {rows, cfg.layer.n_neurons * cfg.layer.latent_dim};
    return readout_value(m, p.w, p.b0.item(), cfg.layer.n_neurons);
}

double eval_mse(const EveLayerParams& p, const TrainConfig& cfg,
                const Dataset& ds, const std::vector<std::size_t>& idx) {
    if (idx.empty()) throw std::invalid_argument("eval_mse: empty index set");
    BatchView b = make_batch(ds, idx);
    Tensor y = predict(p, cfg, b);
    double s = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        double d = y[i] - b.targets[i];
        s += d * d;
    }
    return s / static_cast<double>(y.size());
}

struct ValStats {
    double mse = 0.0;
    double kl_mean = 0.0;
    double mu2_bar = 0.0;
    std::vector<double> per_neuron_energy;
    std::vector<double> per_neuron_kl;
    double reparam = 0.0;
};

static ValStats val_stats(const EveLayerParams& p, const TrainConfig& cfg,
                          const BatchView& batch, Rng& rng) {
    ValStats v;
    std::size_t n = cfg.layer.n_neurons;
    v.per_neuron_energy.assign(n, 0.0);
    v.per_neuron_kl.assign(n, 0.0);
    Tensor mu_last, logvar_last;
    for (std::size_t t = 0; t < batch.input_len; ++t) {
        Tensor mu, logvar;
        posterior(p, step_slice(batch, t), cfg.layer, mu, logvar);
        LatentEnergy e = latent_energy(mu);
        KlDiag kl = kl_diag(mu, logvar);
        v.mu2_bar += e.mu2_bar;
        v.kl_mean += kl_mean(kl.per_neuron);
        for (std::size_t i = 0; i < n; ++i) {
            v.per_neuron_energy[i] += e.per_neuron[i];
            v.per_neuron_kl[i] += kl.per_neuron[i];
        }
        if (t + 1 == batch.input_len) {
            mu_last = std::move(mu);
            logvar_last = std::move(logvar);
        }
    }
    double inv = 1.0 / static_cast<double>(batch.input_len);
    v.mu2_bar *= inv;
    v.kl_mean *= inv;
    for (auto& x : v.per_neuron_energy) x *= inv;
    for (auto& x : v.per_neuron_kl) x *= inv;

    std::size_t rows = batch.targets.size();
    Tensor m = mu_last;
    m.shape = {rows, n * cfg.layer.latent_dim};
    Tensor y = readout_value(m, p.w, p.b0.item(), n);
    double s = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        double d = y[i] - batch.targets[i];
        s += d * d;
    }
    v.mse = s / static_cast<double>(y.size());

    if (!cfg.deterministic_mode) {
        Tensor z = reparameterize(mu_last, logvar_last, rng);
        v.reparam = reparam_proxy(z, mu_last, cfg.layer.latent_dim);
    }
    return v;
}

static double median_of(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    std::size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

// Empirical CRPS and mean pinball loss from per-row sample sets.
static void probabilistic_metrics(const EveLayerParams& p,
                                  const TrainConfig& cfg, const BatchView& batch,
                                  Rng& rng, double& crps, double& pinball) {
    std::size_t rows = batch.targets.size();
    int s_count = cfg.mc_eval_samples;
    std::vector<std::vector<double>> samples(rows);
    if (cfg.deterministic_mode) {
        Tensor y = predict(p, cfg, batch);
        for (std::size_t r = 0; r < rows; ++r)
            samples[r].assign(static_cast<std::size_t>(s_count), y[r]);
    } else {
        Tensor mu, logvar;
        posterior(p, step_slice(batch, batch.input_len - 1), cfg.layer, mu,
                  logvar);
        std::size_t width = cfg.layer.n_neurons * cfg.layer.latent_dim;
        for (int s = 0; s < s_count; ++s) {
            Tensor z = reparameterize(mu, logvar, rng);
            Tensor m = z;
            m.shape = {rows, width};
            Tensor y = readout_value(m, p.w, p.b0.item(), cfg.layer.n_neurons);
            for (std::size_t r = 0; r < rows; ++r) samples[r].push_back(y[r]);
        }
    }
    double crps_acc = 0.0, pin_acc = 0.0;
    const double quantiles[] = {0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9};
    for (std::size_t r = 0; r < rows; ++r) {
        auto& xs = samples[r];
        double yt = batch.targets[r];
        double term1 = 0.0;
        for (double x : xs) term1 += std::fabs(x - yt);
        term1 /= static_cast<double>(xs.size());
        std::sort(xs.begin(), xs.end());
        // E|X-X'| for sorted samples via the rank identity
        double term2 = 0.0;
        for (std::size_t i = 0; i < xs.size(); ++i)
            term2 += (2.0 * static_cast<double>(i) -
                      static_cast<double>(xs.size()) + 1.0) *
                     xs[i];
        term2 = 2.0 * term2 /
                (static_cast<double>(xs.size()) * static_cast<double>(xs.size()));
        crps_acc += term1 - 0.5 * term2;
        for (double q : quantiles) {
            double pos = q * static_cast<double>(xs.size() - 1);
            std::size_t lo = static_cast<std::size_t>(pos);
            double frac = pos - static_cast<double>(lo);
            double pred = lo + 1 < xs.size()
                              ? xs[lo] * (1.0 - frac) + xs[lo + 1] * frac
                              : xs[lo];
            double diff = yt - pred;
            pin_acc += diff >= 0.0 ? q * diff : (q - 1.0) * (-diff);
        }
    }
    crps = crps_acc / static_cast<double>(rows);
    pinball = pin_acc / (static_cast<double>(rows) * 9.0);
}

RunRecord fit(const TrainConfig& cfg, const Dataset& ds, std::uint64_t seed,
              std::ostream* metrics_jsonl, FitOutputs* outputs) {
    cfg.validate();
    if (ds.splits.train.empty() || ds.splits.val.empty() || ds.splits.test.empty())
        throw std::invalid_argument("fit: dataset needs non-empty splits");
    if (ds.feat_dim != cfg.layer.input_dim)
        throw std::invalid_argument("fit: layer input_dim " +
                                    std::to_string(cfg.layer.input_dim) +
                                    " vs dataset feat_dim " +
                                    std::to_string(ds.feat_dim));

    RunRecord rec;
    rec.config = cfg.to_json();
    rec.dataset_name = ds.name;
    rec.seed = seed;

    TrainState st(cfg, seed);
    BatchView val_batch = make_batch(ds, ds.splits.val);

    std::vector<std::size_t> order = ds.splits.train;
    std::vector<double> mu2_history;
    EveLayerParams best_params = st.params;
    double best_score = std::numeric_limits<double>::infinity();

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        if (cfg.shuffle_each_epoch) {
            for (std::size_t i = order.size() - 1; i > 0; --i) {
                std::size_t j =
                    static_cast<std::size_t>(st.rng.next_u64() % (i + 1));
                std::swap(order[i], order[j]);
            }
        }

        LossBreakdown epoch_loss;
        double grad_norm_acc = 0.0;
        int n_steps = 0;
        int proj_events = 0;
        double proj_corr = 0.0;
        try {
            for (std::size_t start = 0; start < order.size();
                 start += cfg.batch_size) {
                std::size_t end = std::min(order.size(), start + cfg.batch_size);
                std::vector<std::size_t> idx(order.begin() + start,
                                             order.begin() + end);
                StepResult sr = train_step(st, make_batch(ds, idx));
                epoch_loss.task += sr.loss.task;
                epoch_loss.kl += sr.loss.kl;
                epoch_loss.band += sr.loss.band;
                epoch_loss.ar += sr.loss.ar;
                epoch_loss.total += sr.loss.total;
                grad_norm_acc += sr.grad_norm;
                ++n_steps;
                if (sr.projected && sr.projection.scale != 1.0) {
                    ++proj_events;
                    proj_corr += std::fabs(1.0 - sr.projection.scale);
                }
            }
            if (cfg.control.regime == Regime::ProjOn &&
                cfg.control.projection_per_epoch) {
                BatchView last = make_batch(ds, ds.splits.train);
                double e = batch_energy(st.params, last, cfg.layer);
                ProjectionEvent ev = project_mean_head(
                    st.params, e, cfg.control.band_low, cfg.control.band_high);
                if (ev.scale != 1.0) {
                    ++proj_events;
                    proj_corr += std::fabs(1.0 - ev.scale);
                }
            }
        } catch (const std::exception& e) {
            rec.aborted = true;
            rec.abort_reason = e.what();
            break;
        }
        double inv_steps = n_steps > 0 ? 1.0 / n_steps : 0.0;
        epoch_loss.task *= inv_steps;
        epoch_loss.kl *= inv_steps;
        epoch_loss.band *= inv_steps;
        epoch_loss.ar *= inv_steps;
        epoch_loss.total *= inv_steps;

        ValStats vs = val_stats(st.params, cfg, val_batch, st.rng);
        mu2_history.push_back(vs.mu2_bar);

        EpochDiagnostics d;
        d.epoch = epoch;
        d.train_loss = epoch_loss.total;
        d.task = epoch_loss.task;
        d.kl_term = epoch_loss.kl;
        d.band_term = epoch_loss.band;
        d.ar_term = epoch_loss.ar;
        d.val_mse = vs.mse;
        d.kl_mean = vs.kl_mean;
        d.kl_eff = kl_eff(vs.kl_mean, cfg.control.tau_free);
        d.mu2_bar = vs.mu2_bar;
        {
            auto e = vs.per_neuron_energy;
            d.energy_min = *std::min_element(e.begin(), e.end());
            d.energy_max = *std::max_element(e.begin(), e.end());
            d.energy_median = median_of(e);
        }
        BandOccupancy occ = band_occupancy(vs.per_neuron_energy,
                                           cfg.control.band_low,
                                           cfg.control.band_high);
        d.frac_low = occ.frac_low;
        d.frac_high = occ.frac_high;
        d.inside_mass = occ.inside_mass;
        d.out = occ.out;
        d.reparam_proxy = vs.reparam;
        d.collapse_fraction = collapse_fraction(vs.per_neuron_kl, cfg.eps_collapse);
        d.drift = drift(mu2_history, cfg.drift_window);
        d.ar_share = ar_share(epoch_loss).value;
        d.beta = st.beta;
        d.grad_norm = n_steps > 0 ? grad_norm_acc / n_steps : 0.0;
        d.projection_events = proj_events;
        d.projection_mean_abs_correction =
            proj_events > 0 ? proj_corr / proj_events : 0.0;
        double kl_eff_norm = d.kl_eff / (d.kl_eff + 1.0);
        d.selection_score = selection_score(vs.mse, occ.out, kl_eff_norm,
                                            cfg.selection.w_out,
                                            cfg.selection.w_kl);
        rec.epochs.push_back(d);
        if (metrics_jsonl) *metrics_jsonl << d.to_json().dump() << "\n";

        if (d.selection_score < best_score) {
            best_score = d.selection_score;
            best_params = st.params;
            rec.best_epoch = epoch;
        }

        if (cfg.control.regime == Regime::Homeo)
            st.beta = homeo_step(st.beta, vs.mu2_bar, cfg.control);
    }

    if (!rec.aborted && !rec.epochs.empty()) {
        rec.val_mse = rec.epochs[static_cast<std::size_t>(rec.best_epoch)].val_mse;
        rec.final_out = rec.epochs.back().out;
        BatchView test_batch = make_batch(ds, ds.splits.test);
        Tensor y = predict(best_params, cfg, test_batch);
        double mse = 0.0, mae = 0.0;
        for (std::size_t i = 0; i < y.size(); ++i) {
            double diff = y[i] - test_batch.targets[i];
            mse += diff * diff;
            mae += std::fabs(diff);
        }
        rec.test_mse = mse / static_cast<double>(y.size());
        rec.test_mae = mae / static_cast<double>(y.size());
        probabilistic_metrics(best_params, cfg, test_batch, st.rng,
                              rec.test_crps, rec.test_pinball);
        rec.completed = true;
    }
    if (outputs) {
        outputs->best = best_params;
        outputs->final = st.params;
    }
    return rec;
}

nlohmann::json AggregateReport::to_json() const {
    nlohmann::json runs_json = nlohmann::json::array();
    for (const auto& r : runs) runs_json.push_back(r.to_json());
    return nlohmann::json{{"n_completed", n_completed},
                          {"n_aborted", n_aborted},
                          {"metrics", metrics},
                          {"runs", runs_json}};
}

AggregateReport aggregate_runs(std::vector<RunRecord> runs) {
    AggregateReport rep;
    rep.runs = std::move(runs);
    for (const auto& r : rep.runs) {
        if (r.completed) ++rep.n_completed;
        else ++rep.n_aborted;
    }
    if (rep.n_completed == 0)
        throw std::runtime_error("aggregate: all runs aborted");

    auto agg = [&](auto getter) {
        std::vector<double> vals;
        for (const auto& r : rep.runs)
            if (r.completed) vals.push_back(getter(r));
        double mean = 0.0;
        for (double v : vals) mean += v;
        mean /= static_cast<double>(vals.size());
        double sd = 0.0;
        if (vals.size() > 1) {
            for (double v : vals) sd += (v - mean) * (v - mean);
            sd = std::sqrt(sd / static_cast<double>(vals.size() - 1));
        }
        return nlohmann::json{{"mean", mean},
                              {"std", sd},
                              {"n", vals.size()}};
    };
    rep.metrics = nlohmann::json{
        {"val_mse", agg([](const RunRecord& r) { return r.val_mse; })},
        {"test_mse", agg([](const RunRecord& r) { return r.test_mse; })},
        {"test_mae", agg([](const RunRecord& r) { return r.test_mae; })},
        {"test_crps", agg([](const RunRecord& r) { return r.test_crps; })},
        {"test_pinball", agg([](const RunRecord& r) { return r.test_pinball; })},
        {"final_out", agg([](const RunRecord& r) { return r.final_out; })},
        {"final_kl_mean",
         agg([](const RunRecord& r) { return r.epochs.back().kl_mean; })},
        {"best_score", agg([](const RunRecord& r) {
             return r.epochs[static_cast<std::size_t>(r.best_epoch)]
                 .selection_score;
         })}};
    return rep;
}

AggregateReport multi_seed(const TrainConfig& cfg, const Dataset& ds) {
    cfg.validate();
    std::vector<RunRecord> runs;
    for (auto seed : cfg.seeds) runs.push_back(fit(cfg, ds, seed));
    return aggregate_runs(std::move(runs));
}

}  // namespace eve
