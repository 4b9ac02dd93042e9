#include "eve/layer.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace eve {

void LayerConfig::validate() const {
    if (n_neurons < 1 || latent_dim < 1 || input_dim < 1)
        throw std::invalid_argument("layer config: N, k, d must all be >= 1");
    if (sigma_floor < 0.0)
        throw std::invalid_argument("layer config: sigma_floor must be >= 0");
    if (mc_samples < 1)
        throw std::invalid_argument("layer config: mc_samples must be >= 1");
}

double LayerConfig::logvar_floor() const {
    return 2.0 * std::log(sigma_floor);
}

EveLayerParams EveLayerParams::init(const LayerConfig& cfg, Rng& rng) {
    cfg.validate();
    std::size_t n = cfg.n_neurons, k = cfg.latent_dim, d = cfg.input_dim;
    EveLayerParams p;
    double head_std = 1.0 / std::sqrt(static_cast<double>(d));
    p.a_mu = rng.normal_tensor({n, k, d});
    for (auto& v : p.a_mu.data) v *= head_std;
    p.b_mu = Tensor({n, k}, 0.0);
    p.a_logvar = rng.normal_tensor({n, k, d});
    for (auto& v : p.a_logvar.data) v *= head_std;
    // sigma ~ 0.37 at init so early KL stays moderate
    p.b_logvar = Tensor({n, k}, -2.0);
    p.w = rng.normal_tensor({n * k});
    double w_std = 1.0 / std::sqrt(static_cast<double>(n * k));
    for (auto& v : p.w.data) v *= w_std;
    p.b0 = Tensor::scalar(0.0);
    return p;
}

std::vector<Tensor*> EveLayerParams::tensors() {
    return {&a_mu, &b_mu, &a_logvar, &b_logvar, &w, &b0};
}

std::vector<const Tensor*> EveLayerParams::tensors() const {
    return {&a_mu, &b_mu, &a_logvar, &b_logvar, &w, &b0};
}

std::vector<Tensor> EveLayerParams::to_vector() const {
    std::vector<Tensor> out;
    for (const Tensor* t : tensors()) out.push_back(*t);
    return out;
}

void EveLayerParams::from_vector(const std::vector<Tensor>& v) {
    auto ts = tensors();
    if (v.size() != ts.size())
        throw std::invalid_argument("params: expected 6 tensors");
    for (std::size_t i = 0; i < ts.size(); ++i) *ts[i] = v[i];
}

// Checkpoint format (stable, documented in the README): a version line,
// then per tensor one header line "name rank extents..." followed by all
// values whitespace-separated on the next line, round-trip-exact via %.17g.
static const char* kParamNames[6] = {"a_mu", "b_mu", "a_logvar",
                                     "b_logvar", "w", "b0"};

void EveLayerParams::save(const std::string& path) const {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot write checkpoint: " + path);
    f << "eve-params v1\n";
    auto ts = tensors();
    char buf[40];
    for (std::size_t i = 0; i < ts.size(); ++i) {
        f << kParamNames[i] << " " << ts[i]->shape.size();
        for (auto e : ts[i]->shape) f << " " << e;
        f << "\n";
        for (std::size_t j = 0; j < ts[i]->size(); ++j) {
            std::snprintf(buf, sizeof buf, "%.17g", (*ts[i])[j]);
            f << (j ? " " : "") << buf;
        }
        f << "\n";
    }
}

EveLayerParams EveLayerParams::load(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot read checkpoint: " + path);
    std::string magic, version;
    f >> magic >> version;
    if (magic != "eve-params" || version != "v1")
        throw std::runtime_error("bad checkpoint header in " + path);
    EveLayerParams p;
    auto ts = p.tensors();
    for (std::size_t i = 0; i < ts.size(); ++i) {
        std::string name;
        std::size_t rank;
        if (!(f >> name >> rank) || name != kParamNames[i])
            throw std::runtime_error("checkpoint: expected tensor '" +
                                     std::string(kParamNames[i]) + "'");
        std::vector<std::size_t> shape(rank);
        for (auto& e : shape) f >> e;
        Tensor t(shape);
        for (auto& v : t.data)
            if (!(f >> v)) throw std::runtime_error("checkpoint: truncated values");
        *ts[i] = std::move(t);
    }
    return p;
}

void posterior(const EveLayerParams& p, const Tensor& h, const LayerConfig& cfg,
               Tensor& mu, Tensor& logvar) {
    h.check_finite("posterior input");
    if (h.shape.size() != 2 || h.shape[1] != cfg.input_dim)
        throw std::invalid_argument("posterior: h must be (B," +
                                    std::to_string(cfg.input_dim) + "), got " +
                                    shape_str(h.shape));
    std::size_t batch = h.shape[0], n = cfg.n_neurons, k = cfg.latent_dim,
                d = cfg.input_dim;
    mu = Tensor({batch, n, k});
    logvar = Tensor({batch, n, k});
    double floor = cfg.sigma_floor > 0.0 ? cfg.logvar_floor() : 0.0;
    for (std::size_t b = 0; b < batch; ++b)
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t r = 0; r < k; ++r) {
                double am = p.b_mu[i * k + r];
                double al = p.b_logvar[i * k + r];
                const double* mrow = &p.a_mu.data[(i * k + r) * d];
                const double* lrow = &p.a_logvar.data[(i * k + r) * d];
                const double* hrow = &h.data[b * d];
                for (std::size_t j = 0; j < d; ++j) {
                    am += mrow[j] * hrow[j];
                    al += lrow[j] * hrow[j];
                }
                if (cfg.sigma_floor > 0.0 && al < floor) al = floor;
                std::size_t idx = (b * n + i) * k + r;
                mu[idx] = am;
                logvar[idx] = al;
            }
}

Tensor reparameterize(const Tensor& mu, const Tensor& logvar, Rng& rng) {
    if (!same_shape(mu, logvar))
        throw std::invalid_argument("reparameterize: mu/logvar shape mismatch");
    Tensor z = mu;
    for (std::size_t i = 0; i < z.size(); ++i)
        z[i] += std::exp(0.5 * logvar[i]) * rng.normal();
    z.check_finite("reparameterize");
    return z;
}

KlDiag kl_diag(const Tensor& mu, const Tensor& logvar) {
    if (!same_shape(mu, logvar) || mu.shape.size() != 3)
        throw std::invalid_argument("kl_diag: want matching (B,N,k) tensors");
    std::size_t batch = mu.shape[0], n = mu.shape[1], k = mu.shape[2];
    KlDiag out;
    out.per_row = Tensor({batch, n}, 0.0);
    out.per_neuron = Tensor({n}, 0.0);
    for (std::size_t b = 0; b < batch; ++b)
        for (std::size_t i = 0; i < n; ++i) {
            double acc = 0.0;
            for (std::size_t r = 0; r < k; ++r) {
                std::size_t idx = (b * n + i) * k + r;
                double lv = logvar[idx];
                acc += mu[idx] * mu[idx] + std::exp(lv) - lv - 1.0;
            }
            acc *= 0.5;
            out.per_row[b * n + i] = acc;
            out.per_neuron[i] += acc / static_cast<double>(batch);
        }
    return out;
}

double kl_mean(const Tensor& per_neuron_kl) {
    if (per_neuron_kl.size() == 0)
        throw std::invalid_argument("kl_mean: empty input");
    double s = 0.0;
    for (double v : per_neuron_kl.data) s += v;
    return s / static_cast<double>(per_neuron_kl.size());
}

Tensor readout_value(const Tensor& m, const Tensor& w, double b0,
                     std::size_t n_neurons) {
    if (m.shape.size() != 2 || w.size() != m.shape[1])
        throw std::invalid_argument("readout: m (B,M) vs w (M) mismatch");
    std::size_t batch = m.shape[0], width = m.shape[1];
    double inv_sqrt_n = 1.0 / std::sqrt(static_cast<double>(n_neurons));
    Tensor y({batch}, 0.0);
    for (std::size_t b = 0; b < batch; ++b) {
        double acc = 0.0;
        for (std::size_t j = 0; j < width; ++j) acc += w[j] * m[b * width + j];
        y[b] = acc * inv_sqrt_n + b0;
    }
    return y;
}

ForwardTrace forward(const EveLayerParams& p, const Tensor& h, Rng* rng,
                     ForwardMode mode, const LayerConfig& cfg) {
    cfg.validate();
    if (mode == ForwardMode::Stochastic && rng == nullptr)
        throw std::invalid_argument("forward: stochastic mode needs an rng");
    ForwardTrace t;
    posterior(p, h, cfg, t.mu, t.logvar);
    std::size_t batch = h.shape[0];
    std::size_t width = cfg.n_neurons * cfg.latent_dim;

    KlDiag kl = kl_diag(t.mu, t.logvar);
    t.per_neuron_kl = kl.per_neuron;
    t.kl_mean = kl_mean(kl.per_neuron);

    auto flat = [&](const Tensor& x) {
        Tensor m = x;
        m.shape = {batch, width};
        return m;
    };

    if (mode == ForwardMode::Deterministic) {
        t.z = t.mu;
        t.y_hat = readout_value(flat(t.mu), p.w, p.b0.item(), cfg.n_neurons);
        return t;
    }

    int s_count = cfg.mc_samples;
    Tensor y_acc({batch}, 0.0);
    for (int s = 0; s < s_count; ++s) {
        Tensor z = reparameterize(t.mu, t.logvar, *rng);
        const Tensor& src =
            cfg.readout_source == ReadoutSource::Samples ? z : t.mu;
        Tensor y = readout_value(flat(src), p.w, p.b0.item(), cfg.n_neurons);
        for (std::size_t b = 0; b < batch; ++b) y_acc[b] += y[b];
        if (s == 0) t.z = std::move(z);
    }
    for (auto& v : y_acc.data) v /= static_cast<double>(s_count);
    t.y_hat = std::move(y_acc);
    return t;
}

LayerVars declare_params(Graph& g, const EveLayerParams& p) {
    LayerVars lv;
    lv.a_mu = g.input(p.a_mu);
    lv.b_mu = g.input(p.b_mu);
    lv.a_logvar = g.input(p.a_logvar);
    lv.b_logvar = g.input(p.b_logvar);
    lv.w = g.input(p.w);
    lv.b0 = g.input(p.b0);
    return lv;
}

LayerVars params_from_ids(const std::vector<VarId>& ids) {
    if (ids.size() != 6)
        throw std::invalid_argument("params_from_ids: expected 6 ids");
    return {ids[0], ids[1], ids[2], ids[3], ids[4], ids[5]};
}

ForwardVars forward_graph(Graph& g, const LayerVars& lv, VarId h,
                          const Tensor* eps, const LayerConfig& cfg) {
    ForwardVars fv;
    fv.mu = g.neuron_affine(lv.a_mu, lv.b_mu, h);
    VarId logvar_raw = g.neuron_affine(lv.a_logvar, lv.b_logvar, h);
    fv.logvar = cfg.sigma_floor > 0.0
                    ? g.clamp_min(logvar_raw, cfg.logvar_floor())
                    : logvar_raw;
    if (eps != nullptr) {
        if (eps->shape != g.value(fv.mu).shape)
            throw std::invalid_argument("forward_graph: eps shape mismatch");
        VarId sigma = g.exp(g.scale(fv.logvar, 0.5));
        fv.z = g.add(fv.mu, g.mul(sigma, g.constant(*eps)));
    } else {
        fv.z = fv.mu;
    }
    std::size_t batch = g.value(fv.mu).shape[0];
    std::size_t width = cfg.n_neurons * cfg.latent_dim;
    VarId src = (eps != nullptr && cfg.readout_source == ReadoutSource::Samples)
                    ? fv.z
                    : fv.mu;
    fv.m = g.reshape(src, {batch, width});
    fv.y_hat = g.readout(fv.m, lv.w, lv.b0, cfg.n_neurons);
    return fv;
}

VarId kl_mean_graph(Graph& g, VarId mu, VarId logvar) {
    // 0.5 (mu^2 + sigma^2 - logvar - 1), summed over k, averaged over
    // batch and neurons
    VarId terms = g.add_scalar(
        g.sub(g.add(g.square(mu), g.exp(logvar)), logvar), -1.0);
    VarId per_neuron = g.reduce_neuron(g.scale(terms, 0.5));
    return g.mean(per_neuron);
}

}  // namespace eve
