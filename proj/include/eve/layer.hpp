#pragma once

#include <optional>
#include <string>
#include <vector>

#include "eve/graph.hpp"
#include "eve/rng.hpp"
#include "eve/tensor.hpp"

namespace eve {

enum class ReadoutSource { Means, Samples };
enum class ForwardMode { Stochastic, Deterministic };

struct LayerConfig {
    std::size_t n_neurons = 8;
    std::size_t latent_dim = 1;  // k
    std::size_t input_dim = 1;   // d
    ReadoutSource readout_source = ReadoutSource::Means;
    double sigma_floor = 1e-4;   // logvar clamped at 2*log(sigma_floor)
    int mc_samples = 1;

    void validate() const;
    double logvar_floor() const;
};

// All learnable tensors of one layer: per-neuron affine mean and
// log-variance heads plus the normalized linear readout.
struct EveLayerParams {
    Tensor a_mu;      // (N, k, d)
    Tensor b_mu;      // (N, k)
    Tensor a_logvar;  // (N, k, d)
    Tensor b_logvar;  // (N, k)
    Tensor w;         // (N*k)
    Tensor b0;        // scalar

    static EveLayerParams init(const LayerConfig& cfg, Rng& rng);

    std::vector<Tensor*> tensors();
    std::vector<const Tensor*> tensors() const;
    std::vector<Tensor> to_vector() const;
    void from_vector(const std::vector<Tensor>& v);

    void save(const std::string& path) const;
    static EveLayerParams load(const std::string& path);
};

struct ForwardTrace {
    Tensor mu;       // (B, N, k)
    Tensor logvar;   // (B, N, k)
    Tensor z;        // (B, N, k); equals mu in deterministic mode
    Tensor y_hat;    // (B)
    Tensor per_neuron_kl;  // (N), batch-mean
    double kl_mean = 0.0;
};

// Value-level ops (evaluation / diagnostics path).
void posterior(const EveLayerParams& p, const Tensor& h, const LayerConfig& cfg,
               Tensor& mu, Tensor& logvar);
Tensor reparameterize(const Tensor& mu, const Tensor& logvar, Rng& rng);

struct KlDiag {
    Tensor per_row;     // (B, N), KL summed over latent dims
    Tensor per_neuron;  // (N), batch-mean
};
KlDiag kl_diag(const Tensor& mu, const Tensor& logvar);
double kl_mean(const Tensor& per_neuron_kl);

Tensor readout_value(const Tensor& m, const Tensor& w, double b0,
                     std::size_t n_neurons);

// Full forward pass. rng may be null in deterministic mode. With
// mc_samples > 1, y_hat and KL are averaged over samples and z holds the
// first sample.
ForwardTrace forward(const EveLayerParams& p, const Tensor& h, Rng* rng,
                     ForwardMode mode, const LayerConfig& cfg);

// Graph-building path used by training and the gradient checker.
struct LayerVars {
    VarId a_mu, b_mu, a_logvar, b_logvar, w, b0;
    std::vector<VarId> all() const { return {a_mu, b_mu, a_logvar, b_logvar, w, b0}; }
};

LayerVars declare_params(Graph& g, const EveLayerParams& p);
LayerVars params_from_ids(const std::vector<VarId>& ids);

struct ForwardVars {
    VarId mu, logvar, z, m, y_hat;
};

// eps: fixed standard-normal draw of shape (B,N,k), or null for the
// deterministic limit (z = mu, readout from means).
ForwardVars forward_graph(Graph& g, const LayerVars& lv, VarId h,
                          const Tensor* eps, const LayerConfig& cfg);

// Scalar KL_mean node from posterior statistics.
VarId kl_mean_graph(Graph& g, VarId mu, VarId logvar);

}  // namespace eve
