#include "eve/control.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace eve {

std::string regime_name(Regime r) {
    switch (r) {
        case Regime::Homeo: return "homeo";
        case Regime::ProjOff: return "projOFF";
        case Regime::ProjOn: return "projON";
    }
    return "?";
}

Regime regime_from_name(const std::string& s) {
    if (s == "homeo") return Regime::Homeo;
    if (s == "projOFF") return Regime::ProjOff;
    if (s == "projON") return Regime::ProjOn;
    throw std::invalid_argument("unknown regime '" + s +
                                "' (expected homeo, projOFF or projON)");
}

void ControlConfig::validate() const {
    if (!(band_low >= 0.0 && band_low < band_high))
        throw std::invalid_argument("control: need 0 <= band_low < band_high");
    if (lambda_band < 0.0 || beta < 0.0 || tau_free < 0.0)
        throw std::invalid_argument("control: lambda_band, beta, tau_free must be >= 0");
    if (!(homeo.beta_min <= beta && beta <= homeo.beta_max))
        throw std::invalid_argument("control: beta outside [beta_min, beta_max]");
}

LatentEnergy latent_energy(const Tensor& mu) {
    if (mu.shape.size() != 3)
        throw std::invalid_argument("latent_energy: want (B,N,k)");
    std::size_t batch = mu.shape[0], n = mu.shape[1], k = mu.shape[2];
    if (batch == 0) throw std::invalid_argument("latent_energy: empty batch");
    LatentEnergy e;
    e.per_neuron.assign(n, 0.0);
    for (std::size_t b = 0; b < batch; ++b)
        for (std::size_t i = 0; i < n; ++i) {
            double s = 0.0;
            for (std::size_t r = 0; r < k; ++r) {
                double v = mu[(b * n + i) * k + r];
                s += v * v;
            }
            e.per_neuron[i] += s / static_cast<double>(k);
        }
    for (auto& v : e.per_neuron) {
        v /= static_cast<double>(batch);
        e.mu2_bar += v;
    }
    e.mu2_bar /= static_cast<double>(n);
    return e;
}

double band_penalty(double mu2_bar, double ell, double u) {
    if (!(ell < u)) throw std::invalid_argument("band_penalty: need ell < u");
    double lo = std::max(ell - mu2_bar, 0.0);
    double hi = std::max(mu2_bar - u, 0.0);
    return lo * lo + hi * hi;
}

ProjectionEvent project_mean_head(EveLayerParams& params, double mu2_bar,
                                  double ell, double u) {
    ProjectionEvent ev;
    ev.energy_before = mu2_bar;
    ev.energy_after = mu2_bar;
    if (mu2_bar >= ell && mu2_bar <= u) return ev;
    if (mu2_bar <= 0.0) {
        // a zero mean head cannot be rescaled into the band
        ev.skipped_degenerate = true;
        return ev;
    }
    double bound = mu2_bar < ell ? ell : u;
    double s = std::sqrt(bound / mu2_bar);
    for (auto& v : params.a_mu.data) v *= s;
    for (auto& v : params.b_mu.data) v *= s;
    ev.scale = s;
    ev.energy_after = bound;  // energy scales as s^2
    return ev;
}

double kl_eff(double kl, double tau_free) {
    return std::max(kl - tau_free, 0.0);
}

double homeo_step(double beta, double mu2_bar, const ControlConfig& cfg) {
    double over = std::max(mu2_bar - cfg.band_high, 0.0);
    double under = std::max(cfg.band_low - mu2_bar, 0.0);
    double next = beta * std::exp(cfg.homeo.eta * (over - under));
    return std::clamp(next, cfg.homeo.beta_min, cfg.homeo.beta_max);
}

}  // namespace eve
