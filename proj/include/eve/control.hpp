#pragma once

#include <string>
#include <vector>

#include "eve/layer.hpp"
#include "eve/tensor.hpp"

namespace eve {

enum class Regime { Homeo, ProjOff, ProjOn };

std::string regime_name(Regime r);
Regime regime_from_name(const std::string& s);

struct HomeoConfig {
    double eta = 0.05;
    double beta_min = 1e-4;
    double beta_max = 10.0;
};

struct ControlConfig {
    double band_low = 0.5;   // ell
    double band_high = 2.0;  // u
    double lambda_band = 1.0;
    Regime regime = Regime::ProjOff;
    double tau_free = 0.1;       // free-bits threshold; scaled by k at setup
    bool kl_eff_in_loss = false; // default: KL_eff is diagnostic-only
    double beta = 0.01;
    HomeoConfig homeo;
    bool projection_per_epoch = false;  // default: project after every step

    void validate() const;
};

struct LatentEnergy {
    double mu2_bar = 0.0;
    std::vector<double> per_neuron;  // ||mu_i||^2 / k, batch-mean
};

// Energy statistic over a (B,N,k) posterior-mean tensor.
LatentEnergy latent_energy(const Tensor& mu);

// (ell - e)_+^2 + (e - u)_+^2
double band_penalty(double mu2_bar, double ell, double u);

struct ProjectionEvent {
    double scale = 1.0;
    double energy_before = 0.0;
    double energy_after = 0.0;
    bool skipped_degenerate = false;  // mu2_bar == 0 with ell > 0
};

// Multiplicative projection of the mean head: scales (A_mu, b_mu) by
// sqrt(bound / mu2_bar) so the energy on the same batch lands exactly on
// the violated bound. No-op inside the band.
ProjectionEvent project_mean_head(EveLayerParams& params, double mu2_bar,
                                  double ell, double u);

double kl_eff(double kl, double tau_free);

// Homeostatic beta controller: multiplicative dual-ascent on the band
// violation, clamped to [beta_min, beta_max]. Applied once per epoch.
double homeo_step(double beta, double mu2_bar, const ControlConfig& cfg);

}  // namespace eve
