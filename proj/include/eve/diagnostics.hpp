#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "eve/tensor.hpp"

#include "json.hpp"

namespace eve {

struct BandOccupancy {
    double frac_low = 0.0;
    double frac_high = 0.0;
    double inside_mass = 1.0;
    double out = 0.0;
};

// Per-neuron band membership; boundary values count as inside.
BandOccupancy band_occupancy(const std::vector<double>& per_neuron_energy,
                             double ell, double u);

// E ||z - mu||_1 / k, mean over batch rows and neurons.
double reparam_proxy(const Tensor& z, const Tensor& mu, std::size_t k);

double collapse_fraction(const std::vector<double>& per_neuron_kl,
                         double eps_collapse);

// |current - trailing-window mean| / (trailing mean + 1e-8) over a
// mu2_bar history; last entry is "current".
double drift(const std::vector<double>& mu2_history, int window);

struct PearsonResult {
    double r = 0.0;
    double p = 1.0;
    std::size_t n = 0;
};

// Sample Pearson correlation with a two-sided p-value from the Student-t
// distribution with n-2 degrees of freedom (regularized incomplete beta
// via Lentz's continued fraction).
PearsonResult pearson(const std::vector<double>& xs,
                      const std::vector<double>& ys);

double student_t_two_sided_p(double t, double dof);

// val_mse * (1 + w_out * out + w_kl * kl_eff_norm); lower is better.
double selection_score(double val_mse, double out, double kl_eff_norm,
                       double w_out, double w_kl);

struct EpochDiagnostics {
    int epoch = 0;
    double train_loss = 0.0;
    double task = 0.0, kl_term = 0.0, band_term = 0.0, ar_term = 0.0;
    double val_mse = 0.0;
    double kl_mean = 0.0;
    double kl_eff = 0.0;
    double mu2_bar = 0.0;
    double energy_min = 0.0, energy_median = 0.0, energy_max = 0.0;
    double frac_low = 0.0, frac_high = 0.0, inside_mass = 1.0, out = 0.0;
    double reparam_proxy = 0.0;
    double collapse_fraction = 0.0;
    double drift = 0.0;
    double ar_share = 0.0;
    double beta = 0.0;  // current KL weight (moves under homeo)
    double grad_norm = 0.0;
    int projection_events = 0;
    double projection_mean_abs_correction = 0.0;  // mean |1 - s|
    double selection_score = 0.0;

    nlohmann::json to_json() const;
    static EpochDiagnostics from_json(const nlohmann::json& j);
};

struct RunRecord {
    nlohmann::json config;  // full config snapshot
    std::string dataset_name;
    std::uint64_t seed = 0;
    std::vector<EpochDiagnostics> epochs;
    int best_epoch = -1;
    double val_mse = 0.0;
    double test_mse = 0.0;
    double test_mae = 0.0;
    double test_crps = 0.0;     // Monte Carlo estimate, reporting-only
    double test_pinball = 0.0;  // mean pinball over q in {0.1,...,0.9}
    double final_out = 0.0;
    bool completed = false;
    bool aborted = false;
    std::string abort_reason;

    nlohmann::json to_json() const;
    static RunRecord from_json(const nlohmann::json& j);
    void save(const std::string& path) const;
    static RunRecord load(const std::string& path);
};

}  // namespace eve
