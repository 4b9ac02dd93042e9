#pragma once

#include <vector>

#include "eve/loss.hpp"
#include "eve/tensor.hpp"

namespace eve {

struct ARConfig {
    bool enabled = false;
    double tau_time = 1.0;  // local time scale, same units as dt
    double dt = 1.0;
    double alpha = 0.0;     // penalty weight
    double sigma_ar = 1.0;  // innovation std of the explicit prior; unused
                            // by the penalty form, stored for completeness

    void validate() const;
    double phi() const;  // exp(-dt / tau_time)
};

double ar_coefficient(double dt, double tau_time);

// (1/(T-1)) sum_t ||mu_t - phi mu_{t-1}||^2, summed over neuron-latent
// coordinates per step and averaged over the batch dimension. Steps are
// (B,N,k) tensors; T < 2 is an error.
double ar_penalty(const std::vector<Tensor>& mu_seq, double phi);

struct ArShare {
    double value = 0.0;
    bool degenerate_total = false;  // total <= 0
};

// Fraction of the total loss contributed by the weighted AR term.
ArShare ar_share(const LossBreakdown& loss);

}  // namespace eve
