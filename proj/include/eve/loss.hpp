#pragma once

namespace eve {

// Weighted components of the training objective. total is the optimized
// scalar; kl/band/ar already carry their weights.
struct LossBreakdown {
    double task = 0.0;
    double kl = 0.0;    // beta * KL term
    double band = 0.0;  // lambda_band * band penalty
    double ar = 0.0;    // alpha_ar * AR penalty
    double total = 0.0;
};

}  // namespace eve
