#include "eve/temporal.hpp"

#include <cmath>
#include <stdexcept>

namespace eve {

void ARConfig::validate() const {
    if (tau_time <= 0.0)
        throw std::invalid_argument("ar config: tau_time must be > 0");
    if (dt < 0.0) throw std::invalid_argument("ar config: dt must be >= 0");
    if (alpha < 0.0) throw std::invalid_argument("ar config: alpha must be >= 0");
}

double ARConfig::phi() const { return ar_coefficient(dt, tau_time); }

double ar_coefficient(double dt, double tau_time) {
    if (tau_time <= 0.0)
        throw std::invalid_argument("ar_coefficient: tau_time must be > 0");
    if (dt < 0.0) throw std::invalid_argument("ar_coefficient: dt must be >= 0");
    return std::exp(-dt / tau_time);
}

double ar_penalty(const std::vector<Tensor>& mu_seq, double phi) {
    std::size_t steps = mu_seq.size();
    if (steps < 2)
        throw std::invalid_argument("ar_penalty: need at least 2 time steps");
    const auto& shape = mu_seq[0].shape;
    if (shape.size() != 3)
        throw std::invalid_argument("ar_penalty: steps must be (B,N,k)");
    std::size_t batch = shape[0];
    double acc = 0.0;
    for (std::size_t t = 1; t < steps; ++t) {
        if (mu_seq[t].shape != shape)
            throw std::invalid_argument("ar_penalty: inconsistent step shapes");
        double term = 0.0;
        for (std::size_t i = 0; i < mu_seq[t].size(); ++i) {
            double d = mu_seq[t][i] - phi * mu_seq[t - 1][i];
            term += d * d;
        }
        acc += term / static_cast<double>(batch);
    }
    return acc / static_cast<double>(steps - 1);
}

ArShare ar_share(const LossBreakdown& loss) {
    ArShare s;
    if (loss.ar == 0.0) return s;
    if (loss.total <= 0.0) {
        s.degenerate_total = true;
        return s;
    }
    s.value = loss.ar / loss.total;
    return s;
}

}  // namespace eve
