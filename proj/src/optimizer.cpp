#include "eve/optimizer.hpp"

#include <cmath>
#include <stdexcept>

namespace eve {

double global_norm(const std::vector<Tensor>& grads) {
    double s = 0.0;
    for (const auto& g : grads)
        for (double v : g.data) s += v * v;
    return std::sqrt(s);
}

double clip_by_global_norm(std::vector<Tensor>& grads, double clip_norm) {
    double norm = global_norm(grads);
    if (clip_norm > 0.0 && norm > clip_norm) {
        double scale = clip_norm / norm;
        for (auto& g : grads)
            for (double& v : g.data) v *= scale;
    }
    return norm;
}

void Optimizer::apply(std::vector<Tensor>& params, std::vector<Tensor> grads,
                      double clip_norm) {
    if (params.size() != grads.size())
        throw std::invalid_argument("optimizer: params/grads count mismatch");
    for (std::size_t p = 0; p < params.size(); ++p) {
        if (!same_shape(params[p], grads[p]))
            throw std::invalid_argument("optimizer: grad shape mismatch at param " +
                                        std::to_string(p));
        grads[p].check_finite("gradient (param " + std::to_string(p) + ")");
    }

    clip_by_global_norm(grads, clip_norm);

    if (m_.empty()) {
        for (const auto& p : params) {
            m_.emplace_back(p.shape, 0.0);
            v_.emplace_back(p.shape, 0.0);
        }
    }

    ++step_;
    double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(step_));
    double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(step_));

    for (std::size_t p = 0; p < params.size(); ++p) {
        Tensor& w = params[p];
        const Tensor& g = grads[p];
        Tensor& m = m_[p];
        Tensor& v = v_[p];
        for (std::size_t i = 0; i < w.size(); ++i) {
            m[i] = cfg_.beta1 * m[i] + (1.0 - cfg_.beta1) * g[i];
            v[i] = cfg_.beta2 * v[i] + (1.0 - cfg_.beta2) * g[i] * g[i];
            double m_hat = m[i] / bc1;
            double v_hat = v[i] / bc2;
            double update = m_hat / (std::sqrt(v_hat) + cfg_.eps);
            if (cfg_.kind == OptimizerKind::AdamW)
                update += cfg_.weight_decay * w[i];
            w[i] -= cfg_.lr * update;
        }
        w.check_finite("parameter after update");
    }
}

}  // namespace eve
