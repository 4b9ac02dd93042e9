#pragma once

#include <cstdint>
#include <vector>

#include "eve/tensor.hpp"

namespace eve {

enum class OptimizerKind { Adam, AdamW };

struct OptimizerConfig {
    OptimizerKind kind = OptimizerKind::Adam;
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.0;  // decoupled, AdamW only
};

double global_norm(const std::vector<Tensor>& grads);

// Scales grads in place so the global norm is at most clip_norm; returns
// the pre-clip norm. clip_norm <= 0 disables clipping.
double clip_by_global_norm(std::vector<Tensor>& grads, double clip_norm);

// Adam / AdamW with bias correction. Moment buffers are created on the
// first apply and must shape-match the parameters afterwards.
class Optimizer {
public:
    explicit Optimizer(OptimizerConfig cfg) : cfg_(cfg) {}

    // Clips, then updates params in place. Throws on non-finite grads.
    void apply(std::vector<Tensor>& params, std::vector<Tensor> grads,
               double clip_norm);

    std::int64_t step_count() const { return step_; }
    const OptimizerConfig& config() const { return cfg_; }

private:
    OptimizerConfig cfg_;
    std::int64_t step_ = 0;
    std::vector<Tensor> m_, v_;
};

}  // namespace eve
