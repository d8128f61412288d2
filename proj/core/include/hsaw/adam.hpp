#pragma once

#include <vector>

#include "hsaw/autodiff.hpp"

namespace hsaw::nn {

struct AdamConfig {
    float lr = 2e-4f;
    float beta1 = 0.5f;
    float beta2 = 0.999f;
    float epsilon = 1e-8f;
};

// Standard Adam with bias correction. step() consumes and clears the grads
// populated by backward(); parameters without a grad are rejected.
class Adam {
public:
    Adam(std::vector<Parameter*> params, AdamConfig cfg);

    void step();
    long step_count() const { return t_; }
    const AdamConfig& config() const { return cfg_; }

private:
    struct Moments {
        Tensor m, v;
    };
    std::vector<Parameter*> params_;
    std::vector<Moments> moments_;
    AdamConfig cfg_;
    long t_ = 0;
};

}  // namespace hsaw::nn
