#include "hsaw/adam.hpp"

#include <cmath>
#include <stdexcept>

namespace hsaw::nn {

Adam::Adam(std::vector<Parameter*> params, AdamConfig cfg) : params_(std::move(params)), cfg_(cfg) {
    if (!(cfg_.lr > 0.0f)) throw std::invalid_argument("adam: lr must be positive");
    if (!(cfg_.beta1 >= 0.0f && cfg_.beta1 < 1.0f) || !(cfg_.beta2 >= 0.0f && cfg_.beta2 < 1.0f)) {
        throw std::invalid_argument("adam: betas must lie in [0,1)");
    }
    moments_.reserve(params_.size());
    for (const Parameter* p : params_) {
        moments_.push_back({Tensor(p->value().shape()), Tensor(p->value().shape())});
    }
}

void Adam::step() {
    for (const Parameter* p : params_) {
        if (!p->has_grad()) {
            throw std::logic_error("adam: parameter '" + p->name() + "' has no gradient");
        }
    }
    ++t_;
    const float bc1 = 1.0f - std::pow(cfg_.beta1, static_cast<float>(t_));
    const float bc2 = 1.0f - std::pow(cfg_.beta2, static_cast<float>(t_));
    for (std::size_t i = 0; i < params_.size(); ++i) {
        Parameter& p = *params_[i];
        Tensor& m = moments_[i].m;
        Tensor& v = moments_[i].v;
        const Tensor& g = p.grad();
        Tensor& w = p.value();
        const std::int64_t n = w.numel();
        for (std::int64_t j = 0; j < n; ++j) {
            const float gj = g[j];
            m[j] = cfg_.beta1 * m[j] + (1.0f - cfg_.beta1) * gj;
            v[j] = cfg_.beta2 * v[j] + (1.0f - cfg_.beta2) * gj * gj;
            const float mhat = m[j] / bc1;
            const float vhat = v[j] / bc2;
            w[j] -= cfg_.lr * mhat / (std::sqrt(vhat) + cfg_.epsilon);
        }
        p.zero_grad();
    }
}

}  // namespace hsaw::nn
