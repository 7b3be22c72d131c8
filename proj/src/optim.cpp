#include "jigsawssl/optim.hpp"

#include <cmath>

namespace jigsawssl {

AdamW::AdamW(std::vector<Parameter*> params, double lr, double weight_decay, double beta1,
             double beta2, double eps)
    : params_(std::move(params)), lr_(lr), weight_decay_(weight_decay), beta1_(beta1),
      beta2_(beta2), eps_(eps) {
    m_.reserve(params_.size());
    v_.reserve(params_.size());
    for (const auto* p : params_) {
        m_.emplace_back(p->value.numel(), 0.0);
        v_.emplace_back(p->value.numel(), 0.0);
    }
}

void AdamW::zero_grad() {
    for (auto* p : params_) p->grad.zero();
}

void AdamW::step() {
    ++step_count_;
    const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(step_count_));
    const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(step_count_));

    for (std::size_t k = 0; k < params_.size(); ++k) {
        Parameter& p = *params_[k];
        auto& m = m_[k];
        auto& v = v_[k];
        for (std::size_t i = 0; i < p.value.numel(); ++i) {
            const double g = p.grad.data[i];
            m[i] = beta1_ * m[i] + (1.0 - beta1_) * g;
            v[i] = beta2_ * v[i] + (1.0 - beta2_) * g * g;
            const double mhat = m[i] / bc1;
            const double vhat = v[i] / bc2;
            p.value.data[i] -=
                lr_ * (mhat / (std::sqrt(vhat) + eps_) + weight_decay_ * p.value.data[i]);
        }
    }
}

}  // namespace jigsawssl
