#pragma once

#include <cstddef>
#include <vector>

#include "jigsawssl/nn.hpp"

namespace jigsawssl {

// Adam with decoupled weight decay. Each phase of the alternating loop owns
// its own optimizer instance, so moment estimates never mix across phases.
class AdamW {
public:
    AdamW(std::vector<Parameter*> params, double lr, double weight_decay,
          double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);

    void zero_grad();
    void step();

    double learning_rate() const { return lr_; }
    void set_learning_rate(double lr) { lr_ = lr; }

private:
    std::vector<Parameter*> params_;
    double lr_, weight_decay_, beta1_, beta2_, eps_;
    std::vector<std::vector<double>> m_, v_;
    long step_count_ = 0;
};

}  // namespace jigsawssl
