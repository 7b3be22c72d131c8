#pragma once

#include <vector>

#include "jigsawssl/tensor.hpp"

namespace jigsawssl {

// Probabilities are clamped to >= kLogitsProbFloor inside the losses so the
// log stays finite.
inline constexpr double kProbFloor = 1e-12;

struct LossResult {
    double value = 0.0;
    Tensor grad_logits;  // dL/dlogits, same shape as the input logits
};

// Row-wise softmax of [N, K] logits.
Tensor softmax(const Tensor& logits);

// Mean over the batch of -w[y_i] * log p(y_i | x_i), Eq.-style weighted
// cross-entropy. class_weights must cover every label that appears.
LossResult weighted_cross_entropy(const Tensor& logits, const std::vector<int>& labels,
                                  const std::vector<double>& class_weights);

// Supervised lesion loss: binary labels, inverse-class-frequency weights.
LossResult supervised_loss(const Tensor& logits, const std::vector<int>& labels,
                           const std::vector<double>& class_weights);

// Weight vector over pseudo-labels {0..P}: w_0 = 1/(1-s), w_{1..P} = P/s.
// Throws for s in {0, 1}.
std::vector<double> jigsaw_class_weights(double scrambled_fraction, int permutation_count);

// Unsupervised jigsaw loss over pseudo-labels {0..P}.
LossResult unsupervised_loss(const Tensor& logits, const std::vector<int>& pseudo_labels,
                             const std::vector<double>& label_weights);

}  // namespace jigsawssl
