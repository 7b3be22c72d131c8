#include "jigsawssl/losses.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace jigsawssl {

Tensor softmax(const Tensor& logits) {
    if (logits.rank() != 2) throw std::invalid_argument("softmax: expected [N,K] logits");
    const int n = logits.dim(0), k = logits.dim(1);
    Tensor probs(logits.shape);
    for (int i = 0; i < n; ++i) {
        const double* row = logits.ptr() + static_cast<std::size_t>(i) * k;
        double* out = probs.ptr() + static_cast<std::size_t>(i) * k;
        const double m = *std::max_element(row, row + k);
        double sum = 0.0;
        for (int j = 0; j < k; ++j) {
            out[j] = std::exp(row[j] - m);
            sum += out[j];
        }
        for (int j = 0; j < k; ++j) out[j] /= sum;
    }
    return probs;
}

LossResult weighted_cross_entropy(const Tensor& logits, const std::vector<int>& labels,
                                  const std::vector<double>& class_weights) {
    if (logits.rank() != 2) throw std::invalid_argument("cross_entropy: expected [N,K] logits");
    const int n = logits.dim(0), k = logits.dim(1);
    if (n == 0) throw std::invalid_argument("cross_entropy: empty batch");
    if (static_cast<int>(labels.size()) != n) {
        throw std::invalid_argument("cross_entropy: " + std::to_string(labels.size()) +
                                    " labels for " + std::to_string(n) + " rows");
    }

    const double log_floor = std::log(kProbFloor);
    LossResult res;
    res.grad_logits = Tensor(logits.shape);

    double total = 0.0;
    for (int i = 0; i < n; ++i) {
        const int y = labels[static_cast<std::size_t>(i)];
        if (y < 0 || y >= k) {
            throw std::out_of_range("cross_entropy: label " + std::to_string(y) +
                                    " outside [0," + std::to_string(k) + ")");
        }
        if (y >= static_cast<int>(class_weights.size())) {
            throw std::out_of_range("cross_entropy: no weight for label " + std::to_string(y));
        }
        const double wy = class_weights[static_cast<std::size_t>(y)];
        if (!(wy > 0.0)) throw std::invalid_argument("cross_entropy: weights must be positive");

        const double* row = logits.ptr() + static_cast<std::size_t>(i) * k;
        const double m = *std::max_element(row, row + k);
        double sum = 0.0;
        for (int j = 0; j < k; ++j) sum += std::exp(row[j] - m);
        const double lse = m + std::log(sum);

        const double logp = row[y] - lse;
        if (logp < log_floor) {
            // Clamp active: the loss saturates and the gradient through this
            // row is zero, matching the flat region.
            total += -wy * log_floor;
            continue;
        }
        total += -wy * logp;

        double* g = res.grad_logits.ptr() + static_cast<std::size_t>(i) * k;
        for (int j = 0; j < k; ++j) {
            const double pj = std::exp(row[j] - lse);
            g[j] = wy / n * (pj - (j == y ? 1.0 : 0.0));
        }
    }
    res.value = total / n;
    if (!std::isfinite(res.value)) throw std::runtime_error("cross_entropy: non-finite loss");
    return res;
}

LossResult supervised_loss(const Tensor& logits, const std::vector<int>& labels,
                           const std::vector<double>& class_weights) {
    if (logits.dim(1) != 2) throw std::invalid_argument("supervised_loss: expected [N,2] logits");
    for (int y : labels) {
        if (y != 0 && y != 1) throw std::invalid_argument("supervised_loss: labels must be 0/1");
    }
    return weighted_cross_entropy(logits, labels, class_weights);
}

std::vector<double> jigsaw_class_weights(double scrambled_fraction, int permutation_count) {
    if (permutation_count < 1) {
        throw std::invalid_argument("jigsaw_class_weights: P must be >= 1");
    }
    if (!(scrambled_fraction > 0.0 && scrambled_fraction < 1.0)) {
        throw std::invalid_argument(
            "jigsaw_class_weights: s must lie strictly inside (0,1); got s=" +
            std::to_string(scrambled_fraction));
    }
    // freq = ((1-s), s/P, ..., s/P); weights are inverse frequency.
    std::vector<double> w(static_cast<std::size_t>(permutation_count) + 1);
    w[0] = 1.0 / (1.0 - scrambled_fraction);
    const double scrambled_weight = permutation_count / scrambled_fraction;
    for (int p = 1; p <= permutation_count; ++p) w[static_cast<std::size_t>(p)] = scrambled_weight;
    return w;
}

LossResult unsupervised_loss(const Tensor& logits, const std::vector<int>& pseudo_labels,
                             const std::vector<double>& label_weights) {
    if (logits.dim(1) != static_cast<int>(label_weights.size())) {
        throw std::invalid_argument("unsupervised_loss: logits width " +
                                    std::to_string(logits.dim(1)) + " != weight count " +
                                    std::to_string(label_weights.size()));
    }
    return weighted_cross_entropy(logits, pseudo_labels, label_weights);
}

}  // namespace jigsawssl
