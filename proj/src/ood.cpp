#include "jigsawssl/ood.hpp"

#include <cmath>
#include <stdexcept>

#include "jigsawssl/losses.hpp"

namespace jigsawssl {

double kl_from_uniform(const std::vector<double>& posterior) {
    if (posterior.empty()) throw std::invalid_argument("kl_from_uniform: empty posterior");
    double sum = 0.0;
    for (double p : posterior) {
        if (p < 0.0) throw std::invalid_argument("kl_from_uniform: negative probability");
        sum += p;
    }
    if (std::abs(sum - 1.0) > 1e-6) {
        throw std::invalid_argument("kl_from_uniform: posterior sums to " + std::to_string(sum));
    }
    const double u = 1.0 / static_cast<double>(posterior.size());
    double kl = 0.0;
    for (double p : posterior) {
        kl += u * std::log(u / std::max(p, kProbFloor));
    }
    return std::max(kl, 0.0);
}

namespace {

// Weighted cross-entropy of the jigsaw head on one recomposed image against
// its pseudo-label: -w_P * log p(P | z).
double jigsaw_term_for(DualHeadModel& model, const Image& z, int pseudo_label,
                       const std::vector<double>& weights) {
    const Tensor logits = forward_jigsaw(model, batch_from_images({&z}));
    const Tensor probs = softmax(logits);
    const double p = std::max(probs.data[static_cast<std::size_t>(pseudo_label)], kProbFloor);
    return -weights[static_cast<std::size_t>(pseudo_label)] * std::log(p);
}

}  // namespace

OodScore ood_score(DualHeadModel& model, const Image& image, const PermutationSet& permset,
                   const OodConfig& cfg, std::uint64_t seed) {
    model.set_training(false);

    OodScore score;
    score.mode = cfg.mode;

    const Tensor sup_logits = forward_supervised(model, batch_from_images({&image}));
    const Tensor sup_probs = softmax(sup_logits);
    const double kl = kl_from_uniform(
        std::vector<double>(sup_probs.data.begin(), sup_probs.data.end()));
    score.kl_term = cfg.negate_kl ? -kl : kl;

    if (cfg.mode != OodMode::KlOnly) {
        if (!model.has_jigsaw_head()) {
            throw std::runtime_error("ood_score: model lacks a jigsaw head");
        }
        const auto weights =
            jigsaw_class_weights(cfg.s, static_cast<int>(permset.scrambled.size()));

        // Test images arrive unscrambled, so the identity pseudo-label
        // applies; the image is fed as-is (ratio-1.0 identity recompose).
        double total = jigsaw_term_for(model, image, 0, weights);
        int terms = 1;

        if (cfg.mode == OodMode::ScrambleAverage) {
            Rng rng(seed);
            for (int m = 0; m < cfg.scramble_draws; ++m) {
                ShuffledSample sample = make_jigsaw_sample(image, permset, cfg.grid,
                                                           /*scramble=*/true, rng);
                total += jigsaw_term_for(model, sample.image, sample.pseudo_label, weights);
                ++terms;
            }
        }
        score.jigsaw_term = total / terms;
    }

    score.kappa = score.kl_term + score.jigsaw_term;
    return score;
}

OodEvaluation evaluate_ood(DualHeadModel& model, const DatasetManifest& manifest,
                           const std::vector<std::size_t>& in_ids,
                           const std::vector<std::size_t>& out_ids,
                           const PermutationSet& permset, const OodConfig& cfg,
                           const ImageProvider& images, const AugmentConfig& augcfg,
                           std::uint64_t seed) {
    if (in_ids.empty() || out_ids.empty()) {
        throw std::invalid_argument("evaluate_ood: both sample sets must be non-empty");
    }

    OodEvaluation eval;
    std::vector<double> scores;
    std::vector<int> labels;
    scores.reserve(in_ids.size() + out_ids.size());

    std::uint64_t stream = 0;
    const auto score_one = [&](std::size_t record_id) {
        const Image img = normalize_for_model(images.load(manifest.records[record_id]), augcfg);
        return ood_score(model, img, permset, cfg, derive_seed(seed, stream++)).kappa;
    };
    for (std::size_t id : in_ids) {
        const double s = score_one(id);
        scores.push_back(s);
        labels.push_back(0);
        eval.in_scores.push_back(s);
    }
    for (std::size_t id : out_ids) {
        const double s = score_one(id);
        scores.push_back(s);
        labels.push_back(1);
        eval.out_scores.push_back(s);
    }

    eval.roc = roc_curve(scores, labels);
    eval.auroc_value = auroc(scores, labels);
    return eval;
}

}  // namespace jigsawssl
