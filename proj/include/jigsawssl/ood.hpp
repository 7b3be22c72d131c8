#pragma once

#include <cstdint>
#include <vector>

#include "jigsawssl/dataset.hpp"
#include "jigsawssl/metrics.hpp"
#include "jigsawssl/model.hpp"
#include "jigsawssl/shuffler.hpp"
#include "jigsawssl/training.hpp"

namespace jigsawssl {

enum class OodMode {
    KlOnly,          // baseline comparator: kappa = KL term alone
    IdentityOnly,    // jigsaw term from the identity-labeled image
    ScrambleAverage  // mean of the identity term and M random scrambles
};

struct OodScore {
    double kappa = 0.0;
    double kl_term = 0.0;      // signed: negated when negate_kl is set
    double jigsaw_term = 0.0;  // kappa == kl_term + jigsaw_term always
    OodMode mode = OodMode::IdentityOnly;
};

struct OodConfig {
    OodMode mode = OodMode::IdentityOnly;
    int scramble_draws = 4;  // M
    // KL[U||p] is large for a confident posterior, which pushes confident
    // in-distribution samples toward "more OOD" under the literal score;
    // this flag flips the KL term's sign.
    bool negate_kl = false;
    double s = 0.6;  // jigsaw weight parameters, matching training
    TileGridSpec grid;
};

// KL(U || p) with natural log; p clamped to >= 1e-12. Throws when p has
// negative entries or does not sum to 1 within 1e-6.
double kl_from_uniform(const std::vector<double>& posterior);

// Scores one image with a trained model that retains its jigsaw head
// (except in KlOnly mode, where any classifier works).
OodScore ood_score(DualHeadModel& model, const Image& image, const PermutationSet& permset,
                   const OodConfig& cfg, std::uint64_t seed);

struct OodEvaluation {
    double auroc_value = 0.0;
    std::vector<RocPoint> roc;
    std::vector<double> in_scores;
    std::vector<double> out_scores;
};

// Scores every sample (in-distribution labeled 0, out labeled 1) and
// delegates to the ROC/AUROC machinery.
OodEvaluation evaluate_ood(DualHeadModel& model, const DatasetManifest& manifest,
                           const std::vector<std::size_t>& in_ids,
                           const std::vector<std::size_t>& out_ids,
                           const PermutationSet& permset, const OodConfig& cfg,
                           const ImageProvider& images, const AugmentConfig& augcfg,
                           std::uint64_t seed);

}  // namespace jigsawssl
