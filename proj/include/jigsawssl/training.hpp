#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "jigsawssl/config.hpp"
#include "jigsawssl/dataset.hpp"
#include "jigsawssl/metrics.hpp"
#include "jigsawssl/model.hpp"
#include "jigsawssl/shuffler.hpp"

namespace jigsawssl {

struct LambdaRamp {
    bool enabled = false;
    double factor = 1.5;
    int period_epochs = 5;
};

struct TrainConfig {
    std::string encoder = "tiny-cnn";
    double learning_rate = 1e-4;
    double weight_decay = 0.0;
    double lambda = 1.0;
    LambdaRamp lambda_ramp;
    double s = 0.6;  // scrambled fraction of each unsupervised batch
    int P = 30;      // scrambled permutation count; head width is P+1
    int epochs = 30;
    int batch_size_supervised = 32;
    int batch_size_unsupervised = 32;
    double k_percent = 100.0;
    std::uint64_t seed = 0;

    int image_side = 222;
    int grid_size = 3;
    double crop_ratio_low = 0.75;
    double crop_ratio_high = 0.9;
    bool identity_raw = false;
    bool augment = true;

    std::string init_mode = "random";  // or "pretrained-file"
    std::string pretrained_path;

    TileGridSpec grid_spec() const;
    AugmentConfig augment_config() const;
};

TrainConfig train_config_from_kv(const KeyValueConfig& kv, const TrainConfig& base = {});
std::string train_config_to_text(const TrainConfig& cfg);

// lambda * factor^floor(epoch/period) when the ramp is on, else lambda.
double lambda_at(int epoch, const TrainConfig& cfg);

enum class Arm { Baseline, SSL };
std::string to_string(Arm arm);

// Hyperparameter presets per labeled-data percentage, mirroring the tuned
// paper-scale values. k must be one of {100, 50, 25, 12.5, 6.25}.
TrainConfig preset_for(Arm arm, double k_percent);

struct IterationRecord {
    long iteration = 0;
    double supervised_loss = 0.0;
    double unsupervised_loss = 0.0;           // raw L_U (0 for the baseline arm)
    double weighted_unsupervised_loss = 0.0;  // lambda * L_U
    double lambda = 0.0;
};

struct EpochValidation {
    int epoch = 0;
    EvaluationReport report;
};

struct TrainHistory {
    std::vector<IterationRecord> iterations;
    std::vector<EpochValidation> validation;
};

// CSV rows `iteration,phase,loss,lambda` (one supervised row and, for the
// SSL arm, one unsupervised row per iteration; the unsupervised row carries
// the raw L_U).
std::string history_to_csv(const TrainHistory& history);

// Loads images from SampleRecord paths; the caching variant keeps decoded
// 8-bit pixels in memory.
class ImageProvider {
public:
    virtual ~ImageProvider() = default;
    virtual Image load(const SampleRecord& rec) const = 0;
};

class FileImageProvider : public ImageProvider {
public:
    Image load(const SampleRecord& rec) const override;
};

class CachingImageProvider : public ImageProvider {
public:
    Image load(const SampleRecord& rec) const override;

private:
    struct Cached {
        int height = 0, width = 0, channels = 0;
        std::vector<std::uint8_t> pixels;
    };
    mutable std::map<std::string, Cached> cache_;
};

// Exactly round(s*B) scrambled samples per batch, assignment and pseudo-label
// draws randomized; the rest identity-labeled.
std::vector<ShuffledSample> compose_batch_unsupervised(const std::vector<const Image*>& images,
                                                       const PermutationSet& permset,
                                                       const TileGridSpec& spec, double s,
                                                       Rng& rng);

// Supervised posteriors for class 1 plus argmax predictions, eval mode.
struct ClassifierEval {
    EvaluationReport report;
    std::vector<double> scores;
    std::vector<int> predictions;
    std::vector<int> labels;
};
ClassifierEval evaluate_classifier(DualHeadModel& model, const DatasetManifest& manifest,
                                   const std::vector<std::size_t>& record_ids,
                                   const ImageProvider& images, const AugmentConfig& augcfg,
                                   int batch_size = 64);

// Observer invoked after each optimizer step with the phase name
// ("supervised" or "unsupervised"); used by audits that watch parameters
// between phases.
using PhaseHook = std::function<void(long iteration, const char* phase)>;

// The alternating two-phase loop. Each iteration takes one supervised step
// (theta_e + theta_s) on a D_K batch and, when the model has a jigsaw head,
// one unsupervised step (theta_e + theta_u) on a batch drawn from the whole
// training pool. Both arms take the same number of supervised steps per
// epoch so a baseline-vs-SSL gap is attributable to the jigsaw task.
TrainHistory train(DualHeadModel& model, const DatasetManifest& manifest, const SplitPlan& plan,
                   const PermutationSet& permset, const TrainConfig& cfg,
                   const ImageProvider& images, std::ostream* log = nullptr,
                   const PhaseHook& phase_hook = {});

}  // namespace jigsawssl
