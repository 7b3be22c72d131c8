#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "jigsawssl/image.hpp"
#include "jigsawssl/nn.hpp"
#include "jigsawssl/permutation.hpp"

namespace jigsawssl {

enum class InitMode { Random, PretrainedFile };

// Shared feature encoder with a supervised lesion head and an optional
// jigsaw head; both heads read the same feature vector.
struct DualHeadModel {
    std::string encoder_name;
    int feature_dim = 0;
    int num_classes = 2;
    int num_jigsaw_classes = 0;  // P + 1 when the jigsaw head exists

    std::unique_ptr<Sequential> encoder;
    std::unique_ptr<Linear> supervised_head;
    std::unique_ptr<Linear> jigsaw_head;  // null for the baseline arm

    bool has_jigsaw_head() const { return jigsaw_head != nullptr; }

    void set_training(bool training);

    std::vector<Parameter*> encoder_params() const;
    std::vector<Parameter*> supervised_params() const;  // theta_s only
    std::vector<Parameter*> jigsaw_params() const;      // theta_u only
    std::vector<Parameter*> all_params() const;

    // Feature pass shared by both heads.
    Tensor forward_features(const Tensor& images);
};

// Supervised logits [N, 2] for images sized per the active grid spec.
Tensor forward_supervised(DualHeadModel& model, const Tensor& images);
// Jigsaw logits [N, P+1]; throws if the model has no jigsaw head.
Tensor forward_jigsaw(DualHeadModel& model, const Tensor& images);

// Registered encoders: "tiny-cnn" (desk scale, F=64) and "residual-18"
// (paper scale, F=512). jigsaw_classes == 0 builds the baseline arm without
// a jigsaw head; otherwise the head is P+1 wide.
DualHeadModel build_model(const std::string& encoder_descriptor, int jigsaw_label_count,
                          InitMode init_mode, std::uint64_t seed,
                          const std::string& pretrained_path = {});

std::vector<std::string> registered_encoders();

// Converts images (already normalized) to an NCHW batch tensor.
Tensor batch_from_images(const std::vector<const Image*>& images);
Tensor batch_from_images(const std::vector<Image>& images);

// ---------------------------------------------------------------------------
// Checkpoints: keyed binary archive, self-describing via the permutation set
// reference. Little-endian doubles.
// ---------------------------------------------------------------------------

struct Checkpoint {
    DualHeadModel model;
    std::optional<PermutationSet> permset;
};

void save_checkpoint(const DualHeadModel& model, const PermutationSet* permset,
                     const std::string& path, bool include_jigsaw_head = true);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace jigsawssl
