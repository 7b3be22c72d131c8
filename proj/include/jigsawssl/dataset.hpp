#pragma once

#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "jigsawssl/image.hpp"

namespace jigsawssl {

enum class Modality { WLI, NBI };

std::string to_string(Modality m);
Modality modality_from_string(const std::string& s);

// One image frame. label absent <=> the record belongs to the unlabeled
// pool D_U. Class 1 = neoplastic/precancerous, class 0 = non-neoplastic.
struct SampleRecord {
    std::string image_path;
    std::string video_id;
    std::optional<int> label;
    Modality modality = Modality::WLI;

    bool labeled() const { return label.has_value(); }
};

struct DatasetManifest {
    std::vector<SampleRecord> records;

    std::size_t labeled_count() const;
    std::size_t unlabeled_count() const;
    std::size_t modality_count(Modality m) const;

    std::vector<std::size_t> labeled_ids() const;
    std::vector<std::size_t> ids_matching(std::optional<bool> labeled,
                                          std::optional<Modality> modality) const;
};

// CSV with header `image_path,video_id,label,modality`; empty label column
// marks unlabeled rows. Relative image paths are resolved against the
// manifest's directory. Throws with a line number on malformed rows,
// duplicate paths, labels outside {0,1}, unknown modalities, videos labeled
// inconsistently, or an empty manifest.
DatasetManifest load_manifest(const std::string& path);
void save_manifest(const DatasetManifest& manifest, const std::string& path);

// How validation videos are drawn per fold: a fresh seeded draw for every
// fold (default), or a rotation partitioning every video into exactly one
// fold's validation set.
enum class FoldMode { IndependentRedraw, Rotation };

struct SplitPlan {
    int fold_index = 0;
    double k_percent = 100.0;
    std::set<std::string> validation_video_ids;
    std::vector<std::size_t> validation_record_ids;   // labeled frames of val videos
    std::vector<std::size_t> supervised_record_ids;   // D_K
    std::vector<std::size_t> unsupervised_record_ids; // D minus validation videos
};

// Video-level validation split, ~val_fraction of labeled frames per fold with
// both classes represented. The returned plans carry k=100 (the full labeled
// training pool as D_K); apply_labeled_fraction specializes them.
std::vector<SplitPlan> make_folds(const DatasetManifest& manifest, int n_folds,
                                  double val_fraction, std::uint64_t seed,
                                  FoldMode mode = FoldMode::IndependentRedraw);

// Frame-level class-stratified k% selection, nested across k for a fixed
// seed: D_K(6.25) subset of D_K(12.5) subset of ... subset of D_K(100).
// k must be one of {100, 50, 25, 12.5, 6.25}.
std::vector<std::size_t> select_labeled_fraction(const DatasetManifest& manifest,
                                                 const std::vector<std::size_t>& labeled_pool,
                                                 double k_percent, std::uint64_t seed);

SplitPlan apply_labeled_fraction(const DatasetManifest& manifest, const SplitPlan& plan,
                                 double k_percent, std::uint64_t seed);

// w_c = 1 / freq(c) over the supervised selection; index = class label.
std::vector<double> class_weights(const DatasetManifest& manifest,
                                  const std::vector<std::size_t>& supervised_ids);

// ---------------------------------------------------------------------------
// Synthetic data
// ---------------------------------------------------------------------------

// Desk-scale stand-in for the clinical dataset. Both classes share local
// texture statistics; they differ in global structure, so the cue survives
// tiling and rewards features that integrate across tiles. Class 1 blobs
// carry one coherent stripe orientation and a lobulated boundary; class 0
// blobs are round with independently oriented stripe patches per cell.
// "NBI" frames get a fixed channel remap.
struct SynthSpec {
    int videos = 20;
    int frames_per_video = 50;
    int image_side = 48;
    double label_fraction = 1.0;  // fraction of videos carrying labels
    double nbi_fraction = 0.0;    // fraction of videos in the NBI modality
    double class1_prob = 0.7;     // fraction of videos in class 1
    double noise_amplitude = 0.06;
    double stripe_contrast = 0.22;
    std::uint64_t seed = 0;
};

// Writes PNGs under <out_dir>/images plus <out_dir>/manifest.csv and returns
// the loaded manifest. Deterministic: the same spec yields bit-identical
// files.
DatasetManifest generate_synthetic_dataset(const SynthSpec& spec, const std::string& out_dir);

}  // namespace jigsawssl
