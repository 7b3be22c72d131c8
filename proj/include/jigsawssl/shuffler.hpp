#pragma once

#include <optional>
#include <vector>

#include "jigsawssl/image.hpp"
#include "jigsawssl/permutation.hpp"
#include "jigsawssl/rng.hpp"

namespace jigsawssl {

// Geometry of the tile grid and the per-tile crop jitter.
struct TileGridSpec {
    int grid_size = 3;
    int image_side = 222;          // must be divisible by grid_size
    double crop_ratio_low = 0.75;  // fraction of tile side
    double crop_ratio_high = 0.9;
    ResampleFilter rescale_filter = ResampleFilter::Bilinear;
    // When set, identity-labeled samples skip the crop jitter and keep the
    // literal unscrambled image.
    bool identity_raw = false;

    int tile_side() const { return image_side / grid_size; }
    int tile_count() const { return grid_size * grid_size; }
    void validate() const;
};

struct ShuffledSample {
    Image image;
    int pseudo_label = 0;
};

// Per-tile jitter geometry, recorded for audits.
struct TileJitter {
    double ratio = 1.0;
    int patch_side = 0;
    int offset_y = 0;
    int offset_x = 0;
};

// Splits a square image into grid_size^2 tiles in row-major order. Each tile
// is a random patch of floor(r * tile_side) pixels, r ~ U[crop_low, crop_high],
// cropped at a uniform offset inside the tile and rescaled back to tile_side.
// Draw order per tile: ratio, offset_y, offset_x.
std::vector<Image> decompose(const Image& image, const TileGridSpec& spec, Rng& rng,
                             std::vector<TileJitter>* trace = nullptr);

// Places tile p.order[i] at grid position i; output side = grid * tile_side.
Image recompose(const std::vector<Image>& tiles, const Permutation& p);

// Draws the pseudo-label (uniform over {1..P} when scrambling, else 0),
// jitters the tiles, and recomposes. Identity samples pass through the same
// jitter unless spec.identity_raw is set.
ShuffledSample make_jigsaw_sample(const Image& image, const PermutationSet& permset,
                                  const TileGridSpec& spec, bool scramble, Rng& rng);

// Whole-image augmentation applied before the jigsaw shuffler: flips, quarter
// turns, and area crops, each with probability apply_prob; no color
// transforms. Normalization runs separately (see normalize_for_model).
struct AugmentConfig {
    bool enabled = true;
    double apply_prob = 0.5;
    double crop_scale_low = 0.8;
    double crop_scale_high = 1.0;
    int output_side = 222;
    std::vector<double> norm_mean{0.485, 0.456, 0.406};
    std::vector<double> norm_std{0.229, 0.224, 0.225};
};

// Geometric augmentations + resize to output_side. No normalization here.
Image augment_image(const Image& image, const AugmentConfig& cfg, Rng& rng);

// Resize (if needed) + per-channel normalization; the eval-time path.
Image normalize_for_model(const Image& image, const AugmentConfig& cfg);

}  // namespace jigsawssl
