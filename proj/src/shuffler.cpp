#include "jigsawssl/shuffler.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace jigsawssl {

void TileGridSpec::validate() const {
    if (grid_size < 2) throw std::invalid_argument("TileGridSpec: grid_size must be >= 2");
    if (image_side <= 0 || image_side % grid_size != 0) {
        throw std::invalid_argument("TileGridSpec: image_side " + std::to_string(image_side) +
                                    " not divisible by grid " + std::to_string(grid_size));
    }
    if (!(crop_ratio_low > 0.0 && crop_ratio_low <= crop_ratio_high && crop_ratio_high <= 1.0)) {
        throw std::invalid_argument("TileGridSpec: need 0 < low <= high <= 1 for crop ratios");
    }
}

std::vector<Image> decompose(const Image& image, const TileGridSpec& spec, Rng& rng,
                             std::vector<TileJitter>* trace) {
    spec.validate();
    if (image.height != image.width) {
        throw std::invalid_argument("decompose: image must be square, got " +
                                    std::to_string(image.height) + "x" +
                                    std::to_string(image.width));
    }
    if (image.height != spec.image_side) {
        throw std::invalid_argument("decompose: image side " + std::to_string(image.height) +
                                    " != spec.image_side " + std::to_string(spec.image_side));
    }

    const int g = spec.grid_size;
    const int t = spec.tile_side();
    std::vector<Image> tiles;
    tiles.reserve(static_cast<std::size_t>(g) * g);
    if (trace) trace->clear();

    for (int row = 0; row < g; ++row) {
        for (int col = 0; col < g; ++col) {
            TileJitter jit;
            jit.ratio = rng.uniform(spec.crop_ratio_low, spec.crop_ratio_high);
            jit.patch_side = static_cast<int>(std::floor(jit.ratio * t));
            const int slack = t - jit.patch_side;
            jit.offset_y = slack > 0 ? static_cast<int>(rng.uniform_int(0, slack)) : 0;
            jit.offset_x = slack > 0 ? static_cast<int>(rng.uniform_int(0, slack)) : 0;

            const int y0 = row * t + jit.offset_y;
            const int x0 = col * t + jit.offset_x;
            Image patch = crop(image, y0, x0, jit.patch_side, jit.patch_side);
            tiles.push_back(resize(patch, t, t, spec.rescale_filter));
            if (trace) trace->push_back(jit);
        }
    }
    return tiles;
}

Image recompose(const std::vector<Image>& tiles, const Permutation& p) {
    if (tiles.empty()) throw std::invalid_argument("recompose: no tiles");
    if (tiles.size() != p.order.size()) {
        throw std::invalid_argument("recompose: " + std::to_string(tiles.size()) +
                                    " tiles but permutation of length " +
                                    std::to_string(p.order.size()));
    }
    const int g = static_cast<int>(std::lround(std::sqrt(static_cast<double>(tiles.size()))));
    if (g * g != static_cast<int>(tiles.size())) {
        throw std::invalid_argument("recompose: tile count is not a perfect square");
    }
    const int t = tiles[0].height;
    for (const auto& tile : tiles) {
        if (tile.height != t || tile.width != t || tile.channels != tiles[0].channels) {
            throw std::invalid_argument("recompose: tiles must be equal squares");
        }
    }

    Image out(g * t, g * t, tiles[0].channels);
    for (int pos = 0; pos < g * g; ++pos) {
        const Image& src = tiles[static_cast<std::size_t>(p.order[pos])];
        const int oy = (pos / g) * t;
        const int ox = (pos % g) * t;
        for (int y = 0; y < t; ++y)
            for (int x = 0; x < t; ++x)
                for (int c = 0; c < src.channels; ++c)
                    out.at(oy + y, ox + x, c) = src.at(y, x, c);
    }
    return out;
}

ShuffledSample make_jigsaw_sample(const Image& image, const PermutationSet& permset,
                                  const TileGridSpec& spec, bool scramble, Rng& rng) {
    ShuffledSample sample;
    if (scramble) {
        if (permset.scrambled.empty()) {
            throw std::invalid_argument("make_jigsaw_sample: empty permutation set");
        }
        sample.pseudo_label =
            static_cast<int>(rng.uniform_int(1, static_cast<std::int64_t>(permset.scrambled.size())));
    } else {
        sample.pseudo_label = 0;
        if (spec.identity_raw) {
            sample.image = image;
            return sample;
        }
    }
    const auto tiles = decompose(image, spec, rng);
    sample.image = recompose(tiles, permset.permutation_for(sample.pseudo_label));
    return sample;
}

Image augment_image(const Image& image, const AugmentConfig& cfg, Rng& rng) {
    Image out = image;
    if (cfg.enabled) {
        if (rng.bernoulli(cfg.apply_prob)) out = flip_vertical(out);
        if (rng.bernoulli(cfg.apply_prob)) out = flip_horizontal(out);
        if (rng.bernoulli(cfg.apply_prob)) {
            out = rotate90(out, static_cast<int>(rng.uniform_int(0, 3)));
        }
        if (rng.bernoulli(cfg.apply_prob)) {
            const double scale = rng.uniform(cfg.crop_scale_low, cfg.crop_scale_high);
            const int side = std::max(1, static_cast<int>(std::floor(
                                             scale * std::min(out.height, out.width))));
            const int y0 = static_cast<int>(rng.uniform_int(0, out.height - side));
            const int x0 = static_cast<int>(rng.uniform_int(0, out.width - side));
            out = crop(out, y0, x0, side, side);
        }
    }
    return resize(out, cfg.output_side, cfg.output_side);
}

Image normalize_for_model(const Image& image, const AugmentConfig& cfg) {
    Image out = resize(image, cfg.output_side, cfg.output_side);
    return normalize(out, cfg.norm_mean, cfg.norm_std);
}

}  // namespace jigsawssl
