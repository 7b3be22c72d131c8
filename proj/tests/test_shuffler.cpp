#include <doctest.h>

#include <map>

#include "jigsawssl/shuffler.hpp"

using namespace jigsawssl;

namespace {

Image random_image(int side, Rng& rng) {
    Image img(side, side, 3);
    for (auto& v : img.data) v = rng.uniform();
    return img;
}

TileGridSpec lossless_spec(int grid, int side) {
    TileGridSpec spec;
    spec.grid_size = grid;
    spec.image_side = side;
    spec.crop_ratio_low = 1.0;
    spec.crop_ratio_high = 1.0;
    return spec;
}

}  // namespace

TEST_SUITE("shuffler") {

TEST_CASE("decompose yields nine 74x74 tiles for a 222x222 image") {
    TileGridSpec spec;  // defaults: G=3, side 222
    Rng rng(0);
    const Image img = random_image(222, rng);
    const auto tiles = decompose(img, spec, rng);
    REQUIRE(tiles.size() == 9);
    for (const auto& t : tiles) {
        CHECK(t.height == 74);
        CHECK(t.width == 74);
    }
}

TEST_CASE("decompose shape errors") {
    TileGridSpec spec = lossless_spec(3, 48);
    Rng rng(0);
    Image rect(48, 36, 3);
    CHECK_THROWS(decompose(rect, spec, rng));
    Image wrong_side(36, 36, 3);
    CHECK_THROWS(decompose(wrong_side, spec, rng));

    TileGridSpec bad = spec;
    bad.image_side = 47;  // not divisible by 3
    Image img(47, 47, 3);
    CHECK_THROWS(decompose(img, bad, rng));
}

TEST_CASE("patch sides stay in the floor-arithmetic range") {
    // tile 74 with ratios [0.75, 0.9]: floor gives 55..66.
    TileGridSpec spec;
    Rng rng(13);
    const Image img = random_image(222, rng);
    std::vector<TileJitter> trace;
    bool saw_low = false, saw_high = false;
    for (int trial = 0; trial < 60; ++trial) {
        decompose(img, spec, rng, &trace);
        for (const auto& jit : trace) {
            CHECK(jit.patch_side >= 55);
            CHECK(jit.patch_side <= 66);
            CHECK(jit.offset_y >= 0);
            CHECK(jit.offset_y + jit.patch_side <= 74);
            CHECK(jit.offset_x + jit.patch_side <= 74);
            saw_low = saw_low || jit.patch_side < 58;
            saw_high = saw_high || jit.patch_side > 63;
        }
    }
    CHECK(saw_low);
    CHECK(saw_high);
}

TEST_CASE("ratio 1.0 tiles equal the raw sub-grid regions bit-exact") {
    const TileGridSpec spec = lossless_spec(3, 48);
    Rng rng(5);
    const Image img = random_image(48, rng);
    const auto tiles = decompose(img, spec, rng);
    for (int row = 0; row < 3; ++row) {
        for (int col = 0; col < 3; ++col) {
            const Image& tile = tiles[static_cast<std::size_t>(row * 3 + col)];
            for (int y = 0; y < 16; ++y)
                for (int x = 0; x < 16; ++x)
                    for (int c = 0; c < 3; ++c)
                        CHECK(tile.at(y, x, c) == img.at(row * 16 + y, col * 16 + x, c));
        }
    }
}

TEST_CASE("recompose round trips bit-exact at ratio 1.0") {
    for (int grid : {2, 3}) {
        const int side = grid * 16;
        const TileGridSpec spec = lossless_spec(grid, side);
        const auto identity = identity_permutation(grid * grid);
        Rng rng(17);
        for (int trial = 0; trial < 100; ++trial) {
            const Image img = random_image(side, rng);
            const auto tiles = decompose(img, spec, rng);
            const Image back = recompose(tiles, identity);
            REQUIRE(back.data.size() == img.data.size());
            CHECK(back.data == img.data);

            // permute then un-permute
            Permutation p = identity;
            rng.shuffle(p.order);
            const Image scrambled = recompose(tiles, p);
            const auto tiles2 = decompose(scrambled, spec, rng);
            const Image restored = recompose(tiles2, inverse(p));
            CHECK(restored.data == img.data);
        }
    }
}

TEST_CASE("recompose preserves the pixel multiset for any permutation") {
    const TileGridSpec spec = lossless_spec(3, 48);
    Rng rng(23);
    const Image img = random_image(48, rng);
    const auto tiles = decompose(img, spec, rng);
    Permutation p = identity_permutation(9);
    rng.shuffle(p.order);
    Image out = recompose(tiles, p);

    auto a = img.data;
    auto b = out.data;
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    CHECK(a == b);
}

TEST_CASE("recompose validates tiles") {
    Rng rng(1);
    const TileGridSpec spec = lossless_spec(2, 32);
    const Image img = random_image(32, rng);
    auto tiles = decompose(img, spec, rng);
    CHECK_THROWS(recompose(tiles, identity_permutation(9)));  // wrong length
    tiles.pop_back();
    CHECK_THROWS(recompose(tiles, identity_permutation(3)));  // not square count
}

TEST_CASE("make_jigsaw_sample honors the scramble flag") {
    const auto permset = generate_permutation_set(3, 30, 10000, 3);
    TileGridSpec spec;
    Rng rng(9);
    const Image img = random_image(222, rng);

    const auto plain = make_jigsaw_sample(img, permset, spec, false, rng);
    CHECK(plain.pseudo_label == 0);
    CHECK(plain.image.height == 222);

    const auto scrambled = make_jigsaw_sample(img, permset, spec, true, rng);
    CHECK(scrambled.pseudo_label >= 1);
    CHECK(scrambled.pseudo_label <= 30);
    CHECK(scrambled.image.height == 222);
    CHECK(scrambled.image.width == 222);
}

TEST_CASE("scramble labels are uniform over {1..P}") {
    const auto permset = generate_permutation_set(3, 30, 10000, 4);
    TileGridSpec spec = lossless_spec(3, 24);  // small and lossless for speed
    Rng rng(30);
    const Image img = random_image(24, rng);

    const int draws = 30000;
    std::map<int, int> counts;
    for (int i = 0; i < draws; ++i) {
        counts[make_jigsaw_sample(img, permset, spec, true, rng).pseudo_label]++;
    }
    CHECK(counts.count(0) == 0);
    // 3-sigma binomial band around 1/30.
    const double p = 1.0 / 30.0;
    const double sigma = std::sqrt(p * (1 - p) / draws);
    for (int label = 1; label <= 30; ++label) {
        const double freq = counts[label] / static_cast<double>(draws);
        CHECK(freq > p - 3 * sigma);
        CHECK(freq < p + 3 * sigma);
    }
}

TEST_CASE("label-image consistency: inverse restores tile order") {
    const auto permset = generate_permutation_set(3, 10, 1000, 8);
    const TileGridSpec spec = lossless_spec(3, 48);
    Rng rng(41);
    const Image img = random_image(48, rng);

    const auto sample = make_jigsaw_sample(img, permset, spec, true, rng);
    const auto perm = permset.permutation_for(sample.pseudo_label);
    const auto tiles = decompose(sample.image, spec, rng);
    const Image restored = recompose(tiles, inverse(perm));
    CHECK(restored.data == img.data);
}

TEST_CASE("identity_raw bypasses the jitter") {
    const auto permset = generate_permutation_set(3, 5, 200, 2);
    TileGridSpec spec;
    spec.grid_size = 3;
    spec.image_side = 48;
    spec.identity_raw = true;
    Rng rng(2);
    const Image img = random_image(48, rng);
    const auto sample = make_jigsaw_sample(img, permset, spec, false, rng);
    CHECK(sample.pseudo_label == 0);
    CHECK(sample.image.data == img.data);
}

TEST_CASE("augment_image keeps geometry sane and is deterministic per seed") {
    AugmentConfig cfg;
    cfg.output_side = 48;
    Rng rng_img(15);
    const Image img = random_image(64, rng_img);

    Rng a(77), b(77), c(78);
    const Image out_a = augment_image(img, cfg, a);
    const Image out_b = augment_image(img, cfg, b);
    const Image out_c = augment_image(img, cfg, c);
    CHECK(out_a.height == 48);
    CHECK(out_a.width == 48);
    CHECK(out_a.data == out_b.data);
    CHECK(out_a.data != out_c.data);
}

TEST_CASE("normalize_for_model applies channel statistics") {
    AugmentConfig cfg;
    cfg.output_side = 8;
    Image img(8, 8, 3);
    for (auto& v : img.data) v = 0.5;
    const Image out = normalize_for_model(img, cfg);
    for (int c = 0; c < 3; ++c) {
        const double expected = (0.5 - cfg.norm_mean[static_cast<std::size_t>(c)]) /
                                cfg.norm_std[static_cast<std::size_t>(c)];
        CHECK(out.at(3, 3, c) == doctest::Approx(expected).epsilon(1e-12));
    }
}

}  // TEST_SUITE
