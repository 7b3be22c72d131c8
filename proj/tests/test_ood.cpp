#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "jigsawssl/ood.hpp"

using namespace jigsawssl;
namespace fs = std::filesystem;

namespace {

Image random_image(int side, Rng& rng) {
    Image img(side, side, 3);
    for (auto& v : img.data) v = rng.uniform(-1.0, 1.0);
    return img;
}

}  // namespace

TEST_SUITE("ood") {

TEST_CASE("kl_from_uniform: uniform, skewed, degenerate") {
    CHECK(kl_from_uniform({0.5, 0.5}) == doctest::Approx(0.0).epsilon(1e-12));

    const double expected = 0.5 * std::log(0.5 / 0.9) + 0.5 * std::log(0.5 / 0.1);
    CHECK(kl_from_uniform({0.9, 0.1}) == doctest::Approx(expected).epsilon(1e-9));
    CHECK(kl_from_uniform({0.9, 0.1}) == doctest::Approx(0.5108).epsilon(1e-3));

    // Clamped: finite, no overflow.
    const double clamped = kl_from_uniform({1.0, 0.0});
    CHECK(std::isfinite(clamped));
    CHECK(clamped > 10.0);  // 0.5*ln(0.5/1e-12) is around 13.5

    CHECK_THROWS(kl_from_uniform({0.7, 0.7}));
    CHECK_THROWS(kl_from_uniform({-0.1, 1.1}));
    CHECK_THROWS(kl_from_uniform({}));
}

TEST_CASE("kl_from_uniform is symmetric in a binary posterior") {
    CHECK(kl_from_uniform({0.8, 0.2}) ==
          doctest::Approx(kl_from_uniform({0.2, 0.8})).epsilon(1e-15));
}

TEST_CASE("baseline mode: kappa equals the KL term alone") {
    auto model = build_model("tiny-cnn", 6, InitMode::Random, 3);
    const auto permset = generate_permutation_set(3, 5, 200, 7);
    OodConfig cfg;
    cfg.mode = OodMode::KlOnly;
    cfg.grid.grid_size = 3;
    cfg.grid.image_side = 24;
    cfg.s = 0.6;

    Rng rng(5);
    const Image img = random_image(24, rng);
    const auto score = ood_score(model, img, permset, cfg, 1);
    CHECK(score.jigsaw_term == 0.0);
    CHECK(score.kappa == score.kl_term);
    CHECK(score.kl_term >= 0.0);
}

TEST_CASE("kappa decomposition holds exactly in every mode") {
    auto model = build_model("tiny-cnn", 6, InitMode::Random, 9);
    const auto permset = generate_permutation_set(3, 5, 200, 7);
    Rng rng(6);
    const Image img = random_image(24, rng);

    for (OodMode mode : {OodMode::KlOnly, OodMode::IdentityOnly, OodMode::ScrambleAverage}) {
        OodConfig cfg;
        cfg.mode = mode;
        cfg.grid.grid_size = 3;
        cfg.grid.image_side = 24;
        cfg.scramble_draws = 3;
        const auto score = ood_score(model, img, permset, cfg, 11);
        CHECK(score.kappa - score.kl_term - score.jigsaw_term == 0.0);
    }
}

TEST_CASE("negate_kl flips the sign of the KL term only") {
    auto model = build_model("tiny-cnn", 6, InitMode::Random, 9);
    const auto permset = generate_permutation_set(3, 5, 200, 7);
    Rng rng(6);
    const Image img = random_image(24, rng);

    OodConfig cfg;
    cfg.mode = OodMode::IdentityOnly;
    cfg.grid.grid_size = 3;
    cfg.grid.image_side = 24;
    const auto plain = ood_score(model, img, permset, cfg, 1);
    cfg.negate_kl = true;
    const auto flipped = ood_score(model, img, permset, cfg, 1);
    CHECK(flipped.kl_term == doctest::Approx(-plain.kl_term).epsilon(1e-15));
    CHECK(flipped.jigsaw_term == doctest::Approx(plain.jigsaw_term).epsilon(1e-15));
}

TEST_CASE("hand-built logits match an independent scalar evaluation") {
    // Identity-mode kappa on a model whose heads are forced to known logits:
    // zero out the encoder input path by zeroing all parameters, then set head
    // biases directly; every image maps to the same logits.
    auto model = build_model("tiny-cnn", 3, InitMode::Random, 2);  // P=2
    for (auto* p : model.all_params()) p->value.zero();
    // supervised logits (ln 3, 0): softmax = (0.75, 0.25)
    model.supervised_params()[1]->value.data = {std::log(3.0), 0.0};
    // jigsaw logits (ln 2, 0, 0): softmax = (0.5, 0.25, 0.25)
    model.jigsaw_params()[1]->value.data = {std::log(2.0), 0.0, 0.0};

    const auto permset = generate_permutation_set(3, 2, 100, 3);
    OodConfig cfg;
    cfg.mode = OodMode::IdentityOnly;
    cfg.grid.grid_size = 3;
    cfg.grid.image_side = 24;
    cfg.s = 0.6;

    Rng rng(8);
    const Image img = random_image(24, rng);
    const auto score = ood_score(model, img, permset, cfg, 4);

    const double kl = 0.5 * std::log(0.5 / 0.75) + 0.5 * std::log(0.5 / 0.25);
    const double w0 = 1.0 / 0.4;  // jigsaw weight for the identity label at s=0.6
    const double jig = -w0 * std::log(0.5);
    CHECK(score.kl_term == doctest::Approx(kl).epsilon(1e-9));
    CHECK(score.jigsaw_term == doctest::Approx(jig).epsilon(1e-9));
    CHECK(score.kappa == doctest::Approx(kl + jig).epsilon(1e-9));
}

TEST_CASE("perfect jigsaw prediction zeroes the jigsaw term") {
    auto model = build_model("tiny-cnn", 3, InitMode::Random, 2);
    for (auto* p : model.all_params()) p->value.zero();
    model.jigsaw_params()[1]->value.data = {200.0, 0.0, 0.0};  // p(identity) ~ 1

    const auto permset = generate_permutation_set(3, 2, 100, 3);
    OodConfig cfg;
    cfg.mode = OodMode::IdentityOnly;
    cfg.grid.grid_size = 3;
    cfg.grid.image_side = 24;

    Rng rng(9);
    const auto score = ood_score(model, random_image(24, rng), permset, cfg, 4);
    CHECK(score.jigsaw_term == doctest::Approx(0.0).epsilon(1e-9));
    CHECK(score.kappa == doctest::Approx(score.kl_term).epsilon(1e-12));
}

TEST_CASE("scramble-average mode is deterministic given the seed") {
    auto model = build_model("tiny-cnn", 6, InitMode::Random, 4);
    const auto permset = generate_permutation_set(3, 5, 200, 7);
    OodConfig cfg;
    cfg.mode = OodMode::ScrambleAverage;
    cfg.scramble_draws = 4;
    cfg.grid.grid_size = 3;
    cfg.grid.image_side = 24;

    Rng rng(10);
    const Image img = random_image(24, rng);
    const auto a = ood_score(model, img, permset, cfg, 123);
    const auto b = ood_score(model, img, permset, cfg, 123);
    const auto c = ood_score(model, img, permset, cfg, 124);
    CHECK(a.kappa == b.kappa);
    CHECK(a.kappa != c.kappa);
}

TEST_CASE("a model without a jigsaw head cannot produce jigsaw terms") {
    auto model = build_model("tiny-cnn", 0, InitMode::Random, 4);
    const auto permset = generate_permutation_set(3, 5, 200, 7);
    OodConfig cfg;
    cfg.mode = OodMode::IdentityOnly;
    cfg.grid.grid_size = 3;
    cfg.grid.image_side = 24;
    Rng rng(2);
    const Image img = random_image(24, rng);
    CHECK_THROWS_AS(ood_score(model, img, permset, cfg, 1), std::runtime_error);

    cfg.mode = OodMode::KlOnly;  // KL-only scoring works on any classifier
    CHECK_NOTHROW(ood_score(model, img, permset, cfg, 1));
}

TEST_CASE("evaluate_ood scores both sets and reports AUROC") {
    SynthSpec spec;
    spec.videos = 6;
    spec.frames_per_video = 4;
    spec.image_side = 24;
    spec.nbi_fraction = 0.5;
    spec.seed = 13;
    const auto dir = fs::temp_directory_path() / "jigsawssl_ood_eval";
    fs::remove_all(dir);
    const auto manifest = generate_synthetic_dataset(spec, dir.string());

    const auto in_ids = manifest.ids_matching(std::nullopt, Modality::WLI);
    const auto out_ids = manifest.ids_matching(std::nullopt, Modality::NBI);
    REQUIRE_FALSE(in_ids.empty());
    REQUIRE_FALSE(out_ids.empty());

    auto model = build_model("tiny-cnn", 6, InitMode::Random, 5);
    const auto permset = generate_permutation_set(3, 5, 200, 7);
    OodConfig cfg;
    cfg.mode = OodMode::IdentityOnly;
    cfg.grid.grid_size = 3;
    cfg.grid.image_side = 24;
    AugmentConfig augcfg;
    augcfg.output_side = 24;
    CachingImageProvider images;

    const auto eval = evaluate_ood(model, manifest, in_ids, out_ids, permset, cfg, images,
                                   augcfg, 77);
    CHECK(eval.in_scores.size() == in_ids.size());
    CHECK(eval.out_scores.size() == out_ids.size());
    CHECK(eval.auroc_value >= 0.0);
    CHECK(eval.auroc_value <= 1.0);
    CHECK(eval.roc.front().fpr == 0.0);
    CHECK(eval.roc.back().tpr == 1.0);

    CHECK_THROWS(evaluate_ood(model, manifest, {}, out_ids, permset, cfg, images, augcfg, 1));
}

}  // TEST_SUITE
