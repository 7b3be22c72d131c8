#include <doctest.h>

#include <cstring>
#include <filesystem>

#include "jigsawssl/losses.hpp"
#include "jigsawssl/model.hpp"

using namespace jigsawssl;
namespace fs = std::filesystem;

namespace {

Tensor random_batch(int n, int side, std::uint64_t seed) {
    Rng rng(seed);
    Tensor x({n, 3, side, side});
    for (auto& v : x.data) v = rng.uniform(-1.0, 1.0);
    return x;
}

std::vector<double> snapshot(const std::vector<Parameter*>& params) {
    std::vector<double> out;
    for (const auto* p : params) {
        out.insert(out.end(), p->value.data.begin(), p->value.data.end());
    }
    return out;
}

}  // namespace

TEST_SUITE("model") {

TEST_CASE("tiny-cnn contract: F=64, heads sized 2 and P+1") {
    auto model = build_model("tiny-cnn", 6, InitMode::Random, 1);  // P=5
    CHECK(model.feature_dim == 64);
    CHECK(model.supervised_head->out_features() == 2);
    CHECK(model.jigsaw_head->out_features() == 6);

    model.set_training(false);
    const Tensor x = random_batch(2, 96, 3);
    const Tensor sup = forward_supervised(model, x);
    CHECK(sup.shape == std::vector<int>{2, 2});
    const Tensor jig = forward_jigsaw(model, x);
    CHECK(jig.shape == std::vector<int>{2, 6});
    for (double v : sup.data) CHECK(std::isfinite(v));
}

TEST_CASE("residual-18 contract: F=512, jigsaw width P+1") {
    auto model = build_model("residual-18", 31, InitMode::Random, 2);  // P=30
    CHECK(model.feature_dim == 512);
    CHECK(model.jigsaw_head->out_features() == 31);

    auto wide = build_model("residual-18", 101, InitMode::Random, 2);  // P=100
    CHECK(wide.jigsaw_head->out_features() == 101);

    wide.set_training(false);
    const Tensor x = random_batch(2, 64, 5);
    const Tensor sup = forward_supervised(wide, x);
    CHECK(sup.shape == std::vector<int>{2, 2});
    const Tensor jig = forward_jigsaw(wide, x);
    CHECK(jig.shape == std::vector<int>{2, 101});
}

TEST_CASE("unknown descriptor and bad pretrained files error out") {
    CHECK_THROWS_AS(build_model("mystery-net", 6, InitMode::Random, 1), std::invalid_argument);
    CHECK_THROWS(build_model("tiny-cnn", 6, InitMode::PretrainedFile, 1, "/nonexistent/file"));
    CHECK_THROWS(build_model("tiny-cnn", 6, InitMode::PretrainedFile, 1, ""));
}

TEST_CASE("softmax rows sum to one") {
    auto model = build_model("tiny-cnn", 31, InitMode::Random, 7);
    model.set_training(false);
    const Tensor probs = softmax(forward_supervised(model, random_batch(4, 48, 9)));
    for (int i = 0; i < 4; ++i) {
        double sum = 0.0;
        for (int j = 0; j < 2; ++j) sum += probs.data[static_cast<std::size_t>(i) * 2 + j];
        CHECK(sum == doctest::Approx(1.0).epsilon(1e-6));
    }
}

TEST_CASE("duplicate images produce identical logit rows in eval mode") {
    auto model = build_model("tiny-cnn", 11, InitMode::Random, 11);
    model.set_training(false);
    Tensor x({2, 3, 48, 48});
    Rng rng(5);
    for (std::size_t i = 0; i < x.numel() / 2; ++i) {
        const double v = rng.uniform();
        x.data[i] = v;
        x.data[i + x.numel() / 2] = v;
    }
    const Tensor sup = forward_supervised(model, x);
    CHECK(sup.data[0] == sup.data[2]);
    CHECK(sup.data[1] == sup.data[3]);
}

TEST_CASE("random init is deterministic in the seed") {
    const auto a = build_model("tiny-cnn", 6, InitMode::Random, 42);
    const auto b = build_model("tiny-cnn", 6, InitMode::Random, 42);
    const auto c = build_model("tiny-cnn", 6, InitMode::Random, 43);
    CHECK(snapshot(a.all_params()) == snapshot(b.all_params()));
    CHECK(snapshot(a.all_params()) != snapshot(c.all_params()));
}

TEST_CASE("shared encoder: head parameters are isolated") {
    auto model = build_model("tiny-cnn", 6, InitMode::Random, 3);
    model.set_training(false);
    const Tensor x = random_batch(2, 48, 17);

    const Tensor sup0 = forward_supervised(model, x);
    const Tensor jig0 = forward_jigsaw(model, x);

    // Perturbing theta_s leaves jigsaw logits bit-identical.
    model.supervised_params()[0]->value.data[0] += 0.5;
    CHECK(forward_jigsaw(model, x).data == jig0.data);
    CHECK(forward_supervised(model, x).data != sup0.data);

    // Perturbing theta_u leaves supervised logits bit-identical.
    auto model2 = build_model("tiny-cnn", 6, InitMode::Random, 3);
    model2.set_training(false);
    model2.jigsaw_params()[0]->value.data[0] += 0.5;
    CHECK(forward_supervised(model2, x).data == sup0.data);
    CHECK(forward_jigsaw(model2, x).data != jig0.data);

    // Perturbing theta_e changes both heads' outputs.
    auto model3 = build_model("tiny-cnn", 6, InitMode::Random, 3);
    model3.set_training(false);
    model3.encoder_params()[0]->value.data[0] += 0.5;
    CHECK(forward_supervised(model3, x).data != sup0.data);
    CHECK(forward_jigsaw(model3, x).data != jig0.data);
}

TEST_CASE("checkpoint round trip preserves parameters and the permutation set") {
    const auto dir = fs::temp_directory_path() / "jigsawssl_test_ckpt";
    fs::create_directories(dir);
    const auto path = (dir / "model.ckpt").string();

    auto model = build_model("tiny-cnn", 11, InitMode::Random, 21);
    const auto permset = generate_permutation_set(3, 10, 1000, 77);
    save_checkpoint(model, &permset, path);

    auto ckpt = load_checkpoint(path);
    CHECK(ckpt.model.encoder_name == "tiny-cnn");
    CHECK(ckpt.model.num_jigsaw_classes == 11);
    CHECK(snapshot(ckpt.model.all_params()) == snapshot(model.all_params()));
    REQUIRE(ckpt.permset.has_value());
    CHECK(ckpt.permset->scrambled == permset.scrambled);
    CHECK(ckpt.permset->generation_seed == 77);
    CHECK(ckpt.permset->min_pairwise_hamming == permset.min_pairwise_hamming);

    // Loaded and source models agree on a forward pass.
    model.set_training(false);
    const Tensor x = random_batch(2, 48, 1);
    CHECK(forward_supervised(ckpt.model, x).data == forward_supervised(model, x).data);
}

TEST_CASE("checkpoint without the jigsaw head loses OOD capability") {
    const auto dir = fs::temp_directory_path() / "jigsawssl_test_ckpt2";
    fs::create_directories(dir);
    const auto path = (dir / "inference.ckpt").string();

    auto model = build_model("tiny-cnn", 11, InitMode::Random, 5);
    save_checkpoint(model, nullptr, path, /*include_jigsaw_head=*/false);

    auto ckpt = load_checkpoint(path);
    CHECK_FALSE(ckpt.model.has_jigsaw_head());
    const Tensor x = random_batch(1, 48, 2);
    CHECK_THROWS_AS(forward_jigsaw(ckpt.model, x), std::runtime_error);
    CHECK(forward_supervised(ckpt.model, x).shape == std::vector<int>{1, 2});
}

TEST_CASE("pretrained-file init restores encoder weights only") {
    const auto dir = fs::temp_directory_path() / "jigsawssl_test_ckpt3";
    fs::create_directories(dir);
    const auto path = (dir / "pretrain.ckpt").string();

    auto donor = build_model("tiny-cnn", 6, InitMode::Random, 1);
    save_checkpoint(donor, nullptr, path);

    auto model = build_model("tiny-cnn", 6, InitMode::PretrainedFile, 999, path);
    CHECK(snapshot(model.encoder_params()) == snapshot(donor.encoder_params()));
    // Heads stay freshly initialized from seed 999, not the donor's.
    CHECK(snapshot(model.supervised_params()) != snapshot(donor.supervised_params()));

    // Architecture mismatch is rejected.
    CHECK_THROWS(build_model("residual-18", 6, InitMode::PretrainedFile, 1, path));
}

TEST_CASE("batch_from_images lays out NCHW") {
    Image img(2, 2, 3);
    for (int y = 0; y < 2; ++y)
        for (int x = 0; x < 2; ++x)
            for (int c = 0; c < 3; ++c) img.at(y, x, c) = 100.0 * c + 10.0 * y + x;
    const Tensor t = batch_from_images(std::vector<Image>{img});
    CHECK(t.shape == std::vector<int>{1, 3, 2, 2});
    for (int c = 0; c < 3; ++c)
        for (int y = 0; y < 2; ++y)
            for (int x = 0; x < 2; ++x)
                CHECK(t.data[static_cast<std::size_t>(c * 4 + y * 2 + x)] ==
                      100.0 * c + 10.0 * y + x);

    Image other(3, 3, 3);
    std::vector<const Image*> mixed{&img, &other};
    CHECK_THROWS(batch_from_images(mixed));
}

}  // TEST_SUITE
