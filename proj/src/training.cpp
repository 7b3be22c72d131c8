#include "jigsawssl/training.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "jigsawssl/losses.hpp"
#include "jigsawssl/optim.hpp"

namespace jigsawssl {

TileGridSpec TrainConfig::grid_spec() const {
    TileGridSpec spec;
    spec.grid_size = grid_size;
    spec.image_side = image_side;
    spec.crop_ratio_low = crop_ratio_low;
    spec.crop_ratio_high = crop_ratio_high;
    spec.identity_raw = identity_raw;
    return spec;
}

AugmentConfig TrainConfig::augment_config() const {
    AugmentConfig cfg;
    cfg.enabled = augment;
    cfg.output_side = image_side;
    return cfg;
}

TrainConfig train_config_from_kv(const KeyValueConfig& kv, const TrainConfig& base) {
    TrainConfig cfg = base;
    cfg.encoder = kv.get_string("encoder", cfg.encoder);
    cfg.learning_rate = kv.get_double("learning_rate", cfg.learning_rate);
    cfg.weight_decay = kv.get_double("weight_decay", cfg.weight_decay);
    cfg.lambda = kv.get_double("lambda", cfg.lambda);
    cfg.lambda_ramp.enabled = kv.get_bool("lambda_ramp", cfg.lambda_ramp.enabled);
    cfg.lambda_ramp.factor = kv.get_double("lambda_ramp_factor", cfg.lambda_ramp.factor);
    cfg.lambda_ramp.period_epochs =
        static_cast<int>(kv.get_long("lambda_ramp_period", cfg.lambda_ramp.period_epochs));
    cfg.s = kv.get_double("s", cfg.s);
    cfg.P = static_cast<int>(kv.get_long("P", cfg.P));
    cfg.epochs = static_cast<int>(kv.get_long("epochs", cfg.epochs));
    cfg.batch_size_supervised =
        static_cast<int>(kv.get_long("batch_size_supervised", cfg.batch_size_supervised));
    cfg.batch_size_unsupervised =
        static_cast<int>(kv.get_long("batch_size_unsupervised", cfg.batch_size_unsupervised));
    cfg.k_percent = kv.get_double("k_percent", cfg.k_percent);
    cfg.seed = kv.get_u64("seed", cfg.seed);
    cfg.image_side = static_cast<int>(kv.get_long("image_side", cfg.image_side));
    cfg.grid_size = static_cast<int>(kv.get_long("grid_size", cfg.grid_size));
    cfg.crop_ratio_low = kv.get_double("crop_ratio_low", cfg.crop_ratio_low);
    cfg.crop_ratio_high = kv.get_double("crop_ratio_high", cfg.crop_ratio_high);
    cfg.identity_raw = kv.get_bool("identity_raw", cfg.identity_raw);
    cfg.augment = kv.get_bool("augment", cfg.augment);
    cfg.init_mode = kv.get_string("init_mode", cfg.init_mode);
    cfg.pretrained_path = kv.get_string("pretrained_path", cfg.pretrained_path);

    if (!(cfg.s >= 0.0 && cfg.s <= 1.0)) throw std::runtime_error("config: s must lie in [0,1]");
    if (cfg.lambda < 0.0) throw std::runtime_error("config: lambda must be >= 0");
    if (cfg.learning_rate <= 0.0) throw std::runtime_error("config: learning_rate must be > 0");
    return cfg;
}

std::string train_config_to_text(const TrainConfig& cfg) {
    std::ostringstream out;
    out << "encoder = " << cfg.encoder << "\n"
        << "learning_rate = " << cfg.learning_rate << "\n"
        << "weight_decay = " << cfg.weight_decay << "\n"
        << "lambda = " << cfg.lambda << "\n"
        << "lambda_ramp = " << (cfg.lambda_ramp.enabled ? "true" : "false") << "\n"
        << "lambda_ramp_factor = " << cfg.lambda_ramp.factor << "\n"
        << "lambda_ramp_period = " << cfg.lambda_ramp.period_epochs << "\n"
        << "s = " << cfg.s << "\n"
        << "P = " << cfg.P << "\n"
        << "epochs = " << cfg.epochs << "\n"
        << "batch_size_supervised = " << cfg.batch_size_supervised << "\n"
        << "batch_size_unsupervised = " << cfg.batch_size_unsupervised << "\n"
        << "k_percent = " << cfg.k_percent << "\n"
        << "seed = " << cfg.seed << "\n"
        << "image_side = " << cfg.image_side << "\n"
        << "grid_size = " << cfg.grid_size << "\n"
        << "crop_ratio_low = " << cfg.crop_ratio_low << "\n"
        << "crop_ratio_high = " << cfg.crop_ratio_high << "\n"
        << "identity_raw = " << (cfg.identity_raw ? "true" : "false") << "\n"
        << "augment = " << (cfg.augment ? "true" : "false") << "\n"
        << "init_mode = " << cfg.init_mode << "\n";
    return out.str();
}

double lambda_at(int epoch, const TrainConfig& cfg) {
    if (epoch < 0) throw std::invalid_argument("lambda_at: negative epoch");
    if (!cfg.lambda_ramp.enabled) return cfg.lambda;
    const int steps = epoch / cfg.lambda_ramp.period_epochs;
    double lambda = cfg.lambda;
    for (int i = 0; i < steps; ++i) lambda *= cfg.lambda_ramp.factor;
    return lambda;
}

std::string to_string(Arm arm) { return arm == Arm::Baseline ? "baseline" : "ssl"; }

TrainConfig preset_for(Arm arm, double k_percent) {
    const auto is = [&](double k) { return std::abs(k_percent - k) < 1e-9; };
    if (!(is(100) || is(50) || is(25) || is(12.5) || is(6.25))) {
        throw std::invalid_argument("preset_for: k=" + std::to_string(k_percent) +
                                    " not in {100, 50, 25, 12.5, 6.25}");
    }

    TrainConfig cfg;
    cfg.k_percent = k_percent;
    if (arm == Arm::Baseline) {
        cfg.learning_rate = is(100) ? 1e-3 : 1e-4;
        if (is(100)) cfg.weight_decay = 0.005;
        else if (is(50) || is(25)) cfg.weight_decay = 0.05;
        else if (is(12.5)) cfg.weight_decay = 0.2;
        else cfg.weight_decay = 0.005;
        cfg.lambda = 0.0;
        cfg.P = 0;
        return cfg;
    }

    cfg.learning_rate = 1e-4;
    cfg.P = is(100) ? 100 : 30;
    if (is(100)) cfg.weight_decay = 0.005;
    else if (is(50)) cfg.weight_decay = 0.05;
    else if (is(25) || is(12.5)) cfg.weight_decay = 0.07;
    else cfg.weight_decay = 0.2;
    if (is(100) || is(50)) {
        cfg.lambda = 1.0;
    } else if (is(25)) {
        cfg.lambda = 2.0;
    } else {
        cfg.lambda = 1.5;
        cfg.lambda_ramp.enabled = true;
    }
    return cfg;
}

std::string history_to_csv(const TrainHistory& history) {
    std::ostringstream out;
    out << "iteration,phase,loss,lambda\n";
    char buf[128];
    for (const auto& rec : history.iterations) {
        std::snprintf(buf, sizeof(buf), "%ld,supervised,%.9g,%.9g\n", rec.iteration,
                      rec.supervised_loss, rec.lambda);
        out << buf;
        if (rec.lambda > 0.0 || rec.unsupervised_loss != 0.0) {
            std::snprintf(buf, sizeof(buf), "%ld,unsupervised,%.9g,%.9g\n", rec.iteration,
                          rec.unsupervised_loss, rec.lambda);
            out << buf;
        }
    }
    return out.str();
}

Image FileImageProvider::load(const SampleRecord& rec) const { return read_png(rec.image_path); }

Image CachingImageProvider::load(const SampleRecord& rec) const {
    auto it = cache_.find(rec.image_path);
    if (it == cache_.end()) {
        Image img = read_png(rec.image_path);
        Cached c;
        c.height = img.height;
        c.width = img.width;
        c.channels = img.channels;
        c.pixels.resize(img.data.size());
        for (std::size_t i = 0; i < img.data.size(); ++i) {
            c.pixels[i] = static_cast<std::uint8_t>(std::lround(
                std::clamp(img.data[i], 0.0, 1.0) * 255.0));
        }
        it = cache_.emplace(rec.image_path, std::move(c)).first;
    }
    const Cached& c = it->second;
    Image img(c.height, c.width, c.channels);
    for (std::size_t i = 0; i < img.data.size(); ++i) img.data[i] = c.pixels[i] / 255.0;
    return img;
}

std::vector<ShuffledSample> compose_batch_unsupervised(const std::vector<const Image*>& images,
                                                       const PermutationSet& permset,
                                                       const TileGridSpec& spec, double s,
                                                       Rng& rng) {
    if (!(s >= 0.0 && s <= 1.0)) throw std::invalid_argument("compose_batch: s must lie in [0,1]");
    const auto batch = images.size();
    const auto scramble_count =
        static_cast<std::size_t>(std::llround(s * static_cast<double>(batch)));

    std::vector<std::size_t> positions(batch);
    for (std::size_t i = 0; i < batch; ++i) positions[i] = i;
    rng.shuffle(positions);
    std::vector<bool> scramble(batch, false);
    for (std::size_t i = 0; i < scramble_count; ++i) scramble[positions[i]] = true;

    std::vector<ShuffledSample> out;
    out.reserve(batch);
    for (std::size_t i = 0; i < batch; ++i) {
        out.push_back(make_jigsaw_sample(*images[i], permset, spec, scramble[i], rng));
    }
    return out;
}

namespace {

// Shuffled cyclic sampler over a fixed id set; reshuffles at each wrap.
class CyclicSampler {
public:
    CyclicSampler(std::vector<std::size_t> ids, std::uint64_t seed)
        : ids_(std::move(ids)), rng_(seed) {
        rng_.shuffle(ids_);
    }

    std::size_t next() {
        if (cursor_ >= ids_.size()) {
            rng_.shuffle(ids_);
            cursor_ = 0;
        }
        return ids_[cursor_++];
    }

private:
    std::vector<std::size_t> ids_;
    Rng rng_;
    std::size_t cursor_ = 0;
};

}  // namespace

ClassifierEval evaluate_classifier(DualHeadModel& model, const DatasetManifest& manifest,
                                   const std::vector<std::size_t>& record_ids,
                                   const ImageProvider& images, const AugmentConfig& augcfg,
                                   int batch_size) {
    model.set_training(false);
    ClassifierEval eval;
    for (std::size_t start = 0; start < record_ids.size();
         start += static_cast<std::size_t>(batch_size)) {
        const std::size_t end =
            std::min(record_ids.size(), start + static_cast<std::size_t>(batch_size));
        std::vector<Image> batch_images;
        batch_images.reserve(end - start);
        for (std::size_t i = start; i < end; ++i) {
            const auto& rec = manifest.records[record_ids[i]];
            if (!rec.labeled()) {
                throw std::invalid_argument("evaluate_classifier: unlabeled record " +
                                            rec.image_path);
            }
            batch_images.push_back(normalize_for_model(images.load(rec), augcfg));
            eval.labels.push_back(*rec.label);
        }
        const Tensor logits = forward_supervised(model, batch_from_images(batch_images));
        const Tensor probs = softmax(logits);
        for (int i = 0; i < logits.dim(0); ++i) {
            const double p1 = probs.data[static_cast<std::size_t>(i) * 2 + 1];
            eval.scores.push_back(p1);
            eval.predictions.push_back(p1 >= 0.5 ? 1 : 0);
        }
    }
    eval.report = classification_metrics(confusion(eval.predictions, eval.labels));
    return eval;
}

TrainHistory train(DualHeadModel& model, const DatasetManifest& manifest, const SplitPlan& plan,
                   const PermutationSet& permset, const TrainConfig& cfg,
                   const ImageProvider& images, std::ostream* log, const PhaseHook& phase_hook) {
    if (plan.supervised_record_ids.empty()) throw std::invalid_argument("train: empty D_K");
    const bool ssl = model.has_jigsaw_head();
    if (ssl && model.num_jigsaw_classes != static_cast<int>(permset.scrambled.size()) + 1) {
        throw std::invalid_argument("train: jigsaw head width " +
                                    std::to_string(model.num_jigsaw_classes) +
                                    " does not match P+1 = " +
                                    std::to_string(permset.scrambled.size() + 1));
    }
    if (ssl && plan.unsupervised_record_ids.empty()) {
        throw std::invalid_argument("train: empty unsupervised pool for the SSL arm");
    }

    const TileGridSpec grid = cfg.grid_spec();
    const AugmentConfig augcfg = cfg.augment_config();
    const auto sup_weights = class_weights(manifest, plan.supervised_record_ids);
    const auto jig_weights =
        ssl ? jigsaw_class_weights(cfg.s, static_cast<int>(permset.scrambled.size()))
            : std::vector<double>{};

    auto sup_params = model.encoder_params();
    {
        auto head = model.supervised_params();
        sup_params.insert(sup_params.end(), head.begin(), head.end());
    }
    AdamW opt_sup(sup_params, cfg.learning_rate, cfg.weight_decay);

    std::unique_ptr<AdamW> opt_unsup;
    if (ssl) {
        auto unsup_params = model.encoder_params();
        auto head = model.jigsaw_params();
        unsup_params.insert(unsup_params.end(), head.begin(), head.end());
        opt_unsup = std::make_unique<AdamW>(unsup_params, cfg.learning_rate, cfg.weight_decay);
    }

    CyclicSampler sup_sampler(plan.supervised_record_ids, derive_seed(cfg.seed, 101));
    Rng unsup_order_rng(derive_seed(cfg.seed, 102));
    Rng augment_rng(derive_seed(cfg.seed, 103));
    Rng shuffle_rng(derive_seed(cfg.seed, 104));

    // Epoch length follows the unsupervised pool (the larger stream) so both
    // arms take identical supervised step counts.
    const std::size_t pool =
        ssl ? plan.unsupervised_record_ids.size() : plan.supervised_record_ids.size();
    const auto batches_per_epoch = static_cast<long>(
        (pool + static_cast<std::size_t>(cfg.batch_size_unsupervised) - 1) /
        static_cast<std::size_t>(cfg.batch_size_unsupervised));

    TrainHistory history;
    long iteration = 0;

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        const double lambda = lambda_at(epoch, cfg);
        std::vector<std::size_t> unsup_order = plan.unsupervised_record_ids;
        unsup_order_rng.shuffle(unsup_order);
        std::size_t unsup_cursor = 0;

        model.set_training(true);
        for (long b = 0; b < batches_per_epoch; ++b, ++iteration) {
            IterationRecord rec;
            rec.iteration = iteration;
            rec.lambda = ssl ? lambda : 0.0;

            // Supervised phase: theta_e and theta_s only, ordered images.
            {
                std::vector<Image> batch_images;
                std::vector<int> labels;
                batch_images.reserve(static_cast<std::size_t>(cfg.batch_size_supervised));
                for (int i = 0; i < cfg.batch_size_supervised; ++i) {
                    const auto& record = manifest.records[sup_sampler.next()];
                    Image img = images.load(record);
                    img = augment_image(img, augcfg, augment_rng);
                    batch_images.push_back(normalize(img, augcfg.norm_mean, augcfg.norm_std));
                    labels.push_back(*record.label);
                }
                opt_sup.zero_grad();
                const Tensor logits = forward_supervised(model, batch_from_images(batch_images));
                LossResult loss = supervised_loss(logits, labels, sup_weights);
                if (!std::isfinite(loss.value)) {
                    throw std::runtime_error("train: supervised loss diverged at iteration " +
                                             std::to_string(iteration));
                }
                rec.supervised_loss = loss.value;
                const Tensor dfeat = model.supervised_head->backward(loss.grad_logits);
                model.encoder->backward(dfeat);
                opt_sup.step();
                if (phase_hook) phase_hook(iteration, "supervised");
            }

            // Unsupervised phase: theta_e and theta_u on shuffled images.
            if (ssl) {
                std::vector<Image> raw;
                raw.reserve(static_cast<std::size_t>(cfg.batch_size_unsupervised));
                for (int i = 0; i < cfg.batch_size_unsupervised; ++i) {
                    if (unsup_cursor >= unsup_order.size()) break;
                    const auto& record = manifest.records[unsup_order[unsup_cursor++]];
                    Image img = images.load(record);
                    img = augment_image(img, augcfg, augment_rng);
                    raw.push_back(normalize(img, augcfg.norm_mean, augcfg.norm_std));
                }
                if (!raw.empty()) {
                    std::vector<const Image*> ptrs;
                    ptrs.reserve(raw.size());
                    for (const auto& img : raw) ptrs.push_back(&img);
                    const auto samples =
                        compose_batch_unsupervised(ptrs, permset, grid, cfg.s, shuffle_rng);

                    std::vector<Image> shuffled;
                    std::vector<int> pseudo_labels;
                    shuffled.reserve(samples.size());
                    for (const auto& smp : samples) {
                        shuffled.push_back(smp.image);
                        pseudo_labels.push_back(smp.pseudo_label);
                    }
                    opt_unsup->zero_grad();
                    const Tensor logits = forward_jigsaw(model, batch_from_images(shuffled));
                    LossResult loss = unsupervised_loss(logits, pseudo_labels, jig_weights);
                    if (!std::isfinite(loss.value)) {
                        throw std::runtime_error(
                            "train: unsupervised loss diverged at iteration " +
                            std::to_string(iteration));
                    }
                    rec.unsupervised_loss = loss.value;
                    rec.weighted_unsupervised_loss = lambda * loss.value;
                    for (auto& g : loss.grad_logits.data) g *= lambda;
                    const Tensor dfeat = model.jigsaw_head->backward(loss.grad_logits);
                    model.encoder->backward(dfeat);
                    opt_unsup->step();
                    if (phase_hook) phase_hook(iteration, "unsupervised");
                }
            }
            history.iterations.push_back(rec);
        }

        if (!plan.validation_record_ids.empty()) {
            const auto eval = evaluate_classifier(model, manifest, plan.validation_record_ids,
                                                  images, augcfg);
            history.validation.push_back({epoch, eval.report});
            if (log) {
                (*log) << "epoch " << epoch << " val_accuracy "
                       << (eval.report.accuracy ? *eval.report.accuracy : -1.0) << "\n";
            }
        }
    }

    model.set_training(false);
    return history;
}

}  // namespace jigsawssl
