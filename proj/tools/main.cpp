#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "jigsawssl/experiments.hpp"
#include "jigsawssl/model.hpp"
#include "jigsawssl/ood.hpp"
#include "jigsawssl/training.hpp"

namespace fs = std::filesystem;
using namespace jigsawssl;

namespace {

void write_text(const fs::path& path, const std::string& content) {
    if (!path.parent_path().empty()) fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
    out << content;
}

// Shared experiment-level options; explicit flags win over the config file.
struct CommonOpts {
    std::string config_path;
    std::string out_dir;
    std::uint64_t seed = 0;
    bool seed_set = false;
    int workers = 0;
};

void add_common(CLI::App* cmd, CommonOpts& opts) {
    cmd->add_option("--config", opts.config_path, "key = value config file");
    cmd->add_option("--out", opts.out_dir, "output directory");
    cmd->add_option("--seed", opts.seed, "seed override")->each([&opts](const std::string&) {
        opts.seed_set = true;
    });
    cmd->add_option("--workers", opts.workers, "parallel training cells");
}

ExperimentConfig make_experiment_config(const CommonOpts& opts, const std::string& manifest,
                                        Protocol protocol) {
    KeyValueConfig kv;
    if (!opts.config_path.empty()) kv = KeyValueConfig::load(opts.config_path);
    if (!manifest.empty()) kv.set("manifest", manifest);
    ExperimentConfig cfg = experiment_config_from_kv(kv);
    cfg.protocol = protocol;
    if (!opts.out_dir.empty()) cfg.out_dir = opts.out_dir;
    if (opts.workers > 0) cfg.workers = opts.workers;
    if (opts.seed_set) {
        cfg.seeds = {opts.seed};
        cfg.split_seed = opts.seed;
    }
    return cfg;
}

int exit_code_for(bool any_failed) { return any_failed ? 2 : 0; }

void dump_shuffled_samples(const DatasetManifest& manifest, const SplitPlan& plan,
                           const PermutationSet& permset, const TrainConfig& cfg,
                           const ImageProvider& images, const std::string& dir, int count) {
    fs::create_directories(dir);
    Rng rng(derive_seed(cfg.seed, 0xd0d0));
    const TileGridSpec grid = cfg.grid_spec();
    const AugmentConfig augcfg = cfg.augment_config();
    int written = 0;
    for (std::size_t id : plan.unsupervised_record_ids) {
        if (written >= count) break;
        const Image img = augment_image(images.load(manifest.records[id]), augcfg, rng);
        const auto sample = make_jigsaw_sample(img, permset, grid, rng.bernoulli(cfg.s), rng);
        const fs::path file = fs::path(dir) / (std::to_string(id) + "_" +
                                               std::to_string(sample.pseudo_label) + ".png");
        write_png(sample.image, file.string());
        ++written;
    }
}

int cmd_gen_perms(int grid, int count, std::size_t pool, std::uint64_t seed,
                  const std::string& out) {
    const auto set = generate_permutation_set(grid, count, pool, seed);
    save_permutation_set(set, out);
    std::cout << "wrote " << set.scrambled.size() << " permutations (grid " << grid
              << ", min pairwise Hamming " << set.min_pairwise_hamming << ") to " << out << "\n";
    return 0;
}

int cmd_synth(const SynthSpec& spec, const std::string& out_dir) {
    const auto manifest = generate_synthetic_dataset(spec, out_dir);
    std::cout << "wrote " << manifest.records.size() << " frames (" << manifest.labeled_count()
              << " labeled, " << manifest.modality_count(Modality::NBI) << " NBI) under "
              << out_dir << "\n";
    return 0;
}

struct TrainOpts {
    std::string manifest;
    std::string arm = "ssl";
    int fold = 0;
    int n_folds = 5;
    double val_fraction = 0.2;
    double k = 100.0;
    std::uint64_t split_seed = 42;
    std::size_t perm_pool = 10000;
    std::string dump_shuffled;
};

int cmd_train(const CommonOpts& common, const TrainOpts& opts) {
    const Arm arm = opts.arm == "baseline" ? Arm::Baseline : Arm::SSL;
    TrainConfig cfg = preset_for(arm, opts.k);
    if (!common.config_path.empty()) {
        cfg = train_config_from_kv(KeyValueConfig::load(common.config_path), cfg);
    }
    if (common.seed_set) cfg.seed = common.seed;
    cfg.k_percent = opts.k;

    const auto manifest = load_manifest(opts.manifest);
    const auto folds = make_folds(manifest, opts.n_folds, opts.val_fraction, opts.split_seed);
    if (opts.fold < 0 || opts.fold >= opts.n_folds) {
        throw std::runtime_error("fold index out of range");
    }
    const SplitPlan plan = apply_labeled_fraction(
        manifest, folds[static_cast<std::size_t>(opts.fold)], opts.k,
        derive_seed(opts.split_seed, 500 + static_cast<std::uint64_t>(opts.fold)));

    PermutationSet permset;
    if (arm == Arm::SSL) {
        permset = generate_permutation_set(cfg.grid_size, cfg.P, opts.perm_pool,
                                           derive_seed(cfg.seed, 0x5e7));
    }
    auto model = build_model(cfg.encoder, arm == Arm::SSL ? cfg.P + 1 : 0,
                             cfg.init_mode == "pretrained-file" ? InitMode::PretrainedFile
                                                                : InitMode::Random,
                             derive_seed(cfg.seed, 0x0de1), cfg.pretrained_path);

    CachingImageProvider images;
    if (!opts.dump_shuffled.empty() && arm == Arm::SSL) {
        dump_shuffled_samples(manifest, plan, permset, cfg, images, opts.dump_shuffled, 32);
    }

    const fs::path out_dir = common.out_dir.empty() ? "." : fs::path(common.out_dir);
    fs::create_directories(out_dir);
    const auto history = train(model, manifest, plan, permset, cfg, images, &std::cout);

    save_checkpoint(model, arm == Arm::SSL ? &permset : nullptr,
                    (out_dir / "model.ckpt").string());
    write_text(out_dir / "history.csv", history_to_csv(history));
    write_text(out_dir / "train_config.txt", train_config_to_text(cfg));
    if (!plan.validation_record_ids.empty()) {
        const auto eval = evaluate_classifier(model, manifest, plan.validation_record_ids,
                                              images, cfg.augment_config());
        write_text(out_dir / "validation_report.txt", report_to_text(eval.report));
        std::cout << report_to_text(eval.report);
    }
    std::cout << "checkpoint written to " << (out_dir / "model.ckpt").string() << "\n";
    return 0;
}

int cmd_eval(const CommonOpts& common, const std::string& checkpoint,
             const std::string& manifest_path, int image_side) {
    auto ckpt = load_checkpoint(checkpoint);
    const auto manifest = load_manifest(manifest_path);
    const auto ids = manifest.labeled_ids();
    if (ids.empty()) throw std::runtime_error("eval: manifest has no labeled records");

    AugmentConfig augcfg;
    augcfg.output_side = image_side;
    CachingImageProvider images;
    auto eval = evaluate_classifier(ckpt.model, manifest, ids, images, augcfg);
    eval.report.roc = roc_curve(eval.scores, eval.labels);
    eval.report.auroc = auroc(eval.scores, eval.labels);

    const std::string text = report_to_text(eval.report);
    std::cout << text;
    if (!common.out_dir.empty()) {
        write_text(fs::path(common.out_dir) / "eval_report.txt", text);
        write_text(fs::path(common.out_dir) / "eval_roc.csv", roc_to_csv(eval.report.roc));
    }
    return 0;
}

int cmd_ood_score(const CommonOpts& common, const std::string& checkpoint,
                  const std::string& in_manifest, const std::string& out_manifest,
                  const std::string& mode, int draws, bool negate_kl, double s, int image_side) {
    auto ckpt = load_checkpoint(checkpoint);
    if (!ckpt.permset && mode != "kl-only") {
        throw std::runtime_error(
            "checkpoint carries no permutation set; only kl-only scoring works");
    }
    const auto in_data = load_manifest(in_manifest);
    const auto out_data = load_manifest(out_manifest);

    OodConfig cfg;
    cfg.mode = mode == "scramble"  ? OodMode::ScrambleAverage
               : mode == "kl-only" ? OodMode::KlOnly
                                   : OodMode::IdentityOnly;
    cfg.scramble_draws = draws;
    cfg.negate_kl = negate_kl;
    cfg.s = s;
    cfg.grid.grid_size = ckpt.permset ? ckpt.permset->grid_size : 3;
    cfg.grid.image_side = image_side;

    AugmentConfig augcfg;
    augcfg.output_side = image_side;
    CachingImageProvider images;
    const PermutationSet permset = ckpt.permset.value_or(PermutationSet{});

    std::ostringstream csv;
    csv << "manifest,record,kappa,kl_term,jigsaw_term\n";
    std::vector<double> scores;
    std::vector<int> labels;
    std::uint64_t stream = 0;
    char buf[160];
    const auto score_set = [&](const DatasetManifest& data, const char* tag, int label) {
        for (std::size_t i = 0; i < data.records.size(); ++i) {
            const Image img = normalize_for_model(images.load(data.records[i]), augcfg);
            const auto sc =
                ood_score(ckpt.model, img, permset, cfg, derive_seed(common.seed, stream++));
            std::snprintf(buf, sizeof(buf), "%s,%zu,%.9g,%.9g,%.9g\n", tag, i, sc.kappa,
                          sc.kl_term, sc.jigsaw_term);
            csv << buf;
            scores.push_back(sc.kappa);
            labels.push_back(label);
        }
    };
    score_set(in_data, "in", 0);
    score_set(out_data, "out", 1);

    const double auc = auroc(scores, labels);
    std::snprintf(buf, sizeof(buf), "AUROC: %.4f over %zu in + %zu out samples\n", auc,
                  in_data.records.size(), out_data.records.size());
    std::cout << buf;

    const fs::path out_dir = common.out_dir.empty() ? "." : fs::path(common.out_dir);
    fs::create_directories(out_dir);
    write_text(out_dir / "ood_scores.csv", csv.str());
    write_text(out_dir / "ood_summary.txt", buf);
    write_text(out_dir / "ood_roc.csv", roc_to_csv(roc_curve(scores, labels)));
    return 0;
}

int cmd_report(const std::string& in_path, const std::string& format,
               const std::string& out_dir) {
    std::ifstream in(in_path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + in_path);
    const std::string text((std::istreambuf_iterator<char>(in)), {});
    const auto report = sweep_report_from_json(text);

    fs::create_directories(out_dir);
    if (format == "csv") {
        write_text(fs::path(out_dir) / "sweep_cells.csv", sweep_cells_to_csv(report));
        write_text(fs::path(out_dir) / "sweep_aggregates.csv", sweep_aggregates_to_csv(report));
    } else if (format == "markdown-table") {
        write_text(fs::path(out_dir) / "sweep_report.md", sweep_to_markdown(report));
    } else {
        render_sweep_outputs(report, out_dir);
    }
    std::cout << "rendered " << format << " into " << out_dir << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Semi-supervised jigsaw lesion classification toolkit"};
    app.require_subcommand(1);

    auto* gen = app.add_subcommand("gen-perms", "generate a maximal-Hamming permutation set");
    int gp_grid = 3, gp_count = 30;
    std::size_t gp_pool = 10000;
    std::uint64_t gp_seed = 0;
    std::string gp_out = "perms.txt";
    gen->add_option("--grid", gp_grid, "grid side G");
    gen->add_option("--count,-P", gp_count, "number of scrambled permutations");
    gen->add_option("--pool", gp_pool, "candidate pool size");
    gen->add_option("--seed", gp_seed, "generation seed");
    gen->add_option("--out", gp_out, "output file");

    auto* synth = app.add_subcommand("synth-data", "generate the synthetic desk-scale dataset");
    SynthSpec synth_spec;
    std::string synth_out = "synth";
    synth->add_option("--out", synth_out, "output directory")->required();
    synth->add_option("--videos", synth_spec.videos, "number of videos");
    synth->add_option("--frames", synth_spec.frames_per_video, "frames per video");
    synth->add_option("--side", synth_spec.image_side, "image side in pixels");
    synth->add_option("--label-fraction", synth_spec.label_fraction, "fraction of labeled videos");
    synth->add_option("--nbi-fraction", synth_spec.nbi_fraction, "fraction of NBI videos");
    synth->add_option("--class1-prob", synth_spec.class1_prob, "fraction of class-1 videos");
    synth->add_option("--noise", synth_spec.noise_amplitude, "pixel noise amplitude");
    synth->add_option("--seed", synth_spec.seed, "generation seed");

    auto* train_cmd = app.add_subcommand("train", "train one arm on one fold");
    CommonOpts train_common;
    TrainOpts train_opts;
    add_common(train_cmd, train_common);
    train_cmd->add_option("--manifest", train_opts.manifest, "dataset manifest")->required();
    train_cmd->add_option("--arm", train_opts.arm, "ssl|baseline")
        ->check(CLI::IsMember({"ssl", "baseline"}));
    train_cmd->add_option("--fold", train_opts.fold, "fold index");
    train_cmd->add_option("--folds", train_opts.n_folds, "number of folds");
    train_cmd->add_option("--val-fraction", train_opts.val_fraction, "validation fraction");
    train_cmd->add_option("--k", train_opts.k, "labeled-data percentage");
    train_cmd->add_option("--split-seed", train_opts.split_seed, "fold/selection seed");
    train_cmd->add_option("--perm-pool", train_opts.perm_pool, "permutation candidate pool");
    train_cmd->add_option("--dump-shuffled", train_opts.dump_shuffled,
                          "debug: dump recomposed jigsaw samples to this directory");

    auto* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint on labeled records");
    CommonOpts eval_common;
    std::string eval_ckpt, eval_manifest;
    int eval_side = 222;
    add_common(eval_cmd, eval_common);
    eval_cmd->add_option("--checkpoint", eval_ckpt, "checkpoint file")->required();
    eval_cmd->add_option("--manifest", eval_manifest, "dataset manifest")->required();
    eval_cmd->add_option("--image-side", eval_side, "model input side");

    auto* sweep_cmd = app.add_subcommand("sweep", "labeled-fraction sweep");
    CommonOpts sweep_common;
    std::string sweep_manifest;
    add_common(sweep_cmd, sweep_common);
    sweep_cmd->add_option("--manifest", sweep_manifest, "dataset manifest (overrides config)");

    auto* da_cmd = app.add_subcommand("domain-adapt", "domain adaptation protocol");
    CommonOpts da_common;
    std::string da_manifest;
    add_common(da_cmd, da_common);
    da_cmd->add_option("--manifest", da_manifest, "dataset manifest (overrides config)");

    auto* ood_cmd = app.add_subcommand("ood-score", "score OOD detection from a checkpoint");
    CommonOpts ood_common;
    std::string ood_ckpt, ood_in, ood_out_manifest, ood_mode = "identity";
    int ood_draws = 4, ood_side = 222;
    bool ood_negate = false;
    double ood_s = 0.6;
    add_common(ood_cmd, ood_common);
    ood_cmd->add_option("--checkpoint", ood_ckpt, "trained checkpoint")->required();
    ood_cmd->add_option("--in-manifest", ood_in, "in-distribution manifest")->required();
    ood_cmd->add_option("--out-manifest", ood_out_manifest, "out-of-distribution manifest")
        ->required();
    ood_cmd->add_option("--mode", ood_mode, "identity|scramble|kl-only")
        ->check(CLI::IsMember({"identity", "scramble", "kl-only"}));
    ood_cmd->add_option("--M", ood_draws, "scramble draws in scramble mode");
    ood_cmd->add_flag("--negate-kl", ood_negate, "flip the KL term's sign");
    ood_cmd->add_option("--s", ood_s, "scrambled fraction used for the jigsaw weights");
    ood_cmd->add_option("--image-side", ood_side, "model input side");

    auto* report_cmd = app.add_subcommand("report", "re-render a saved sweep report");
    std::string report_in, report_format = "csv", report_out = ".";
    report_cmd->add_option("--in", report_in, "sweep_report.json")->required();
    report_cmd->add_option("--format", report_format, "csv|markdown-table|plot")
        ->check(CLI::IsMember({"csv", "markdown-table", "plot"}));
    report_cmd->add_option("--out", report_out, "output directory");

    CLI11_PARSE(app, argc, argv);

    try {
        if (gen->parsed()) return cmd_gen_perms(gp_grid, gp_count, gp_pool, gp_seed, gp_out);
        if (synth->parsed()) return cmd_synth(synth_spec, synth_out);
        if (train_cmd->parsed()) return cmd_train(train_common, train_opts);
        if (eval_cmd->parsed()) return cmd_eval(eval_common, eval_ckpt, eval_manifest, eval_side);
        if (sweep_cmd->parsed()) {
            const auto cfg =
                make_experiment_config(sweep_common, sweep_manifest, Protocol::FractionSweep);
            const auto report = run_fraction_sweep(cfg);
            for (const auto& f : render_sweep_outputs(report, cfg.out_dir)) {
                std::cout << "wrote " << f << "\n";
            }
            return exit_code_for(report.any_failed());
        }
        if (da_cmd->parsed()) {
            const auto cfg =
                make_experiment_config(da_common, da_manifest, Protocol::DomainAdaptation);
            const auto report = run_domain_adaptation(cfg);
            for (const auto& f : render_domain_adaptation_outputs(report, cfg.out_dir)) {
                std::cout << "wrote " << f << "\n";
            }
            return exit_code_for(report.any_failed());
        }
        if (ood_cmd->parsed()) {
            return cmd_ood_score(ood_common, ood_ckpt, ood_in, ood_out_manifest, ood_mode,
                                 ood_draws, ood_negate, ood_s, ood_side);
        }
        if (report_cmd->parsed()) return cmd_report(report_in, report_format, report_out);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
