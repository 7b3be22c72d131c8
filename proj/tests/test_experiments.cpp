#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "jigsawssl/experiments.hpp"

using namespace jigsawssl;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const std::string& tag) {
    const fs::path dir = fs::temp_directory_path() / ("jigsawssl_exp_" + tag);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

void write_file(const fs::path& path, const std::string& content) {
    std::ofstream out(path);
    out << content;
}

std::string category_rows(int labeled_wli_1, int labeled_wli_0, int labeled_nbi_1,
                          int labeled_nbi_0, int unlabeled_wli, int unlabeled_nbi,
                          int frames_per_video) {
    std::string rows = "image_path,video_id,label,modality\n";
    int vid = 0, img = 0;
    const auto add = [&](int count, const std::string& label, const std::string& modality) {
        while (count > 0) {
            const int take = std::min(count, frames_per_video);
            const std::string v = "v" + std::to_string(vid++);
            for (int f = 0; f < take; ++f) {
                rows += "i" + std::to_string(img++) + ".png," + v + "," + label + "," + modality +
                        "\n";
            }
            count -= take;
        }
    };
    add(labeled_wli_1, "1", "WLI");
    add(labeled_wli_0, "0", "WLI");
    add(labeled_nbi_1, "1", "NBI");
    add(labeled_nbi_0, "0", "NBI");
    add(unlabeled_wli, "", "WLI");
    add(unlabeled_nbi, "", "NBI");
    return rows;
}

SweepReport fixture_sweep_report() {
    SweepReport report;
    const double base[5] = {0.7391, 0.82, 0.83, 0.37, 0.82};
    const double ssl[5] = {0.7676, 0.85, 0.87, 0.24, 0.82};
    for (Arm arm : {Arm::Baseline, Arm::SSL}) {
        SweepAggregate agg;
        agg.k_percent = 100.0;
        agg.arm = arm;
        agg.replicates = 5;
        for (int m = 0; m < 5; ++m) {
            agg.median[m] = arm == Arm::Baseline ? base[m] : ssl[m];
            agg.stddev[m] = 0.01;
        }
        report.aggregates.push_back(agg);
    }
    return report;
}

}  // namespace

TEST_SUITE("experiments") {

TEST_CASE("experiment config parsing and override layering") {
    const auto kv = KeyValueConfig::parse_text(
        "protocol = fraction-sweep\n"
        "manifest = /tmp/m.csv\n"
        "k_list = 100, 6.25\n"
        "n_folds = 2\n"
        "seeds = 5, 6, 7\n"
        "encoder = tiny-cnn\n"
        "image_side = 48\n"
        "epochs = 3\n"
        "fold_mode = rotation\n"
        "# a comment\n");
    const auto cfg = experiment_config_from_kv(kv);
    CHECK(cfg.protocol == Protocol::FractionSweep);
    CHECK(cfg.k_list == std::vector<double>{100, 6.25});
    CHECK(cfg.n_folds == 2);
    CHECK(cfg.seeds == std::vector<std::uint64_t>{5, 6, 7});
    CHECK(cfg.fold_mode == FoldMode::Rotation);

    // Preset values survive unless the file overrides them.
    const auto ssl625 = resolve_train_config(cfg, Arm::SSL, 6.25, 9);
    CHECK(ssl625.lambda == doctest::Approx(1.5));
    CHECK(ssl625.lambda_ramp.enabled);
    CHECK(ssl625.weight_decay == doctest::Approx(0.2));
    CHECK(ssl625.epochs == 3);
    CHECK(ssl625.image_side == 48);
    CHECK(ssl625.seed == 9);

    const auto kv2 = KeyValueConfig::parse_text(
        "manifest = /tmp/m.csv\nlambda = 9\nweight_decay = 0.5\n");
    const auto cfg2 = experiment_config_from_kv(kv2);
    const auto overridden = resolve_train_config(cfg2, Arm::SSL, 6.25, 1);
    CHECK(overridden.lambda == doctest::Approx(9.0));
    CHECK(overridden.weight_decay == doctest::Approx(0.5));

    CHECK_THROWS(experiment_config_from_kv(KeyValueConfig::parse_text("protocol = bogus\n")));
    CHECK_THROWS(experiment_config_from_kv(KeyValueConfig::parse_text("")));  // manifest required
}

TEST_CASE("fraction sweep on a tiny dataset: 2 runs for one (k, fold, seed)") {
    SynthSpec spec;
    spec.videos = 10;
    spec.frames_per_video = 6;
    spec.image_side = 24;
    spec.class1_prob = 0.5;
    spec.seed = 21;
    const auto dir = temp_dir("sweep_tiny");
    generate_synthetic_dataset(spec, dir.string());

    ExperimentConfig cfg;
    cfg.manifest_path = (dir / "manifest.csv").string();
    cfg.k_list = {100};
    cfg.n_folds = 1;
    cfg.seeds = {3};
    cfg.perm_pool_size = 200;
    cfg.overrides = KeyValueConfig::parse_text(
        "encoder = tiny-cnn\nimage_side = 24\nepochs = 1\nP = 5\n"
        "batch_size_supervised = 4\nbatch_size_unsupervised = 4\n");

    const auto report = run_fraction_sweep(cfg);
    REQUIRE(report.cells.size() == 2);  // baseline + ssl
    CHECK_FALSE(report.any_failed());
    for (const auto& cell : report.cells) {
        CHECK(cell.report.accuracy.has_value());
    }
    REQUIRE(report.aggregates.size() == 2);
    CHECK(report.aggregates[0].replicates == 1);

    // Failed cells are recorded, not fatal: a bogus encoder fails every cell.
    ExperimentConfig broken = cfg;
    broken.overrides = KeyValueConfig::parse_text("encoder = nope\nepochs = 1\n");
    const auto failed = run_fraction_sweep(broken);
    CHECK(failed.any_failed());
    for (const auto& cell : failed.cells) CHECK(cell.failed);
}

TEST_CASE("sweep rendering: cells csv, aggregates csv, markdown fixture") {
    const auto report = fixture_sweep_report();

    const auto agg_csv = sweep_aggregates_to_csv(report);
    CHECK(agg_csv.find("k,arm,replicates,accuracy_median,accuracy_std") == 0);
    CHECK(agg_csv.find("100,baseline,5,0.7391") != std::string::npos);

    const auto md = sweep_to_markdown(report);
    CHECK(md.find("| Labeled Data |") == 0);
    CHECK(md.find("Accuracy (%) Baseline") != std::string::npos);
    CHECK(md.find("Accuracy (%) SSL") != std::string::npos);
    // Table-2 style row for k=100: accuracy in percent, other metrics raw.
    CHECK(md.find("73.91") != std::string::npos);
    CHECK(md.find("76.76") != std::string::npos);
    CHECK(md.find("0.82") != std::string::npos);
    CHECK(md.find("0.83") != std::string::npos);
    CHECK(md.find("0.37") != std::string::npos);

    // Empty report: header-only CSVs.
    const SweepReport empty;
    CHECK(sweep_cells_to_csv(empty) ==
          "k,fold,seed,arm,accuracy,f1,sensitivity,specificity,precision,failed,error\n");
    const auto empty_agg = sweep_aggregates_to_csv(empty);
    CHECK(empty_agg.find("\n") == empty_agg.size() - 1);
}

TEST_CASE("sweep report JSON round trip") {
    SweepReport report = fixture_sweep_report();
    SweepCell cell;
    cell.k_percent = 100;
    cell.fold = 0;
    cell.seed = 4;
    cell.arm = Arm::SSL;
    cell.report.accuracy = 0.5;
    report.cells.push_back(cell);
    SweepCell bad;
    bad.failed = true;
    bad.error = "diverged";
    report.cells.push_back(bad);

    const auto loaded = sweep_report_from_json(sweep_report_to_json(report));
    REQUIRE(loaded.cells.size() == 2);
    CHECK(loaded.cells[0].report.accuracy == doctest::Approx(0.5));
    CHECK(loaded.cells[1].failed);
    CHECK(loaded.cells[1].error == "diverged");
    REQUIRE(loaded.aggregates.size() == 2);
    CHECK(*loaded.aggregates[0].median[0] == doctest::Approx(0.7391));

    CHECK_THROWS(sweep_report_from_json("{\"protocol\":\"other\"}"));
}

TEST_CASE("render_sweep_outputs writes every artifact deterministically") {
    const auto report = fixture_sweep_report();
    const auto dir = temp_dir("sweep_render");
    const auto files = render_sweep_outputs(report, dir.string());
    CHECK(files.size() == 9);  // 4 text artifacts + 5 metric plots
    for (const auto& f : files) CHECK(fs::exists(f));

    const auto read = [](const std::string& p) {
        std::ifstream in(p, std::ios::binary);
        return std::string((std::istreambuf_iterator<char>(in)), {});
    };
    std::vector<std::string> first;
    for (const auto& f : files) first.push_back(read(f));
    const auto files2 = render_sweep_outputs(report, dir.string());
    for (std::size_t i = 0; i < files.size(); ++i) CHECK(read(files2[i]) == first[i]);

    const auto svg = read(files.back());
    CHECK(svg.find("<svg") != std::string::npos);
    CHECK(svg.find("polyline") != std::string::npos);
}

TEST_CASE("domain adaptation selects the paper-scale category counts") {
    const auto dir = temp_dir("da_counts");
    // 2,326 labeled WLI train; 961 unlabeled NBI; 1,685 labeled NBI test.
    write_file(dir / "m.csv", category_rows(1900, 426, 1300, 385, 0, 961, 40));
    ExperimentConfig cfg;
    cfg.manifest_path = (dir / "m.csv").string();
    cfg.seeds = {};  // just the data plumbing, no training
    const auto report = run_domain_adaptation(cfg);
    CHECK(report.train_labeled_source == 2326);
    CHECK(report.train_unlabeled_target == 961);
    CHECK(report.test_labeled_target == 1685);
}

TEST_CASE("domain adaptation trains both arms and never tests on training ids") {
    SynthSpec spec;
    spec.videos = 12;
    spec.frames_per_video = 5;
    spec.image_side = 24;
    spec.class1_prob = 0.5;
    spec.nbi_fraction = 0.5;
    spec.label_fraction = 0.75;
    spec.seed = 33;
    const auto dir = temp_dir("da_tiny");
    const auto manifest = generate_synthetic_dataset(spec, dir.string());
    REQUIRE(manifest.ids_matching(true, Modality::NBI).size() > 0);
    REQUIRE(manifest.ids_matching(false, Modality::NBI).size() > 0);

    ExperimentConfig cfg;
    cfg.manifest_path = (dir / "manifest.csv").string();
    cfg.seeds = {1};
    cfg.perm_pool_size = 200;
    cfg.overrides = KeyValueConfig::parse_text(
        "encoder = tiny-cnn\nimage_side = 24\nepochs = 1\nP = 5\n"
        "batch_size_supervised = 4\nbatch_size_unsupervised = 4\n");

    const auto report = run_domain_adaptation(cfg);
    CHECK_FALSE(report.any_failed());
    REQUIRE(report.runs.size() == 2);
    CHECK(report.mean_baseline[0].has_value());
    CHECK(report.mean_ssl[0].has_value());

    const auto md = domain_adaptation_to_markdown(report);
    CHECK(md.find("| Baseline |") != std::string::npos);
    CHECK(md.find("| SSL |") != std::string::npos);
}

TEST_CASE("ood experiment report formats the paper-style AUROC pair") {
    OodExperimentReport report;
    report.median_auroc_ssl = 0.71;
    report.median_auroc_baseline = 0.53;
    report.median_auroc_ssl_kl_only = 0.50;
    report.in_test_count = 416;
    report.out_test_count = 1685;
    report.runs.resize(3);
    const auto md = ood_report_to_markdown(report);
    CHECK(md.find("0.71") != std::string::npos);
    CHECK(md.find("0.53") != std::string::npos);
    CHECK(md.find("416") != std::string::npos);
    CHECK(md.find("1685") != std::string::npos);
}

TEST_CASE("ood experiment: paper-scale partition sizes") {
    const auto dir = temp_dir("ood_counts");
    // Labeled WLI 2,337 (train+test), unlabeled WLI 1,518, labeled NBI 1,685.
    write_file(dir / "m.csv", category_rows(1900, 437, 1300, 385, 1518, 0, 16));
    ExperimentConfig cfg;
    cfg.manifest_path = (dir / "m.csv").string();
    cfg.seeds = {};
    cfg.ood_test_fraction = 416.0 / 2337.0;
    const auto report = run_ood_experiment(cfg);
    CHECK(report.out_test_count == 1685);
    // Video atomicity allows one video of slack around the 416 target.
    CHECK(report.in_test_count >= 400);
    CHECK(report.in_test_count <= 432);
}

TEST_CASE("ood experiment runs end to end on a tiny dataset") {
    SynthSpec spec;
    spec.videos = 12;
    spec.frames_per_video = 5;
    spec.image_side = 24;
    spec.class1_prob = 0.5;
    spec.nbi_fraction = 0.4;
    spec.label_fraction = 0.8;
    spec.seed = 44;
    const auto dir = temp_dir("ood_tiny");
    generate_synthetic_dataset(spec, dir.string());

    ExperimentConfig cfg;
    cfg.manifest_path = (dir / "manifest.csv").string();
    cfg.seeds = {1};
    cfg.perm_pool_size = 200;
    cfg.ood_test_fraction = 0.25;
    cfg.overrides = KeyValueConfig::parse_text(
        "encoder = tiny-cnn\nimage_side = 24\nepochs = 1\nP = 5\n"
        "batch_size_supervised = 4\nbatch_size_unsupervised = 4\n");

    const auto report = run_ood_experiment(cfg);
    CHECK_FALSE(report.any_failed());
    REQUIRE(report.runs.size() == 1);
    CHECK(report.roc_ssl.size() > 1);
    CHECK(report.roc_baseline.size() > 1);
    CHECK(report.median_auroc_ssl >= 0.0);
    CHECK(report.median_auroc_ssl <= 1.0);

    const auto dir_out = temp_dir("ood_render");
    const auto files = render_ood_outputs(report, dir_out.string());
    CHECK(files.size() == 4);
    for (const auto& f : files) CHECK(fs::exists(f));
}

}  // TEST_SUITE
