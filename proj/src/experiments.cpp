#include "jigsawssl/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>
#include <thread>

#include <json.hpp>

#include "jigsawssl/svgplot.hpp"

namespace fs = std::filesystem;

namespace jigsawssl {

const char* const kMetricNames[5] = {"accuracy", "f1", "sensitivity", "specificity",
                                     "precision"};

std::string to_string(Protocol p) {
    switch (p) {
        case Protocol::FractionSweep: return "fraction-sweep";
        case Protocol::DomainAdaptation: return "domain-adaptation";
        default: return "ood";
    }
}

Protocol protocol_from_string(const std::string& s) {
    if (s == "fraction-sweep") return Protocol::FractionSweep;
    if (s == "domain-adaptation") return Protocol::DomainAdaptation;
    if (s == "ood") return Protocol::Ood;
    throw std::invalid_argument("unknown protocol '" + s + "'");
}

ExperimentConfig experiment_config_from_kv(const KeyValueConfig& kv) {
    ExperimentConfig cfg;
    cfg.protocol = protocol_from_string(kv.get_string("protocol", "fraction-sweep"));
    cfg.manifest_path = kv.get_string("manifest");
    cfg.out_dir = kv.get_string("out_dir", cfg.out_dir);
    cfg.k_list = kv.get_double_list("k_list", cfg.k_list);
    cfg.n_folds = static_cast<int>(kv.get_long("n_folds", cfg.n_folds));
    cfg.val_fraction = kv.get_double("val_fraction", cfg.val_fraction);
    const std::string fold_mode = kv.get_string("fold_mode", "independent");
    if (fold_mode == "independent") cfg.fold_mode = FoldMode::IndependentRedraw;
    else if (fold_mode == "rotation") cfg.fold_mode = FoldMode::Rotation;
    else throw std::runtime_error("config: fold_mode must be independent|rotation");
    cfg.split_seed = kv.get_u64("split_seed", cfg.split_seed);
    cfg.seeds = kv.get_u64_list("seeds", cfg.seeds);
    cfg.workers = static_cast<int>(kv.get_long("workers", cfg.workers));
    cfg.perm_pool_size = static_cast<std::size_t>(kv.get_long("perm_pool_size",
                                                              static_cast<long>(cfg.perm_pool_size)));
    cfg.source_modality = modality_from_string(kv.get_string("source_modality", "WLI"));
    cfg.target_modality = modality_from_string(kv.get_string("target_modality", "NBI"));
    cfg.ood_test_fraction = kv.get_double("ood_test_fraction", cfg.ood_test_fraction);
    const std::string mode = kv.get_string("ood_mode", "identity");
    if (mode == "identity") cfg.ood_mode = OodMode::IdentityOnly;
    else if (mode == "scramble") cfg.ood_mode = OodMode::ScrambleAverage;
    else if (mode == "kl-only") cfg.ood_mode = OodMode::KlOnly;
    else throw std::runtime_error("config: ood_mode must be identity|scramble|kl-only");
    cfg.ood_scramble_draws = static_cast<int>(kv.get_long("ood_M", cfg.ood_scramble_draws));
    cfg.ood_negate_kl = kv.get_bool("ood_negate_kl", cfg.ood_negate_kl);
    cfg.overrides = kv;
    return cfg;
}

ExperimentConfig load_experiment_config(const std::string& path) {
    return experiment_config_from_kv(KeyValueConfig::load(path));
}

TrainConfig resolve_train_config(const ExperimentConfig& cfg, Arm arm, double k_percent,
                                 std::uint64_t seed) {
    TrainConfig base = preset_for(arm, k_percent);
    TrainConfig resolved = train_config_from_kv(cfg.overrides, base);
    resolved.k_percent = k_percent;
    resolved.seed = seed;
    return resolved;
}

// ---------------------------------------------------------------------------
// Shared cell machinery
// ---------------------------------------------------------------------------

namespace {

struct TrainedCell {
    DualHeadModel model;
    PermutationSet permset;
    TrainConfig cfg;
};

TrainedCell train_cell(const DatasetManifest& manifest, const SplitPlan& plan, Arm arm,
                       const TrainConfig& traincfg, std::size_t perm_pool_size,
                       const ImageProvider& images) {
    TrainedCell cell;
    cell.cfg = traincfg;
    if (arm == Arm::SSL) {
        cell.permset = generate_permutation_set(traincfg.grid_size, traincfg.P, perm_pool_size,
                                                derive_seed(traincfg.seed, 0x5e7));
    }
    const InitMode init =
        traincfg.init_mode == "pretrained-file" ? InitMode::PretrainedFile : InitMode::Random;
    cell.model = build_model(traincfg.encoder, arm == Arm::SSL ? traincfg.P + 1 : 0, init,
                             derive_seed(traincfg.seed, 0x0de1), traincfg.pretrained_path);
    train(cell.model, manifest, plan, cell.permset, traincfg, images);
    return cell;
}

void run_jobs(std::vector<std::function<void()>>& jobs, int workers) {
    if (workers <= 1 || jobs.size() <= 1) {
        for (auto& job : jobs) job();
        return;
    }
    std::atomic<std::size_t> next{0};
    const auto worker = [&] {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= jobs.size()) return;
            jobs[i]();
        }
    };
    std::vector<std::thread> pool;
    const int n = std::min<int>(workers, static_cast<int>(jobs.size()));
    pool.reserve(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
}

std::optional<double> metric_by_index(const EvaluationReport& r, int idx) {
    switch (idx) {
        case 0: return r.accuracy;
        case 1: return r.f1;
        case 2: return r.sensitivity;
        case 3: return r.specificity;
        default: return r.precision;
    }
}

double median_of(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

double stddev_of(const std::vector<double>& v) {
    if (v.size() < 2) return 0.0;
    double mean = 0.0;
    for (double x : v) mean += x;
    mean /= static_cast<double>(v.size());
    double sq = 0.0;
    for (double x : v) sq += (x - mean) * (x - mean);
    return std::sqrt(sq / static_cast<double>(v.size()));
}

std::string csv_opt(const std::optional<double>& v) {
    if (!v) return "";
    char buf[48];
    std::snprintf(buf, sizeof(buf), "%.6g", *v);
    return buf;
}

std::string sanitize_error(std::string msg) {
    for (auto& ch : msg) {
        if (ch == ',' || ch == '\n' || ch == '\r') ch = ';';
    }
    return msg;
}

}  // namespace

// ---------------------------------------------------------------------------
// Fraction sweep
// ---------------------------------------------------------------------------

bool SweepReport::any_failed() const {
    return std::any_of(cells.begin(), cells.end(), [](const auto& c) { return c.failed; });
}

SweepReport run_fraction_sweep(const ExperimentConfig& cfg) {
    const DatasetManifest manifest = load_manifest(cfg.manifest_path);
    const auto folds =
        make_folds(manifest, cfg.n_folds, cfg.val_fraction, cfg.split_seed, cfg.fold_mode);

    SweepReport report;
    for (int fold = 0; fold < cfg.n_folds; ++fold) {
        for (double k : cfg.k_list) {
            for (std::uint64_t seed : cfg.seeds) {
                for (Arm arm : {Arm::Baseline, Arm::SSL}) {
                    SweepCell cell;
                    cell.k_percent = k;
                    cell.fold = fold;
                    cell.seed = seed;
                    cell.arm = arm;
                    report.cells.push_back(cell);
                }
            }
        }
    }

    std::vector<std::function<void()>> jobs;
    jobs.reserve(report.cells.size());
    for (auto& cell : report.cells) {
        jobs.emplace_back([&cell, &manifest, &folds, &cfg] {
            try {
                // The k% selection is seeded per fold only, so both arms and
                // all run seeds share one D_K and the selections nest in k.
                const SplitPlan plan =
                    apply_labeled_fraction(manifest, folds[static_cast<std::size_t>(cell.fold)],
                                           cell.k_percent,
                                           derive_seed(cfg.split_seed,
                                                       500 + static_cast<std::uint64_t>(cell.fold)));
                const TrainConfig traincfg =
                    resolve_train_config(cfg, cell.arm, cell.k_percent, cell.seed);
                CachingImageProvider images;
                TrainedCell trained =
                    train_cell(manifest, plan, cell.arm, traincfg, cfg.perm_pool_size, images);
                const auto eval =
                    evaluate_classifier(trained.model, manifest, plan.validation_record_ids,
                                        images, traincfg.augment_config());
                cell.report = eval.report;
            } catch (const std::exception& e) {
                cell.failed = true;
                cell.error = e.what();
            }
        });
    }
    run_jobs(jobs, cfg.workers);

    for (double k : cfg.k_list) {
        for (Arm arm : {Arm::Baseline, Arm::SSL}) {
            SweepAggregate agg;
            agg.k_percent = k;
            agg.arm = arm;
            for (int m = 0; m < 5; ++m) {
                std::vector<double> values;
                for (const auto& cell : report.cells) {
                    if (cell.failed || cell.arm != arm || cell.k_percent != k) continue;
                    if (const auto v = metric_by_index(cell.report, m)) values.push_back(*v);
                }
                if (m == 0) agg.replicates = static_cast<int>(values.size());
                if (!values.empty()) {
                    agg.median[m] = median_of(values);
                    agg.stddev[m] = stddev_of(values);
                }
            }
            report.aggregates.push_back(agg);
        }
    }
    return report;
}

// ---------------------------------------------------------------------------
// Domain adaptation
// ---------------------------------------------------------------------------

bool DomainAdaptationReport::any_failed() const {
    return std::any_of(runs.begin(), runs.end(), [](const auto& r) { return r.failed; });
}

DomainAdaptationReport run_domain_adaptation(const ExperimentConfig& cfg) {
    const DatasetManifest manifest = load_manifest(cfg.manifest_path);

    const auto labeled_source = manifest.ids_matching(true, cfg.source_modality);
    const auto unlabeled_target = manifest.ids_matching(false, cfg.target_modality);
    const auto labeled_target = manifest.ids_matching(true, cfg.target_modality);
    if (labeled_source.empty() || labeled_target.empty()) {
        throw std::runtime_error("domain adaptation: need labeled source and labeled target data");
    }

    SplitPlan plan;
    plan.supervised_record_ids = labeled_source;
    plan.unsupervised_record_ids = labeled_source;
    plan.unsupervised_record_ids.insert(plan.unsupervised_record_ids.end(),
                                        unlabeled_target.begin(), unlabeled_target.end());

    DomainAdaptationReport report;
    report.train_labeled_source = labeled_source.size();
    report.train_unlabeled_target = unlabeled_target.size();
    report.test_labeled_target = labeled_target.size();

    for (std::uint64_t seed : cfg.seeds) {
        for (Arm arm : {Arm::Baseline, Arm::SSL}) {
            DomainAdaptationReport::Run run;
            run.seed = seed;
            run.arm = arm;
            report.runs.push_back(run);
        }
    }

    std::vector<std::function<void()>> jobs;
    for (auto& run : report.runs) {
        jobs.emplace_back([&run, &manifest, &plan, &labeled_target, &cfg] {
            try {
                TrainConfig traincfg = resolve_train_config(cfg, run.arm, 100.0, run.seed);
                // Both arms train at the source-domain settings: lr 1e-4,
                // weight decay 0.005, P=100, lambda=1 unless overridden.
                if (!cfg.overrides.has("learning_rate")) traincfg.learning_rate = 1e-4;
                CachingImageProvider images;
                TrainedCell trained =
                    train_cell(manifest, plan, run.arm, traincfg, cfg.perm_pool_size, images);
                const auto eval = evaluate_classifier(trained.model, manifest, labeled_target,
                                                      images, traincfg.augment_config());
                run.report = eval.report;
            } catch (const std::exception& e) {
                run.failed = true;
                run.error = e.what();
            }
        });
    }
    run_jobs(jobs, cfg.workers);

    for (int m = 0; m < 5; ++m) {
        for (Arm arm : {Arm::Baseline, Arm::SSL}) {
            std::vector<double> values;
            for (const auto& run : report.runs) {
                if (run.failed || run.arm != arm) continue;
                if (const auto v = metric_by_index(run.report, m)) values.push_back(*v);
            }
            if (values.empty()) continue;
            double mean = 0.0;
            for (double v : values) mean += v;
            mean /= static_cast<double>(values.size());
            (arm == Arm::Baseline ? report.mean_baseline : report.mean_ssl)[m] = mean;
        }
    }
    return report;
}

// ---------------------------------------------------------------------------
// OOD experiment
// ---------------------------------------------------------------------------

bool OodExperimentReport::any_failed() const {
    return std::any_of(runs.begin(), runs.end(), [](const auto& r) { return r.failed; });
}

namespace {

// Video-level holdout of labeled source frames for the in-distribution test
// set.
void split_source_for_ood(const DatasetManifest& manifest,
                          const std::vector<std::size_t>& labeled_source, double test_fraction,
                          std::uint64_t seed, std::vector<std::size_t>* train_ids,
                          std::vector<std::size_t>* test_ids) {
    std::vector<std::string> videos;
    std::map<std::string, std::size_t> frames;
    for (std::size_t id : labeled_source) {
        const auto& v = manifest.records[id].video_id;
        if (frames.emplace(v, 0).second) videos.push_back(v);
        ++frames[v];
    }
    if (videos.size() < 2) throw std::runtime_error("ood: need >= 2 labeled source videos");

    Rng rng(derive_seed(seed, 0x00d));
    rng.shuffle(videos);
    std::set<std::string> test_videos;
    const double target = test_fraction * static_cast<double>(labeled_source.size());
    std::size_t acc = 0;
    for (const auto& v : videos) {
        if (acc >= target && acc > 0) break;
        if (test_videos.size() + 1 == videos.size()) break;  // keep at least one train video
        test_videos.insert(v);
        acc += frames[v];
    }
    for (std::size_t id : labeled_source) {
        if (test_videos.count(manifest.records[id].video_id)) test_ids->push_back(id);
        else train_ids->push_back(id);
    }
}

}  // namespace

OodExperimentReport run_ood_experiment(const ExperimentConfig& cfg) {
    const DatasetManifest manifest = load_manifest(cfg.manifest_path);

    const auto labeled_source = manifest.ids_matching(true, cfg.source_modality);
    const auto unlabeled_source = manifest.ids_matching(false, cfg.source_modality);
    const auto labeled_target = manifest.ids_matching(true, cfg.target_modality);
    if (labeled_source.empty() || labeled_target.empty()) {
        throw std::runtime_error("ood: need labeled source and labeled target data");
    }

    std::vector<std::size_t> train_ids, in_test_ids;
    split_source_for_ood(manifest, labeled_source, cfg.ood_test_fraction, cfg.split_seed,
                         &train_ids, &in_test_ids);
    if (in_test_ids.empty()) throw std::runtime_error("ood: empty in-distribution test set");

    SplitPlan plan;
    plan.supervised_record_ids = train_ids;
    plan.unsupervised_record_ids = train_ids;
    plan.unsupervised_record_ids.insert(plan.unsupervised_record_ids.end(),
                                        unlabeled_source.begin(), unlabeled_source.end());

    OodExperimentReport report;
    report.in_test_count = in_test_ids.size();
    report.out_test_count = labeled_target.size();
    report.runs.resize(cfg.seeds.size());

    std::vector<std::function<void()>> jobs;
    for (std::size_t i = 0; i < cfg.seeds.size(); ++i) {
        report.runs[i].seed = cfg.seeds[i];
        auto& run = report.runs[i];
        jobs.emplace_back([&run, &manifest, &plan, &in_test_ids, &labeled_target, &cfg] {
            try {
                CachingImageProvider images;

                TrainConfig ssl_cfg = resolve_train_config(cfg, Arm::SSL, 100.0, run.seed);
                if (!cfg.overrides.has("learning_rate")) ssl_cfg.learning_rate = 1e-4;
                TrainedCell ssl =
                    train_cell(manifest, plan, Arm::SSL, ssl_cfg, cfg.perm_pool_size, images);

                OodConfig ood_cfg;
                ood_cfg.mode = cfg.ood_mode == OodMode::KlOnly ? OodMode::IdentityOnly
                                                               : cfg.ood_mode;
                ood_cfg.scramble_draws = cfg.ood_scramble_draws;
                ood_cfg.negate_kl = cfg.ood_negate_kl;
                ood_cfg.s = ssl_cfg.s;
                ood_cfg.grid = ssl_cfg.grid_spec();
                const AugmentConfig augcfg = ssl_cfg.augment_config();

                const auto ssl_eval =
                    evaluate_ood(ssl.model, manifest, in_test_ids, labeled_target, ssl.permset,
                                 ood_cfg, images, augcfg, derive_seed(run.seed, 0xcafe));
                run.auroc_ssl_full = ssl_eval.auroc_value;
                run.roc_ssl = ssl_eval.roc;

                OodConfig kl_cfg = ood_cfg;
                kl_cfg.mode = OodMode::KlOnly;
                run.auroc_ssl_kl_only =
                    evaluate_ood(ssl.model, manifest, in_test_ids, labeled_target, ssl.permset,
                                 kl_cfg, images, augcfg, derive_seed(run.seed, 0xcafe))
                        .auroc_value;

                TrainConfig base_cfg = resolve_train_config(cfg, Arm::Baseline, 100.0, run.seed);
                if (!cfg.overrides.has("learning_rate")) base_cfg.learning_rate = 1e-4;
                TrainedCell baseline = train_cell(manifest, plan, Arm::Baseline, base_cfg,
                                                  cfg.perm_pool_size, images);
                const auto base_eval =
                    evaluate_ood(baseline.model, manifest, in_test_ids, labeled_target,
                                 baseline.permset, kl_cfg, images, augcfg,
                                 derive_seed(run.seed, 0xcafe));
                run.auroc_baseline_model_kl = base_eval.auroc_value;
                run.roc_baseline = base_eval.roc;
            } catch (const std::exception& e) {
                run.failed = true;
                run.error = e.what();
            }
        });
    }
    run_jobs(jobs, cfg.workers);

    std::vector<double> ssl_aurocs, base_aurocs, ssl_kl;
    for (const auto& run : report.runs) {
        if (run.failed) continue;
        ssl_aurocs.push_back(run.auroc_ssl_full);
        base_aurocs.push_back(run.auroc_baseline_model_kl);
        ssl_kl.push_back(run.auroc_ssl_kl_only);
    }
    if (!ssl_aurocs.empty()) {
        report.median_auroc_ssl = median_of(ssl_aurocs);
        report.median_auroc_baseline = median_of(base_aurocs);
        report.median_auroc_ssl_kl_only = median_of(ssl_kl);

        // Report the curves from the run whose SSL AUROC sits at the median.
        std::size_t best = 0;
        double best_gap = 1e300;
        for (std::size_t i = 0; i < report.runs.size(); ++i) {
            if (report.runs[i].failed) continue;
            const double gap = std::abs(report.runs[i].auroc_ssl_full - report.median_auroc_ssl);
            if (gap < best_gap) {
                best_gap = gap;
                best = i;
            }
        }
        report.roc_ssl = report.runs[best].roc_ssl;
        report.roc_baseline = report.runs[best].roc_baseline;
    }
    return report;
}

// ---------------------------------------------------------------------------
// Rendering
// ---------------------------------------------------------------------------

std::string sweep_cells_to_csv(const SweepReport& report) {
    std::ostringstream out;
    out << "k,fold,seed,arm,accuracy,f1,sensitivity,specificity,precision,failed,error\n";
    char head[96];
    for (const auto& c : report.cells) {
        std::snprintf(head, sizeof(head), "%.6g,%d,%llu,%s,", c.k_percent, c.fold,
                      static_cast<unsigned long long>(c.seed), to_string(c.arm).c_str());
        out << head << csv_opt(c.report.accuracy) << ',' << csv_opt(c.report.f1) << ','
            << csv_opt(c.report.sensitivity) << ',' << csv_opt(c.report.specificity) << ','
            << csv_opt(c.report.precision) << ',' << (c.failed ? "1" : "0") << ','
            << sanitize_error(c.error) << "\n";
    }
    return out.str();
}

std::string sweep_aggregates_to_csv(const SweepReport& report) {
    std::ostringstream out;
    out << "k,arm,replicates";
    for (const auto* name : kMetricNames) out << ',' << name << "_median," << name << "_std";
    out << "\n";
    char head[64];
    for (const auto& a : report.aggregates) {
        std::snprintf(head, sizeof(head), "%.6g,%s,%d", a.k_percent, to_string(a.arm).c_str(),
                      a.replicates);
        out << head;
        for (int m = 0; m < 5; ++m) {
            out << ',' << csv_opt(a.median[m]) << ',' << csv_opt(a.stddev[m]);
        }
        out << "\n";
    }
    return out.str();
}

namespace {

const SweepAggregate* find_aggregate(const SweepReport& report, double k, Arm arm) {
    for (const auto& a : report.aggregates) {
        if (a.arm == arm && std::abs(a.k_percent - k) < 1e-9) return &a;
    }
    return nullptr;
}

std::string fmt_metric(const std::optional<double>& v, bool as_percent) {
    if (!v) return "-";
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.2f", as_percent ? *v * 100.0 : *v);
    return buf;
}

std::string fmt_k(double k) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.4g%%", k);
    return buf;
}

}  // namespace

std::string sweep_to_markdown(const SweepReport& report) {
    std::set<double> ks;
    for (const auto& a : report.aggregates) ks.insert(a.k_percent);

    std::ostringstream out;
    out << "| Labeled Data |";
    const char* headers[5] = {"Accuracy (%)", "F1 Score", "Sensitivity", "Specificity",
                              "Precision"};
    for (const auto* h : headers) out << ' ' << h << " Baseline | " << h << " SSL |";
    out << "\n|---|";
    for (int i = 0; i < 10; ++i) out << "---|";
    out << "\n";

    for (double k : ks) {
        const auto* base = find_aggregate(report, k, Arm::Baseline);
        const auto* ssl = find_aggregate(report, k, Arm::SSL);
        out << "| " << fmt_k(k) << " |";
        for (int m = 0; m < 5; ++m) {
            const bool pct = m == 0;
            out << ' ' << (base ? fmt_metric(base->median[m], pct) : "-") << " | "
                << (ssl ? fmt_metric(ssl->median[m], pct) : "-") << " |";
        }
        out << "\n";
    }
    return out.str();
}

std::string domain_adaptation_to_csv(const DomainAdaptationReport& report) {
    std::ostringstream out;
    out << "arm,seed,failed,accuracy,f1,sensitivity,specificity,precision\n";
    for (const auto& run : report.runs) {
        out << to_string(run.arm) << ',' << run.seed << ',' << (run.failed ? "1" : "0") << ','
            << csv_opt(run.report.accuracy) << ',' << csv_opt(run.report.f1) << ','
            << csv_opt(run.report.sensitivity) << ',' << csv_opt(run.report.specificity) << ','
            << csv_opt(run.report.precision) << "\n";
    }
    out << "mean,baseline,0";
    for (int m = 0; m < 5; ++m) out << ',' << csv_opt(report.mean_baseline[m]);
    out << "\nmean,ssl,0";
    for (int m = 0; m < 5; ++m) out << ',' << csv_opt(report.mean_ssl[m]);
    out << "\n";
    return out.str();
}

std::string domain_adaptation_to_markdown(const DomainAdaptationReport& report) {
    std::ostringstream out;
    out << "| | Accuracy | F1 Score | Sensitivity | Specificity | Precision |\n";
    out << "|---|---|---|---|---|---|\n";
    out << "| Baseline |";
    for (int m = 0; m < 5; ++m) out << ' ' << fmt_metric(report.mean_baseline[m], m == 0) << " |";
    out << "\n| SSL |";
    for (int m = 0; m < 5; ++m) out << ' ' << fmt_metric(report.mean_ssl[m], m == 0) << " |";
    out << "\n\nTrain: " << report.train_labeled_source << " labeled source + "
        << report.train_unlabeled_target << " unlabeled target; test: "
        << report.test_labeled_target << " labeled target frames (mean of "
        << report.runs.size() / 2 << " seeds).\n";
    return out.str();
}

std::string ood_report_to_markdown(const OodExperimentReport& report) {
    std::ostringstream out;
    char buf[64];
    out << "| Scorer | AUROC |\n|---|---|\n";
    std::snprintf(buf, sizeof(buf), "| Baseline (KL only) | %.2f |\n",
                  report.median_auroc_baseline);
    out << buf;
    std::snprintf(buf, sizeof(buf), "| SSL (KL + jigsaw) | %.2f |\n", report.median_auroc_ssl);
    out << buf;
    std::snprintf(buf, sizeof(buf), "| SSL model, KL only | %.2f |\n",
                  report.median_auroc_ssl_kl_only);
    out << buf;
    out << "\nTest set: " << report.in_test_count << " in-distribution + "
        << report.out_test_count << " out-of-distribution frames; median AUROC across "
        << report.runs.size() << " runs.\n";
    return out.str();
}

// ---------------------------------------------------------------------------
// JSON persistence
// ---------------------------------------------------------------------------

namespace {

using nlohmann::json;

json report_to_json(const EvaluationReport& r) {
    json j;
    const auto put = [&](const char* key, const std::optional<double>& v) {
        if (v) j[key] = *v;
    };
    put("accuracy", r.accuracy);
    put("f1", r.f1);
    put("sensitivity", r.sensitivity);
    put("specificity", r.specificity);
    put("precision", r.precision);
    return j;
}

EvaluationReport report_from_json(const json& j) {
    EvaluationReport r;
    const auto get = [&](const char* key, std::optional<double>& v) {
        if (j.contains(key)) v = j.at(key).get<double>();
    };
    get("accuracy", r.accuracy);
    get("f1", r.f1);
    get("sensitivity", r.sensitivity);
    get("specificity", r.specificity);
    get("precision", r.precision);
    return r;
}

}  // namespace

std::string sweep_report_to_json(const SweepReport& report) {
    json j;
    j["protocol"] = "fraction-sweep";
    j["cells"] = json::array();
    for (const auto& c : report.cells) {
        json cell;
        cell["k"] = c.k_percent;
        cell["fold"] = c.fold;
        cell["seed"] = c.seed;
        cell["arm"] = to_string(c.arm);
        cell["failed"] = c.failed;
        if (c.failed) cell["error"] = c.error;
        else cell["report"] = report_to_json(c.report);
        j["cells"].push_back(cell);
    }
    json aggs = json::array();
    for (const auto& a : report.aggregates) {
        json agg;
        agg["k"] = a.k_percent;
        agg["arm"] = to_string(a.arm);
        agg["replicates"] = a.replicates;
        for (int m = 0; m < 5; ++m) {
            if (a.median[m]) agg[std::string(kMetricNames[m]) + "_median"] = *a.median[m];
            if (a.stddev[m]) agg[std::string(kMetricNames[m]) + "_std"] = *a.stddev[m];
        }
        aggs.push_back(agg);
    }
    j["aggregates"] = aggs;
    return j.dump(2);
}

SweepReport sweep_report_from_json(const std::string& json_text) {
    const json j = json::parse(json_text);
    if (j.value("protocol", "") != "fraction-sweep") {
        throw std::runtime_error("sweep_report_from_json: not a fraction-sweep report");
    }
    SweepReport report;
    for (const auto& cell : j.at("cells")) {
        SweepCell c;
        c.k_percent = cell.at("k").get<double>();
        c.fold = cell.at("fold").get<int>();
        c.seed = cell.at("seed").get<std::uint64_t>();
        c.arm = cell.at("arm").get<std::string>() == "ssl" ? Arm::SSL : Arm::Baseline;
        c.failed = cell.at("failed").get<bool>();
        if (c.failed) c.error = cell.value("error", "");
        else c.report = report_from_json(cell.at("report"));
        report.cells.push_back(c);
    }
    for (const auto& agg : j.at("aggregates")) {
        SweepAggregate a;
        a.k_percent = agg.at("k").get<double>();
        a.arm = agg.at("arm").get<std::string>() == "ssl" ? Arm::SSL : Arm::Baseline;
        a.replicates = agg.at("replicates").get<int>();
        for (int m = 0; m < 5; ++m) {
            const std::string med = std::string(kMetricNames[m]) + "_median";
            const std::string sd = std::string(kMetricNames[m]) + "_std";
            if (agg.contains(med)) a.median[m] = agg.at(med).get<double>();
            if (agg.contains(sd)) a.stddev[m] = agg.at(sd).get<double>();
        }
        report.aggregates.push_back(a);
    }
    return report;
}

// ---------------------------------------------------------------------------
// Output files
// ---------------------------------------------------------------------------

namespace {

void write_text_file(const fs::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
    out << content;
}

}  // namespace

std::vector<std::string> render_sweep_outputs(const SweepReport& report,
                                              const std::string& out_dir) {
    fs::create_directories(out_dir);
    std::vector<std::string> files;
    const auto emit = [&](const std::string& name, const std::string& content) {
        const fs::path p = fs::path(out_dir) / name;
        write_text_file(p, content);
        files.push_back(p.string());
    };
    emit("sweep_cells.csv", sweep_cells_to_csv(report));
    emit("sweep_aggregates.csv", sweep_aggregates_to_csv(report));
    emit("sweep_report.md", sweep_to_markdown(report));
    emit("sweep_report.json", sweep_report_to_json(report));

    std::set<double> ks;
    for (const auto& a : report.aggregates) ks.insert(a.k_percent);
    for (int m = 0; m < 5; ++m) {
        PlotSpec spec;
        spec.title = std::string(kMetricNames[m]) + " vs labeled data";
        spec.x_label = "labeled data (%)";
        spec.y_label = kMetricNames[m];
        spec.log_x = true;
        for (Arm arm : {Arm::Baseline, Arm::SSL}) {
            PlotSeries series;
            series.label = to_string(arm);
            series.color = arm == Arm::Baseline ? "#d62728" : "#1f77b4";
            for (double k : ks) {
                const auto* agg = find_aggregate(report, k, arm);
                if (!agg || !agg->median[m]) continue;
                series.x.push_back(k);
                series.y.push_back(*agg->median[m]);
                series.band_half_width.push_back(agg->stddev[m].value_or(0.0));
            }
            spec.series.push_back(series);
        }
        const std::string name = std::string("sweep_") + kMetricNames[m] + ".svg";
        const fs::path p = fs::path(out_dir) / name;
        write_svg_plot(spec, p.string());
        files.push_back(p.string());
    }
    return files;
}

std::vector<std::string> render_domain_adaptation_outputs(const DomainAdaptationReport& report,
                                                          const std::string& out_dir) {
    fs::create_directories(out_dir);
    std::vector<std::string> files;
    const fs::path csv = fs::path(out_dir) / "domain_adaptation.csv";
    write_text_file(csv, domain_adaptation_to_csv(report));
    files.push_back(csv.string());
    const fs::path md = fs::path(out_dir) / "domain_adaptation.md";
    write_text_file(md, domain_adaptation_to_markdown(report));
    files.push_back(md.string());
    return files;
}

std::vector<std::string> render_ood_outputs(const OodExperimentReport& report,
                                            const std::string& out_dir) {
    fs::create_directories(out_dir);
    std::vector<std::string> files;
    const auto emit = [&](const std::string& name, const std::string& content) {
        const fs::path p = fs::path(out_dir) / name;
        write_text_file(p, content);
        files.push_back(p.string());
    };
    emit("ood_report.md", ood_report_to_markdown(report));
    emit("roc_baseline.csv", roc_to_csv(report.roc_baseline));
    emit("roc_ssl.csv", roc_to_csv(report.roc_ssl));

    PlotSpec spec;
    spec.title = "OOD detection ROC";
    spec.x_label = "false positive rate";
    spec.y_label = "true positive rate";
    spec.diagonal = true;
    spec.y_min = 0.0;
    spec.y_max = 1.0;
    char label[64];
    for (int which = 0; which < 2; ++which) {
        const auto& curve = which == 0 ? report.roc_baseline : report.roc_ssl;
        PlotSeries series;
        if (which == 0) {
            std::snprintf(label, sizeof(label), "baseline (AUROC %.2f)",
                          report.median_auroc_baseline);
            series.color = "#d62728";
        } else {
            std::snprintf(label, sizeof(label), "ssl (AUROC %.2f)", report.median_auroc_ssl);
            series.color = "#1f77b4";
        }
        series.label = label;
        for (const auto& p : curve) {
            series.x.push_back(p.fpr);
            series.y.push_back(p.tpr);
        }
        spec.series.push_back(series);
    }
    const fs::path p = fs::path(out_dir) / "ood_roc.svg";
    write_svg_plot(spec, p.string());
    files.push_back(p.string());
    return files;
}

}  // namespace jigsawssl
