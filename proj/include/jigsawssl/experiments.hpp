#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "jigsawssl/config.hpp"
#include "jigsawssl/dataset.hpp"
#include "jigsawssl/metrics.hpp"
#include "jigsawssl/ood.hpp"
#include "jigsawssl/training.hpp"

namespace jigsawssl {

enum class Protocol { FractionSweep, DomainAdaptation, Ood };

std::string to_string(Protocol p);
Protocol protocol_from_string(const std::string& s);

struct ExperimentConfig {
    Protocol protocol = Protocol::FractionSweep;
    std::string manifest_path;
    std::string out_dir = ".";
    std::vector<double> k_list{100, 50, 25, 12.5, 6.25};
    int n_folds = 5;
    double val_fraction = 0.2;
    FoldMode fold_mode = FoldMode::IndependentRedraw;
    std::uint64_t split_seed = 42;
    std::vector<std::uint64_t> seeds{1, 2, 3};
    int workers = 1;

    // Training overrides layered on top of the per-k presets; keys absent
    // from the file keep the preset values.
    KeyValueConfig overrides;

    std::size_t perm_pool_size = 10000;

    // Domain adaptation / OOD.
    Modality source_modality = Modality::WLI;
    Modality target_modality = Modality::NBI;
    double ood_test_fraction = 0.18;  // labeled-source frames held out as in-dist test
    OodMode ood_mode = OodMode::IdentityOnly;
    int ood_scramble_draws = 4;
    bool ood_negate_kl = false;
};

ExperimentConfig experiment_config_from_kv(const KeyValueConfig& kv);
ExperimentConfig load_experiment_config(const std::string& path);

// The per-k training configuration an arm actually runs with: preset values
// overlaid with the experiment file's explicit keys.
TrainConfig resolve_train_config(const ExperimentConfig& cfg, Arm arm, double k_percent,
                                 std::uint64_t seed);

// ---------------------------------------------------------------------------
// Fraction sweep
// ---------------------------------------------------------------------------

struct SweepCell {
    double k_percent = 100.0;
    int fold = 0;
    std::uint64_t seed = 0;
    Arm arm = Arm::Baseline;
    bool failed = false;
    std::string error;
    EvaluationReport report;
};

struct SweepAggregate {
    double k_percent = 100.0;
    Arm arm = Arm::Baseline;
    int replicates = 0;
    // Median and standard deviation across (fold, seed) replicates.
    std::optional<double> median[5];
    std::optional<double> stddev[5];
};

// Metric order used throughout reports: accuracy, f1, sensitivity,
// specificity, precision.
extern const char* const kMetricNames[5];

struct SweepReport {
    std::vector<SweepCell> cells;
    std::vector<SweepAggregate> aggregates;

    bool any_failed() const;
};

SweepReport run_fraction_sweep(const ExperimentConfig& cfg);

// ---------------------------------------------------------------------------
// Domain adaptation
// ---------------------------------------------------------------------------

struct DomainAdaptationReport {
    struct Run {
        std::uint64_t seed = 0;
        Arm arm = Arm::Baseline;
        bool failed = false;
        std::string error;
        EvaluationReport report;
    };
    std::vector<Run> runs;
    // Mean across seeds per arm, metric order as kMetricNames.
    std::optional<double> mean_baseline[5];
    std::optional<double> mean_ssl[5];
    std::size_t train_labeled_source = 0;
    std::size_t train_unlabeled_target = 0;
    std::size_t test_labeled_target = 0;

    bool any_failed() const;
};

DomainAdaptationReport run_domain_adaptation(const ExperimentConfig& cfg);

// ---------------------------------------------------------------------------
// Out-of-distribution detection
// ---------------------------------------------------------------------------

struct OodExperimentReport {
    struct Run {
        std::uint64_t seed = 0;
        bool failed = false;
        std::string error;
        double auroc_baseline_model_kl = 0.0;  // baseline arch, KL-only score
        double auroc_ssl_kl_only = 0.0;        // SSL model, KL-only score
        double auroc_ssl_full = 0.0;           // SSL model, KL + jigsaw term
        std::vector<RocPoint> roc_baseline;
        std::vector<RocPoint> roc_ssl;
    };
    std::vector<Run> runs;
    double median_auroc_baseline = 0.0;
    double median_auroc_ssl = 0.0;
    double median_auroc_ssl_kl_only = 0.0;
    // Curves from the run with the median SSL AUROC.
    std::vector<RocPoint> roc_baseline;
    std::vector<RocPoint> roc_ssl;
    std::size_t in_test_count = 0;
    std::size_t out_test_count = 0;

    bool any_failed() const;
};

OodExperimentReport run_ood_experiment(const ExperimentConfig& cfg);

// ---------------------------------------------------------------------------
// Rendering
// ---------------------------------------------------------------------------

enum class ReportFormat { Csv, MarkdownTable, Plot };

std::string sweep_cells_to_csv(const SweepReport& report);
std::string sweep_aggregates_to_csv(const SweepReport& report);
// Table layout mirroring the paper: one row per k, metric x {Baseline, SSL}
// columns, accuracy as a percentage.
std::string sweep_to_markdown(const SweepReport& report);

std::string domain_adaptation_to_csv(const DomainAdaptationReport& report);
std::string domain_adaptation_to_markdown(const DomainAdaptationReport& report);

std::string ood_report_to_markdown(const OodExperimentReport& report);

// JSON persistence so `report` can re-render saved results.
std::string sweep_report_to_json(const SweepReport& report);
SweepReport sweep_report_from_json(const std::string& json_text);

// Writes every artifact for the protocol under cfg.out_dir and returns the
// list of files written.
std::vector<std::string> render_sweep_outputs(const SweepReport& report,
                                              const std::string& out_dir);
std::vector<std::string> render_domain_adaptation_outputs(const DomainAdaptationReport& report,
                                                          const std::string& out_dir);
std::vector<std::string> render_ood_outputs(const OodExperimentReport& report,
                                            const std::string& out_dir);

}  // namespace jigsawssl
