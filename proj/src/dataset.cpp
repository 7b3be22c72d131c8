#include "jigsawssl/dataset.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

#include "jigsawssl/rng.hpp"

namespace fs = std::filesystem;

namespace jigsawssl {

std::string to_string(Modality m) { return m == Modality::WLI ? "WLI" : "NBI"; }

Modality modality_from_string(const std::string& s) {
    if (s == "WLI") return Modality::WLI;
    if (s == "NBI") return Modality::NBI;
    throw std::invalid_argument("unknown modality '" + s + "'");
}

std::size_t DatasetManifest::labeled_count() const {
    return static_cast<std::size_t>(
        std::count_if(records.begin(), records.end(), [](const auto& r) { return r.labeled(); }));
}

std::size_t DatasetManifest::unlabeled_count() const { return records.size() - labeled_count(); }

std::size_t DatasetManifest::modality_count(Modality m) const {
    return static_cast<std::size_t>(std::count_if(
        records.begin(), records.end(), [m](const auto& r) { return r.modality == m; }));
}

std::vector<std::size_t> DatasetManifest::labeled_ids() const {
    return ids_matching(true, std::nullopt);
}

std::vector<std::size_t> DatasetManifest::ids_matching(std::optional<bool> labeled,
                                                       std::optional<Modality> modality) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < records.size(); ++i) {
        if (labeled && records[i].labeled() != *labeled) continue;
        if (modality && records[i].modality != *modality) continue;
        out.push_back(i);
    }
    return out;
}

namespace {

void validate_manifest(const DatasetManifest& manifest) {
    if (manifest.records.empty()) throw std::runtime_error("manifest: no records");
    std::set<std::string> paths;
    std::map<std::string, int> video_label;
    for (const auto& r : manifest.records) {
        if (!paths.insert(r.image_path).second) {
            throw std::runtime_error("manifest: duplicate image_path '" + r.image_path + "'");
        }
        if (r.labeled()) {
            if (*r.label != 0 && *r.label != 1) {
                throw std::runtime_error("manifest: label " + std::to_string(*r.label) +
                                         " outside {0,1} for '" + r.image_path + "'");
            }
            auto [it, inserted] = video_label.emplace(r.video_id, *r.label);
            if (!inserted && it->second != *r.label) {
                throw std::runtime_error("manifest: video '" + r.video_id +
                                         "' labeled inconsistently (" +
                                         std::to_string(it->second) + " vs " +
                                         std::to_string(*r.label) + ")");
            }
        }
    }
}

}  // namespace

DatasetManifest load_manifest(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("manifest: cannot open " + path);
    const fs::path base_dir = fs::path(path).parent_path();

    DatasetManifest manifest;
    std::string line;
    std::size_t line_no = 0;
    bool saw_header = false;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        if (!saw_header) {
            if (line != "image_path,video_id,label,modality") {
                throw std::runtime_error("manifest:" + std::to_string(line_no) +
                                         ": expected header 'image_path,video_id,label,modality'");
            }
            saw_header = true;
            continue;
        }

        std::vector<std::string> fields;
        std::stringstream ss(line);
        std::string field;
        while (std::getline(ss, field, ',')) fields.push_back(field);
        if (line.back() == ',') fields.push_back("");
        if (fields.size() != 4) {
            throw std::runtime_error("manifest:" + std::to_string(line_no) + ": expected 4 fields, got " +
                                     std::to_string(fields.size()));
        }

        SampleRecord rec;
        const fs::path img(fields[0]);
        rec.image_path = img.is_absolute() ? img.string() : (base_dir / img).string();
        rec.video_id = fields[1];
        if (rec.video_id.empty()) {
            throw std::runtime_error("manifest:" + std::to_string(line_no) + ": empty video_id");
        }
        if (!fields[2].empty()) {
            try {
                rec.label = std::stoi(fields[2]);
            } catch (const std::exception&) {
                throw std::runtime_error("manifest:" + std::to_string(line_no) +
                                         ": unparsable label '" + fields[2] + "'");
            }
            if (*rec.label != 0 && *rec.label != 1) {
                throw std::runtime_error("manifest:" + std::to_string(line_no) + ": label '" +
                                         fields[2] + "' outside {0,1}");
            }
        }
        try {
            rec.modality = modality_from_string(fields[3]);
        } catch (const std::exception&) {
            throw std::runtime_error("manifest:" + std::to_string(line_no) +
                                     ": unknown modality '" + fields[3] + "'");
        }
        manifest.records.push_back(std::move(rec));
    }
    if (!saw_header) throw std::runtime_error("manifest: empty file " + path);
    validate_manifest(manifest);
    return manifest;
}

void save_manifest(const DatasetManifest& manifest, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("manifest: cannot open " + path + " for writing");
    out << "image_path,video_id,label,modality\n";
    for (const auto& r : manifest.records) {
        out << r.image_path << ',' << r.video_id << ','
            << (r.labeled() ? std::to_string(*r.label) : std::string()) << ','
            << to_string(r.modality) << '\n';
    }
}

// ---------------------------------------------------------------------------
// Splits
// ---------------------------------------------------------------------------

namespace {

struct VideoInfo {
    std::string id;
    int label = 0;
    std::size_t frames = 0;
};

// Labeled videos grouped by class, in first-appearance order.
std::array<std::vector<VideoInfo>, 2> labeled_videos_by_class(const DatasetManifest& manifest) {
    std::map<std::string, VideoInfo> by_id;
    std::vector<std::string> order;
    for (const auto& r : manifest.records) {
        if (!r.labeled()) continue;
        auto it = by_id.find(r.video_id);
        if (it == by_id.end()) {
            by_id[r.video_id] = {r.video_id, *r.label, 1};
            order.push_back(r.video_id);
        } else {
            ++it->second.frames;
        }
    }
    std::array<std::vector<VideoInfo>, 2> classes;
    for (const auto& id : order) {
        const auto& info = by_id[id];
        classes[static_cast<std::size_t>(info.label)].push_back(info);
    }
    return classes;
}

void finalize_plan(const DatasetManifest& manifest, SplitPlan& plan) {
    plan.validation_record_ids.clear();
    plan.unsupervised_record_ids.clear();
    std::vector<std::size_t> supervised_pool;
    for (std::size_t i = 0; i < manifest.records.size(); ++i) {
        const auto& r = manifest.records[i];
        const bool in_val = plan.validation_video_ids.count(r.video_id) > 0;
        if (in_val) {
            if (r.labeled()) plan.validation_record_ids.push_back(i);
        } else {
            plan.unsupervised_record_ids.push_back(i);
            if (r.labeled()) supervised_pool.push_back(i);
        }
    }
    plan.supervised_record_ids = std::move(supervised_pool);
    plan.k_percent = 100.0;
}

}  // namespace

std::vector<SplitPlan> make_folds(const DatasetManifest& manifest, int n_folds,
                                  double val_fraction, std::uint64_t seed, FoldMode mode) {
    if (n_folds < 1) throw std::invalid_argument("make_folds: n_folds must be >= 1");
    if (!(val_fraction > 0.0 && val_fraction < 1.0)) {
        throw std::invalid_argument("make_folds: val_fraction must lie in (0,1)");
    }
    auto classes = labeled_videos_by_class(manifest);
    for (int c = 0; c < 2; ++c) {
        if (static_cast<int>(classes[c].size()) < n_folds) {
            throw std::runtime_error("make_folds: class " + std::to_string(c) + " has only " +
                                     std::to_string(classes[c].size()) + " labeled videos for " +
                                     std::to_string(n_folds) + " folds");
        }
    }

    std::vector<SplitPlan> plans(static_cast<std::size_t>(n_folds));

    if (mode == FoldMode::Rotation) {
        // Deal each class's shuffled videos round-robin so every video lands
        // in exactly one fold's validation set.
        Rng rng(derive_seed(seed, 0x9a0f));
        for (int c = 0; c < 2; ++c) {
            auto vids = classes[c];
            rng.shuffle(vids);
            for (std::size_t i = 0; i < vids.size(); ++i) {
                plans[i % static_cast<std::size_t>(n_folds)].validation_video_ids.insert(
                    vids[i].id);
            }
        }
    } else {
        for (int f = 0; f < n_folds; ++f) {
            Rng rng(derive_seed(seed, static_cast<std::uint64_t>(f)));
            auto& plan = plans[static_cast<std::size_t>(f)];
            for (int c = 0; c < 2; ++c) {
                auto vids = classes[c];
                rng.shuffle(vids);
                std::size_t class_frames = 0;
                for (const auto& v : vids) class_frames += v.frames;
                const double target = val_fraction * static_cast<double>(class_frames);
                std::size_t acc = 0;
                for (const auto& v : vids) {
                    if (acc >= target && acc > 0) break;
                    plan.validation_video_ids.insert(v.id);
                    acc += v.frames;
                }
            }
        }
    }

    for (int f = 0; f < n_folds; ++f) {
        auto& plan = plans[static_cast<std::size_t>(f)];
        plan.fold_index = f;
        finalize_plan(manifest, plan);
        // Both classes must be present in validation.
        bool has[2] = {false, false};
        for (std::size_t id : plan.validation_record_ids) {
            has[static_cast<std::size_t>(*manifest.records[id].label)] = true;
        }
        if (!has[0] || !has[1]) {
            throw std::runtime_error("make_folds: fold " + std::to_string(f) +
                                     " validation set is missing a class");
        }
    }
    return plans;
}

namespace {

std::size_t round_half_even(double x) {
    const double f = std::floor(x);
    const double frac = x - f;
    if (frac > 0.5) return static_cast<std::size_t>(f) + 1;
    if (frac < 0.5) return static_cast<std::size_t>(f);
    const auto fl = static_cast<std::size_t>(f);
    return fl % 2 == 0 ? fl : fl + 1;
}

constexpr double kAllowedK[] = {100.0, 50.0, 25.0, 12.5, 6.25};

}  // namespace

std::vector<std::size_t> select_labeled_fraction(const DatasetManifest& manifest,
                                                 const std::vector<std::size_t>& labeled_pool,
                                                 double k_percent, std::uint64_t seed) {
    const bool known = std::any_of(std::begin(kAllowedK), std::end(kAllowedK),
                                   [&](double k) { return std::abs(k - k_percent) < 1e-9; });
    if (!known) {
        throw std::invalid_argument("select_labeled_fraction: k=" + std::to_string(k_percent) +
                                    " not in {100, 50, 25, 12.5, 6.25}");
    }
    for (std::size_t id : labeled_pool) {
        if (id >= manifest.records.size() || !manifest.records[id].labeled()) {
            throw std::invalid_argument("select_labeled_fraction: pool contains unlabeled record");
        }
    }
    if (std::abs(k_percent - 100.0) < 1e-9) return labeled_pool;

    std::array<std::vector<std::size_t>, 2> by_class;
    for (std::size_t id : labeled_pool) {
        by_class[static_cast<std::size_t>(*manifest.records[id].label)].push_back(id);
    }

    std::vector<std::size_t> selected;
    for (int c = 0; c < 2; ++c) {
        auto& ids = by_class[static_cast<std::size_t>(c)];
        if (ids.empty()) continue;
        // One shuffle per (seed, class); every k takes a prefix, which is what
        // makes the selections nested across k.
        Rng rng(derive_seed(seed, 0xD5 + static_cast<std::uint64_t>(c)));
        rng.shuffle(ids);
        const std::size_t want = round_half_even(k_percent / 100.0 * static_cast<double>(ids.size()));
        if (want == 0) {
            throw std::runtime_error("select_labeled_fraction: class " + std::to_string(c) +
                                     " empties at k=" + std::to_string(k_percent));
        }
        selected.insert(selected.end(), ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(want));
    }
    std::sort(selected.begin(), selected.end());
    return selected;
}

SplitPlan apply_labeled_fraction(const DatasetManifest& manifest, const SplitPlan& plan,
                                 double k_percent, std::uint64_t seed) {
    SplitPlan out = plan;
    out.k_percent = k_percent;
    out.supervised_record_ids =
        select_labeled_fraction(manifest, plan.supervised_record_ids, k_percent, seed);
    return out;
}

std::vector<double> class_weights(const DatasetManifest& manifest,
                                  const std::vector<std::size_t>& supervised_ids) {
    std::size_t counts[2] = {0, 0};
    for (std::size_t id : supervised_ids) {
        const auto& r = manifest.records[id];
        if (!r.labeled()) throw std::invalid_argument("class_weights: unlabeled record in D_K");
        ++counts[static_cast<std::size_t>(*r.label)];
    }
    if (counts[0] == 0 || counts[1] == 0) {
        throw std::runtime_error("class_weights: a class is absent from D_K (counts " +
                                 std::to_string(counts[0]) + "/" + std::to_string(counts[1]) + ")");
    }
    const double total = static_cast<double>(counts[0] + counts[1]);
    return {total / static_cast<double>(counts[0]), total / static_cast<double>(counts[1])};
}

// ---------------------------------------------------------------------------
// Synthetic generator
// ---------------------------------------------------------------------------

namespace {

struct VideoParams {
    int label = 0;
    bool labeled = true;
    Modality modality = Modality::WLI;
    double bg[3];
    double obj[3];
    double cx, cy, radius;
    double stripe_angle;      // class 1: coherent orientation
    double stripe_freq;       // cycles across the image
    double cell_angle[9];     // class 0: per-cell patch orientations
    int lobes;
    double lobe_phase;
};

// Fixed channel remap standing in for the WLI -> NBI shift.
void apply_nbi_remap(double rgb[3]) {
    const double r = rgb[0], g = rgb[1], b = rgb[2];
    rgb[0] = 0.15 * r + 0.25 * g;
    rgb[1] = 0.20 * r + 0.70 * g + 0.10 * b;
    rgb[2] = 0.15 * r + 0.85 * b;
}

Image render_frame(const VideoParams& vp, const SynthSpec& spec, Rng& rng) {
    const int s = spec.image_side;
    Image img(s, s, 3);

    // Per-frame jitter keeps frames of one video correlated but not equal.
    const double cx = vp.cx + rng.uniform(-0.04, 0.04);
    const double cy = vp.cy + rng.uniform(-0.04, 0.04);
    const double radius = vp.radius * rng.uniform(0.94, 1.06);
    const double angle = vp.stripe_angle + rng.uniform(-0.12, 0.12);
    const double phase = rng.uniform(0.0, 6.283185307179586);
    const double brightness = rng.uniform(-0.04, 0.04);
    const double grad_x = rng.uniform(-0.06, 0.06);
    const double grad_y = rng.uniform(-0.06, 0.06);
    double cell_angle[9];
    for (int i = 0; i < 9; ++i) cell_angle[i] = vp.cell_angle[i] + rng.uniform(-0.12, 0.12);

    const double edge_width = 0.03;
    for (int y = 0; y < s; ++y) {
        for (int x = 0; x < s; ++x) {
            const double u = (x + 0.5) / s;
            const double v = (y + 0.5) / s;
            const double dx = u - cx, dy = v - cy;
            const double r = std::sqrt(dx * dx + dy * dy);
            const double theta = std::atan2(dy, dx);

            double boundary = radius;
            if (vp.label == 1) {
                boundary *= 1.0 + 0.16 * std::sin(vp.lobes * theta + vp.lobe_phase);
            }
            const double alpha = std::clamp((boundary - r) / edge_width, 0.0, 1.0);

            double stripe;
            if (vp.label == 1) {
                stripe = std::sin(6.283185307179586 * vp.stripe_freq *
                                      (u * std::cos(angle) + v * std::sin(angle)) +
                                  phase);
            } else {
                const int cell = std::min(2, static_cast<int>(v * 3)) * 3 +
                                 std::min(2, static_cast<int>(u * 3));
                const double ca = cell_angle[cell];
                stripe = std::sin(6.283185307179586 * vp.stripe_freq *
                                      (u * std::cos(ca) + v * std::sin(ca)) +
                                  phase);
            }

            double rgb[3];
            for (int c = 0; c < 3; ++c) {
                const double bg = vp.bg[c] + grad_x * (u - 0.5) + grad_y * (v - 0.5);
                const double obj = vp.obj[c] + spec.stripe_contrast * stripe;
                double val = bg + alpha * (obj - bg) + brightness;
                val += rng.uniform(-spec.noise_amplitude, spec.noise_amplitude);
                rgb[c] = val;
            }
            if (vp.modality == Modality::NBI) apply_nbi_remap(rgb);
            for (int c = 0; c < 3; ++c) img.at(y, x, c) = std::clamp(rgb[c], 0.0, 1.0);
        }
    }
    return img;
}

std::vector<bool> pick_flags(int n, double fraction, Rng& rng) {
    const auto want = static_cast<std::size_t>(std::llround(fraction * n));
    std::vector<bool> flags(static_cast<std::size_t>(n), false);
    std::vector<std::size_t> idx(static_cast<std::size_t>(n));
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    rng.shuffle(idx);
    for (std::size_t i = 0; i < want && i < idx.size(); ++i) flags[idx[i]] = true;
    return flags;
}

}  // namespace

DatasetManifest generate_synthetic_dataset(const SynthSpec& spec, const std::string& out_dir) {
    if (spec.videos < 1 || spec.frames_per_video < 1 || spec.image_side < 12) {
        throw std::invalid_argument("generate_synthetic_dataset: sizes too small");
    }
    const fs::path root(out_dir);
    std::error_code ec;
    fs::create_directories(root / "images", ec);
    if (ec) throw std::runtime_error("generate_synthetic_dataset: cannot create " + out_dir);

    Rng assign_rng(derive_seed(spec.seed, 0xA551));
    const auto is_class1 = pick_flags(spec.videos, spec.class1_prob, assign_rng);
    const auto is_labeled = pick_flags(spec.videos, spec.label_fraction, assign_rng);
    const auto is_nbi = pick_flags(spec.videos, spec.nbi_fraction, assign_rng);

    DatasetManifest manifest;
    for (int vid = 0; vid < spec.videos; ++vid) {
        Rng vrng(derive_seed(spec.seed, 1000 + static_cast<std::uint64_t>(vid)));
        VideoParams vp;
        vp.label = is_class1[static_cast<std::size_t>(vid)] ? 1 : 0;
        vp.labeled = is_labeled[static_cast<std::size_t>(vid)];
        vp.modality = is_nbi[static_cast<std::size_t>(vid)] ? Modality::NBI : Modality::WLI;
        for (int c = 0; c < 3; ++c) vp.bg[c] = vrng.uniform(0.35, 0.6);
        for (int c = 0; c < 3; ++c) vp.obj[c] = vrng.uniform(0.5, 0.75);
        vp.cx = vrng.uniform(0.42, 0.58);
        vp.cy = vrng.uniform(0.42, 0.58);
        vp.radius = vrng.uniform(0.28, 0.36);
        vp.stripe_angle = vrng.uniform(0.0, 3.14159265358979);
        vp.stripe_freq = vrng.uniform(5.0, 8.0);
        for (auto& a : vp.cell_angle) a = vrng.uniform(0.0, 3.14159265358979);
        vp.lobes = static_cast<int>(vrng.uniform_int(4, 7));
        vp.lobe_phase = vrng.uniform(0.0, 6.283185307179586);

        char video_name[16];
        std::snprintf(video_name, sizeof(video_name), "vid%04d", vid);

        for (int f = 0; f < spec.frames_per_video; ++f) {
            Rng frng(derive_seed(spec.seed, static_cast<std::uint64_t>(vid) * 100000 + 7 +
                                                static_cast<std::uint64_t>(f)));
            const Image img = render_frame(vp, spec, frng);

            char file_name[32];
            std::snprintf(file_name, sizeof(file_name), "%s_f%04d.png", video_name, f);
            const fs::path img_path = root / "images" / file_name;
            write_png(img, img_path.string());

            SampleRecord rec;
            rec.image_path = std::string("images/") + file_name;
            rec.video_id = video_name;
            if (vp.labeled) rec.label = vp.label;
            rec.modality = vp.modality;
            manifest.records.push_back(std::move(rec));
        }
    }

    save_manifest(manifest, (root / "manifest.csv").string());
    return load_manifest((root / "manifest.csv").string());
}

}  // namespace jigsawssl
