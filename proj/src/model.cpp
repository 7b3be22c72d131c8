#include "jigsawssl/model.hpp"

#include <cstring>
#include <fstream>
#include <map>
#include <stdexcept>

namespace jigsawssl {

void DualHeadModel::set_training(bool training) {
    encoder->set_training(training);
    supervised_head->set_training(training);
    if (jigsaw_head) jigsaw_head->set_training(training);
}

std::vector<Parameter*> DualHeadModel::encoder_params() const {
    std::vector<Parameter*> out;
    encoder->params(out);
    return out;
}

std::vector<Parameter*> DualHeadModel::supervised_params() const {
    std::vector<Parameter*> out;
    supervised_head->params(out);
    return out;
}

std::vector<Parameter*> DualHeadModel::jigsaw_params() const {
    std::vector<Parameter*> out;
    if (jigsaw_head) jigsaw_head->params(out);
    return out;
}

std::vector<Parameter*> DualHeadModel::all_params() const {
    std::vector<Parameter*> out;
    encoder->params(out);
    supervised_head->params(out);
    if (jigsaw_head) jigsaw_head->params(out);
    return out;
}

Tensor DualHeadModel::forward_features(const Tensor& images) {
    return encoder->forward(images);
}

Tensor forward_supervised(DualHeadModel& model, const Tensor& images) {
    return model.supervised_head->forward(model.forward_features(images));
}

Tensor forward_jigsaw(DualHeadModel& model, const Tensor& images) {
    if (!model.has_jigsaw_head()) {
        throw std::runtime_error("forward_jigsaw: model has no jigsaw head");
    }
    return model.jigsaw_head->forward(model.forward_features(images));
}

namespace {

std::unique_ptr<Sequential> make_tiny_cnn(int* feature_dim) {
    auto net = std::make_unique<Sequential>();
    net->add(std::make_unique<Conv2d>("encoder.conv1", 3, 16, 3, 2, 1));
    net->add(std::make_unique<ReLU>());
    net->add(std::make_unique<Conv2d>("encoder.conv2", 16, 32, 3, 2, 1));
    net->add(std::make_unique<ReLU>());
    net->add(std::make_unique<Conv2d>("encoder.conv3", 32, 48, 3, 2, 1));
    net->add(std::make_unique<ReLU>());
    net->add(std::make_unique<Conv2d>("encoder.conv4", 48, 64, 3, 2, 1));
    net->add(std::make_unique<ReLU>());
    net->add(std::make_unique<GlobalAvgPool>());
    *feature_dim = 64;
    return net;
}

std::unique_ptr<Sequential> make_residual18(int* feature_dim) {
    auto net = std::make_unique<Sequential>();
    net->add(std::make_unique<Conv2d>("encoder.stem", 3, 64, 7, 2, 3));
    net->add(std::make_unique<BatchNorm2d>("encoder.stem_bn", 64));
    net->add(std::make_unique<ReLU>());
    net->add(std::make_unique<MaxPool2d>(3, 2, 1));

    const int stage_channels[4] = {64, 128, 256, 512};
    int in_ch = 64;
    for (int stage = 0; stage < 4; ++stage) {
        const int out_ch = stage_channels[stage];
        for (int block = 0; block < 2; ++block) {
            const int stride = (stage > 0 && block == 0) ? 2 : 1;
            const std::string name =
                "encoder.layer" + std::to_string(stage + 1) + "." + std::to_string(block);
            net->add(std::make_unique<BasicBlock>(name, in_ch, out_ch, stride));
            in_ch = out_ch;
        }
    }
    net->add(std::make_unique<GlobalAvgPool>());
    *feature_dim = 512;
    return net;
}

void load_params_from_archive(const std::string& path, DualHeadModel& model,
                              bool encoder_only);

}  // namespace

std::vector<std::string> registered_encoders() { return {"tiny-cnn", "residual-18"}; }

DualHeadModel build_model(const std::string& encoder_descriptor, int jigsaw_label_count,
                          InitMode init_mode, std::uint64_t seed,
                          const std::string& pretrained_path) {
    DualHeadModel model;
    model.encoder_name = encoder_descriptor;

    if (encoder_descriptor == "tiny-cnn") {
        model.encoder = make_tiny_cnn(&model.feature_dim);
    } else if (encoder_descriptor == "residual-18") {
        model.encoder = make_residual18(&model.feature_dim);
    } else {
        throw std::invalid_argument("unknown encoder descriptor '" + encoder_descriptor + "'");
    }

    model.num_jigsaw_classes = jigsaw_label_count;
    model.supervised_head =
        std::make_unique<Linear>("supervised_head", model.feature_dim, model.num_classes);
    if (jigsaw_label_count > 0) {
        if (jigsaw_label_count < 2) {
            throw std::invalid_argument("jigsaw head needs at least 2 classes (P+1)");
        }
        model.jigsaw_head =
            std::make_unique<Linear>("jigsaw_head", model.feature_dim, jigsaw_label_count);
    }

    Rng rng(seed);
    model.encoder->init(rng);
    model.supervised_head->init(rng);
    if (model.jigsaw_head) model.jigsaw_head->init(rng);

    if (init_mode == InitMode::PretrainedFile) {
        if (pretrained_path.empty()) {
            throw std::invalid_argument("pretrained init requested without a file path");
        }
        load_params_from_archive(pretrained_path, model, /*encoder_only=*/true);
    }
    return model;
}

Tensor batch_from_images(const std::vector<const Image*>& images) {
    if (images.empty()) throw std::invalid_argument("batch_from_images: empty batch");
    const Image& first = *images.front();
    const int n = static_cast<int>(images.size());
    Tensor batch({n, first.channels, first.height, first.width});
    for (int i = 0; i < n; ++i) {
        const Image& img = *images[static_cast<std::size_t>(i)];
        if (!img.same_shape(first)) {
            throw std::invalid_argument("batch_from_images: mixed image shapes");
        }
        for (int c = 0; c < img.channels; ++c) {
            double* dst = batch.ptr() +
                          (static_cast<std::size_t>(i) * img.channels + c) *
                              static_cast<std::size_t>(img.height) * img.width;
            for (int y = 0; y < img.height; ++y) {
                for (int x = 0; x < img.width; ++x) {
                    dst[static_cast<std::size_t>(y) * img.width + x] = img.at(y, x, c);
                }
            }
        }
    }
    return batch;
}

Tensor batch_from_images(const std::vector<Image>& images) {
    std::vector<const Image*> ptrs;
    ptrs.reserve(images.size());
    for (const auto& img : images) ptrs.push_back(&img);
    return batch_from_images(ptrs);
}

// ---------------------------------------------------------------------------
// Checkpoint archive
// ---------------------------------------------------------------------------

namespace {

constexpr char kMagic[8] = {'J', 'S', 'S', 'L', 'C', 'K', 'P', '1'};
constexpr std::uint32_t kVersion = 1;

template <typename T>
void write_pod(std::ostream& out, const T& v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::istream& in) {
    T v{};
    in.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!in) throw std::runtime_error("checkpoint: truncated file");
    return v;
}

void write_string(std::ostream& out, const std::string& s) {
    write_pod(out, static_cast<std::uint32_t>(s.size()));
    out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string read_string(std::istream& in) {
    const auto len = read_pod<std::uint32_t>(in);
    std::string s(len, '\0');
    in.read(s.data(), len);
    if (!in) throw std::runtime_error("checkpoint: truncated string");
    return s;
}

void write_tensor(std::ostream& out, const std::string& name, const Tensor& t) {
    write_string(out, name);
    write_pod(out, static_cast<std::uint32_t>(t.shape.size()));
    for (int d : t.shape) write_pod(out, static_cast<std::uint64_t>(d));
    out.write(reinterpret_cast<const char*>(t.data.data()),
              static_cast<std::streamsize>(t.data.size() * sizeof(double)));
}

std::pair<std::string, Tensor> read_tensor(std::istream& in) {
    std::string name = read_string(in);
    const auto rank = read_pod<std::uint32_t>(in);
    std::vector<int> shape(rank);
    for (auto& d : shape) d = static_cast<int>(read_pod<std::uint64_t>(in));
    Tensor t(shape);
    in.read(reinterpret_cast<char*>(t.data.data()),
            static_cast<std::streamsize>(t.data.size() * sizeof(double)));
    if (!in) throw std::runtime_error("checkpoint: truncated tensor " + name);
    return {std::move(name), std::move(t)};
}

struct ArchiveEntries {
    std::map<std::string, Tensor> tensors;
    std::string encoder_name;
    bool has_jigsaw = false;
    int jigsaw_classes = 0;
    std::optional<PermutationSet> permset;
};

void collect_model_tensors(const DualHeadModel& model, bool include_jigsaw,
                           std::vector<std::pair<std::string, const Tensor*>>& out) {
    std::vector<Parameter*> params;
    model.encoder->params(params);
    model.supervised_head->params(params);
    if (include_jigsaw && model.jigsaw_head) model.jigsaw_head->params(params);
    for (auto* p : params) out.emplace_back(p->name, &p->value);

    std::vector<NamedTensor> bufs;
    model.encoder->buffers("", bufs);
    for (auto& b : bufs) out.emplace_back(b.name, b.tensor);
}

ArchiveEntries read_archive(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("checkpoint: cannot open " + path);

    char magic[8];
    in.read(magic, 8);
    if (!in || std::memcmp(magic, kMagic, 8) != 0) {
        throw std::runtime_error("checkpoint: bad magic in " + path);
    }
    const auto version = read_pod<std::uint32_t>(in);
    if (version != kVersion) {
        throw std::runtime_error("checkpoint: unsupported version " + std::to_string(version));
    }

    ArchiveEntries entries;
    entries.encoder_name = read_string(in);
    entries.has_jigsaw = read_pod<std::uint8_t>(in) != 0;
    entries.jigsaw_classes = static_cast<int>(read_pod<std::uint32_t>(in));

    const bool has_permset = read_pod<std::uint8_t>(in) != 0;
    if (has_permset) {
        PermutationSet set;
        set.grid_size = static_cast<int>(read_pod<std::uint32_t>(in));
        set.generation_seed = read_pod<std::uint64_t>(in);
        set.min_pairwise_hamming = static_cast<int>(read_pod<std::uint32_t>(in));
        const auto p = read_pod<std::uint32_t>(in);
        const int n = set.tile_count();
        for (std::uint32_t i = 0; i < p; ++i) {
            Permutation perm;
            perm.order.resize(n);
            for (auto& v : perm.order) v = static_cast<int>(read_pod<std::uint32_t>(in));
            set.scrambled.push_back(std::move(perm));
        }
        entries.permset = std::move(set);
    }

    const auto count = read_pod<std::uint32_t>(in);
    for (std::uint32_t i = 0; i < count; ++i) {
        auto [name, tensor] = read_tensor(in);
        entries.tensors.emplace(std::move(name), std::move(tensor));
    }
    return entries;
}

void assign_tensors(const std::map<std::string, Tensor>& src, DualHeadModel& model,
                    bool encoder_only) {
    std::vector<std::pair<std::string, Tensor*>> targets;
    {
        std::vector<Parameter*> params;
        model.encoder->params(params);
        if (!encoder_only) {
            model.supervised_head->params(params);
            if (model.jigsaw_head) model.jigsaw_head->params(params);
        }
        for (auto* p : params) targets.emplace_back(p->name, &p->value);
        std::vector<NamedTensor> bufs;
        model.encoder->buffers("", bufs);
        for (auto& b : bufs) targets.emplace_back(b.name, b.tensor);
    }
    for (auto& [name, dst] : targets) {
        auto it = src.find(name);
        if (it == src.end()) {
            throw std::runtime_error("checkpoint: missing tensor '" + name + "'");
        }
        if (it->second.shape != dst->shape) {
            throw std::runtime_error("checkpoint: shape mismatch for '" + name + "': file has " +
                                     it->second.shape_str() + ", model wants " + dst->shape_str());
        }
        dst->data = it->second.data;
    }
}

void load_params_from_archive(const std::string& path, DualHeadModel& model,
                              bool encoder_only) {
    const ArchiveEntries entries = read_archive(path);
    if (entries.encoder_name != model.encoder_name) {
        throw std::runtime_error("checkpoint: encoder '" + entries.encoder_name +
                                 "' does not match requested '" + model.encoder_name + "'");
    }
    assign_tensors(entries.tensors, model, encoder_only);
}

}  // namespace

void save_checkpoint(const DualHeadModel& model, const PermutationSet* permset,
                     const std::string& path, bool include_jigsaw_head) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("checkpoint: cannot open " + path + " for writing");

    out.write(kMagic, 8);
    write_pod(out, kVersion);
    write_string(out, model.encoder_name);
    const bool with_jigsaw = include_jigsaw_head && model.has_jigsaw_head();
    write_pod(out, static_cast<std::uint8_t>(with_jigsaw ? 1 : 0));
    write_pod(out, static_cast<std::uint32_t>(with_jigsaw ? model.num_jigsaw_classes : 0));

    write_pod(out, static_cast<std::uint8_t>(permset ? 1 : 0));
    if (permset) {
        write_pod(out, static_cast<std::uint32_t>(permset->grid_size));
        write_pod(out, static_cast<std::uint64_t>(permset->generation_seed));
        write_pod(out, static_cast<std::uint32_t>(permset->min_pairwise_hamming));
        write_pod(out, static_cast<std::uint32_t>(permset->scrambled.size()));
        for (const auto& p : permset->scrambled) {
            for (int v : p.order) write_pod(out, static_cast<std::uint32_t>(v));
        }
    }

    std::vector<std::pair<std::string, const Tensor*>> tensors;
    collect_model_tensors(model, with_jigsaw, tensors);
    write_pod(out, static_cast<std::uint32_t>(tensors.size()));
    for (auto& [name, tensor] : tensors) write_tensor(out, name, *tensor);
    if (!out) throw std::runtime_error("checkpoint: write failed for " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
    const ArchiveEntries entries = read_archive(path);

    Checkpoint ckpt;
    ckpt.model = build_model(entries.encoder_name,
                             entries.has_jigsaw ? entries.jigsaw_classes : 0, InitMode::Random,
                             /*seed=*/0);
    assign_tensors(entries.tensors, ckpt.model, /*encoder_only=*/false);
    ckpt.permset = entries.permset;
    ckpt.model.set_training(false);
    return ckpt;
}

}  // namespace jigsawssl
