#pragma once

#include <memory>
#include <string>
#include <vector>

#include "jigsawssl/rng.hpp"
#include "jigsawssl/tensor.hpp"

namespace jigsawssl {

// A learnable tensor plus its gradient accumulator.
struct Parameter {
    std::string name;
    Tensor value;
    Tensor grad;

    explicit Parameter(std::string n, std::vector<int> shape)
        : name(std::move(n)), value(shape), grad(std::move(shape)) {}
};

// Named persistent state that is saved in checkpoints but not optimized
// (batch-norm running statistics).
struct NamedTensor {
    std::string name;
    Tensor* tensor;
};

// Layers cache whatever the backward pass needs during forward; training
// alternates forward/backward strictly, one batch in flight at a time.
class Layer {
public:
    virtual ~Layer() = default;

    virtual Tensor forward(const Tensor& x) = 0;
    virtual Tensor backward(const Tensor& grad_out) = 0;

    virtual void params(std::vector<Parameter*>&) {}
    virtual void buffers(const std::string&, std::vector<NamedTensor>&) {}
    virtual void init(Rng&) {}
    virtual void set_training(bool training) { training_ = training; }

    bool training() const { return training_; }

protected:
    bool training_ = true;
};

class Conv2d : public Layer {
public:
    // weight laid out [out_ch, in_ch*k*k] for the im2col GEMM.
    Conv2d(std::string name, int in_ch, int out_ch, int kernel, int stride, int pad);

    Tensor forward(const Tensor& x) override;
    Tensor backward(const Tensor& grad_out) override;
    void params(std::vector<Parameter*>& out) override;
    void init(Rng& rng) override;

private:
    int in_ch_, out_ch_, kernel_, stride_, pad_;
    Parameter weight_, bias_;
    Tensor cols_;  // cached im2col of the last forward input
    std::vector<int> in_shape_;
    int out_h_ = 0, out_w_ = 0;
};

class Linear : public Layer {
public:
    Linear(std::string name, int in_features, int out_features);

    Tensor forward(const Tensor& x) override;
    Tensor backward(const Tensor& grad_out) override;
    void params(std::vector<Parameter*>& out) override;
    void init(Rng& rng) override;

    int in_features() const { return in_features_; }
    int out_features() const { return out_features_; }

private:
    int in_features_, out_features_;
    Parameter weight_, bias_;  // weight [out, in]
    Tensor input_;
};

class ReLU : public Layer {
public:
    Tensor forward(const Tensor& x) override;
    Tensor backward(const Tensor& grad_out) override;

private:
    std::vector<bool> mask_;
    std::vector<int> in_shape_;
};

class MaxPool2d : public Layer {
public:
    MaxPool2d(int kernel, int stride, int pad);

    Tensor forward(const Tensor& x) override;
    Tensor backward(const Tensor& grad_out) override;

private:
    int kernel_, stride_, pad_;
    std::vector<std::size_t> argmax_;
    std::vector<int> in_shape_;
    int out_h_ = 0, out_w_ = 0;
};

// [N,C,H,W] -> [N,C]
class GlobalAvgPool : public Layer {
public:
    Tensor forward(const Tensor& x) override;
    Tensor backward(const Tensor& grad_out) override;

private:
    std::vector<int> in_shape_;
};

class BatchNorm2d : public Layer {
public:
    explicit BatchNorm2d(std::string name, int channels, double eps = 1e-5,
                         double momentum = 0.1);

    Tensor forward(const Tensor& x) override;
    Tensor backward(const Tensor& grad_out) override;
    void params(std::vector<Parameter*>& out) override;
    void buffers(const std::string& prefix, std::vector<NamedTensor>& out) override;
    void init(Rng& rng) override;

private:
    std::string name_;
    int channels_;
    double eps_, momentum_;
    Parameter gamma_, beta_;
    Tensor running_mean_, running_var_;
    Tensor xhat_;
    std::vector<double> inv_std_;
    std::vector<int> in_shape_;
};

class Sequential : public Layer {
public:
    Sequential() = default;

    void add(std::unique_ptr<Layer> layer) { layers_.push_back(std::move(layer)); }

    Tensor forward(const Tensor& x) override;
    Tensor backward(const Tensor& grad_out) override;
    void params(std::vector<Parameter*>& out) override;
    void buffers(const std::string& prefix, std::vector<NamedTensor>& out) override;
    void init(Rng& rng) override;
    void set_training(bool training) override;

    std::size_t size() const { return layers_.size(); }

private:
    std::vector<std::unique_ptr<Layer>> layers_;
};

// Two 3x3 conv+bn stages with a skip connection; 1x1 projection when the
// shape changes. The residual-18 building block.
class BasicBlock : public Layer {
public:
    BasicBlock(std::string name, int in_ch, int out_ch, int stride);

    Tensor forward(const Tensor& x) override;
    Tensor backward(const Tensor& grad_out) override;
    void params(std::vector<Parameter*>& out) override;
    void buffers(const std::string& prefix, std::vector<NamedTensor>& out) override;
    void init(Rng& rng) override;
    void set_training(bool training) override;

private:
    Conv2d conv1_, conv2_;
    BatchNorm2d bn1_, bn2_;
    ReLU relu1_;
    std::unique_ptr<Conv2d> proj_;
    std::unique_ptr<BatchNorm2d> proj_bn_;
    std::vector<bool> out_mask_;  // final ReLU mask
};

}  // namespace jigsawssl
