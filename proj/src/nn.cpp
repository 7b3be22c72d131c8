#include "jigsawssl/nn.hpp"

#include <Eigen/Core>

#include <cmath>
#include <limits>
#include <stdexcept>

namespace jigsawssl {

namespace {

using MatRM = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapRM = Eigen::Map<MatRM>;
using CMapRM = Eigen::Map<const MatRM>;

int conv_out_extent(int in, int kernel, int stride, int pad) {
    return (in + 2 * pad - kernel) / stride + 1;
}

void check_4d(const Tensor& x, const char* who) {
    if (x.rank() != 4) throw std::invalid_argument(std::string(who) + ": expected NCHW input, got " + x.shape_str());
}

// col is [C*k*k, out_h*out_w] row-major.
void im2col(const double* x, int ch, int h, int w, int kernel, int stride, int pad,
            int out_h, int out_w, double* col) {
    const int l = out_h * out_w;
    for (int c = 0; c < ch; ++c) {
        for (int ky = 0; ky < kernel; ++ky) {
            for (int kx = 0; kx < kernel; ++kx) {
                double* dst = col + (static_cast<std::size_t>(c) * kernel * kernel +
                                     static_cast<std::size_t>(ky) * kernel + kx) * l;
                for (int oy = 0; oy < out_h; ++oy) {
                    const int iy = oy * stride - pad + ky;
                    if (iy < 0 || iy >= h) {
                        for (int ox = 0; ox < out_w; ++ox) dst[oy * out_w + ox] = 0.0;
                        continue;
                    }
                    const double* src_row = x + (static_cast<std::size_t>(c) * h + iy) * w;
                    for (int ox = 0; ox < out_w; ++ox) {
                        const int ix = ox * stride - pad + kx;
                        dst[oy * out_w + ox] = (ix >= 0 && ix < w) ? src_row[ix] : 0.0;
                    }
                }
            }
        }
    }
}

void col2im_accumulate(const double* col, int ch, int h, int w, int kernel, int stride,
                       int pad, int out_h, int out_w, double* x) {
    const int l = out_h * out_w;
    for (int c = 0; c < ch; ++c) {
        for (int ky = 0; ky < kernel; ++ky) {
            for (int kx = 0; kx < kernel; ++kx) {
                const double* src = col + (static_cast<std::size_t>(c) * kernel * kernel +
                                           static_cast<std::size_t>(ky) * kernel + kx) * l;
                for (int oy = 0; oy < out_h; ++oy) {
                    const int iy = oy * stride - pad + ky;
                    if (iy < 0 || iy >= h) continue;
                    double* dst_row = x + (static_cast<std::size_t>(c) * h + iy) * w;
                    for (int ox = 0; ox < out_w; ++ox) {
                        const int ix = ox * stride - pad + kx;
                        if (ix >= 0 && ix < w) dst_row[ix] += src[oy * out_w + ox];
                    }
                }
            }
        }
    }
}

}  // namespace

// ---------------------------------------------------------------------------
// Conv2d
// ---------------------------------------------------------------------------

Conv2d::Conv2d(std::string name, int in_ch, int out_ch, int kernel, int stride, int pad)
    : in_ch_(in_ch), out_ch_(out_ch), kernel_(kernel), stride_(stride), pad_(pad),
      weight_(name + ".weight", {out_ch, in_ch * kernel * kernel}),
      bias_(name + ".bias", {out_ch}) {}

void Conv2d::init(Rng& rng) {
    const double stddev = std::sqrt(2.0 / (in_ch_ * kernel_ * kernel_));
    for (auto& v : weight_.value.data) v = rng.normal(0.0, stddev);
    bias_.value.zero();
}

void Conv2d::params(std::vector<Parameter*>& out) {
    out.push_back(&weight_);
    out.push_back(&bias_);
}

Tensor Conv2d::forward(const Tensor& x) {
    check_4d(x, "Conv2d");
    const int n = x.dim(0), h = x.dim(2), w = x.dim(3);
    if (x.dim(1) != in_ch_) {
        throw std::invalid_argument("Conv2d: expected " + std::to_string(in_ch_) +
                                    " input channels, got " + std::to_string(x.dim(1)));
    }
    out_h_ = conv_out_extent(h, kernel_, stride_, pad_);
    out_w_ = conv_out_extent(w, kernel_, stride_, pad_);
    if (out_h_ <= 0 || out_w_ <= 0) throw std::invalid_argument("Conv2d: input too small");
    in_shape_ = x.shape;

    const int ckk = in_ch_ * kernel_ * kernel_;
    const int l = out_h_ * out_w_;
    cols_ = Tensor({n, ckk, l});
    Tensor y({n, out_ch_, out_h_, out_w_});

    CMapRM wmat(weight_.value.ptr(), out_ch_, ckk);
    const Eigen::Map<const Eigen::VectorXd> bvec(bias_.value.ptr(), out_ch_);
    const std::size_t in_stride = static_cast<std::size_t>(in_ch_) * h * w;

    for (int i = 0; i < n; ++i) {
        double* col = cols_.ptr() + static_cast<std::size_t>(i) * ckk * l;
        im2col(x.ptr() + i * in_stride, in_ch_, h, w, kernel_, stride_, pad_, out_h_, out_w_, col);
        MapRM out(y.ptr() + static_cast<std::size_t>(i) * out_ch_ * l, out_ch_, l);
        out.noalias() = wmat * CMapRM(col, ckk, l);
        out.colwise() += bvec;
    }
    return y;
}

Tensor Conv2d::backward(const Tensor& grad_out) {
    const int n = in_shape_[0], h = in_shape_[2], w = in_shape_[3];
    const int ckk = in_ch_ * kernel_ * kernel_;
    const int l = out_h_ * out_w_;

    Tensor dx(in_shape_);
    MapRM dwmat(weight_.grad.ptr(), out_ch_, ckk);
    Eigen::Map<Eigen::VectorXd> dbvec(bias_.grad.ptr(), out_ch_);
    CMapRM wmat(weight_.value.ptr(), out_ch_, ckk);

    Tensor dcol({ckk, l});
    const std::size_t in_stride = static_cast<std::size_t>(in_ch_) * h * w;

    for (int i = 0; i < n; ++i) {
        CMapRM g(grad_out.ptr() + static_cast<std::size_t>(i) * out_ch_ * l, out_ch_, l);
        CMapRM col(cols_.ptr() + static_cast<std::size_t>(i) * ckk * l, ckk, l);
        dwmat.noalias() += g * col.transpose();
        dbvec.noalias() += g.rowwise().sum();
        MapRM dc(dcol.ptr(), ckk, l);
        dc.noalias() = wmat.transpose() * g;
        col2im_accumulate(dcol.ptr(), in_ch_, h, w, kernel_, stride_, pad_, out_h_, out_w_,
                          dx.ptr() + i * in_stride);
    }
    return dx;
}

// ---------------------------------------------------------------------------
// Linear
// ---------------------------------------------------------------------------

Linear::Linear(std::string name, int in_features, int out_features)
    : in_features_(in_features), out_features_(out_features),
      weight_(name + ".weight", {out_features, in_features}),
      bias_(name + ".bias", {out_features}) {}

void Linear::init(Rng& rng) {
    const double stddev = std::sqrt(2.0 / in_features_);
    for (auto& v : weight_.value.data) v = rng.normal(0.0, stddev);
    bias_.value.zero();
}

void Linear::params(std::vector<Parameter*>& out) {
    out.push_back(&weight_);
    out.push_back(&bias_);
}

Tensor Linear::forward(const Tensor& x) {
    if (x.rank() != 2 || x.dim(1) != in_features_) {
        throw std::invalid_argument("Linear: expected [N," + std::to_string(in_features_) +
                                    "], got " + x.shape_str());
    }
    input_ = x;
    const int n = x.dim(0);
    Tensor y({n, out_features_});
    CMapRM xm(x.ptr(), n, in_features_);
    CMapRM wm(weight_.value.ptr(), out_features_, in_features_);
    MapRM ym(y.ptr(), n, out_features_);
    ym.noalias() = xm * wm.transpose();
    ym.rowwise() += Eigen::Map<const Eigen::RowVectorXd>(bias_.value.ptr(), out_features_);
    return y;
}

Tensor Linear::backward(const Tensor& grad_out) {
    const int n = input_.dim(0);
    CMapRM g(grad_out.ptr(), n, out_features_);
    CMapRM xm(input_.ptr(), n, in_features_);
    CMapRM wm(weight_.value.ptr(), out_features_, in_features_);

    MapRM dwm(weight_.grad.ptr(), out_features_, in_features_);
    dwm.noalias() += g.transpose() * xm;
    Eigen::Map<Eigen::VectorXd> dbv(bias_.grad.ptr(), out_features_);
    dbv.noalias() += g.colwise().sum().transpose();

    Tensor dx(input_.shape);
    MapRM dxm(dx.ptr(), n, in_features_);
    dxm.noalias() = g * wm;
    return dx;
}

// ---------------------------------------------------------------------------
// ReLU
// ---------------------------------------------------------------------------

Tensor ReLU::forward(const Tensor& x) {
    in_shape_ = x.shape;
    mask_.assign(x.numel(), false);
    Tensor y(x.shape);
    for (std::size_t i = 0; i < x.numel(); ++i) {
        if (x.data[i] > 0.0) {
            y.data[i] = x.data[i];
            mask_[i] = true;
        }
    }
    return y;
}

Tensor ReLU::backward(const Tensor& grad_out) {
    Tensor dx(in_shape_);
    for (std::size_t i = 0; i < dx.numel(); ++i) {
        dx.data[i] = mask_[i] ? grad_out.data[i] : 0.0;
    }
    return dx;
}

// ---------------------------------------------------------------------------
// MaxPool2d
// ---------------------------------------------------------------------------

MaxPool2d::MaxPool2d(int kernel, int stride, int pad)
    : kernel_(kernel), stride_(stride), pad_(pad) {}

Tensor MaxPool2d::forward(const Tensor& x) {
    check_4d(x, "MaxPool2d");
    const int n = x.dim(0), ch = x.dim(1), h = x.dim(2), w = x.dim(3);
    out_h_ = conv_out_extent(h, kernel_, stride_, pad_);
    out_w_ = conv_out_extent(w, kernel_, stride_, pad_);
    in_shape_ = x.shape;

    Tensor y({n, ch, out_h_, out_w_});
    argmax_.assign(y.numel(), std::numeric_limits<std::size_t>::max());

    std::size_t oi = 0;
    for (int i = 0; i < n; ++i) {
        for (int c = 0; c < ch; ++c) {
            const std::size_t plane = (static_cast<std::size_t>(i) * ch + c) * h * w;
            for (int oy = 0; oy < out_h_; ++oy) {
                for (int ox = 0; ox < out_w_; ++ox, ++oi) {
                    double best = -std::numeric_limits<double>::infinity();
                    std::size_t best_idx = std::numeric_limits<std::size_t>::max();
                    for (int ky = 0; ky < kernel_; ++ky) {
                        const int iy = oy * stride_ - pad_ + ky;
                        if (iy < 0 || iy >= h) continue;
                        for (int kx = 0; kx < kernel_; ++kx) {
                            const int ix = ox * stride_ - pad_ + kx;
                            if (ix < 0 || ix >= w) continue;
                            const std::size_t idx = plane + static_cast<std::size_t>(iy) * w + ix;
                            if (x.data[idx] > best) {
                                best = x.data[idx];
                                best_idx = idx;
                            }
                        }
                    }
                    y.data[oi] = best_idx == std::numeric_limits<std::size_t>::max() ? 0.0 : best;
                    argmax_[oi] = best_idx;
                }
            }
        }
    }
    return y;
}

Tensor MaxPool2d::backward(const Tensor& grad_out) {
    Tensor dx(in_shape_);
    for (std::size_t i = 0; i < grad_out.numel(); ++i) {
        if (argmax_[i] != std::numeric_limits<std::size_t>::max()) {
            dx.data[argmax_[i]] += grad_out.data[i];
        }
    }
    return dx;
}

// ---------------------------------------------------------------------------
// GlobalAvgPool
// ---------------------------------------------------------------------------

Tensor GlobalAvgPool::forward(const Tensor& x) {
    check_4d(x, "GlobalAvgPool");
    in_shape_ = x.shape;
    const int n = x.dim(0), ch = x.dim(1);
    const int hw = x.dim(2) * x.dim(3);
    Tensor y({n, ch});
    for (int i = 0; i < n; ++i) {
        for (int c = 0; c < ch; ++c) {
            const double* p = x.ptr() + (static_cast<std::size_t>(i) * ch + c) * hw;
            double s = 0.0;
            for (int k = 0; k < hw; ++k) s += p[k];
            y.data[static_cast<std::size_t>(i) * ch + c] = s / hw;
        }
    }
    return y;
}

Tensor GlobalAvgPool::backward(const Tensor& grad_out) {
    Tensor dx(in_shape_);
    const int n = in_shape_[0], ch = in_shape_[1];
    const int hw = in_shape_[2] * in_shape_[3];
    for (int i = 0; i < n; ++i) {
        for (int c = 0; c < ch; ++c) {
            const double g = grad_out.data[static_cast<std::size_t>(i) * ch + c] / hw;
            double* p = dx.ptr() + (static_cast<std::size_t>(i) * ch + c) * hw;
            for (int k = 0; k < hw; ++k) p[k] = g;
        }
    }
    return dx;
}

// ---------------------------------------------------------------------------
// BatchNorm2d
// ---------------------------------------------------------------------------

BatchNorm2d::BatchNorm2d(std::string name, int channels, double eps, double momentum)
    : name_(std::move(name)), channels_(channels), eps_(eps), momentum_(momentum),
      gamma_(name_ + ".gamma", {channels}), beta_(name_ + ".beta", {channels}),
      running_mean_({channels}), running_var_({channels}) {
    gamma_.value.fill(1.0);
    running_var_.fill(1.0);
}

void BatchNorm2d::init(Rng&) {
    gamma_.value.fill(1.0);
    beta_.value.zero();
    running_mean_.zero();
    running_var_.fill(1.0);
}

void BatchNorm2d::params(std::vector<Parameter*>& out) {
    out.push_back(&gamma_);
    out.push_back(&beta_);
}

void BatchNorm2d::buffers(const std::string& prefix, std::vector<NamedTensor>& out) {
    out.push_back({prefix + name_ + ".running_mean", &running_mean_});
    out.push_back({prefix + name_ + ".running_var", &running_var_});
}

Tensor BatchNorm2d::forward(const Tensor& x) {
    check_4d(x, "BatchNorm2d");
    in_shape_ = x.shape;
    const int n = x.dim(0), ch = x.dim(1), hw = x.dim(2) * x.dim(3);
    const std::size_t count = static_cast<std::size_t>(n) * hw;

    Tensor y(x.shape);
    xhat_ = Tensor(x.shape);
    inv_std_.assign(static_cast<std::size_t>(ch), 0.0);

    for (int c = 0; c < ch; ++c) {
        double mean, var;
        if (training_) {
            double s = 0.0;
            for (int i = 0; i < n; ++i) {
                const double* p = x.ptr() + (static_cast<std::size_t>(i) * ch + c) * hw;
                for (int k = 0; k < hw; ++k) s += p[k];
            }
            mean = s / static_cast<double>(count);
            double sq = 0.0;
            for (int i = 0; i < n; ++i) {
                const double* p = x.ptr() + (static_cast<std::size_t>(i) * ch + c) * hw;
                for (int k = 0; k < hw; ++k) {
                    const double d = p[k] - mean;
                    sq += d * d;
                }
            }
            var = sq / static_cast<double>(count);
            const double unbiased = count > 1 ? sq / static_cast<double>(count - 1) : var;
            running_mean_.data[c] = (1.0 - momentum_) * running_mean_.data[c] + momentum_ * mean;
            running_var_.data[c] = (1.0 - momentum_) * running_var_.data[c] + momentum_ * unbiased;
        } else {
            mean = running_mean_.data[c];
            var = running_var_.data[c];
        }
        const double inv = 1.0 / std::sqrt(var + eps_);
        inv_std_[c] = inv;
        const double g = gamma_.value.data[c], b = beta_.value.data[c];
        for (int i = 0; i < n; ++i) {
            const std::size_t off = (static_cast<std::size_t>(i) * ch + c) * hw;
            for (int k = 0; k < hw; ++k) {
                const double xh = (x.data[off + k] - mean) * inv;
                xhat_.data[off + k] = xh;
                y.data[off + k] = g * xh + b;
            }
        }
    }
    return y;
}

Tensor BatchNorm2d::backward(const Tensor& grad_out) {
    const int n = in_shape_[0], ch = in_shape_[1], hw = in_shape_[2] * in_shape_[3];
    const double count = static_cast<double>(n) * hw;
    Tensor dx(in_shape_);

    for (int c = 0; c < ch; ++c) {
        double sum_dy = 0.0, sum_dy_xhat = 0.0;
        for (int i = 0; i < n; ++i) {
            const std::size_t off = (static_cast<std::size_t>(i) * ch + c) * hw;
            for (int k = 0; k < hw; ++k) {
                sum_dy += grad_out.data[off + k];
                sum_dy_xhat += grad_out.data[off + k] * xhat_.data[off + k];
            }
        }
        gamma_.grad.data[c] += sum_dy_xhat;
        beta_.grad.data[c] += sum_dy;

        const double g = gamma_.value.data[c];
        const double inv = inv_std_[c];
        if (training_) {
            for (int i = 0; i < n; ++i) {
                const std::size_t off = (static_cast<std::size_t>(i) * ch + c) * hw;
                for (int k = 0; k < hw; ++k) {
                    dx.data[off + k] = g * inv / count *
                        (count * grad_out.data[off + k] - sum_dy -
                         xhat_.data[off + k] * sum_dy_xhat);
                }
            }
        } else {
            for (int i = 0; i < n; ++i) {
                const std::size_t off = (static_cast<std::size_t>(i) * ch + c) * hw;
                for (int k = 0; k < hw; ++k) {
                    dx.data[off + k] = g * inv * grad_out.data[off + k];
                }
            }
        }
    }
    return dx;
}

// ---------------------------------------------------------------------------
// Sequential
// ---------------------------------------------------------------------------

Tensor Sequential::forward(const Tensor& x) {
    Tensor h = x;
    for (auto& layer : layers_) h = layer->forward(h);
    return h;
}

Tensor Sequential::backward(const Tensor& grad_out) {
    Tensor g = grad_out;
    for (auto it = layers_.rbegin(); it != layers_.rend(); ++it) g = (*it)->backward(g);
    return g;
}

void Sequential::params(std::vector<Parameter*>& out) {
    for (auto& layer : layers_) layer->params(out);
}

void Sequential::buffers(const std::string& prefix, std::vector<NamedTensor>& out) {
    for (auto& layer : layers_) layer->buffers(prefix, out);
}

void Sequential::init(Rng& rng) {
    for (auto& layer : layers_) layer->init(rng);
}

void Sequential::set_training(bool training) {
    training_ = training;
    for (auto& layer : layers_) layer->set_training(training);
}

// ---------------------------------------------------------------------------
// BasicBlock
// ---------------------------------------------------------------------------

BasicBlock::BasicBlock(std::string name, int in_ch, int out_ch, int stride)
    : conv1_(name + ".conv1", in_ch, out_ch, 3, stride, 1),
      conv2_(name + ".conv2", out_ch, out_ch, 3, 1, 1),
      bn1_(name + ".bn1", out_ch), bn2_(name + ".bn2", out_ch) {
    if (stride != 1 || in_ch != out_ch) {
        proj_ = std::make_unique<Conv2d>(name + ".proj", in_ch, out_ch, 1, stride, 0);
        proj_bn_ = std::make_unique<BatchNorm2d>(name + ".proj_bn", out_ch);
    }
}

void BasicBlock::params(std::vector<Parameter*>& out) {
    conv1_.params(out);
    bn1_.params(out);
    conv2_.params(out);
    bn2_.params(out);
    if (proj_) {
        proj_->params(out);
        proj_bn_->params(out);
    }
}

void BasicBlock::buffers(const std::string& prefix, std::vector<NamedTensor>& out) {
    bn1_.buffers(prefix, out);
    bn2_.buffers(prefix, out);
    if (proj_bn_) proj_bn_->buffers(prefix, out);
}

void BasicBlock::init(Rng& rng) {
    conv1_.init(rng);
    bn1_.init(rng);
    conv2_.init(rng);
    bn2_.init(rng);
    if (proj_) {
        proj_->init(rng);
        proj_bn_->init(rng);
    }
}

void BasicBlock::set_training(bool training) {
    training_ = training;
    conv1_.set_training(training);
    bn1_.set_training(training);
    relu1_.set_training(training);
    conv2_.set_training(training);
    bn2_.set_training(training);
    if (proj_) {
        proj_->set_training(training);
        proj_bn_->set_training(training);
    }
}

Tensor BasicBlock::forward(const Tensor& x) {
    Tensor h = relu1_.forward(bn1_.forward(conv1_.forward(x)));
    Tensor main = bn2_.forward(conv2_.forward(h));
    Tensor skip = proj_ ? proj_bn_->forward(proj_->forward(x)) : x;

    Tensor y(main.shape);
    out_mask_.assign(y.numel(), false);
    for (std::size_t i = 0; i < y.numel(); ++i) {
        const double v = main.data[i] + skip.data[i];
        if (v > 0.0) {
            y.data[i] = v;
            out_mask_[i] = true;
        }
    }
    return y;
}

Tensor BasicBlock::backward(const Tensor& grad_out) {
    Tensor dz(grad_out.shape);
    for (std::size_t i = 0; i < dz.numel(); ++i) {
        dz.data[i] = out_mask_[i] ? grad_out.data[i] : 0.0;
    }

    Tensor dmain = conv1_.backward(bn1_.backward(relu1_.backward(
        conv2_.backward(bn2_.backward(dz)))));
    if (proj_) {
        Tensor dskip = proj_->backward(proj_bn_->backward(dz));
        for (std::size_t i = 0; i < dmain.numel(); ++i) dmain.data[i] += dskip.data[i];
    } else {
        for (std::size_t i = 0; i < dmain.numel(); ++i) dmain.data[i] += dz.data[i];
    }
    return dmain;
}

}  // namespace jigsawssl
