#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace jigsawssl {

// Row-major HWC raster, values nominally in [0,1] until normalization.
struct Image {
    int height = 0;
    int width = 0;
    int channels = 0;
    std::vector<double> data;

    Image() = default;
    Image(int h, int w, int c) : height(h), width(w), channels(c),
                                 data(static_cast<std::size_t>(h) * w * c, 0.0) {}

    double& at(int y, int x, int c) {
        return data[(static_cast<std::size_t>(y) * width + x) * channels + c];
    }
    double at(int y, int x, int c) const {
        return data[(static_cast<std::size_t>(y) * width + x) * channels + c];
    }
    bool same_shape(const Image& o) const {
        return height == o.height && width == o.width && channels == o.channels;
    }
};

// 8-bit RGB(A accepted, alpha dropped; gray expanded) PNG decode into [0,1].
Image read_png(const std::string& path);

// Clamps to [0,1] and writes 8-bit PNG, RGB for 3 channels, gray for 1.
void write_png(const Image& img, const std::string& path);

Image flip_horizontal(const Image& img);
Image flip_vertical(const Image& img);
// quarter_turns counterclockwise quarter turns in {0,1,2,3}.
Image rotate90(const Image& img, int quarter_turns);
Image crop(const Image& img, int y0, int x0, int h, int w);

enum class ResampleFilter { Bilinear, Nearest };

// Identity-size requests return a copy untouched, keeping lossless paths
// bit-exact.
Image resize(const Image& img, int out_h, int out_w,
             ResampleFilter filter = ResampleFilter::Bilinear);

// Per-channel (x - mean[c]) / stddev[c].
Image normalize(const Image& img, const std::vector<double>& mean,
                const std::vector<double>& stddev);
Image denormalize(const Image& img, const std::vector<double>& mean,
                  const std::vector<double>& stddev);

}  // namespace jigsawssl
