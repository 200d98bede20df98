#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace mito {

/// Row-major interleaved raster. Coordinates follow the project-wide
/// convention: x = column, y = row, origin at the top-left pixel.
template <typename T>
class Image {
public:
    Image() = default;

    Image(int width, int height, int channels, T fill = T{})
        : width_(width), height_(height), channels_(channels),
          data_(static_cast<std::size_t>(width) * height * channels, fill) {
        if (width <= 0 || height <= 0 || channels <= 0) {
            throw std::invalid_argument("Image: dimensions must be positive");
        }
    }

    int width() const { return width_; }
    int height() const { return height_; }
    int channels() const { return channels_; }
    bool empty() const { return data_.empty(); }
    std::size_t size() const { return data_.size(); }

    T& at(int x, int y, int c = 0) { return data_[index(x, y, c)]; }
    const T& at(int x, int y, int c = 0) const { return data_[index(x, y, c)]; }

    std::vector<T>& data() { return data_; }
    const std::vector<T>& data() const { return data_; }

    bool same_shape(const Image& other) const {
        return width_ == other.width_ && height_ == other.height_ &&
               channels_ == other.channels_;
    }

    bool operator==(const Image& other) const {
        return same_shape(other) && data_ == other.data_;
    }

private:
    std::size_t index(int x, int y, int c) const {
        return (static_cast<std::size_t>(y) * width_ + x) * channels_ + c;
    }

    int width_ = 0;
    int height_ = 0;
    int channels_ = 0;
    std::vector<T> data_;
};

using ImageU8 = Image<std::uint8_t>;
using ImageF32 = Image<float>;

/// Symmetric reflection of an index into [0, n): ..., 1, 0, 0, 1, ..., n-1, n-1, n-2, ...
/// The edge pixel is included, so the mapping is a triangular wave of period 2n.
inline int reflect_index(int i, int n) {
    if (n <= 0) throw std::invalid_argument("reflect_index: n must be positive");
    if (n == 1) return 0;
    const int period = 2 * n;
    int m = i % period;
    if (m < 0) m += period;
    return m < n ? m : period - 1 - m;
}

template <typename T>
Image<float> to_float(const Image<T>& img) {
    Image<float> out(img.width(), img.height(), img.channels());
    for (std::size_t i = 0; i < img.data().size(); ++i) {
        out.data()[i] = static_cast<float>(img.data()[i]);
    }
    return out;
}

inline ImageU8 to_u8(const ImageF32& img) {
    ImageU8 out(img.width(), img.height(), img.channels());
    for (std::size_t i = 0; i < img.data().size(); ++i) {
        float v = img.data()[i];
        if (v < 0.f) v = 0.f;
        if (v > 255.f) v = 255.f;
        out.data()[i] = static_cast<std::uint8_t>(v + 0.5f);
    }
    return out;
}

}  // namespace mito
