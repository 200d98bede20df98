#pragma once

#include <png.h>

#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "mito/core/image.hpp"

namespace mito::dataio {

/// Reads a PNG as 8-bit with 1 (grayscale) or 3 (RGB) channels; palette and
/// 16-bit inputs are normalized, alpha is stripped.
inline ImageU8 read_png(const std::filesystem::path& path) {
    std::FILE* fp = std::fopen(path.string().c_str(), "rb");
    if (!fp) throw std::runtime_error("read_png: cannot open " + path.string());

    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    std::vector<std::uint8_t> raster;
    std::vector<png_bytep> rows;
    png_uint_32 width = 0, height = 0;
    int channels = 0;

    if (!png || !info || setjmp(png_jmpbuf(png))) {
        if (png) png_destroy_read_struct(&png, info ? &info : nullptr, nullptr);
        std::fclose(fp);
        throw std::runtime_error("read_png: failed to decode " + path.string());
    }

    png_init_io(png, fp);
    png_read_info(png, info);

    width = png_get_image_width(png, info);
    height = png_get_image_height(png, info);
    const int color_type = png_get_color_type(png, info);
    const int bit_depth = png_get_bit_depth(png, info);

    if (color_type == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
    if (color_type == PNG_COLOR_TYPE_GRAY && bit_depth < 8) png_set_expand_gray_1_2_4_to_8(png);
    if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
    if (bit_depth == 16) png_set_strip_16(png);
    if (color_type & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
    png_read_update_info(png, info);

    channels = png_get_channels(png, info);
    if (channels != 1 && channels != 3) {
        png_destroy_read_struct(&png, &info, nullptr);
        std::fclose(fp);
        throw std::runtime_error("read_png: unsupported channel count in " + path.string());
    }

    raster.resize(static_cast<std::size_t>(width) * height * channels);
    rows.resize(height);
    for (png_uint_32 y = 0; y < height; ++y) {
        rows[y] = raster.data() + static_cast<std::size_t>(y) * width * channels;
    }
    png_read_image(png, rows.data());
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);
    std::fclose(fp);

    ImageU8 img(static_cast<int>(width), static_cast<int>(height), channels);
    img.data() = std::move(raster);
    return img;
}

/// Writes an 8-bit PNG; 1 channel -> grayscale, 3 channels -> RGB.
inline void write_png(const std::filesystem::path& path, const ImageU8& img) {
    if (img.channels() != 1 && img.channels() != 3) {
        throw std::invalid_argument("write_png: image must have 1 or 3 channels");
    }
    std::FILE* fp = std::fopen(path.string().c_str(), "wb");
    if (!fp) throw std::runtime_error("write_png: cannot open " + path.string());

    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    std::vector<png_bytep> rows;

    if (!png || !info || setjmp(png_jmpbuf(png))) {
        if (png) png_destroy_write_struct(&png, info ? &info : nullptr);
        std::fclose(fp);
        throw std::runtime_error("write_png: failed to encode " + path.string());
    }

    png_init_io(png, fp);
    png_set_IHDR(png, info, img.width(), img.height(), 8,
                 img.channels() == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB,
                 PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);

    rows.resize(img.height());
    auto* base = const_cast<std::uint8_t*>(img.data().data());
    for (int y = 0; y < img.height(); ++y) {
        rows[y] = base + static_cast<std::size_t>(y) * img.width() * img.channels();
    }
    png_write_image(png, rows.data());
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
    std::fclose(fp);
}

namespace detail {

class TiffParser {
public:
    explicit TiffParser(std::vector<std::uint8_t> bytes) : b_(std::move(bytes)) {}

    ImageU8 parse(const std::string& name) {
        if (b_.size() < 8) fail(name, "truncated header");
        if (b_[0] == 'I' && b_[1] == 'I') {
            little_ = true;
        } else if (b_[0] == 'M' && b_[1] == 'M') {
            little_ = false;
        } else {
            fail(name, "not a TIFF file");
        }
        if (u16(2) != 42) fail(name, "bad TIFF magic");
        const std::uint32_t ifd = u32(4);
        if (ifd + 2 > b_.size()) fail(name, "bad IFD offset");

        std::uint32_t width = 0, height = 0, spp = 1, rows_per_strip = 0xffffffffu;
        std::uint32_t compression = 1, planar = 1, bits = 8;
        std::vector<std::uint32_t> strip_offsets, strip_counts;

        const std::uint16_t entries = u16(ifd);
        for (std::uint16_t e = 0; e < entries; ++e) {
            const std::size_t at = ifd + 2 + static_cast<std::size_t>(e) * 12;
            if (at + 12 > b_.size()) fail(name, "truncated IFD");
            const std::uint16_t tag = u16(at);
            switch (tag) {
                case 256: width = scalar(at); break;
                case 257: height = scalar(at); break;
                case 258: {
                    const auto all = array(at);
                    bits = all.empty() ? 0 : all[0];
                    for (const auto b : all) {
                        if (b != bits) fail(name, "mixed bits per sample");
                    }
                    break;
                }
                case 259: compression = scalar(at); break;
                case 273: strip_offsets = array(at); break;
                case 277: spp = scalar(at); break;
                case 278: rows_per_strip = scalar(at); break;
                case 279: strip_counts = array(at); break;
                case 284: planar = scalar(at); break;
                default: break;
            }
        }
        if (compression != 1) fail(name, "only uncompressed baseline TIFF is supported");
        if (planar != 1) fail(name, "only chunky planar configuration is supported");
        if (bits != 8) fail(name, "only 8-bit samples are supported");
        if (spp != 1 && spp != 3 && spp != 4) fail(name, "unsupported samples per pixel");
        if (width == 0 || height == 0 || strip_offsets.empty()) fail(name, "missing required tags");
        if (strip_counts.size() != strip_offsets.size()) fail(name, "strip tag mismatch");

        const int out_c = spp == 1 ? 1 : 3;
        ImageU8 img(static_cast<int>(width), static_cast<int>(height), out_c);
        const std::size_t row_bytes = static_cast<std::size_t>(width) * spp;
        std::uint32_t row = 0;
        for (std::size_t s = 0; s < strip_offsets.size() && row < height; ++s) {
            const std::size_t off = strip_offsets[s];
            const std::size_t cnt = strip_counts[s];
            if (off + cnt > b_.size()) fail(name, "strip outside file");
            const std::uint32_t rows_here =
                std::min<std::uint32_t>(rows_per_strip, height - row);
            if (cnt < row_bytes * rows_here) fail(name, "short strip");
            for (std::uint32_t r = 0; r < rows_here; ++r, ++row) {
                const std::uint8_t* src = b_.data() + off + static_cast<std::size_t>(r) * row_bytes;
                for (std::uint32_t x = 0; x < width; ++x) {
                    for (int c = 0; c < out_c; ++c) {
                        img.at(static_cast<int>(x), static_cast<int>(row), c) = src[x * spp + c];
                    }
                }
            }
        }
        if (row != height) fail(name, "missing strip data");
        return img;
    }

private:
    [[noreturn]] void fail(const std::string& name, const std::string& why) {
        throw std::runtime_error("read_tiff: " + why + " (" + name + ")");
    }

    std::uint16_t u16(std::size_t at) const {
        if (at + 2 > b_.size()) throw std::runtime_error("read_tiff: out of bounds");
        return little_ ? static_cast<std::uint16_t>(b_[at] | (b_[at + 1] << 8))
                       : static_cast<std::uint16_t>((b_[at] << 8) | b_[at + 1]);
    }

    std::uint32_t u32(std::size_t at) const {
        if (at + 4 > b_.size()) throw std::runtime_error("read_tiff: out of bounds");
        if (little_) {
            return b_[at] | (b_[at + 1] << 8) | (b_[at + 2] << 16)
                 | (static_cast<std::uint32_t>(b_[at + 3]) << 24);
        }
        return (static_cast<std::uint32_t>(b_[at]) << 24) | (b_[at + 1] << 16)
             | (b_[at + 2] << 8) | b_[at + 3];
    }

    /// Entry value for single-valued SHORT/LONG entries.
    std::uint32_t scalar(std::size_t entry_at) const {
        const std::uint16_t type = u16(entry_at + 2);
        if (type == 3) return u16(entry_at + 8);
        if (type == 4) return u32(entry_at + 8);
        throw std::runtime_error("read_tiff: unsupported tag type");
    }

    std::vector<std::uint32_t> array(std::size_t entry_at) const {
        const std::uint16_t type = u16(entry_at + 2);
        const std::uint32_t count = u32(entry_at + 4);
        const std::size_t elem = type == 3 ? 2 : 4;
        if (type != 3 && type != 4) throw std::runtime_error("read_tiff: unsupported tag type");
        std::vector<std::uint32_t> out(count);
        const std::size_t total = elem * count;
        const std::size_t base = total <= 4 ? entry_at + 8 : u32(entry_at + 8);
        for (std::uint32_t i = 0; i < count; ++i) {
            out[i] = type == 3 ? u16(base + i * 2) : u32(base + i * 4);
        }
        return out;
    }

    std::vector<std::uint8_t> b_;
    bool little_ = true;
};

}  // namespace detail

/// Baseline uncompressed TIFF reader (8-bit grayscale/RGB/RGBA, chunky,
/// strip-based, either byte order). Covers the dataset-interchange need
/// without a libtiff dependency.
inline ImageU8 read_tiff(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("read_tiff: cannot open " + path.string());
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                    std::istreambuf_iterator<char>());
    return detail::TiffParser(std::move(bytes)).parse(path.string());
}

/// Dispatches on file magic: PNG or baseline TIFF.
inline ImageU8 read_image(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("read_image: cannot open " + path.string());
    unsigned char magic[4] = {0, 0, 0, 0};
    in.read(reinterpret_cast<char*>(magic), 4);
    in.close();
    if (magic[0] == 0x89 && magic[1] == 'P') return read_png(path);
    if ((magic[0] == 'I' && magic[1] == 'I') || (magic[0] == 'M' && magic[1] == 'M')) {
        return read_tiff(path);
    }
    throw std::runtime_error("read_image: unrecognized image format: " + path.string());
}

/// Grayscale -> RGB by channel replication; RGB images pass through.
inline ImageU8 ensure_rgb(const ImageU8& img) {
    if (img.channels() == 3) return img;
    ImageU8 out(img.width(), img.height(), 3);
    for (int y = 0; y < img.height(); ++y) {
        for (int x = 0; x < img.width(); ++x) {
            const std::uint8_t v = img.at(x, y, 0);
            out.at(x, y, 0) = v;
            out.at(x, y, 1) = v;
            out.at(x, y, 2) = v;
        }
    }
    return out;
}

}  // namespace mito::dataio
