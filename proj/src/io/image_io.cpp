// Copyright Contributors to the MonoSplat-cpp Project
// SPDX-License-Identifier: Apache-2.0
//
#include "monosplat/io/image_io.hpp"

#include <png.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <memory>
#include <sstream>

namespace MONOSPLAT_NS {

namespace {

struct FileCloser {
    void operator()(std::FILE *f) const {
        if (f != nullptr) {
            std::fclose(f);
        }
    }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

std::uint8_t to_byte(Real v) {
    const double c = std::clamp(static_cast<double>(v), 0.0, 1.0);
    return static_cast<std::uint8_t>(std::lround(c * 255.0));
}

void require_image(const Tensor &image, const char *what) {
    if (image.rank() != 3 || image.dim(2) != 3 || image.dim(0) == 0 || image.dim(1) == 0) {
        throw ShapeError(std::string(what) + ": expected a non-empty HxWx3 image, got " + to_string(image.shape()));
    }
    image.require_finite(what);
}

} // namespace

Tensor quantize8(const Tensor &image) {
    Tensor out(image.shape());
    for (std::int64_t i = 0; i < image.size(); ++i) {
        out[i] = static_cast<Real>(to_byte(image[i]) / 255.0);
    }
    return out;
}

void write_png(const std::filesystem::path &path, const Tensor &image) {
    require_image(image, "write_png");
    const auto H = static_cast<png_uint_32>(image.dim(0));
    const auto W = static_cast<png_uint_32>(image.dim(1));
    FilePtr fp(std::fopen(path.string().c_str(), "wb"));
    if (!fp) {
        throw FormatError("cannot write " + path.string());
    }
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png != nullptr ? png_create_info_struct(png) : nullptr;
    if (png == nullptr || info == nullptr) {
        png_destroy_write_struct(&png, &info);
        throw FormatError("libpng initialization failed");
    }
    std::vector<std::uint8_t> rows(static_cast<std::size_t>(H) * W * 3);
    for (std::size_t i = 0; i < rows.size(); ++i) {
        rows[i] = to_byte(image[static_cast<std::int64_t>(i)]);
    }
    std::vector<png_bytep> ptrs(H);
    for (png_uint_32 y = 0; y < H; ++y) {
        ptrs[y] = rows.data() + static_cast<std::size_t>(y) * W * 3;
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw FormatError("libpng error while writing " + path.string());
    }
    png_init_io(png, fp.get());
    png_set_IHDR(png, info, W, H, 8, PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
                 PNG_FILTER_TYPE_DEFAULT);
    png_set_sRGB(png, info, PNG_sRGB_INTENT_PERCEPTUAL);
    png_write_info(png, info);
    png_write_image(png, ptrs.data());
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

Tensor read_png(const std::filesystem::path &path) {
    FilePtr fp(std::fopen(path.string().c_str(), "rb"));
    if (!fp) {
        throw FormatError("cannot open " + path.string());
    }
    std::uint8_t sig[8];
    if (std::fread(sig, 1, 8, fp.get()) != 8 || png_sig_cmp(sig, 0, 8) != 0) {
        throw FormatError(path.string() + " is not a PNG file");
    }
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png != nullptr ? png_create_info_struct(png) : nullptr;
    if (png == nullptr || info == nullptr) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw FormatError("libpng initialization failed");
    }
    std::vector<std::uint8_t> rows;
    std::vector<png_bytep> ptrs;
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw FormatError("libpng error while reading " + path.string());
    }
    png_init_io(png, fp.get());
    png_set_sig_bytes(png, 8);
    png_read_info(png, info);
    const auto W = png_get_image_width(png, info);
    const auto H = png_get_image_height(png, info);
    const auto color = png_get_color_type(png, info);
    if (png_get_bit_depth(png, info) == 16) {
        png_set_strip_16(png);
    }
    if (color == PNG_COLOR_TYPE_PALETTE) {
        png_set_palette_to_rgb(png);
    }
    if (color == PNG_COLOR_TYPE_GRAY || color == PNG_COLOR_TYPE_GRAY_ALPHA) {
        png_set_gray_to_rgb(png);
    }
    if ((color & PNG_COLOR_MASK_ALPHA) != 0) {
        png_set_strip_alpha(png);
    }
    png_read_update_info(png, info);
    if (png_get_channels(png, info) != 3) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw FormatError(path.string() + ": unsupported PNG layout");
    }
    rows.resize(static_cast<std::size_t>(H) * W * 3);
    ptrs.resize(H);
    for (png_uint_32 y = 0; y < H; ++y) {
        ptrs[y] = rows.data() + static_cast<std::size_t>(y) * W * 3;
    }
    png_read_image(png, ptrs.data());
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);
    Tensor out({static_cast<std::int64_t>(H), static_cast<std::int64_t>(W), 3});
    for (std::size_t i = 0; i < rows.size(); ++i) {
        out[static_cast<std::int64_t>(i)] = static_cast<Real>(rows[i] / 255.0);
    }
    return out;
}

void write_pfm(const std::filesystem::path &path, const Tensor &map) {
    const bool color = map.rank() == 3;
    if (!(map.rank() == 2 || (color && map.dim(2) == 3))) {
        throw ShapeError("write_pfm: expected HxW or HxWx3, got " + to_string(map.shape()));
    }
    map.require_finite("write_pfm");
    const std::int64_t H = map.dim(0), W = map.dim(1), C = color ? 3 : 1;
    std::ostringstream header;
    header << (color ? "PF" : "Pf") << "\n" << W << " " << H << "\n-1.0\n";
    std::vector<std::uint8_t> bytes;
    const auto h = header.str();
    bytes.insert(bytes.end(), h.begin(), h.end());
    for (std::int64_t y = H - 1; y >= 0; --y) {
        for (std::int64_t i = 0; i < W * C; ++i) {
            const float v = static_cast<float>(map[y * W * C + i]);
            std::uint32_t u;
            std::memcpy(&u, &v, 4);
            for (int b = 0; b < 4; ++b) {
                bytes.push_back(static_cast<std::uint8_t>(u >> (8 * b)));
            }
        }
    }
    write_file_bytes(path, bytes);
}

Tensor read_pfm(const std::filesystem::path &path) {
    const auto bytes = read_file_bytes(path);
    std::size_t off = 0;
    auto token = [&]() {
        while (off < bytes.size() && std::isspace(bytes[off]) != 0) {
            ++off;
        }
        std::string t;
        while (off < bytes.size() && std::isspace(bytes[off]) == 0) {
            t.push_back(static_cast<char>(bytes[off++]));
        }
        return t;
    };
    const std::string magic = token();
    if (magic != "PF" && magic != "Pf") {
        throw FormatError(path.string() + ": bad PFM magic");
    }
    std::int64_t W = 0, H = 0;
    double scale = 0.0;
    try {
        W = std::stoll(token());
        H = std::stoll(token());
        scale = std::stod(token());
    } catch (const std::exception &) {
        throw FormatError(path.string() + ": malformed PFM header");
    }
    ++off; // single whitespace byte after the scale
    const std::int64_t C = magic == "PF" ? 3 : 1;
    if (W <= 0 || H <= 0 || scale == 0.0 || bytes.size() < off ||
        bytes.size() - off != static_cast<std::size_t>(W * H * C * 4)) {
        throw FormatError(path.string() + ": PFM payload does not match header");
    }
    const bool little = scale < 0.0;
    Tensor out(C == 3 ? Shape{H, W, 3} : Shape{H, W});
    for (std::int64_t y = 0; y < H; ++y) {
        const std::int64_t src_row = H - 1 - y;
        for (std::int64_t i = 0; i < W * C; ++i) {
            const std::uint8_t *p = bytes.data() + off + static_cast<std::size_t>((src_row * W * C + i) * 4);
            std::uint32_t u = 0;
            for (int b = 0; b < 4; ++b) {
                u |= static_cast<std::uint32_t>(p[little ? b : 3 - b]) << (8 * b);
            }
            float v;
            std::memcpy(&v, &u, 4);
            out[y * W * C + i] = static_cast<Real>(v);
        }
    }
    return out;
}

} // namespace monosplat
