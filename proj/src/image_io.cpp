// Copyright 2026 The OmniUnet Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "omniunet/image_io.hpp"

#include <png.h>

#include <csetjmp>
#include <cstdio>
#include <memory>
#include <string>

#include "omniunet/error.hpp"

namespace omniunet {

namespace {

struct FileCloser {
    void operator()(std::FILE* f) const { std::fclose(f); }
};
using File = std::unique_ptr<std::FILE, FileCloser>;

File open_file(const std::filesystem::path& path, const char* mode) {
    File f(std::fopen(path.c_str(), mode));
    if (!f) {
        throw DataError(std::string(mode[0] == 'r' ? "cannot open " : "cannot create ") + path.string());
    }
    return f;
}

enum class Target { rgb8, gray16 };

struct DecodeResult {
    int width = 0;
    int height = 0;
    const char* error = nullptr;
};

// libpng reports errors by longjmp, so the cores below keep only trivially
// destructible locals between setjmp and the end of decoding.
void on_png_error(png_structp png, png_const_charp) { std::longjmp(png_jmpbuf(png), 1); }
void on_png_warning(png_structp, png_const_charp) {}

// `r` is written through a pointer so its state survives the longjmp.
void decode_core(std::FILE* file, Target target, std::vector<std::uint8_t>* out, DecodeResult* r) {
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, on_png_error, on_png_warning);
    if (png == nullptr) {
        r->error = "out of memory";
        return;
    }
    png_infop info = png_create_info_struct(png);
    if (info == nullptr || setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        if (r->error == nullptr) r->error = "corrupt or truncated PNG";
        return;
    }
    png_init_io(png, file);
    png_read_info(png, info);
    const png_uint_32 w = png_get_image_width(png, info);
    const png_uint_32 h = png_get_image_height(png, info);
    const int depth = png_get_bit_depth(png, info);
    const int color = png_get_color_type(png, info);
    std::size_t row_bytes = 0;
    if (target == Target::rgb8) {
        if (depth == 16) {
            r->error = "expected an 8-bit image, found 16-bit";
            png_longjmp(png, 1);
        }
        if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
        if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
        if (color == PNG_COLOR_TYPE_GRAY || color == PNG_COLOR_TYPE_GRAY_ALPHA) png_set_gray_to_rgb(png);
        if (color & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
        row_bytes = static_cast<std::size_t>(w) * 3;
    } else {
        if (depth != 16 || color != PNG_COLOR_TYPE_GRAY) {
            r->error = "expected a 16-bit single-channel image";
            png_longjmp(png, 1);
        }
        row_bytes = static_cast<std::size_t>(w) * 2;
    }
    png_read_update_info(png, info);
    if (png_get_rowbytes(png, info) != row_bytes) {
        r->error = "unsupported PNG layout";
        png_longjmp(png, 1);
    }
    out->resize(row_bytes * h);
    for (png_uint_32 y = 0; y < h; ++y) png_read_row(png, out->data() + y * row_bytes, nullptr);
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);
    r->width = static_cast<int>(w);
    r->height = static_cast<int>(h);
}

struct EncodeSpec {
    int width;
    int height;
    int bit_depth;
    int color_type;
    std::size_t row_bytes;
    const std::uint8_t* rows;  // big-endian samples for 16-bit
    const png_color* palette;
    int palette_size;
};

const char* encode_core(std::FILE* file, const EncodeSpec& s) {
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, on_png_error, on_png_warning);
    if (png == nullptr) return "out of memory";
    png_infop info = png_create_info_struct(png);
    if (info == nullptr || setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        return "PNG encoding failed";
    }
    png_init_io(png, file);
    png_set_IHDR(png, info, static_cast<png_uint_32>(s.width), static_cast<png_uint_32>(s.height), s.bit_depth,
                 s.color_type, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    if (s.palette != nullptr) png_set_PLTE(png, info, s.palette, s.palette_size);
    png_write_info(png, info);
    for (int y = 0; y < s.height; ++y) {
        png_write_row(png, s.rows + static_cast<std::size_t>(y) * s.row_bytes);
    }
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
    return nullptr;
}

void encode(const std::filesystem::path& path, const EncodeSpec& spec) {
    if (spec.width <= 0 || spec.height <= 0) throw DataError("cannot write empty image " + path.string());
    File f = open_file(path, "wb");
    if (const char* err = encode_core(f.get(), spec)) throw DataError(path.string() + ": " + err);
    if (std::fflush(f.get()) != 0) throw DataError("write failed: " + path.string());
}

void check_extent(const std::filesystem::path& path, int w, int h, std::size_t have, std::size_t per_pixel) {
    if (w <= 0 || h <= 0 || have != static_cast<std::size_t>(w) * static_cast<std::size_t>(h) * per_pixel) {
        throw DataError("image buffer does not match " + std::to_string(w) + "x" + std::to_string(h) + " for " +
                        path.string());
    }
}

}  // namespace

RgbImage read_rgb_png(const std::filesystem::path& path) {
    File f = open_file(path, "rb");
    RgbImage img;
    DecodeResult r;
    decode_core(f.get(), Target::rgb8, &img.pixels, &r);
    if (r.error) throw DataError(path.string() + ": " + r.error);
    img.width = r.width;
    img.height = r.height;
    return img;
}

Gray16Image read_gray16_png(const std::filesystem::path& path) {
    File f = open_file(path, "rb");
    std::vector<std::uint8_t> raw;
    DecodeResult r;
    decode_core(f.get(), Target::gray16, &raw, &r);
    if (r.error) throw DataError(path.string() + ": " + r.error);
    Gray16Image img{r.width, r.height, std::vector<std::uint16_t>(raw.size() / 2)};
    for (std::size_t i = 0; i < img.pixels.size(); ++i) {
        img.pixels[i] = static_cast<std::uint16_t>((raw[2 * i] << 8) | raw[2 * i + 1]);
    }
    return img;
}

void write_rgb_png(const std::filesystem::path& path, const RgbImage& image) {
    check_extent(path, image.width, image.height, image.pixels.size(), 3);
    encode(path, {image.width, image.height, 8, PNG_COLOR_TYPE_RGB, static_cast<std::size_t>(image.width) * 3,
                  image.pixels.data(), nullptr, 0});
}

void write_gray16_png(const std::filesystem::path& path, const Gray16Image& image) {
    check_extent(path, image.width, image.height, image.pixels.size(), 1);
    std::vector<std::uint8_t> raw(image.pixels.size() * 2);
    for (std::size_t i = 0; i < image.pixels.size(); ++i) {
        raw[2 * i] = static_cast<std::uint8_t>(image.pixels[i] >> 8);
        raw[2 * i + 1] = static_cast<std::uint8_t>(image.pixels[i] & 0xff);
    }
    encode(path, {image.width, image.height, 16, PNG_COLOR_TYPE_GRAY, static_cast<std::size_t>(image.width) * 2,
                  raw.data(), nullptr, 0});
}

void write_indexed_png(const std::filesystem::path& path, int width, int height,
                       const std::vector<std::uint8_t>& indices,
                       const std::vector<std::array<std::uint8_t, 3>>& palette) {
    check_extent(path, width, height, indices.size(), 1);
    if (palette.empty() || palette.size() > 256) throw DataError("palette must hold 1..256 colors");
    for (auto v : indices) {
        if (v >= palette.size()) throw DataError("index " + std::to_string(v) + " outside the palette");
    }
    std::vector<png_color> plte;
    for (const auto& c : palette) plte.push_back(png_color{c[0], c[1], c[2]});
    encode(path, {width, height, 8, PNG_COLOR_TYPE_PALETTE, static_cast<std::size_t>(width), indices.data(),
                  plte.data(), static_cast<int>(plte.size())});
}

}  // namespace omniunet
