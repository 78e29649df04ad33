#include "vtmorph/image.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <memory>

namespace vtmorph {

Image::Image(int64_t h, int64_t w, float fill) : height(h), width(w), pixels(static_cast<size_t>(h * w), fill) {
    if (h <= 0 || w <= 0) throw std::invalid_argument("image extents must be positive");
}

uint8_t quantize(float v) {
    const float c = std::clamp(v, 0.0f, 1.0f);
    return static_cast<uint8_t>(std::lround(c * 255.0f));
}

Image quantized(const Image& image) {
    Image out = image;
    for (auto& p : out.pixels) p = static_cast<float>(quantize(p)) / 255.0f;
    return out;
}

namespace {

struct FileCloser {
    void operator()(FILE* f) const {
        if (f) std::fclose(f);
    }
};
using FilePtr = std::unique_ptr<FILE, FileCloser>;

struct ReadHandles {
    png_structp png = nullptr;
    png_infop info = nullptr;
    ~ReadHandles() { png_destroy_read_struct(&png, info ? &info : nullptr, nullptr); }
};

struct WriteHandles {
    png_structp png = nullptr;
    png_infop info = nullptr;
    ~WriteHandles() { png_destroy_write_struct(&png, info ? &info : nullptr); }
};

[[noreturn]] void png_error_fn(png_structp, png_const_charp msg) { throw ImageIoError(msg); }
void png_warning_fn(png_structp, png_const_charp) {}

FilePtr open_png(const std::filesystem::path& path) {
    FilePtr file(std::fopen(path.c_str(), "rb"));
    if (!file) throw ImageIoError("cannot open " + path.string());
    png_byte sig[8];
    if (std::fread(sig, 1, 8, file.get()) != 8 || png_sig_cmp(sig, 0, 8) != 0) {
        throw ImageIoError(path.string() + ": not a PNG file");
    }
    return file;
}

}  // namespace

std::pair<int64_t, int64_t> png_dimensions(const std::filesystem::path& path) {
    auto file = open_png(path);
    ReadHandles h;
    h.png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, png_error_fn, png_warning_fn);
    h.info = png_create_info_struct(h.png);
    if (!h.png || !h.info) throw ImageIoError("libpng initialisation failed");
    png_init_io(h.png, file.get());
    png_set_sig_bytes(h.png, 8);
    try {
        png_read_info(h.png, h.info);
    } catch (const ImageIoError& e) {
        throw ImageIoError(path.string() + ": " + e.what());
    }
    if (png_get_color_type(h.png, h.info) != PNG_COLOR_TYPE_GRAY || png_get_bit_depth(h.png, h.info) != 8) {
        throw ImageIoError(path.string() + ": expected 8-bit grayscale PNG");
    }
    return {static_cast<int64_t>(png_get_image_height(h.png, h.info)),
            static_cast<int64_t>(png_get_image_width(h.png, h.info))};
}

Image read_png(const std::filesystem::path& path) {
    auto file = open_png(path);
    ReadHandles h;
    h.png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, png_error_fn, png_warning_fn);
    h.info = png_create_info_struct(h.png);
    if (!h.png || !h.info) throw ImageIoError("libpng initialisation failed");
    png_init_io(h.png, file.get());
    png_set_sig_bytes(h.png, 8);
    try {
        png_read_info(h.png, h.info);
    } catch (const ImageIoError& e) {
        throw ImageIoError(path.string() + ": " + e.what());
    }
    const auto width = png_get_image_width(h.png, h.info);
    const auto height = png_get_image_height(h.png, h.info);
    const auto color = png_get_color_type(h.png, h.info);
    const auto depth = png_get_bit_depth(h.png, h.info);
    if (color != PNG_COLOR_TYPE_GRAY || depth != 8) {
        throw ImageIoError(path.string() + ": expected 8-bit grayscale PNG (color type " + std::to_string(color) +
                           ", bit depth " + std::to_string(depth) + ")");
    }
    Image img(height, width);
    std::vector<png_byte> row(width);
    try {
        for (png_uint_32 r = 0; r < height; ++r) {
            png_read_row(h.png, row.data(), nullptr);
            for (png_uint_32 c = 0; c < width; ++c) img.at(r, c) = static_cast<float>(row[c]) / 255.0f;
        }
        png_read_end(h.png, nullptr);
    } catch (const ImageIoError& e) {
        throw ImageIoError(path.string() + ": " + e.what());
    }
    return img;
}

void write_png(const std::filesystem::path& path, const Image& image) {
    if (image.height <= 0 || image.width <= 0) throw ImageIoError("cannot write an empty image");
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    FilePtr file(std::fopen(path.c_str(), "wb"));
    if (!file) throw ImageIoError("cannot open " + path.string() + " for writing");
    WriteHandles h;
    h.png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, png_error_fn, png_warning_fn);
    h.info = png_create_info_struct(h.png);
    if (!h.png || !h.info) throw ImageIoError("libpng initialisation failed");
    png_init_io(h.png, file.get());
    png_set_compression_level(h.png, 6);
    png_set_IHDR(h.png, h.info, static_cast<png_uint_32>(image.width), static_cast<png_uint_32>(image.height), 8,
                 PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(h.png, h.info);
    std::vector<png_byte> row(static_cast<size_t>(image.width));
    for (int64_t r = 0; r < image.height; ++r) {
        for (int64_t c = 0; c < image.width; ++c) row[static_cast<size_t>(c)] = quantize(image.at(r, c));
        png_write_row(h.png, row.data());
    }
    png_write_end(h.png, nullptr);
}

namespace {

Tensor batch_tensor(const std::vector<Image>& images, float scale, float shift) {
    if (images.empty()) throw ShapeError("empty image batch");
    const auto H = images.front().height, W = images.front().width;
    std::vector<float> values;
    values.reserve(images.size() * static_cast<size_t>(H * W));
    for (const auto& img : images) {
        if (img.height != H || img.width != W) throw ShapeError("mixed image sizes in batch");
        for (float p : img.pixels) values.push_back(scale * p + shift);
    }
    return Tensor::from_vector({static_cast<int64_t>(images.size()), 1, H, W}, std::move(values));
}

Image batch_image(const Tensor& batch, int64_t index, float scale, float shift) {
    if (batch.dim() != 4 || batch.size(1) != 1) throw ShapeError("expected N x 1 x H x W, got " + shape_str(batch.shape()));
    if (index < 0 || index >= batch.size(0)) throw ShapeError("batch index out of range");
    const auto H = batch.size(2), W = batch.size(3);
    Image img(H, W);
    const auto d = batch.data();
    for (int64_t i = 0; i < H * W; ++i) {
        img.pixels[static_cast<size_t>(i)] = (d[static_cast<size_t>(index * H * W + i)] - shift) / scale;
    }
    return img;
}

}  // namespace

Tensor images_to_tensor(const std::vector<Image>& images) { return batch_tensor(images, 2.0f, -1.0f); }
Image tensor_to_image(const Tensor& batch, int64_t index) { return batch_image(batch, index, 2.0f, -1.0f); }
Tensor unit_tensor(const std::vector<Image>& images) { return batch_tensor(images, 1.0f, 0.0f); }
Image unit_image(const Tensor& batch, int64_t index) { return batch_image(batch, index, 1.0f, 0.0f); }

}  // namespace vtmorph
