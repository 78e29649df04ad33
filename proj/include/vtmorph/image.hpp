#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <vector>

#include "vtmorph/tensor.hpp"

namespace vtmorph {

// Single-channel image with intensities in [0, 1], row-major.
struct Image {
    int64_t height = 0;
    int64_t width = 0;
    std::vector<float> pixels;

    Image() = default;
    Image(int64_t h, int64_t w, float fill = 0.0f);

    float& at(int64_t row, int64_t col) { return pixels[static_cast<size_t>(row * width + col)]; }
    float at(int64_t row, int64_t col) const { return pixels[static_cast<size_t>(row * width + col)]; }
    bool same_size(const Image& other) const { return height == other.height && width == other.width; }
    bool operator==(const Image&) const = default;
};

class ImageIoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// 8-bit grayscale PNG only; anything else is rejected.
Image read_png(const std::filesystem::path& path);
// Quantizes round(clamp(v, 0, 1) * 255). Output bytes depend only on pixels.
void write_png(const std::filesystem::path& path, const Image& image);
// (height, width) from the PNG header without decoding pixels; also rejects
// anything that is not 8-bit grayscale.
std::pair<int64_t, int64_t> png_dimensions(const std::filesystem::path& path);

uint8_t quantize(float v);
// Round trip through 8-bit storage.
Image quantized(const Image& image);

// Network boundary mapping: [0, 1] -> [-1, 1] is 2v - 1 and back is (v + 1) / 2.
Tensor images_to_tensor(const std::vector<Image>& images);
Image tensor_to_image(const Tensor& batch, int64_t index);
// Same layout with intensities left in [0, 1]; used wherever zero padding must
// mean black.
Tensor unit_tensor(const std::vector<Image>& images);
Image unit_image(const Tensor& batch, int64_t index);

}  // namespace vtmorph
