#pragma once

// Differentiable affine warping.
//
// Coordinate convention (frozen, theta values depend on it): an image spans
// [-1, 1] x [-1, 1] in normalized units, x to the right and y downward, and
// pixel (i, j) of an H x W image has its center at
//     x_j = (2 j + 1) / W - 1,    y_i = (2 i + 1) / H - 1.
// theta maps normalized OUTPUT coordinates to normalized SOURCE coordinates
// (pull warping). Source samples outside the image read as zero.

#include <array>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "vtmorph/tensor.hpp"

namespace vtmorph {

// Six values [a, b, tx, c, d, ty] of the matrix [[a, b, tx], [c, d, ty]].
struct AffineParams {
    std::array<double, 6> v{1.0, 0.0, 0.0, 0.0, 1.0, 0.0};

    static AffineParams identity() { return {}; }
    static AffineParams translation(double tx, double ty) { return {{1.0, 0.0, tx, 0.0, 1.0, ty}}; }
    // Positive angles turn counter-clockwise as seen on screen (y down), so a
    // quarter turn maps the corner (+1, -1) to (-1, -1).
    static AffineParams rotation(double radians);
    // scale * R(rotation) * [[1, shear], [0, 1]] followed by translation.
    static AffineParams from_components(double scale, double rotation, double shear, double tx, double ty);

    double determinant() const { return v[0] * v[4] - v[1] * v[3]; }
    std::pair<double, double> apply(double x, double y) const {
        return {v[0] * x + v[1] * y + v[2], v[3] * x + v[4] * y + v[5]};
    }
    bool operator==(const AffineParams&) const = default;
};

class SingularTransformError : public std::domain_error {
public:
    SingularTransformError(double det);
    double determinant;
};

// Throws SingularTransformError when |ad - bc| <= 1e-8.
AffineParams invert(const AffineParams& theta);
// Homogeneous product first * second. Warping by `second` after warping by
// `first` equals one warp by compose(first, second).
AffineParams compose(const AffineParams& first, const AffineParams& second);

// Mean over the four image corners (+-1, +-1) of the pixel distance between
// their images under the two transforms.
double corner_error(const AffineParams& predicted, const AffineParams& truth, int64_t height, int64_t width);

// Six comma-separated decimal fields that parse back to the identical doubles.
std::string format_theta(const AffineParams& theta);
AffineParams parse_theta(const std::string& text);

template <typename T>
BasicTensor<T> theta_tensor(const std::vector<AffineParams>& thetas, bool requires_grad = false);
template <typename T>
std::vector<AffineParams> thetas_from_tensor(const BasicTensor<T>& theta);

// theta: N x 6, out_shape: N x C x H x W. Returns the N x H x W x 2 grid of
// (x, y) source coordinates.
template <typename T>
BasicTensor<T> affine_grid(const BasicTensor<T>& theta, const Shape& out_shape);

// img: N x C x H x W, grid: N x Ho x Wo x 2. Bilinear with zero padding;
// differentiable in both arguments.
template <typename T>
BasicTensor<T> grid_sample_bilinear(const BasicTensor<T>& img, const BasicTensor<T>& grid);

template <typename T>
BasicTensor<T> warp(const BasicTensor<T>& img, const BasicTensor<T>& theta);

}  // namespace vtmorph
