#pragma once

#include <string>

#include "tripletnet/tensor.hpp"

namespace tripletnet {

/// Decodes a PNG or PNM (P2/P3/P5/P6) file into a [C,H,W] float tensor
/// with values in [0,1]; C is 1 for grayscale, 3 for color sources
/// (alpha is dropped). Throws DataError naming the path on failure.
Tensor<float> read_image(const std::string& path);

void write_pgm(const std::string& path, const Tensor<float>& image);
void write_ppm(const std::string& path, const Tensor<float>& image);

/// Available when built with libpng; throws DataError otherwise.
void write_png(const std::string& path, const Tensor<float>& image);

bool png_supported();

}  // namespace tripletnet
