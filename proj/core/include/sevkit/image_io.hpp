#pragma once

#include <string>
#include <vector>

#include "sevkit/tensor.hpp"

namespace sevkit {

/// Reads an 8-bit PNG or PGM/PPM image as a (1,c,h,w) tensor in [0,1];
/// c is 1 (gray) or 3 (RGB). Alpha channels are dropped, 16-bit is narrowed.
Tensor read_image(const std::string& path);

/// Writes a (1,1,h,w) or (1,3,h,w) tensor in [0,1] as an 8-bit PNG.
/// Values are clamped and rounded to the nearest byte.
void write_image_png(const Tensor& image, const std::string& path);

/// Sorted list of image files (.png/.pgm/.ppm) directly inside `dir`.
std::vector<std::string> list_image_files(const std::string& dir);

/// Loads every image in `dir`; errors if none found.
std::vector<Tensor> load_image_dir(const std::string& dir);

/// Reflective padding on the bottom/right so both spatial dims become
/// multiples of `multiple`. Reflection excludes the border pixel (abcb-style),
/// keeping signal-dependent statistics free of artificial black borders.
Tensor reflect_pad_to_multiple(const Tensor& image, std::size_t multiple);

/// Crops back to the original size after reflect_pad_to_multiple.
Tensor crop(const Tensor& image, std::size_t h, std::size_t w);

}  // namespace sevkit
