#pragma once
// File formats: binary PPM (P6) for RGB, binary PGM (P5) for single-channel,
// both 8-bit maxval 255; and ATNS, a raw little-endian float32 planar
// container (magic "ATNS", u32 H, u32 W, u32 C) for lossless tensor exchange.

#include <string>

#include "fga/tensor.hpp"

namespace fga {

// Values are rounded to nearest and clamped to [0,255] on write.
void write_ppm(const std::string& path, const Tensor& img);   // requires c == 3
void write_pgm(const std::string& path, const Tensor& img);   // requires c == 1
Tensor read_ppm(const std::string& path);
Tensor read_pgm(const std::string& path);
// Dispatch on the magic number (P6 -> 3 channels, P5 -> 1).
Tensor read_image(const std::string& path);

void write_atns(const std::string& path, const Tensor& t);
Tensor read_atns(const std::string& path);

}  // namespace fga
