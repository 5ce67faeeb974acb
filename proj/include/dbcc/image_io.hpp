#pragma once

#include <string>

#include "dbcc/tensor.hpp"

namespace dbcc {

/// Reads a binary PPM (P6), 8-bit or 16-bit. Values scale to [0,1] by maxval;
/// 16-bit samples are big-endian per the PNM convention.
TensorF read_ppm(const std::string& path);

/// Writes a binary PPM with the given maxval (255 or 65535). Values are
/// clamped to [0,1] and quantized by rounding.
void write_ppm(const std::string& path, const TensorF& image, int maxval = 65535);

/// Per-element power x^gamma; expects values in [0,1].
TensorF gamma_correct(const TensorF& image, double gamma);

/// Bilinear resample to (out_h, out_w). Same-size calls return the input
/// unchanged.
TensorF resize_bilinear(const TensorF& image, int out_h, int out_w);

}  // namespace dbcc
