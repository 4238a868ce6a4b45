#pragma once

#include <string>

#include "purekit/tensor.hpp"

namespace purekit {

// Reads a PNG into a (3,H,W) tensor in [0,1]. Grayscale and alpha inputs are
// expanded/flattened to RGB.
Tensor read_png(const std::string& path);

// Writes a (1|3,H,W) tensor in [0,1] as an 8-bit PNG.
void write_png(const std::string& path, const Tensor& image);

}  // namespace purekit
