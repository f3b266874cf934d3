#pragma once

#include <string>

#include "senet/tensor.hpp"

namespace senet {

// 8-bit binary netpbm codecs. Grayscale maps (masks, predictions) travel
// as P5, RGB images as P6. Values are scaled to [0,1] by /255 on read and
// quantized with round(255*v) on write.

TensorF read_pgm(const std::string& path);            // -> [H,W]
TensorF read_ppm(const std::string& path);            // -> [3,H,W]
TensorF read_image(const std::string& path);          // by magic: [H,W] or [3,H,W]
void write_pgm(const std::string& path, const TensorF& gray);
void write_ppm(const std::string& path, const TensorF& rgb);

}  // namespace senet
