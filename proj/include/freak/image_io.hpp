#pragma once

#include <string>
#include <vector>

#include "freak/tensor.hpp"

namespace freak::img {

// Interleaved 8-bit RGB, row-major.
struct Image8 {
    int width = 0;
    int height = 0;
    std::vector<unsigned char> rgb;

    unsigned char& at(int y, int x, int c) {
        return rgb[(static_cast<size_t>(y) * width + x) * 3 + c];
    }
    unsigned char at(int y, int x, int c) const {
        return rgb[(static_cast<size_t>(y) * width + x) * 3 + c];
    }
};

Image8 read_png(const std::string& path);
void write_png(const std::string& path, const Image8& image);

// [3,H,W] float in [0,1] <-> 8-bit RGB. from_tensor rounds to the nearest
// 8-bit level, so tensors already on the 255-level grid round-trip bit-exactly.
Tensor<float> to_tensor(const Image8& image);
Image8 from_tensor(const Tensor<float>& t);

}  // namespace freak::img
