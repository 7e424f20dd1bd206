#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace recon {

// Row-major interleaved 8-bit image; channels is 1 (gray) or 3 (rgb).
struct ImageU8 {
    int width = 0, height = 0, channels = 0;
    std::vector<uint8_t> pixels;

    uint8_t at(int x, int y, int c = 0) const {
        return pixels[size_t(y * width + x) * channels + c];
    }
    uint8_t& at(int x, int y, int c = 0) {
        return pixels[size_t(y * width + x) * channels + c];
    }
};

ImageU8 load_png(const std::string& path);
void save_png(const std::string& path, const ImageU8& img);

}  // namespace recon
