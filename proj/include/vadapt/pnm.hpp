#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace vadapt {

// Decoded P6 image: channel-major rgb in [0,1], laid out [3, h, w].
struct PpmImage {
  std::int64_t h = 0;
  std::int64_t w = 0;
  std::vector<double> rgb;
};

// Binary PPM (P6, maxval 255). Throws IoError on malformed headers or
// truncated payloads.
PpmImage read_ppm(const std::string& path);
PpmImage decode_ppm(std::span<const unsigned char> bytes);

void write_ppm(const std::string& path, std::span<const unsigned char> rgb_interleaved,
               std::int64_t h, std::int64_t w);

// Binary PGM (P5, maxval 255).
void write_pgm(const std::string& path, std::span<const unsigned char> gray,
               std::int64_t h, std::int64_t w);
std::vector<unsigned char> read_pgm(const std::string& path, std::int64_t* h,
                                    std::int64_t* w);

}  // namespace vadapt
