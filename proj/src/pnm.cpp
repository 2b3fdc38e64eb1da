#include "vadapt/pnm.hpp"

#include <cstdio>
#include <fstream>

#include "vadapt/error.hpp"

namespace vadapt {

namespace {

std::vector<unsigned char> slurp(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open '" + path + "'");
  return std::vector<unsigned char>(std::istreambuf_iterator<char>(f),
                                    std::istreambuf_iterator<char>());
}

// whitespace/comment-skipping integer field parser for PNM headers
struct HeaderCursor {
  std::span<const unsigned char> bytes;
  std::size_t at = 0;

  void skip_space() {
    while (at < bytes.size()) {
      const char c = static_cast<char>(bytes[at]);
      if (c == '#') {
        while (at < bytes.size() && bytes[at] != '\n') ++at;
      } else if (c == ' ' || c == '\t' || c == '\r' || c == '\n') {
        ++at;
      } else {
        break;
      }
    }
  }

  std::int64_t read_int(const char* what) {
    skip_space();
    if (at >= bytes.size() || bytes[at] < '0' || bytes[at] > '9')
      throw IoError(std::string("malformed header: expected ") + what);
    std::int64_t v = 0;
    while (at < bytes.size() && bytes[at] >= '0' && bytes[at] <= '9') {
      v = v * 10 + (bytes[at] - '0');
      ++at;
    }
    return v;
  }
};

}  // namespace

PpmImage decode_ppm(std::span<const unsigned char> bytes) {
  if (bytes.size() < 2 || bytes[0] != 'P' || bytes[1] != '6')
    throw IoError("malformed header: not a P6 ppm");
  HeaderCursor cur{bytes, 2};
  const auto w = cur.read_int("width");
  const auto h = cur.read_int("height");
  const auto maxval = cur.read_int("maxval");
  if (w <= 0 || h <= 0) throw IoError("malformed header: non-positive extents");
  if (maxval != 255) throw IoError("unsupported maxval " + std::to_string(maxval));
  cur.at += 1;  // single whitespace byte after maxval
  const std::size_t need = static_cast<std::size_t>(3 * w * h);
  if (bytes.size() - cur.at < need)
    throw IoError("truncated payload: need " + std::to_string(need) + " bytes, have " +
                  std::to_string(bytes.size() - cur.at));
  PpmImage img;
  img.h = h;
  img.w = w;
  img.rgb.assign(static_cast<std::size_t>(3 * h * w), 0.0);
  for (std::int64_t i = 0; i < h * w; ++i)
    for (int ch = 0; ch < 3; ++ch)
      img.rgb[static_cast<std::size_t>(ch * h * w + i)] =
          bytes[cur.at + static_cast<std::size_t>(3 * i + ch)] / 255.0;
  return img;
}

PpmImage read_ppm(const std::string& path) { return decode_ppm(slurp(path)); }

void write_ppm(const std::string& path, std::span<const unsigned char> rgb_interleaved,
               std::int64_t h, std::int64_t w) {
  if (static_cast<std::int64_t>(rgb_interleaved.size()) != 3 * h * w)
    throw IoError("write_ppm: payload does not match extents");
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open '" + path + "' for writing");
  char header[64];
  const int n = std::snprintf(header, sizeof header, "P6\n%lld %lld\n255\n",
                              static_cast<long long>(w), static_cast<long long>(h));
  f.write(header, n);
  f.write(reinterpret_cast<const char*>(rgb_interleaved.data()),
          static_cast<std::streamsize>(rgb_interleaved.size()));
  if (!f) throw IoError("write failed for '" + path + "'");
}

void write_pgm(const std::string& path, std::span<const unsigned char> gray,
               std::int64_t h, std::int64_t w) {
  if (static_cast<std::int64_t>(gray.size()) != h * w)
    throw IoError("write_pgm: payload does not match extents");
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open '" + path + "' for writing");
  char header[64];
  const int n = std::snprintf(header, sizeof header, "P5\n%lld %lld\n255\n",
                              static_cast<long long>(w), static_cast<long long>(h));
  f.write(header, n);
  f.write(reinterpret_cast<const char*>(gray.data()),
          static_cast<std::streamsize>(gray.size()));
  if (!f) throw IoError("write failed for '" + path + "'");
}

std::vector<unsigned char> read_pgm(const std::string& path, std::int64_t* h,
                                    std::int64_t* w) {
  const auto bytes = slurp(path);
  if (bytes.size() < 2 || bytes[0] != 'P' || bytes[1] != '5')
    throw IoError("malformed header: not a P5 pgm");
  HeaderCursor cur{bytes, 2};
  *w = cur.read_int("width");
  *h = cur.read_int("height");
  const auto maxval = cur.read_int("maxval");
  if (maxval != 255) throw IoError("unsupported maxval " + std::to_string(maxval));
  cur.at += 1;
  const std::size_t need = static_cast<std::size_t>(*h * *w);
  if (bytes.size() - cur.at < need) throw IoError("truncated payload");
  return std::vector<unsigned char>(bytes.begin() + static_cast<std::ptrdiff_t>(cur.at),
                                    bytes.begin() + static_cast<std::ptrdiff_t>(cur.at + need));
}

}  // namespace vadapt
