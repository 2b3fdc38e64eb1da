#include "vadapt/analysis.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

#include "vadapt/error.hpp"
#include "vadapt/pnm.hpp"

namespace vadapt::analysis {

namespace {

// e^{-2 pi i j k / n} table for one axis
std::vector<std::complex<double>> twiddles(i64 n) {
  std::vector<std::complex<double>> w(static_cast<std::size_t>(n * n));
  const double step = -2.0 * 3.14159265358979323846 / static_cast<double>(n);
  for (i64 j = 0; j < n; ++j)
    for (i64 k = 0; k < n; ++k) {
      const double a = step * static_cast<double>((j * k) % n);
      w[static_cast<std::size_t>(j * n + k)] = {std::cos(a), std::sin(a)};
    }
  return w;
}

}  // namespace

std::vector<std::complex<double>> fft2d(std::span<const double> x, i64 h, i64 w) {
  if (static_cast<i64>(x.size()) != h * w)
    throw ShapeError("fft2d: buffer does not match extents");
  const auto tw = twiddles(w);
  const auto th = twiddles(h);
  // rows
  std::vector<std::complex<double>> rows(static_cast<std::size_t>(h * w));
  for (i64 r = 0; r < h; ++r)
    for (i64 k = 0; k < w; ++k) {
      std::complex<double> acc{0.0, 0.0};
      for (i64 j = 0; j < w; ++j)
        acc += x[static_cast<std::size_t>(r * w + j)] * tw[static_cast<std::size_t>(j * w + k)];
      rows[static_cast<std::size_t>(r * w + k)] = acc;
    }
  // columns
  std::vector<std::complex<double>> out(static_cast<std::size_t>(h * w));
  for (i64 k = 0; k < w; ++k)
    for (i64 r = 0; r < h; ++r) {
      std::complex<double> acc{0.0, 0.0};
      for (i64 j = 0; j < h; ++j)
        acc += rows[static_cast<std::size_t>(j * w + k)] * th[static_cast<std::size_t>(j * h + r)];
      out[static_cast<std::size_t>(r * w + k)] = acc;
    }
  return out;
}

SpectrumProfile spectrum_profile(std::span<const double> features, i64 b,
                                 i64 c, i64 h, i64 w, int bins) {
  if (static_cast<i64>(features.size()) != b * c * h * w)
    throw ShapeError("spectrum_profile: buffer does not match extents");
  std::vector<double> acc(static_cast<std::size_t>(bins), 0.0);
  // radial bin of each frequency pixel; signed frequencies in cycles/pixel
  std::vector<int> bin_of(static_cast<std::size_t>(h * w));
  for (i64 fy = 0; fy < h; ++fy)
    for (i64 fx = 0; fx < w; ++fx) {
      const double sy = (fy <= h / 2 ? fy : fy - h) / static_cast<double>(h);
      const double sx = (fx <= w / 2 ? fx : fx - w) / static_cast<double>(w);
      const double r = std::sqrt(sx * sx + sy * sy) / (0.5 * std::sqrt(2.0));
      int bi = static_cast<int>(r * bins);
      bin_of[static_cast<std::size_t>(fy * w + fx)] = std::min(bi, bins - 1);
    }
  for (i64 plane = 0; plane < b * c; ++plane) {
    const auto spec = fft2d(features.subspan(static_cast<std::size_t>(plane * h * w),
                                             static_cast<std::size_t>(h * w)),
                            h, w);
    std::vector<double> sums(static_cast<std::size_t>(bins), 0.0);
    std::vector<i64> counts(static_cast<std::size_t>(bins), 0);
    for (i64 i = 0; i < h * w; ++i) {
      const int bi = bin_of[static_cast<std::size_t>(i)];
      sums[static_cast<std::size_t>(bi)] += std::log1p(std::abs(spec[static_cast<std::size_t>(i)]));
      counts[static_cast<std::size_t>(bi)] += 1;
    }
    for (int bi = 0; bi < bins; ++bi)
      if (counts[static_cast<std::size_t>(bi)] > 0)
        sums[static_cast<std::size_t>(bi)] /= static_cast<double>(counts[static_cast<std::size_t>(bi)]);
    const double dc = sums[0];
    for (int bi = 0; bi < bins; ++bi)
      if (counts[static_cast<std::size_t>(bi)] > 0)
        acc[static_cast<std::size_t>(bi)] += sums[static_cast<std::size_t>(bi)] - dc;
  }
  SpectrumProfile p;
  for (int bi = 0; bi < bins; ++bi) {
    p.freq.push_back((bi + 0.5) / static_cast<double>(bins));
    p.rel_log_amp.push_back(acc[static_cast<std::size_t>(bi)] / static_cast<double>(b * c));
  }
  p.freq[0] = 0.0;  // the DC bin reports frequency zero
  return p;
}

std::string profile_csv(const SpectrumProfile& p) {
  std::string out = "freq,rel_log_amp\n";
  char line[80];
  for (std::size_t i = 0; i < p.freq.size(); ++i) {
    std::snprintf(line, sizeof line, "%.6f,%.6f\n", p.freq[i], p.rel_log_amp[i]);
    out += line;
  }
  return out;
}

void write_profile_csv(const SpectrumProfile& p, const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open '" + path + "' for writing");
  const std::string csv = profile_csv(p);
  f.write(csv.data(), static_cast<std::streamsize>(csv.size()));
  if (!f) throw IoError("write failed for '" + path + "'");
}

void export_feature_map(std::span<const double> features, i64 c, i64 h, i64 w,
                        const std::string& path) {
  if (static_cast<i64>(features.size()) != c * h * w)
    throw ShapeError("export_feature_map: buffer does not match extents");
  std::vector<double> mean(static_cast<std::size_t>(h * w), 0.0);
  for (i64 ci = 0; ci < c; ++ci)
    for (i64 i = 0; i < h * w; ++i)
      mean[static_cast<std::size_t>(i)] += features[static_cast<std::size_t>(ci * h * w + i)];
  for (auto& v : mean) v /= static_cast<double>(c);
  double lo = mean[0], hi = mean[0];
  for (double v : mean) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  std::vector<unsigned char> pixels(mean.size(), 0);
  if (hi > lo)
    for (std::size_t i = 0; i < mean.size(); ++i)
      pixels[i] = static_cast<unsigned char>((mean[i] - lo) / (hi - lo) * 255.0 + 0.5);
  write_pgm(path, pixels, h, w);
}

}  // namespace vadapt::analysis
