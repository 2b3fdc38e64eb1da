#pragma once

#include <complex>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace vadapt::analysis {

using i64 = std::int64_t;

// Unnormalized forward 2D DFT of a real h x w map, row-major output.
// Separable direct transform; no power-of-two requirement.
std::vector<std::complex<double>> fft2d(std::span<const double> x, i64 h, i64 w);

// Radial spectrum: per channel, 2D DFT -> magnitude -> log1p -> mean per
// radial bin (normalized frequency = radius / half-diagonal) -> minus the
// DC bin -> averaged over channels and batch. rel_log_amp[0] == 0 always.
struct SpectrumProfile {
  std::vector<double> freq;         // bin centers in [0, 1]
  std::vector<double> rel_log_amp;  // log amplitude relative to DC
};

SpectrumProfile spectrum_profile(std::span<const double> features, i64 b,
                                 i64 c, i64 h, i64 w, int bins = 32);

// CSV with header freq,rel_log_amp and six decimal places per value.
std::string profile_csv(const SpectrumProfile& p);
void write_profile_csv(const SpectrumProfile& p, const std::string& path);

// Channel-mean map, min-max scaled to [0,255] (all zeros when min == max),
// written as binary PGM (P5, maxval 255).
void export_feature_map(std::span<const double> features, i64 c, i64 h, i64 w,
                        const std::string& path);

}  // namespace vadapt::analysis
