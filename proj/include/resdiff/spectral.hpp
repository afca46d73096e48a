#pragma once

#include <complex>
#include <string>
#include <string_view>
#include <vector>

#include "resdiff/grid.hpp"

namespace resdiff {

enum class Window { None, Hann };

std::string_view to_string(Window w);
Window window_from_string(std::string_view s);

/// Unnormalized forward DFT, so sum(power) = N * sum(v^2) without a window.
inline constexpr std::string_view kFftConvention = "unnormalized forward DFT; P = |Y|^2; sum P = N sum v^2";

/// Row-major |Y(ky, kx)|^2 in FFT order (index 0 is the zero wavenumber).
struct Power2D {
  int ny = 0;
  int nx = 0;
  std::vector<double> power;
};

/// Radially averaged spectrum. Bin b collects every (kx, ky) with
/// round(|k| / dk) = b; only occupied bins are listed.
struct RadialSpectrum {
  double dk = 0.0;                  // cycles/km
  std::vector<double> wavenumber;   // bin centres, cycles/km
  std::vector<double> mean_power;
  std::vector<std::size_t> count;
};

struct SpectrumResult {
  Power2D power2d;
  RadialSpectrum radial;
};

SpectrumResult power_spectrum_2d(const GridField& field, Window window = Window::None);

/// The 2D DFT of a real row-major array, exposed for tests.
std::vector<std::complex<double>> dft2(const std::vector<double>& values, int ny, int nx);

/// Welch-style estimate: square segments, overlapping by `overlap`, each
/// mean-detrended (optionally) and windowed before transforming.
struct CoherenceConfig {
  int segment = 32;
  double overlap = 0.5;
  Window window = Window::Hann;
  bool detrend_mean = true;
  /// Report |Sxy|^2 / (Sxx Syy) instead of |Sxy| / sqrt(Sxx Syy).
  bool squared = false;

  void validate() const;
};

struct CoherenceCurve {
  std::vector<double> frequency;  // cycles/km
  std::vector<double> coherence;
  int segments = 0;
};

CoherenceCurve spectral_coherence(const GridField& pred, const GridField& truth, const CoherenceConfig& cfg = {});

/// Relative frequencies over bins [e_j, e_{j+1}); the last bin is closed.
/// Values outside every bin are not counted.
struct IntensityHistogram {
  std::vector<double> edges;
  std::vector<double> frequency;
  std::vector<std::size_t> count;
  std::size_t total = 0;
};

IntensityHistogram intensity_pdf(const GridField& field, const std::vector<double>& edges, bool exclude_zero = false);

std::string radial_csv(const RadialSpectrum& s);
std::string coherence_csv(const CoherenceCurve& c);
std::string histogram_csv(const IntensityHistogram& h);

/// Replaces missing pixels by 0; returns the filled fraction.
double fill_missing_with_zero(GridField& field);

}  // namespace resdiff
