#include "resdiff/spectral.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>

#include "resdiff/error.hpp"

namespace resdiff {

namespace {

struct FftwBuffer {
  explicit FftwBuffer(std::size_t n) : data(static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * n))) {
    if (data == nullptr) throw std::bad_alloc();
  }
  ~FftwBuffer() { fftw_free(data); }
  FftwBuffer(const FftwBuffer&) = delete;
  FftwBuffer& operator=(const FftwBuffer&) = delete;
  fftw_complex* data;
};

/// Repeated same-shape transforms share one plan.
class Fft2 {
public:
  Fft2(int ny, int nx)
      : n_(static_cast<std::size_t>(ny) * static_cast<std::size_t>(nx)), in_(n_), out_(n_),
        plan_(fftw_plan_dft_2d(ny, nx, in_.data, out_.data, FFTW_FORWARD, FFTW_ESTIMATE)) {
    if (plan_ == nullptr) throw_numeric("spectral", "FFTW could not create a plan");
  }
  ~Fft2() { fftw_destroy_plan(plan_); }
  Fft2(const Fft2&) = delete;
  Fft2& operator=(const Fft2&) = delete;

  std::vector<std::complex<double>> operator()(const std::vector<double>& v) {
    for (std::size_t i = 0; i < n_; ++i) {
      in_.data[i][0] = v[i];
      in_.data[i][1] = 0.0;
    }
    fftw_execute(plan_);
    std::vector<std::complex<double>> y(n_);
    for (std::size_t i = 0; i < n_; ++i) y[i] = {out_.data[i][0], out_.data[i][1]};
    return y;
  }

private:
  std::size_t n_;
  FftwBuffer in_;
  FftwBuffer out_;
  fftw_plan plan_;
};

std::vector<double> window_1d(Window w, int n) {
  std::vector<double> out(static_cast<std::size_t>(n), 1.0);
  if (w == Window::Hann && n > 1) {
    for (int i = 0; i < n; ++i) {
      out[static_cast<std::size_t>(i)] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * i / (n - 1));
    }
  }
  return out;
}

int signed_index(int i, int n) { return i <= n / 2 ? i : i - n; }

/// Radial bin of every DFT coefficient plus the bin width.
struct RadialIndex {
  double dk = 0.0;
  std::vector<std::size_t> bin;
  std::size_t bins = 0;
};

RadialIndex radial_index(int ny, int nx, double dy_km, double dx_km) {
  RadialIndex ri;
  const double dkx = 1.0 / (nx * dx_km);
  const double dky = 1.0 / (ny * dy_km);
  ri.dk = std::min(dkx, dky);
  ri.bin.resize(static_cast<std::size_t>(ny) * static_cast<std::size_t>(nx));
  for (int r = 0; r < ny; ++r) {
    const double ky = signed_index(r, ny) * dky;
    for (int c = 0; c < nx; ++c) {
      const double kx = signed_index(c, nx) * dkx;
      const auto b = static_cast<std::size_t>(std::llround(std::hypot(kx, ky) / ri.dk));
      ri.bin[static_cast<std::size_t>(r) * static_cast<std::size_t>(nx) + static_cast<std::size_t>(c)] = b;
      ri.bins = std::max(ri.bins, b + 1);
    }
  }
  return ri;
}

void require_complete(const GridField& f, const char* what) {
  if (f.missing_count() > 0) {
    throw_data("spectral", std::string(what) + " has missing pixels; fill or mask them first");
  }
}

std::string fmt_g(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

}  // namespace

std::string_view to_string(Window w) { return w == Window::Hann ? "hann" : "none"; }

Window window_from_string(std::string_view s) {
  if (s == "none") return Window::None;
  if (s == "hann") return Window::Hann;
  throw_config("spectral", "unknown window '" + std::string(s) + "'");
}

std::vector<std::complex<double>> dft2(const std::vector<double>& values, int ny, int nx) {
  if (values.size() != static_cast<std::size_t>(ny) * static_cast<std::size_t>(nx)) {
    throw_data("spectral", "dft2: size does not match shape");
  }
  Fft2 fft(ny, nx);
  return fft(values);
}

SpectrumResult power_spectrum_2d(const GridField& field, Window window) {
  require_complete(field, "field");
  const auto& g = field.geom;
  const auto wy = window_1d(window, g.ny);
  const auto wx = window_1d(window, g.nx);
  std::vector<double> v(field.values);
  for (int r = 0; r < g.ny; ++r) {
    for (int c = 0; c < g.nx; ++c) v[g.index(r, c)] *= wy[static_cast<std::size_t>(r)] * wx[static_cast<std::size_t>(c)];
  }
  const auto y = dft2(v, g.ny, g.nx);

  SpectrumResult res;
  res.power2d = {g.ny, g.nx, std::vector<double>(y.size())};
  for (std::size_t i = 0; i < y.size(); ++i) res.power2d.power[i] = std::norm(y[i]);

  const auto ri = radial_index(g.ny, g.nx, g.dy_km, g.dx_km);
  std::vector<double> sum(ri.bins, 0.0);
  std::vector<std::size_t> count(ri.bins, 0);
  for (std::size_t i = 0; i < y.size(); ++i) {
    sum[ri.bin[i]] += res.power2d.power[i];
    ++count[ri.bin[i]];
  }
  res.radial.dk = ri.dk;
  for (std::size_t b = 0; b < ri.bins; ++b) {
    if (count[b] == 0) continue;
    res.radial.wavenumber.push_back(static_cast<double>(b) * ri.dk);
    res.radial.mean_power.push_back(sum[b] / static_cast<double>(count[b]));
    res.radial.count.push_back(count[b]);
  }
  return res;
}

void CoherenceConfig::validate() const {
  if (segment < 2) throw_config("spectral", "segment size must be at least 2");
  if (!(overlap >= 0.0 && overlap < 1.0)) throw_config("spectral", "overlap must lie in [0, 1)");
}

CoherenceCurve spectral_coherence(const GridField& pred, const GridField& truth, const CoherenceConfig& cfg) {
  cfg.validate();
  require_same_geometry(pred, truth, "spectral");
  require_complete(pred, "prediction");
  require_complete(truth, "truth");
  const auto& g = truth.geom;
  const int seg = cfg.segment;
  if (seg > g.ny || seg > g.nx) throw_data("spectral", "segment larger than the field");
  const int stride = std::max(1, static_cast<int>(std::lround(seg * (1.0 - cfg.overlap))));
  std::vector<int> rows;
  std::vector<int> cols;
  for (int r = 0; r + seg <= g.ny; r += stride) rows.push_back(r);
  for (int c = 0; c + seg <= g.nx; c += stride) cols.push_back(c);
  const int segments = static_cast<int>(rows.size() * cols.size());
  if (segments < 2) throw_data("spectral", "coherence needs at least 2 segments (coherence would be 1 identically)");

  const auto w = window_1d(cfg.window, seg);
  const auto ri = radial_index(seg, seg, g.dy_km, g.dx_km);
  std::vector<std::complex<double>> sxy(ri.bins);
  std::vector<double> sxx(ri.bins, 0.0);
  std::vector<double> syy(ri.bins, 0.0);
  Fft2 fft(seg, seg);
  const auto n = static_cast<std::size_t>(seg) * static_cast<std::size_t>(seg);
  std::vector<double> a(n);
  std::vector<double> b(n);

  for (int r0 : rows) {
    for (int c0 : cols) {
      double ma = 0.0;
      double mb = 0.0;
      for (int r = 0; r < seg; ++r) {
        for (int c = 0; c < seg; ++c) {
          const auto k = static_cast<std::size_t>(r * seg + c);
          a[k] = pred.values[g.index(r0 + r, c0 + c)];
          b[k] = truth.values[g.index(r0 + r, c0 + c)];
          ma += a[k];
          mb += b[k];
        }
      }
      if (!cfg.detrend_mean) ma = mb = 0.0;
      ma /= static_cast<double>(n);
      mb /= static_cast<double>(n);
      for (int r = 0; r < seg; ++r) {
        for (int c = 0; c < seg; ++c) {
          const auto k = static_cast<std::size_t>(r * seg + c);
          const double wk = w[static_cast<std::size_t>(r)] * w[static_cast<std::size_t>(c)];
          a[k] = (a[k] - ma) * wk;
          b[k] = (b[k] - mb) * wk;
        }
      }
      const auto fa = fft(a);
      const auto fb = fft(b);
      for (std::size_t k = 0; k < n; ++k) {
        sxy[ri.bin[k]] += fa[k] * std::conj(fb[k]);
        sxx[ri.bin[k]] += std::norm(fa[k]);
        syy[ri.bin[k]] += std::norm(fb[k]);
      }
    }
  }

  CoherenceCurve out;
  out.segments = segments;
  for (std::size_t k = 0; k < ri.bins; ++k) {
    const double ref = sxx[k] * syy[k];
    if (!(ref > 0.0)) continue;
    const double mag2 = std::norm(sxy[k]) / ref;
    out.frequency.push_back(static_cast<double>(k) * ri.dk);
    out.coherence.push_back(cfg.squared ? mag2 : std::sqrt(mag2));
  }
  return out;
}

IntensityHistogram intensity_pdf(const GridField& field, const std::vector<double>& edges, bool exclude_zero) {
  if (edges.size() < 2) throw_config("spectral", "histogram needs at least two edges");
  for (std::size_t i = 1; i < edges.size(); ++i) {
    if (!(edges[i] > edges[i - 1])) throw_config("spectral", "histogram edges must be strictly increasing");
  }
  IntensityHistogram h;
  h.edges = edges;
  h.count.assign(edges.size() - 1, 0);
  for (std::size_t i = 0; i < field.size(); ++i) {
    if (field.missing[i]) continue;
    const double v = field.values[i];
    if (exclude_zero && v == 0.0) continue;
    if (v < edges.front() || v > edges.back()) continue;
    auto it = std::upper_bound(edges.begin(), edges.end(), v);
    auto bin = static_cast<std::size_t>(it - edges.begin()) - 1;
    bin = std::min(bin, h.count.size() - 1);
    ++h.count[bin];
    ++h.total;
  }
  h.frequency.assign(h.count.size(), 0.0);
  if (h.total > 0) {
    for (std::size_t b = 0; b < h.count.size(); ++b) {
      h.frequency[b] = static_cast<double>(h.count[b]) / static_cast<double>(h.total);
    }
  }
  return h;
}

std::string radial_csv(const RadialSpectrum& s) {
  std::string out = "wavenumber_cpkm,mean_power,count\n";
  for (std::size_t i = 0; i < s.wavenumber.size(); ++i) {
    out += fmt_g(s.wavenumber[i]) + ',' + fmt_g(s.mean_power[i]) + ',' + std::to_string(s.count[i]) + '\n';
  }
  return out;
}

std::string coherence_csv(const CoherenceCurve& c) {
  std::string out = "frequency_cpkm,coherence\n";
  for (std::size_t i = 0; i < c.frequency.size(); ++i) {
    out += fmt_g(c.frequency[i]) + ',' + fmt_g(c.coherence[i]) + '\n';
  }
  return out;
}

std::string histogram_csv(const IntensityHistogram& h) {
  std::string out = "bin_lo_mm,bin_hi_mm,frequency,count\n";
  for (std::size_t b = 0; b < h.count.size(); ++b) {
    out += fmt_g(h.edges[b]) + ',' + fmt_g(h.edges[b + 1]) + ',' + fmt_g(h.frequency[b]) + ',' +
           std::to_string(h.count[b]) + '\n';
  }
  return out;
}

double fill_missing_with_zero(GridField& field) {
  std::size_t filled = 0;
  for (std::size_t i = 0; i < field.size(); ++i) {
    if (!field.missing[i]) continue;
    field.values[i] = 0.0;
    field.missing[i] = 0;
    ++filled;
  }
  return field.size() == 0 ? 0.0 : static_cast<double>(filled) / static_cast<double>(field.size());
}

}  // namespace resdiff
