#include "resdiff/denoiser.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include "resdiff/error.hpp"
#include "resdiff/rng.hpp"

namespace resdiff {

namespace {

constexpr char kCheckpointMagic[4] = {'D', 'E', 'N', 'Z'};
constexpr std::uint32_t kCheckpointVersion = 1;

std::vector<double> pad_plane(std::span<const double> plane, int ny, int nx) {
  const int pw = nx + 2;
  std::vector<double> out(static_cast<std::size_t>(ny + 2) * static_cast<std::size_t>(pw), 0.0);
  for (int y = 0; y < ny; ++y) {
    std::memcpy(out.data() + (y + 1) * pw + 1, plane.data() + y * nx, sizeof(double) * static_cast<std::size_t>(nx));
  }
  return out;
}

FeatureMap conv3x3(const FeatureMap& in, const double* weights, const double* bias, int out_channels) {
  const int ny = in.ny;
  const int nx = in.nx;
  const int pw = nx + 2;
  std::vector<std::vector<double>> padded;
  padded.reserve(static_cast<std::size_t>(in.channels));
  for (int c = 0; c < in.channels; ++c) padded.push_back(pad_plane(in.plane(c), ny, nx));

  FeatureMap out = FeatureMap::zeros(out_channels, ny, nx);
  for (int co = 0; co < out_channels; ++co) {
    auto o = out.plane(co);
    std::fill(o.begin(), o.end(), bias[co]);
    for (int ci = 0; ci < in.channels; ++ci) {
      const double* k = weights + (static_cast<std::size_t>(co) * in.channels + ci) * 9;
      const double* p = padded[static_cast<std::size_t>(ci)].data();
      for (int ky = 0; ky < 3; ++ky) {
        for (int kx = 0; kx < 3; ++kx) {
          const double w = k[ky * 3 + kx];
          for (int y = 0; y < ny; ++y) {
            double* orow = o.data() + y * nx;
            const double* prow = p + (y + ky) * pw + kx;
            for (int x = 0; x < nx; ++x) orow[x] += w * prow[x];
          }
        }
      }
    }
  }
  return out;
}

/// Parameter gradients of one conv layer, plus the input gradient if `grad_in`.
void conv3x3_backward(const FeatureMap& in, const double* weights, const FeatureMap& grad_out, double* grad_w,
                      double* grad_b, FeatureMap* grad_in) {
  const int ny = in.ny;
  const int nx = in.nx;
  const int pw = nx + 2;
  for (int co = 0; co < grad_out.channels; ++co) {
    double s = 0.0;
    for (double g : grad_out.plane(co)) s += g;
    grad_b[co] += s;
  }
  for (int ci = 0; ci < in.channels; ++ci) {
    const auto p = pad_plane(in.plane(ci), ny, nx);
    for (int co = 0; co < grad_out.channels; ++co) {
      const auto g = grad_out.plane(co);
      double* gw = grad_w + (static_cast<std::size_t>(co) * in.channels + ci) * 9;
      for (int ky = 0; ky < 3; ++ky) {
        for (int kx = 0; kx < 3; ++kx) {
          double acc = 0.0;
          for (int y = 0; y < ny; ++y) {
            const double* grow = g.data() + y * nx;
            const double* prow = p.data() + (y + ky) * pw + kx;
            for (int x = 0; x < nx; ++x) acc += grow[x] * prow[x];
          }
          gw[ky * 3 + kx] += acc;
        }
      }
    }
  }
  if (grad_in == nullptr) return;
  *grad_in = FeatureMap::zeros(in.channels, ny, nx);
  for (int co = 0; co < grad_out.channels; ++co) {
    const auto gp = pad_plane(grad_out.plane(co), ny, nx);
    for (int ci = 0; ci < in.channels; ++ci) {
      const double* k = weights + (static_cast<std::size_t>(co) * in.channels + ci) * 9;
      auto di = grad_in->plane(ci);
      for (int ky = 0; ky < 3; ++ky) {
        for (int kx = 0; kx < 3; ++kx) {
          const double w = k[ky * 3 + kx];
          for (int y = 0; y < ny; ++y) {
            double* drow = di.data() + y * nx;
            const double* grow = gp.data() + (y + 2 - ky) * pw + (2 - kx);
            for (int x = 0; x < nx; ++x) drow[x] += w * grow[x];
          }
        }
      }
    }
  }
}

double act(Activation a, double z) {
  if (a == Activation::Identity) return z;
  return z / (1.0 + std::exp(-z));
}

double act_derivative(Activation a, double z) {
  if (a == Activation::Identity) return 1.0;
  const double s = 1.0 / (1.0 + std::exp(-z));
  return s * (1.0 + z * (1.0 - s));
}

}  // namespace

std::string_view to_string(Activation a) { return a == Activation::SiLU ? "silu" : "identity"; }

Activation activation_from_string(std::string_view s) {
  if (s == "silu") return Activation::SiLU;
  if (s == "identity") return Activation::Identity;
  throw_config("edm", "unknown activation '" + std::string(s) + "'");
}

TinyConvDenoiser::TinyConvDenoiser(const TinyConvConfig& cfg) : cfg_(cfg) {
  if (cfg.cond_channels < 0 || cfg.width < 1) throw_config("edm", "invalid TinyConvDenoiser shape");
  const int shapes[3][2] = {{cfg.cond_channels + 2, cfg.width}, {cfg.width, cfg.width}, {cfg.width, 1}};
  std::size_t offset = 0;
  for (const auto& s : shapes) {
    LayerShape l{s[0], s[1], offset, offset + static_cast<std::size_t>(s[0]) * s[1] * 9};
    offset = l.bias_offset + static_cast<std::size_t>(s[1]);
    layers_.push_back(l);
  }
  params_.assign(offset, 0.0);
  Rng rng(cfg.seed);
  for (const auto& l : layers_) {
    const double scale = 1.0 / std::sqrt(9.0 * l.in_channels);
    for (std::size_t i = l.weight_offset; i < l.bias_offset; ++i) params_[i] = scale * rng.normal();
  }
}

FeatureMap TinyConvDenoiser::assemble_input(const FeatureMap& scaled_noisy, const FeatureMap& cond,
                                            double c_noise) const {
  if (scaled_noisy.channels != 1) throw_data("edm", "denoiser expects a single noisy plane");
  if (cond.channels != cfg_.cond_channels) {
    throw_data("edm", "denoiser built for " + std::to_string(cfg_.cond_channels) + " condition channels, got " +
                          std::to_string(cond.channels));
  }
  if (cond.channels > 0 && !cond.same_spatial(scaled_noisy)) throw_data("edm", "condition shape mismatch");
  FeatureMap in = FeatureMap::zeros(cfg_.cond_channels + 2, scaled_noisy.ny, scaled_noisy.nx);
  std::copy(scaled_noisy.data.begin(), scaled_noisy.data.end(), in.data.begin());
  std::copy(cond.data.begin(), cond.data.end(), in.data.begin() + static_cast<std::ptrdiff_t>(in.plane_size()));
  auto last = in.plane(in.channels - 1);
  std::fill(last.begin(), last.end(), c_noise);
  return in;
}

FeatureMap TinyConvDenoiser::forward(const FeatureMap& scaled_noisy, const FeatureMap& cond, double c_noise,
                                     Tape* tape) const {
  FeatureMap h = assemble_input(scaled_noisy, cond, c_noise);
  if (tape) {
    tape->inputs.clear();
    tape->pre.clear();
  }
  for (std::size_t li = 0; li < layers_.size(); ++li) {
    const auto& l = layers_[li];
    FeatureMap z = conv3x3(h, params_.data() + l.weight_offset, params_.data() + l.bias_offset, l.out_channels);
    if (tape) tape->inputs.push_back(std::move(h));
    if (li + 1 == layers_.size()) return z;
    if (tape) tape->pre.push_back(z);
    for (auto& v : z.data) v = act(cfg_.activation, v);
    h = std::move(z);
  }
  return h;
}

FeatureMap TinyConvDenoiser::evaluate(const FeatureMap& scaled_noisy, const FeatureMap& cond, double c_noise) const {
  return forward(scaled_noisy, cond, c_noise, nullptr);
}

void TinyConvDenoiser::backward(const Tape& tape, const FeatureMap& grad_out, std::span<double> grad_params) const {
  if (grad_params.size() != params_.size()) throw_data("edm", "gradient buffer has the wrong length");
  if (tape.inputs.size() != layers_.size()) throw_data("edm", "backward called without a forward tape");
  FeatureMap g = grad_out;
  for (std::size_t li = layers_.size(); li-- > 0;) {
    const auto& l = layers_[li];
    FeatureMap grad_in;
    conv3x3_backward(tape.inputs[li], params_.data() + l.weight_offset, g, grad_params.data() + l.weight_offset,
                     grad_params.data() + l.bias_offset, li > 0 ? &grad_in : nullptr);
    if (li == 0) break;
    const FeatureMap& z = tape.pre[li - 1];
    for (std::size_t i = 0; i < grad_in.data.size(); ++i) grad_in.data[i] *= act_derivative(cfg_.activation, z.data[i]);
    g = std::move(grad_in);
  }
}

void save_checkpoint(const TinyConvDenoiser& d, const nlohmann::json& metadata, const std::filesystem::path& path) {
  nlohmann::json layers = nlohmann::json::array();
  for (const auto& l : d.layers()) {
    layers.push_back({{"in", l.in_channels}, {"out", l.out_channels}, {"kernel", {3, 3}}});
  }
  const nlohmann::json header = {
      {"cond_channels", d.config().cond_channels},
      {"width", d.config().width},
      {"activation", std::string(to_string(d.config().activation))},
      {"seed", d.config().seed},
      {"layers", layers},
      {"parameter_count", d.parameter_count()},
      {"metadata", metadata},
  };
  const std::string text = header.dump();
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw_data("edm", "cannot open " + path.string() + " for writing");
  const std::uint32_t len = static_cast<std::uint32_t>(text.size());
  out.write(kCheckpointMagic, 4);
  out.write(reinterpret_cast<const char*>(&kCheckpointVersion), 4);
  out.write(reinterpret_cast<const char*>(&len), 4);
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  for (double p : d.parameters()) {
    const float f = static_cast<float>(p);
    out.write(reinterpret_cast<const char*>(&f), 4);
  }
  if (!out) throw_data("edm", "write failed for " + path.string());
}

LoadedCheckpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw_data("edm", "cannot open checkpoint " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  const std::string bytes = ss.str();
  if (bytes.size() < 12 || std::memcmp(bytes.data(), kCheckpointMagic, 4) != 0) {
    throw_data("edm", "not a DENZ checkpoint: " + path.string());
  }
  std::uint32_t version = 0;
  std::uint32_t len = 0;
  std::memcpy(&version, bytes.data() + 4, 4);
  std::memcpy(&len, bytes.data() + 8, 4);
  if (version != kCheckpointVersion) throw_data("edm", "unknown checkpoint version " + std::to_string(version));
  if (bytes.size() - 12 < len) throw_data("edm", "truncated checkpoint header");

  TinyConvConfig cfg;
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(bytes.substr(12, len));
    cfg.cond_channels = header.at("cond_channels").get<int>();
    cfg.width = header.at("width").get<int>();
    cfg.activation = activation_from_string(header.at("activation").get<std::string>());
    cfg.seed = header.at("seed").get<std::uint64_t>();
  } catch (const nlohmann::json::exception& e) {
    throw_data("edm", std::string("malformed checkpoint header: ") + e.what());
  }
  TinyConvDenoiser d(cfg);
  const std::size_t payload = bytes.size() - 12 - len;
  if (payload != 4 * d.parameter_count()) throw_data("edm", "checkpoint payload does not match layer shapes");
  auto params = d.parameters();
  for (std::size_t i = 0; i < params.size(); ++i) {
    float f;
    std::memcpy(&f, bytes.data() + 12 + len + 4 * i, 4);
    params[i] = static_cast<double>(f);
  }
  return {std::move(d), header.value("metadata", nlohmann::json::object())};
}

}  // namespace resdiff
