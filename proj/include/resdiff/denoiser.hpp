#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "resdiff/edm.hpp"

namespace resdiff {

enum class Activation { SiLU, Identity };

std::string_view to_string(Activation a);
Activation activation_from_string(std::string_view s);

struct TinyConvConfig {
  int cond_channels = 0;
  int width = 16;
  Activation activation = Activation::SiLU;
  std::uint64_t seed = 0;
};

/// Three 3x3 "same" convolutions, (cond + 2) -> width -> width -> 1, with an
/// elementwise nonlinearity between layers. Input channel 0 is the scaled
/// noisy residual, channels 1..cond are the condition, the last channel is
/// c_noise broadcast as a constant plane.
class TinyConvDenoiser final : public Denoiser {
public:
  struct LayerShape {
    int in_channels;
    int out_channels;
    std::size_t weight_offset;  // [out][in][3][3]
    std::size_t bias_offset;
  };

  /// Intermediate activations kept for the backward pass.
  struct Tape {
    std::vector<FeatureMap> inputs;  // input to each layer
    std::vector<FeatureMap> pre;     // pre-activation of hidden layers
  };

  explicit TinyConvDenoiser(const TinyConvConfig& cfg);

  [[nodiscard]] FeatureMap evaluate(const FeatureMap& scaled_noisy, const FeatureMap& cond,
                                    double c_noise) const override;

  FeatureMap forward(const FeatureMap& scaled_noisy, const FeatureMap& cond, double c_noise, Tape* tape) const;
  /// Accumulates d(loss)/d(params) into `grad_params` given d(loss)/d(output).
  void backward(const Tape& tape, const FeatureMap& grad_out, std::span<double> grad_params) const;

  [[nodiscard]] const TinyConvConfig& config() const { return cfg_; }
  [[nodiscard]] const std::vector<LayerShape>& layers() const { return layers_; }
  std::span<double> parameters() { return params_; }
  [[nodiscard]] std::span<const double> parameters() const { return params_; }
  [[nodiscard]] std::size_t parameter_count() const { return params_.size(); }

private:
  FeatureMap assemble_input(const FeatureMap& scaled_noisy, const FeatureMap& cond, double c_noise) const;

  TinyConvConfig cfg_;
  std::vector<LayerShape> layers_;
  std::vector<double> params_;
};

/// Checkpoint container: "DENZ", u32 version, u32 header length, JSON header
/// (layer shapes, seed, activation, caller metadata), binary32 parameters.
void save_checkpoint(const TinyConvDenoiser& d, const nlohmann::json& metadata, const std::filesystem::path& path);

struct LoadedCheckpoint {
  TinyConvDenoiser denoiser;
  nlohmann::json metadata;
};

LoadedCheckpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace resdiff
