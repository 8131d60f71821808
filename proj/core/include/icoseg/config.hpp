#pragma once

// Flat key=value configuration shared by the tools. Unknown keys are
// rejected (ConfigError), '#' starts a comment, values never contain
// spaces. default_config_text() documents every key with its default.

#include <cmath>
#include <cstdint>
#include <string>

#include "icoseg/common.hpp"

namespace icoseg {

struct ModelConfig {
  int output_rank = 5;       // full-resolution icosphere rank
  int num_stages = 3;        // encoder stages at/below the token rank
  int dim = 32;              // token width D
  int heads = 4;             // attention heads H
  int blocks_per_stage = 2;  // transformer blocks per stage
  int num_classes = 14;      // class 0 is ignore
  int anchors = 3;           // tangent anchors F
  int bins = 16;             // radial bins B
  int fourier_order = 6;     // angular modes M

  bool abs_lat_pe = false;     // absolute latitude positional encoding
  bool quadrature_attn = true; // log-area term in attention logits
  bool gauge_bias = true;      // learned geometric attention bias
  bool geo_sampling = true;    // geodesic-aware pooling/upsampling
  bool l_eq = true;            // rotation-consistency loss term

  double lambda_eq = 0.05;
  double scale_init = std::log(10.0);  // per-head log temperature init

  int token_rank() const { return output_rank - 1; }
  int effective_stages() const {
    return std::min(num_stages, token_rank());
  }
  int bottleneck_rank() const { return token_rank() - effective_stages(); }
  int input_channels() const { return abs_lat_pe ? 5 : 3; }

  void validate() const;  // throws ConfigError
};

struct TrainConfig {
  double lr = 1e-4;
  double beta1 = 0.9, beta2 = 0.999, adam_eps = 1e-8;
  int epochs = 100;
  std::uint64_t seed = 1234;
  double val_fraction = 0.2;
  std::string yaw_aug = "symmetry";  // symmetry | continuous | off
  bool flip_aug = true;
  std::string init = "glorot";  // glorot | zeros

  void validate() const;
};

struct Config {
  ModelConfig model;
  TrainConfig train;
};

Config parse_config_text(const std::string& text);
Config load_config(const std::string& path);  // missing file -> ConfigError
std::string config_to_text(const Config& c);
std::string default_config_text();

}  // namespace icoseg
