#pragma once

// Single-sample Adam training with pose augmentation. Each step draws one
// sample, optionally permutes it by an exact yaw symmetry (or a continuous
// nearest-node yaw), optionally mirrors it, projects to tokens, and takes a
// gradient step on seg + lambda * consistency loss. The consistency branch
// reruns the backbone on rotation-permuted tokens and regresses onto the
// frozen rotated logits of the clean pass, so its gradient flows only
// through the rotated trace.
//
// Epoch records are emitted as line-delimited JSON. A non-finite loss
// aborts training with DataError (the tools map it to exit code 3).

#include <cstdint>
#include <map>
#include <ostream>
#include <string>
#include <vector>

#include "icoseg/config.hpp"
#include "icoseg/dataset.hpp"
#include "icoseg/metrics.hpp"
#include "icoseg/model.hpp"

namespace icoseg {

struct Adam {
  double lr = 1e-4, beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
  std::int64_t t = 0;
  std::map<std::string, std::vector<double>> m, v;

  void step(SphericalUNet& model);
};

struct EpochRecord {
  int epoch = 0;
  double seg_loss = 0.0;
  double eq_loss = 0.0;
  double total_loss = 0.0;
  double val_miou = -1.0;  // -1 when no validation split
  bool val_defined = false;
  double wall_seconds = 0.0;
};

struct TrainResult {
  std::vector<EpochRecord> epochs;
  int steps = 0;
};

// Pooled mIoU of the model on a set of samples (no augmentation).
MiouResult evaluate_miou(SphericalUNet& model, const GeometryBundle& gb,
                         const std::vector<SegSample>& samples);

TrainResult train_model(SphericalUNet& model, const GeometryBundle& gb,
                        const std::vector<SegSample>& dataset,
                        const Config& config, std::ostream* log);

}  // namespace icoseg
