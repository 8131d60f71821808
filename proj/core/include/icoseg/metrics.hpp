#pragma once

// Mean intersection-over-union on icosphere nodes. Only nodes whose ground
// truth label is non-zero participate, classes 1..num_classes-1 are scored,
// classes absent from both prediction and truth are skipped, and the result
// is scaled to percent. A sample with no labeled node yields defined=false.

#include <cstdint>
#include <vector>

#include "icoseg/common.hpp"

namespace icoseg {

struct IouAccumulator {
  int num_classes = 0;
  std::vector<std::int64_t> intersection, pred_count, label_count;

  explicit IouAccumulator(int num_classes);
  void add(const std::vector<std::int32_t>& pred,
           const std::vector<std::int32_t>& labels);
};

struct MiouResult {
  bool defined = false;
  double miou = 0.0;                  // percent
  std::vector<double> per_class_iou;  // percent; -1 when the class is absent
};

MiouResult finalize_miou(const IouAccumulator& acc);
MiouResult miou(const std::vector<std::int32_t>& pred,
                const std::vector<std::int32_t>& labels, int num_classes);

std::vector<std::int32_t> argmax_labels(const Matrix& logits);

}  // namespace icoseg
