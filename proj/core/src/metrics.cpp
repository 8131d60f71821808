#include "icoseg/metrics.hpp"

namespace icoseg {

IouAccumulator::IouAccumulator(int classes) : num_classes(classes) {
  if (classes < 2) throw ConfigError("IoU needs at least 2 classes");
  intersection.assign(classes, 0);
  pred_count.assign(classes, 0);
  label_count.assign(classes, 0);
}

void IouAccumulator::add(const std::vector<std::int32_t>& pred,
                         const std::vector<std::int32_t>& labels) {
  if (pred.size() != labels.size())
    throw ConfigError("IoU: prediction/label length mismatch");
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const std::int32_t y = labels[i];
    const std::int32_t p = pred[i];
    if (y < 0 || y >= num_classes || p < 0 || p >= num_classes)
      throw DataError("IoU: class id out of range");
    if (y == 0) continue;  // unlabeled nodes are excluded entirely
    label_count[y] += 1;
    pred_count[p] += 1;
    if (p == y) intersection[y] += 1;
  }
}

MiouResult finalize_miou(const IouAccumulator& acc) {
  MiouResult out;
  out.per_class_iou.assign(acc.num_classes, -1.0);
  double total = 0.0;
  int counted = 0;
  for (int c = 1; c < acc.num_classes; ++c) {
    const std::int64_t uni =
        acc.pred_count[c] + acc.label_count[c] - acc.intersection[c];
    if (uni <= 0) continue;  // class absent from both sides
    const double iou =
        100.0 * static_cast<double>(acc.intersection[c]) / static_cast<double>(uni);
    out.per_class_iou[c] = iou;
    total += iou;
    ++counted;
  }
  if (counted > 0) {
    out.defined = true;
    out.miou = total / static_cast<double>(counted);
  }
  return out;
}

MiouResult miou(const std::vector<std::int32_t>& pred,
                const std::vector<std::int32_t>& labels, int num_classes) {
  IouAccumulator acc(num_classes);
  acc.add(pred, labels);
  return finalize_miou(acc);
}

std::vector<std::int32_t> argmax_labels(const Matrix& logits) {
  std::vector<std::int32_t> out(logits.rows);
  for (std::size_t i = 0; i < logits.rows; ++i) {
    const double* row = logits.row(i);
    int best = 0;
    for (std::size_t c = 1; c < logits.cols; ++c)
      if (row[c] > row[best]) best = static_cast<int>(c);
    out[i] = best;
  }
  return out;
}

}  // namespace icoseg
