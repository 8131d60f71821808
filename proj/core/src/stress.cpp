#include "icoseg/stress.hpp"

#include <cmath>

#include "json.hpp"

#include "icoseg/train.hpp"

namespace icoseg {

std::vector<Rotation> stress_rotations(std::uint64_t seed, int n_rotations,
                                       int n_repeats) {
  if (n_rotations < 1 || n_repeats < 1)
    throw ConfigError("stress protocol needs positive rotation/repeat counts");
  RngState rng(seed);
  std::vector<Rotation> out;
  out.reserve(static_cast<std::size_t>(n_rotations) * n_repeats);
  for (int rep = 0; rep < n_repeats; ++rep)
    for (int k = 0; k < n_rotations; ++k)
      out.push_back(sample_rotation_zyx(2.0 * kPi, kPi, 2.0 * kPi, rng));
  return out;
}

StressReport run_stress(SphericalUNet& model, const GeometryBundle& gb,
                        const std::vector<SegSample>& samples,
                        int n_rotations, int n_repeats, std::uint64_t seed) {
  if (samples.empty()) throw DataError("stress evaluation needs samples");

  StressReport report;
  report.n_rotations = n_rotations;
  report.n_repeats = n_repeats;
  report.seed = seed;
  report.samples = samples.size();
  report.output_rank = gb.output_rank;

  {
    const MiouResult base = evaluate_miou(model, gb, samples);
    report.base_defined = base.defined;
    report.base_miou = base.defined ? base.miou : 0.0;
  }

  const std::vector<Rotation> rotations =
      stress_rotations(seed, n_rotations, n_repeats);

  double so3_sum = 0.0;
  int so3_count = 0;
  for (const Rotation& g : rotations) {
    const auto fwd_map = nearest_index_map(g, gb.output_mesh);
    const auto inv_map = nearest_index_map(g.inverse(), gb.output_mesh);

    IouAccumulator acc(model.cfg.num_classes);
    for (const auto& s : samples) {
      const Matrix feats_rot = gather_rows(s.features, fwd_map);
      const Matrix tokens = model.project_tokens(feats_rot, gb, nullptr);
      const Matrix logits = model.forward(tokens, gb, nullptr);
      const std::vector<std::int32_t> pred_rot = argmax_labels(logits);
      // Pull the prediction back to the canonical frame and score it
      // against the untouched labels.
      std::vector<std::int32_t> pred_canon(pred_rot.size());
      for (std::size_t t = 0; t < pred_canon.size(); ++t)
        pred_canon[t] = pred_rot[static_cast<std::size_t>(inv_map[t])];
      acc.add(pred_canon, s.labels);
    }
    const MiouResult m = finalize_miou(acc);

    StressRotationEntry entry;
    entry.quaternion = g.q;
    entry.provenance = static_cast<std::int32_t>(g.provenance);
    entry.angle_deg = g.angle() * 180.0 / kPi;
    entry.defined = m.defined;
    entry.miou = m.defined ? m.miou : 0.0;
    report.rotations.push_back(entry);

    if (m.defined) {
      so3_sum += m.miou;
      ++so3_count;
    }
  }
  if (so3_count > 0) {
    report.so3_defined = true;
    report.so3_miou = so3_sum / static_cast<double>(so3_count);
  }
  return report;
}

std::string StressReport::to_json() const {
  nlohmann::json j;
  j["protocol"] = {{"n_rotations", n_rotations},
                   {"n_repeats", n_repeats},
                   {"seed", seed},
                   {"samples", samples},
                   {"output_rank", output_rank}};
  j["base_miou"] = base_defined ? nlohmann::json(base_miou) : nlohmann::json();
  j["so3_miou"] = so3_defined ? nlohmann::json(so3_miou) : nlohmann::json();
  nlohmann::json rots = nlohmann::json::array();
  for (const auto& r : rotations) {
    nlohmann::json e;
    e["quaternion"] = r.quaternion;
    e["provenance"] = r.provenance;
    e["angle_deg"] = r.angle_deg;
    e["miou"] = r.defined ? nlohmann::json(r.miou) : nlohmann::json();
    rots.push_back(e);
  }
  j["rotations"] = rots;
  return j.dump(2);
}

}  // namespace icoseg
