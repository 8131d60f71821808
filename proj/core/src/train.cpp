#include "icoseg/train.hpp"

#include <chrono>
#include <cmath>

#include "json.hpp"

#include "icoseg/metrics.hpp"

namespace icoseg {

void Adam::step(SphericalUNet& model) {
  t += 1;
  const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(t));
  const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(t));
  model.visit_params([this, bc1, bc2](const std::string& name,
                                      const std::vector<std::uint64_t>&,
                                      std::vector<double>& value,
                                      std::vector<double>& grad) {
    auto& m1 = m[name];
    auto& v2 = v[name];
    if (m1.size() != value.size()) m1.assign(value.size(), 0.0);
    if (v2.size() != value.size()) v2.assign(value.size(), 0.0);
    for (std::size_t i = 0; i < value.size(); ++i) {
      const double g = grad[i];
      m1[i] = beta1 * m1[i] + (1.0 - beta1) * g;
      v2[i] = beta2 * v2[i] + (1.0 - beta2) * g * g;
      const double mhat = m1[i] / bc1;
      const double vhat = v2[i] / bc2;
      value[i] -= lr * mhat / (std::sqrt(vhat) + eps);
    }
  });
}

MiouResult evaluate_miou(SphericalUNet& model, const GeometryBundle& gb,
                         const std::vector<SegSample>& samples) {
  IouAccumulator acc(model.cfg.num_classes);
  for (const auto& s : samples) {
    const Matrix tokens = model.project_tokens(s.features, gb, nullptr);
    const Matrix logits = model.forward(tokens, gb, nullptr);
    acc.add(argmax_labels(logits), s.labels);
  }
  return finalize_miou(acc);
}

namespace {

struct StepLosses {
  double seg = 0.0, eq = 0.0, total = 0.0;
};

StepLosses train_step(SphericalUNet& model, const GeometryBundle& gb,
                      const Matrix& features,
                      const std::vector<std::int32_t>& labels, Adam& opt,
                      RngState& rng) {
  const ModelConfig& cfg = model.cfg;
  model.zero_grad();

  SphericalUNet::ProjCtx projctx;
  const Matrix x0 = model.project_tokens(features, gb, &projctx);

  SphericalUNet::Trace trace1;
  const Matrix z = model.forward(x0, gb, &trace1);
  SegLossResult seg = seg_loss(z, labels, cfg.num_classes);

  StepLosses losses;
  losses.seg = seg.value;

  Matrix gtokens = model.backward(trace1, seg.glogits, gb);

  if (cfg.l_eq) {
    const Rotation g = sample_rotation_uniform(rng);
    const RotationMapSet maps =
        build_rotation_maps(g, gb.at(gb.token_rank).mesh, gb.output_mesh);
    const Matrix x0p = gather_rows(x0, maps.idx_proj);

    SphericalUNet::Trace trace2;
    const Matrix z_rot = model.forward(x0p, gb, &trace2);
    const Matrix z_tgt = gather_rows(z, maps.idx_img);  // frozen target
    EqLossResult eq = eq_loss_term(z_rot, z_tgt);
    losses.eq = eq.value;

    Matrix g_zrot = eq.g_zrot;
    for (double& v : g_zrot.a) v *= cfg.lambda_eq;
    const Matrix gx0p = model.backward(trace2, g_zrot, gb);
    const Matrix scattered = scatter_rows_add(gx0p, maps.idx_proj, x0.rows);
    for (std::size_t i = 0; i < gtokens.a.size(); ++i)
      gtokens.a[i] += scattered.a[i];
  }

  losses.total = losses.seg + cfg.lambda_eq * losses.eq;
  if (!std::isfinite(losses.total))
    throw DataError("training diverged: non-finite loss");

  model.project_backward(projctx, gtokens);
  opt.step(model);
  return losses;
}

}  // namespace

TrainResult train_model(SphericalUNet& model, const GeometryBundle& gb,
                        const std::vector<SegSample>& dataset,
                        const Config& config, std::ostream* log) {
  config.model.validate();
  config.train.validate();
  if (dataset.empty()) throw DataError("training dataset is empty");

  const TrainConfig& tc = config.train;
  const std::size_t n_val =
      static_cast<std::size_t>(tc.val_fraction * static_cast<double>(dataset.size()));
  const std::size_t n_train = dataset.size() - n_val;
  if (n_train == 0) throw ConfigError("validation split leaves no training data");

  std::vector<SegSample> val(dataset.begin() + static_cast<std::ptrdiff_t>(n_train),
                             dataset.end());

  RngState rng(tc.seed);
  Adam opt;
  opt.lr = tc.lr;
  opt.beta1 = tc.beta1;
  opt.beta2 = tc.beta2;
  opt.eps = tc.adam_eps;

  // Exact augmentation permutations of the output mesh: the five yaw
  // symmetries about the polar axis, and the y -> -y mirror.
  std::vector<std::vector<std::int32_t>> yaw_maps;
  for (int k = 0; k < 5; ++k) {
    const Rotation r =
        Rotation::from_axis_angle({0, 0, 1}, 2.0 * kPi * k / 5.0);
    yaw_maps.push_back(nearest_index_map(r, gb.output_mesh));
  }
  const std::vector<std::int32_t> flip_map = mirror_index_map(gb.output_mesh);

  TrainResult result;
  std::vector<std::size_t> order(n_train);
  for (std::size_t i = 0; i < n_train; ++i) order[i] = i;

  for (int epoch = 1; epoch <= tc.epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    // Fisher-Yates with the training rng keeps runs bit-reproducible.
    for (std::size_t i = n_train; i > 1; --i) {
      const std::size_t j = rng.uniform_index(i);
      std::swap(order[i - 1], order[j]);
    }

    double seg_sum = 0.0, eq_sum = 0.0, total_sum = 0.0;
    for (const std::size_t idx : order) {
      Matrix feats = dataset[idx].features;
      std::vector<std::int32_t> labels = dataset[idx].labels;

      if (tc.yaw_aug == "symmetry") {
        const auto k = rng.uniform_index(5);
        if (k > 0) {
          const auto& map = yaw_maps[k];
          feats = gather_rows(feats, map);
          std::vector<std::int32_t> rotated(labels.size());
          for (std::size_t i = 0; i < map.size(); ++i)
            rotated[i] = labels[static_cast<std::size_t>(map[i])];
          labels = std::move(rotated);
        }
      } else if (tc.yaw_aug == "continuous") {
        const Rotation r =
            Rotation::from_axis_angle({0, 0, 1}, rng.uniform(0.0, 2.0 * kPi));
        const auto map = nearest_index_map(r, gb.output_mesh);
        feats = gather_rows(feats, map);
        std::vector<std::int32_t> rotated(labels.size());
        for (std::size_t i = 0; i < map.size(); ++i)
          rotated[i] = labels[static_cast<std::size_t>(map[i])];
        labels = std::move(rotated);
      }
      if (tc.flip_aug && rng.uniform() < 0.5) {
        feats = gather_rows(feats, flip_map);
        std::vector<std::int32_t> mirrored(labels.size());
        for (std::size_t i = 0; i < flip_map.size(); ++i)
          mirrored[i] = labels[static_cast<std::size_t>(flip_map[i])];
        labels = std::move(mirrored);
      }

      const StepLosses losses =
          train_step(model, gb, feats, labels, opt, rng);
      seg_sum += losses.seg;
      eq_sum += losses.eq;
      total_sum += losses.total;
      result.steps += 1;
    }

    EpochRecord rec;
    rec.epoch = epoch;
    const double inv = 1.0 / static_cast<double>(n_train);
    rec.seg_loss = seg_sum * inv;
    rec.eq_loss = eq_sum * inv;
    rec.total_loss = total_sum * inv;
    if (!val.empty()) {
      const MiouResult vm = evaluate_miou(model, gb, val);
      rec.val_defined = vm.defined;
      rec.val_miou = vm.defined ? vm.miou : -1.0;
    }
    rec.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
            .count();
    result.epochs.push_back(rec);

    if (log) {
      nlohmann::json j;
      j["epoch"] = rec.epoch;
      j["seg_loss"] = rec.seg_loss;
      j["eq_loss"] = rec.eq_loss;
      j["total_loss"] = rec.total_loss;
      if (rec.val_defined) j["val_miou"] = rec.val_miou;
      j["wall_seconds"] = rec.wall_seconds;
      (*log) << j.dump() << "\n" << std::flush;
    }
  }
  return result;
}

}  // namespace icoseg
