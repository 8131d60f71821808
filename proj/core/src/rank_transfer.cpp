#include "icoseg/rank_transfer.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "icoseg/container.hpp"
#include "icoseg/geometry.hpp"

namespace icoseg {

namespace {

double mean_geodesic_edge_length(const IcosphereMesh& mesh) {
  double total = 0.0;
  std::size_t count = 0;
  for (std::size_t i = 0; i < mesh.vertex_count(); ++i) {
    for (std::int32_t j : mesh.neighbors[i]) {
      if (static_cast<std::size_t>(j) <= i) continue;
      total += geodesic_distance(mesh.vertices[i], mesh.vertices[j]);
      ++count;
    }
  }
  if (count == 0) throw DataError("mesh has no edges");
  return total / static_cast<double>(count);
}

}  // namespace

RankTransfer build_rank_transfer(const IcosphereMesh& fine,
                                 const IcosphereMesh& coarse, double sigma) {
  if (fine.rank <= coarse.rank)
    throw ConfigError("rank transfer requires fine rank > coarse rank");

  RankTransfer t;
  t.fine_rank = fine.rank;
  t.coarse_rank = coarse.rank;
  t.fine_nodes = fine.vertex_count();
  t.coarse_nodes = coarse.vertex_count();
  t.sigma = sigma > 0.0 ? sigma : mean_geodesic_edge_length(coarse);

  t.parent.assign(t.fine_nodes, -1);
  t.hard_count.assign(t.coarse_nodes, 0);
  t.tie_offset.assign(t.fine_nodes + 1, 0);
  t.up_offset.assign(t.fine_nodes + 1, 0);

  const double two_sigma2 = 2.0 * t.sigma * t.sigma;

  std::vector<std::int32_t> tied;
  for (std::size_t i = 0; i < t.fine_nodes; ++i) {
    const Vec3& p = fine.vertices[i];

    double dmax = -2.0;
    for (std::size_t c = 0; c < t.coarse_nodes; ++c)
      dmax = std::max(dmax, dot(p, coarse.vertices[c]));

    tied.clear();
    for (std::size_t c = 0; c < t.coarse_nodes; ++c)
      if (dot(p, coarse.vertices[c]) >= dmax - kParentTieTol)
        tied.push_back(static_cast<std::int32_t>(c));
    // tied is ascending by construction; lowest index is the hard parent.
    t.parent[i] = tied.front();
    t.hard_count[tied.front()] += 1;

    const double mu = 1.0 / static_cast<double>(tied.size());
    for (std::int32_t c : tied) {
      t.tie_index.push_back(c);
      t.tie_weight.push_back(mu);
    }
    t.tie_offset[i + 1] = static_cast<std::int32_t>(t.tie_index.size());

    // Upsample support: tied parents plus their coarse 1-rings.
    std::set<std::int32_t> support(tied.begin(), tied.end());
    for (std::int32_t c : tied)
      for (std::int32_t n : coarse.neighbors[c]) support.insert(n);

    double wsum = 0.0;
    const std::size_t first = t.up_index.size();
    for (std::int32_t c : support) {
      const double d = geodesic_distance(p, coarse.vertices[c]);
      const double w = std::exp(-(d * d) / two_sigma2);
      t.up_index.push_back(c);
      t.up_weight.push_back(w);
      wsum += w;
    }
    if (!(wsum > 0.0)) throw DataError("upsample kernel weights vanished");
    for (std::size_t s = first; s < t.up_weight.size(); ++s)
      t.up_weight[s] /= wsum;
    t.up_offset[i + 1] = static_cast<std::int32_t>(t.up_index.size());
  }
  return t;
}

Matrix downsample(const RankTransfer& t, const Matrix& x,
                  const std::vector<double>& fine_omega, bool geo) {
  if (x.rows != t.fine_nodes)
    throw ConfigError("downsample: input rows do not match fine nodes");
  const std::size_t C = x.cols;
  Matrix y(t.coarse_nodes, C);

  if (geo) {
    if (fine_omega.size() != t.fine_nodes)
      throw ConfigError("downsample: omega length mismatch");
    std::vector<double> wsum(t.coarse_nodes, 0.0);
    for (std::size_t i = 0; i < t.fine_nodes; ++i) {
      for (std::int32_t s = t.tie_offset[i]; s < t.tie_offset[i + 1]; ++s) {
        const std::int32_t c = t.tie_index[s];
        const double w = fine_omega[i] * t.tie_weight[s];
        wsum[c] += w;
        const double* xr = x.row(i);
        double* yr = y.row(c);
        for (std::size_t d = 0; d < C; ++d) yr[d] += w * xr[d];
      }
    }
    for (std::size_t c = 0; c < t.coarse_nodes; ++c) {
      if (!(wsum[c] > 0.0)) throw DataError("downsample: empty coarse cell");
      double* yr = y.row(c);
      for (std::size_t d = 0; d < C; ++d) yr[d] /= wsum[c];
    }
  } else {
    for (std::size_t i = 0; i < t.fine_nodes; ++i) {
      const std::int32_t c = t.parent[i];
      const double* xr = x.row(i);
      double* yr = y.row(c);
      for (std::size_t d = 0; d < C; ++d) yr[d] += xr[d];
    }
    for (std::size_t c = 0; c < t.coarse_nodes; ++c) {
      if (t.hard_count[c] == 0) throw DataError("downsample: empty coarse cell");
      const double inv = 1.0 / static_cast<double>(t.hard_count[c]);
      double* yr = y.row(c);
      for (std::size_t d = 0; d < C; ++d) yr[d] *= inv;
    }
  }
  return y;
}

Matrix downsample_backward(const RankTransfer& t, const Matrix& gy,
                           const std::vector<double>& fine_omega, bool geo) {
  if (gy.rows != t.coarse_nodes)
    throw ConfigError("downsample_backward: gy rows mismatch");
  const std::size_t C = gy.cols;
  Matrix gx(t.fine_nodes, C);

  if (geo) {
    std::vector<double> wsum(t.coarse_nodes, 0.0);
    for (std::size_t i = 0; i < t.fine_nodes; ++i)
      for (std::int32_t s = t.tie_offset[i]; s < t.tie_offset[i + 1]; ++s)
        wsum[t.tie_index[s]] += fine_omega[i] * t.tie_weight[s];
    for (std::size_t i = 0; i < t.fine_nodes; ++i) {
      double* gr = gx.row(i);
      for (std::int32_t s = t.tie_offset[i]; s < t.tie_offset[i + 1]; ++s) {
        const std::int32_t c = t.tie_index[s];
        const double w = fine_omega[i] * t.tie_weight[s] / wsum[c];
        const double* gyr = gy.row(c);
        for (std::size_t d = 0; d < C; ++d) gr[d] += w * gyr[d];
      }
    }
  } else {
    for (std::size_t i = 0; i < t.fine_nodes; ++i) {
      const std::int32_t c = t.parent[i];
      const double inv = 1.0 / static_cast<double>(t.hard_count[c]);
      const double* gyr = gy.row(c);
      double* gr = gx.row(i);
      for (std::size_t d = 0; d < C; ++d) gr[d] = inv * gyr[d];
    }
  }
  return gx;
}

Matrix upsample(const RankTransfer& t, const Matrix& y, bool geo) {
  if (y.rows != t.coarse_nodes)
    throw ConfigError("upsample: input rows do not match coarse nodes");
  const std::size_t C = y.cols;
  Matrix z(t.fine_nodes, C);

  if (geo) {
    for (std::size_t i = 0; i < t.fine_nodes; ++i) {
      double* zr = z.row(i);
      for (std::int32_t s = t.up_offset[i]; s < t.up_offset[i + 1]; ++s) {
        const double w = t.up_weight[s];
        const double* yr = y.row(t.up_index[s]);
        for (std::size_t d = 0; d < C; ++d) zr[d] += w * yr[d];
      }
    }
  } else {
    for (std::size_t i = 0; i < t.fine_nodes; ++i) {
      const double* yr = y.row(t.parent[i]);
      double* zr = z.row(i);
      for (std::size_t d = 0; d < C; ++d) zr[d] = yr[d];
    }
  }
  return z;
}

Matrix upsample_backward(const RankTransfer& t, const Matrix& gz, bool geo) {
  if (gz.rows != t.fine_nodes)
    throw ConfigError("upsample_backward: gz rows mismatch");
  const std::size_t C = gz.cols;
  Matrix gy(t.coarse_nodes, C);

  if (geo) {
    for (std::size_t i = 0; i < t.fine_nodes; ++i) {
      const double* gr = gz.row(i);
      for (std::int32_t s = t.up_offset[i]; s < t.up_offset[i + 1]; ++s) {
        const double w = t.up_weight[s];
        double* gyr = gy.row(t.up_index[s]);
        for (std::size_t d = 0; d < C; ++d) gyr[d] += w * gr[d];
      }
    }
  } else {
    for (std::size_t i = 0; i < t.fine_nodes; ++i) {
      const double* gr = gz.row(i);
      double* gyr = gy.row(t.parent[i]);
      for (std::size_t d = 0; d < C; ++d) gyr[d] += gr[d];
    }
  }
  return gy;
}

void write_rank_transfer(const std::string& path, const RankTransfer& t) {
  Container c;
  c.kind = "transfer";
  c.meta["fine_rank"] = std::to_string(t.fine_rank);
  c.meta["coarse_rank"] = std::to_string(t.coarse_rank);
  c.meta["sigma"] = f64_to_string(t.sigma);
  c.add_i32("parent", {t.fine_nodes}, t.parent.data());
  c.add_i32("hard_count", {t.coarse_nodes}, t.hard_count.data());
  c.add_i32("tie_offset", {t.tie_offset.size()}, t.tie_offset.data());
  c.add_i32("tie_index", {t.tie_index.size()}, t.tie_index.data());
  c.add_f64("tie_weight", {t.tie_weight.size()}, t.tie_weight.data());
  c.add_i32("up_offset", {t.up_offset.size()}, t.up_offset.data());
  c.add_i32("up_index", {t.up_index.size()}, t.up_index.data());
  c.add_f64("up_weight", {t.up_weight.size()}, t.up_weight.data());
  write_container(path, c);
}

RankTransfer read_rank_transfer(const std::string& path) {
  const Container c = read_container(path, "transfer");
  RankTransfer t;
  t.fine_rank = static_cast<int>(c.meta_i64("fine_rank"));
  t.coarse_rank = static_cast<int>(c.meta_i64("coarse_rank"));
  t.sigma = c.meta_f64("sigma");
  t.parent = c.get_i32("parent");
  t.hard_count = c.get_i32("hard_count");
  t.tie_offset = c.get_i32("tie_offset");
  t.tie_index = c.get_i32("tie_index");
  t.tie_weight = c.get_f64("tie_weight");
  t.up_offset = c.get_i32("up_offset");
  t.up_index = c.get_i32("up_index");
  t.up_weight = c.get_f64("up_weight");
  t.fine_nodes = t.parent.size();
  t.coarse_nodes = t.hard_count.size();
  return t;
}

}  // namespace icoseg
