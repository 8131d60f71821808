#include "icoseg/geometry.hpp"

#include <algorithm>
#include <cmath>

#include "icoseg/container.hpp"

namespace icoseg {

double geodesic_distance(const Vec3& p, const Vec3& q) {
  if (!is_unit(p) || !is_unit(q))
    throw DataError("geodesic_distance requires unit vectors");
  // atan2 of the chord against the midpoint norm is accurate at both ends
  // of [0, pi], unlike acos of the dot product, which loses ~1e-8 near 0.
  const Vec3 diff = sub(p, q);
  const Vec3 sum = add(p, q);
  return 2.0 * std::atan2(norm(diff), norm(sum));
}

TangentProjection tangent_project(const Vec3& p, const Vec3& q) {
  TangentProjection out;
  const Vec3 raw = sub(q, scale(p, dot(p, q)));
  out.magnitude = norm(raw);
  if (out.magnitude <= kTangentEps) {
    out.degenerate = true;
    return out;
  }
  out.direction = scale(raw, 1.0 / out.magnitude);
  return out;
}

RelativeAngle relative_angle(const Vec3& p_i, const Vec3& p_j,
                             const Vec3& p_a) {
  RelativeAngle out;
  const TangentProjection tj = tangent_project(p_i, p_j);
  const TangentProjection ta = tangent_project(p_i, p_a);
  if (tj.degenerate || ta.degenerate) {
    out.degenerate = true;
    return out;
  }
  const Vec3 t_perp = cross(p_i, ta.direction);
  out.alpha = std::atan2(dot(tj.direction, t_perp), dot(tj.direction, ta.direction));
  return out;
}

RadialBin radial_bins(double delta_hat, int bins) {
  if (bins < 2) throw ConfigError("radial_bins requires at least 2 bins");
  if (!(delta_hat >= 0.0 && delta_hat <= 1.0))
    throw DataError("radial_bins: delta_hat outside [0, 1]");
  RadialBin out;
  const double t = delta_hat * static_cast<double>(bins - 1);
  out.lo = static_cast<int>(std::floor(t));
  if (out.lo > bins - 1) out.lo = bins - 1;
  out.hi = std::min(out.lo + 1, bins - 1);
  out.frac = t - static_cast<double>(out.lo);
  if (out.lo == out.hi) out.frac = 0.0;
  return out;
}

namespace {

struct AnchorCand {
  std::int64_t qmag;  // quantized projection magnitude
  std::int32_t index;
};

// Ring neighbors of node i ranked by quantized magnitude desc, index asc.
std::vector<AnchorCand> ranked_candidates(const IcosphereMesh& mesh,
                                          const NeighborTable& table,
                                          std::size_t i) {
  std::vector<AnchorCand> cands;
  const Vec3& p = mesh.vertices[i];
  for (int k = 1; k < table.width; ++k) {  // slot 0 is the node itself
    if (!table.is_valid(i, k)) continue;
    const std::int32_t j = table.at(i, k);
    const TangentProjection t = tangent_project(p, mesh.vertices[j]);
    if (t.degenerate) continue;
    const auto q = static_cast<std::int64_t>(
        std::llround(t.magnitude / kAnchorTieQuantum));
    cands.push_back({q, j});
  }
  if (cands.empty())
    throw DataError("select_anchors: node has no usable ring neighbor");
  std::sort(cands.begin(), cands.end(),
            [](const AnchorCand& a, const AnchorCand& b) {
              if (a.qmag != b.qmag) return a.qmag > b.qmag;
              return a.index < b.index;
            });
  return cands;
}

}  // namespace

std::vector<std::int32_t> select_anchors(const IcosphereMesh& mesh,
                                         const NeighborTable& table,
                                         int anchors) {
  if (anchors < 1) throw ConfigError("select_anchors requires anchors >= 1");
  const std::size_t nodes = table.nodes;
  std::vector<std::int32_t> out(nodes * static_cast<std::size_t>(anchors), -1);
  for (std::size_t i = 0; i < nodes; ++i) {
    const std::vector<AnchorCand> cands = ranked_candidates(mesh, table, i);
    for (int f = 0; f < anchors; ++f) {
      const std::size_t pick = std::min(static_cast<std::size_t>(f), cands.size() - 1);
      out[i * static_cast<std::size_t>(anchors) + f] = cands[pick].index;
    }
  }
  return out;
}

AnchorClosure select_anchor_closure(const IcosphereMesh& mesh,
                                    const NeighborTable& table, int anchors) {
  if (anchors < 1) throw ConfigError("select_anchors requires anchors >= 1");
  const std::size_t nodes = table.nodes;
  AnchorClosure cl;
  cl.anchors = anchors;
  cl.offset.assign(nodes + 1, 0);
  for (std::size_t i = 0; i < nodes; ++i) {
    const std::vector<AnchorCand> cands = ranked_candidates(mesh, table, i);
    const auto f = static_cast<std::size_t>(anchors);
    if (cands.size() <= f) {
      // Every usable neighbor participates; weights rescale so the total
      // anchor mass is still F.
      const double w =
          static_cast<double>(anchors) / static_cast<double>(cands.size());
      for (const AnchorCand& c : cands) {
        cl.index.push_back(c.index);
        cl.weight.push_back(w);
      }
    } else {
      const std::int64_t cutoff = cands[f - 1].qmag;
      std::size_t above = 0;
      while (above < cands.size() && cands[above].qmag > cutoff) ++above;
      std::size_t tied = 0;
      while (above + tied < cands.size() && cands[above + tied].qmag == cutoff)
        ++tied;
      const double share =
          static_cast<double>(f - above) / static_cast<double>(tied);
      for (std::size_t c = 0; c < above + tied; ++c) {
        cl.index.push_back(cands[c].index);
        cl.weight.push_back(c < above ? 1.0 : share);
      }
    }
    cl.offset[i + 1] = static_cast<std::int32_t>(cl.index.size());
  }
  return cl;
}

GeodesicCache build_geodesic_cache(const IcosphereMesh& mesh,
                                   const NeighborTable& table, int anchors,
                                   int bins) {
  if (anchors < 1) throw ConfigError("geodesic cache requires anchors >= 1");
  if (bins < 2) throw ConfigError("geodesic cache requires bins >= 2");

  GeodesicCache c;
  c.rank = mesh.rank;
  c.nodes = table.nodes;
  c.width = table.width;
  c.anchors = anchors;
  c.bins = bins;
  c.indices = table.indices;
  c.valid = table.valid;

  const std::size_t slots = c.nodes * static_cast<std::size_t>(c.width);
  c.delta.assign(slots, 0.0);
  c.delta_hat.assign(slots, 0.0);
  c.bin_lo.assign(slots, 0);
  c.bin_hi.assign(slots, 0);
  c.bin_frac.assign(slots, 0.0);
  c.alpha.assign(slots * static_cast<std::size_t>(anchors), 0.0);
  c.degenerate.assign(slots, 0);

  c.anchor_index = select_anchors(mesh, table, anchors);
  const AnchorClosure closure = select_anchor_closure(mesh, table, anchors);
  c.closure_offset = closure.offset;
  c.closure_index = closure.index;
  c.closure_weight = closure.weight;
  c.closure_alpha.assign(closure.index.size() * static_cast<std::size_t>(c.width),
                         0.0);

  for (std::size_t i = 0; i < c.nodes; ++i) {
    const Vec3& p = mesh.vertices[i];

    // Anchor tangent frames at node i.
    std::vector<Vec3> t_a(anchors), t_perp(anchors);
    for (int f = 0; f < anchors; ++f) {
      const std::int32_t a = c.anchor_index[i * anchors + f];
      const TangentProjection t = tangent_project(p, mesh.vertices[a]);
      if (t.degenerate)
        throw DataError("geodesic cache: anchor projection degenerate");
      t_a[f] = t.direction;
      t_perp[f] = cross(p, t.direction);
    }

    const std::size_t cl_begin = c.closure_offset[i];
    const std::size_t cl_end = c.closure_offset[i + 1];
    std::vector<Vec3> cl_ta(cl_end - cl_begin), cl_tperp(cl_end - cl_begin);
    for (std::size_t a = cl_begin; a < cl_end; ++a) {
      const TangentProjection t =
          tangent_project(p, mesh.vertices[c.closure_index[a]]);
      if (t.degenerate)
        throw DataError("geodesic cache: anchor projection degenerate");
      cl_ta[a - cl_begin] = t.direction;
      cl_tperp[a - cl_begin] = cross(p, t.direction);
    }

    for (int k = 0; k < c.width; ++k) {
      const std::size_t s = c.slot(i, k);
      if (!c.valid[s]) continue;
      const std::int32_t j = c.indices[s];
      const Vec3& q = mesh.vertices[j];

      c.delta[s] = geodesic_distance(p, q);
      c.delta_hat[s] = c.delta[s] / kPi;
      const RadialBin rb = radial_bins(c.delta_hat[s], bins);
      c.bin_lo[s] = rb.lo;
      c.bin_hi[s] = rb.hi;
      c.bin_frac[s] = rb.frac;

      const TangentProjection tj = tangent_project(p, q);
      if (tj.degenerate) {
        c.degenerate[s] = 1;  // self slot, or antipode
        continue;
      }
      for (int f = 0; f < anchors; ++f) {
        c.alpha[s * anchors + f] =
            std::atan2(dot(tj.direction, t_perp[f]), dot(tj.direction, t_a[f]));
      }
      for (std::size_t a = cl_begin; a < cl_end; ++a) {
        c.closure_alpha[a * c.width + k] =
            std::atan2(dot(tj.direction, cl_tperp[a - cl_begin]),
                       dot(tj.direction, cl_ta[a - cl_begin]));
      }
    }
  }
  return c;
}

void write_geodesic_cache(const std::string& path, const GeodesicCache& c) {
  Container out;
  out.kind = "tables";
  out.meta["rank"] = std::to_string(c.rank);
  out.meta["nodes"] = std::to_string(c.nodes);
  out.meta["width"] = std::to_string(c.width);
  out.meta["anchors"] = std::to_string(c.anchors);
  out.meta["bins"] = std::to_string(c.bins);
  const std::uint64_t n = c.nodes, k = c.width, f = c.anchors;
  out.add_i32("indices", {n, k}, c.indices.data());
  out.add_u8("valid", {n, k}, c.valid.data());
  out.add_f64("delta", {n, k}, c.delta.data());
  out.add_f64("delta_hat", {n, k}, c.delta_hat.data());
  out.add_i32("bin_lo", {n, k}, c.bin_lo.data());
  out.add_i32("bin_hi", {n, k}, c.bin_hi.data());
  out.add_f64("bin_frac", {n, k}, c.bin_frac.data());
  out.add_i32("anchor_index", {n, f}, c.anchor_index.data());
  out.add_f64("alpha", {n, k, f}, c.alpha.data());
  out.add_u8("degenerate", {n, k}, c.degenerate.data());
  const std::uint64_t cl = c.closure_index.size();
  out.add_i32("closure_offset", {n + 1}, c.closure_offset.data());
  out.add_i32("closure_index", {cl}, c.closure_index.data());
  out.add_f64("closure_weight", {cl}, c.closure_weight.data());
  out.add_f64("closure_alpha", {cl, k}, c.closure_alpha.data());
  write_container(path, out);
}

GeodesicCache read_geodesic_cache(const std::string& path) {
  const Container in = read_container(path, "tables");
  GeodesicCache c;
  c.rank = static_cast<int>(in.meta_i64("rank"));
  c.nodes = static_cast<std::size_t>(in.meta_i64("nodes"));
  c.width = static_cast<int>(in.meta_i64("width"));
  c.anchors = static_cast<int>(in.meta_i64("anchors"));
  c.bins = static_cast<int>(in.meta_i64("bins"));
  c.indices = in.get_i32("indices");
  c.valid = in.get_u8("valid");
  c.delta = in.get_f64("delta");
  c.delta_hat = in.get_f64("delta_hat");
  c.bin_lo = in.get_i32("bin_lo");
  c.bin_hi = in.get_i32("bin_hi");
  c.bin_frac = in.get_f64("bin_frac");
  c.anchor_index = in.get_i32("anchor_index");
  c.alpha = in.get_f64("alpha");
  c.degenerate = in.get_u8("degenerate");
  c.closure_offset = in.get_i32("closure_offset");
  c.closure_index = in.get_i32("closure_index");
  c.closure_weight = in.get_f64("closure_weight");
  c.closure_alpha = in.get_f64("closure_alpha");
  const std::size_t slots = c.nodes * static_cast<std::size_t>(c.width);
  if (c.delta.size() != slots || c.alpha.size() != slots * c.anchors)
    throw DataError("geodesic cache: section sizes inconsistent");
  if (c.closure_offset.size() != c.nodes + 1 ||
      c.closure_weight.size() != c.closure_index.size() ||
      c.closure_alpha.size() != c.closure_index.size() * c.width)
    throw DataError("geodesic cache: closure sections inconsistent");
  return c;
}

}  // namespace icoseg
