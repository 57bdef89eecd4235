#include "meshcal/cf.hpp"

#include <algorithm>
#include <cmath>

namespace meshcal::cf {

namespace {

constexpr double kCollinearTol = 1e-8;

// Max perpendicular deviation of the reference points from the line through
// the two most distant of them, relative to that baseline length.
bool references_collinear(
    const std::vector<std::pair<Position2D, double>>& refs) {
  if (refs.size() < 3) return true;
  double best = -1.0;
  std::size_t ia = 0, ib = 1;
  for (std::size_t i = 0; i < refs.size(); ++i)
    for (std::size_t j = i + 1; j < refs.size(); ++j) {
      const double d = distance(refs[i].first, refs[j].first);
      if (d > best) {
        best = d;
        ia = i;
        ib = j;
      }
    }
  if (best <= 0.0) return true;
  const Position2D a = refs[ia].first;
  const Position2D u = (refs[ib].first - a) * (1.0 / best);
  double max_dev = 0.0;
  for (const auto& [p, z] : refs) {
    (void)z;
    const Position2D d = p - a;
    max_dev = std::max(max_dev, std::abs(d.x * u.y - d.y * u.x));
  }
  return max_dev < kCollinearTol * best;
}

// Two-circle intersection seed candidates around references a and b.
std::vector<Position2D> two_circle_seeds(const Position2D& a, double ra,
                                         const Position2D& b, double rb) {
  const double d = distance(a, b);
  if (d < 1e-12) return {};
  const Position2D u = (b - a) * (1.0 / d);
  const Position2D n{-u.y, u.x};
  const double x = (ra * ra - rb * rb + d * d) / (2.0 * d);
  const double h2 = ra * ra - x * x;
  const double h = h2 > 0.0 ? std::sqrt(h2) : 0.0;
  const Position2D base = a + u * x;
  if (h == 0.0) return {base};
  return {base + n * h, base - n * h};
}

double residual_norm_at(const Position2D& p,
                        const std::vector<std::pair<Position2D, double>>& refs) {
  double s = 0.0;
  for (const auto& [a, z] : refs) {
    const double r = distance(p, a) - z;
    s += r * r;
  }
  return std::sqrt(s);
}

}  // namespace

std::pair<Position2D, Position2D> establish_frame(const DistanceMatrix& matrix,
                                                  const FrameAssumptions& frame) {
  const int o = frame.origin_node.index;
  const int a = frame.axis_node.index;
  if (!frame.distinct()) throw DegenerateFrame("frame nodes not distinct");
  if (!matrix.has(o, a)) throw MissingRange(o, a);
  const double z01 = matrix.at(o, a);
  if (z01 <= 0.0)
    throw DegenerateFrame("zero baseline: axis node coincides with origin");
  return {Position2D{0.0, 0.0}, Position2D{z01, 0.0}};
}

Position2D place_anchor2(const Position2D& a1, double z02, double z12) {
  const double x1 = a1.x;
  if (x1 <= 0.0) throw DegenerateFrame("anchor 1 must lie on the positive x-axis");
  const double x = (z02 * z02 - z12 * z12 + x1 * x1) / (2.0 * x1);
  const double y2 = z02 * z02 - x * x;
  if (y2 < 0.0) throw ImaginaryRoot("infeasible geometry: z02^2 < x^2");
  return {x, std::sqrt(y2)};
}

TrilatResult trilaterate_node(
    const std::vector<std::pair<Position2D, double>>& refs,
    const CfOptions& opts) {
  if (static_cast<int>(refs.size()) < opts.min_refs)
    throw InsufficientReferences("have " + std::to_string(refs.size()) +
                                 " references, need " +
                                 std::to_string(opts.min_refs));

  // Seed from the first sufficiently separated reference pair; both mirror
  // candidates are polished and the better one kept.
  std::vector<Position2D> seeds;
  for (std::size_t i = 0; i < refs.size() && seeds.empty(); ++i)
    for (std::size_t j = i + 1; j < refs.size() && seeds.empty(); ++j)
      seeds = two_circle_seeds(refs[i].first, refs[i].second, refs[j].first,
                               refs[j].second);
  if (seeds.empty())
    throw NoConvergence("all reference positions coincide");

  const bool collinear = references_collinear(refs);

  TrilatResult best;
  bool have = false;
  for (const Position2D& seed : seeds) {
    Position2D p = seed;
    int it = 0;
    bool converged = false;
    for (; it < opts.max_iterations; ++it) {
      // Normal equations of the range residuals, 2x2.
      double jtj00 = 0, jtj01 = 0, jtj11 = 0, jtr0 = 0, jtr1 = 0;
      for (const auto& [a, z] : refs) {
        const Position2D d = p - a;
        double dist = d.norm();
        if (dist < 1e-12) dist = 1e-12;
        const double jx = d.x / dist;
        const double jy = d.y / dist;
        const double r = dist - z;
        jtj00 += jx * jx;
        jtj01 += jx * jy;
        jtj11 += jy * jy;
        jtr0 += jx * r;
        jtr1 += jy * r;
      }
      double det = jtj00 * jtj11 - jtj01 * jtj01;
      if (std::abs(det) < 1e-14) {
        // Collinear geometry leaves the normal matrix near-singular along
        // the mirror axis; damp to keep the step defined.
        jtj00 += 1e-9;
        jtj11 += 1e-9;
        det = jtj00 * jtj11 - jtj01 * jtj01;
      }
      const double dx = (-jtr0 * jtj11 + jtr1 * jtj01) / det;
      const double dy = (-jtr1 * jtj00 + jtr0 * jtj01) / det;
      p.x += dx;
      p.y += dy;
      if (std::hypot(dx, dy) < opts.step_tolerance) {
        converged = true;
        break;
      }
    }
    if (!converged) continue;
    const double rn = residual_norm_at(p, refs);
    if (!have || rn < best.residual_norm) {
      best.position = p;
      best.residual_norm = rn;
      best.iterations = it + 1;
      have = true;
    }
  }
  if (!have) throw NoConvergence("Gauss-Newton did not converge");
  best.ambiguous = collinear;
  return best;
}

EpochResult run_cf_epoch(const DistanceMatrix& matrix,
                         const FrameAssumptions& frame, const CfOptions& opts) {
  const int n = matrix.size();
  EpochResult result;
  result.epoch = matrix.epoch();
  result.estimates.assign(n, std::nullopt);
  result.available.assign(n, false);

  const int o = frame.origin_node.index;
  const int a = frame.axis_node.index;
  const int h = frame.halfplane_node.index;

  std::vector<std::optional<Position2D>> placed(n, std::nullopt);
  try {
    auto [a0, a1] = establish_frame(matrix, frame);
    placed[o] = a0;
    placed[a] = a1;
  } catch (const Error&) {
    return result;  // frame failure: whole epoch unavailable
  }

  // Anchor 2 strictly follows the closed form with its two anchor ranges.
  if (matrix.has(o, h) && matrix.has(a, h)) {
    try {
      placed[h] = place_anchor2(*placed[a], matrix.at(o, h), matrix.at(a, h));
    } catch (const Error&) {
    }
  }

  // Remaining nodes in ascending index order, each against all nodes placed
  // so far. A freshly placed node becomes a reference for later ones.
  for (int i = 0; i < n; ++i) {
    if (i == o || i == a || i == h) continue;
    std::vector<std::pair<Position2D, double>> refs;
    for (int j = 0; j < n; ++j) {
      if (j == i || !placed[j] || !matrix.has(i, j)) continue;
      refs.emplace_back(*placed[j], matrix.at(i, j));
    }
    try {
      TrilatResult t = trilaterate_node(refs, opts);
      if (t.ambiguous) continue;  // mirror solution: counted unavailable
      placed[i] = t.position;
    } catch (const Error&) {
    }
  }

  for (int i = 0; i < n; ++i) {
    if (placed[i]) {
      result.estimates[i] = *placed[i];
      result.available[i] = true;
    }
  }
  return result;
}

std::vector<EpochResult> run_cf(const std::vector<DistanceMatrix>& dataset,
                                const FrameAssumptions& frame,
                                const CfOptions& opts) {
  std::vector<EpochResult> out;
  out.reserve(dataset.size());
  for (const auto& m : dataset) out.push_back(run_cf_epoch(m, frame, opts));
  return out;
}

}  // namespace meshcal::cf
