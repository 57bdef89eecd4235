#include "meshcal/grid.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <numeric>
#include <thread>

namespace meshcal::pgp {

namespace {

// Gaussian terms beyond this many sigmas contribute < 3e-18 and are skipped.
constexpr double kSigmaCutoff = 9.0;

double gaussian_unnormalized(double residual, double sigma) {
  const double u = residual / sigma;
  return std::exp(-0.5 * u * u);
}

}  // namespace

GridSpec GridSpec::make(double x_min, double x_max, double y_min, double y_max,
                        double cell_size) {
  if (!(cell_size > 0.0)) throw Error("grid cell_size must be positive");
  if (!(x_max > x_min) || !(y_max > y_min))
    throw Error("grid bounds must be ordered");
  GridSpec s;
  s.x_min = x_min;
  s.x_max = x_max;
  s.y_min = y_min;
  s.y_max = y_max;
  s.cell_size = cell_size;
  s.cols = std::max(1, static_cast<int>(std::ceil((x_max - x_min) / cell_size - 1e-9)));
  s.rows = std::max(1, static_cast<int>(std::ceil((y_max - y_min) / cell_size - 1e-9)));
  s.m_total = static_cast<std::size_t>(s.cols) * s.rows;
  return s;
}

GridBelief GridBelief::uniform(const GridSpec& spec) {
  GridBelief b;
  b.spec = spec;
  b.mass.assign(spec.m_total, 1.0 / static_cast<double>(spec.m_total));
  return b;
}

void GridBelief::normalize() {
  double sum = 0.0;
  for (double v : mass) sum += v;
  if (!std::isfinite(sum)) throw Error("non-finite belief mass");
  if (!(sum > 0.0)) throw AllMassZero("belief mass sums to zero");
  const double inv = 1.0 / sum;
  for (double& v : mass) v *= inv;
}

std::size_t GridBelief::argmax() const {
  std::size_t best = 0;
  for (std::size_t i = 1; i < mass.size(); ++i)
    if (mass[i] > mass[best]) best = i;
  return best;
}

Position2D GridBelief::mean() const {
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < mass.size(); ++i) {
    if (mass[i] == 0.0) continue;
    const Position2D c = spec.center(i);
    mx += mass[i] * c.x;
    my += mass[i] * c.y;
  }
  return {mx, my};
}

double GridBelief::sigma_trace() const {
  const Position2D mu = mean();
  double vxx = 0.0, vyy = 0.0;
  for (std::size_t i = 0; i < mass.size(); ++i) {
    if (mass[i] == 0.0) continue;
    const Position2D c = spec.center(i);
    vxx += mass[i] * (c.x - mu.x) * (c.x - mu.x);
    vyy += mass[i] * (c.y - mu.y) * (c.y - mu.y);
  }
  return std::sqrt(std::max(0.0, vxx + vyy));
}

void PgpParams::validate() const {
  if (!(tau_percent > 0.0) || tau_percent > 1.0)
    throw Error("tau_percent must be in (0, 1]");
  if (!(sigma_r > 0.0)) throw Error("sigma_r must be positive");
  if (sigma_v < 0.0) throw Error("sigma_v must be nonnegative");
  if (!(r_est > 0.0)) throw Error("r_est must be positive");
  if (h_bins < 2) throw Error("h_bins must be at least 2");
  if (!(d_max > 0.0)) throw Error("d_max must be positive");
  if (!(alpha > 0.0) || alpha > 1.0) throw Error("alpha must be in (0, 1]");
  if (k_top < 1) throw Error("k_top must be at least 1");
}

HistogramResult histogram_filter_a1(double z01, const PgpParams& params) {
  params.validate();
  HistogramResult out;
  double z = z01;
  if (z > params.d_max) {
    z = params.d_max;
    out.clamped = true;
  }
  const int h = params.h_bins;
  const double step = params.d_max / static_cast<double>(h - 1);
  out.bins.resize(h);
  double sum = 0.0;
  for (int j = 0; j < h; ++j) {
    const double center = j * step;
    const double p = gaussian_unnormalized(z - center, params.sigma_r);
    out.bins[j] = p;
    sum += p;
  }
  if (!(sum > 0.0)) throw AllMassZero("histogram bins all zero");
  double est = 0.0;
  for (int j = 0; j < h; ++j) {
    out.bins[j] /= sum;
    est += out.bins[j] * (j * step);
  }
  out.estimate = est;
  return out;
}

GridBelief init_anchor2_grid(const Position2D& a0, const Position2D& a1,
                             double z02, double z12, const GridSpec& spec,
                             const PgpParams& params) {
  GridBelief b;
  b.spec = spec;
  b.mass.assign(spec.m_total, 0.0);
  for (std::size_t m = 0; m < spec.m_total; ++m) {
    const Position2D g = spec.center(m);
    if (g.y < 0.0) continue;  // half-plane prior
    const double r0 = distance(g, a0) - z02;
    const double r1 = distance(g, a1) - z12;
    if (std::abs(r0) > kSigmaCutoff * params.sigma_r ||
        std::abs(r1) > kSigmaCutoff * params.sigma_r)
      continue;
    b.mass[m] = gaussian_unnormalized(r0, params.sigma_r) *
                gaussian_unnormalized(r1, params.sigma_r);
  }
  b.normalize();  // throws AllMassZero when the constraints wipe the grid
  return b;
}

GridBelief predict(const GridBelief& prior, const PgpParams& params) {
  const GridSpec& spec = prior.spec;
  const std::size_t m_total = spec.m_total;
  const int k = std::min<std::size_t>(params.k_top, m_total);

  // Highest-probability cells, ties toward the lower index.
  std::vector<std::size_t> order(m_total);
  std::iota(order.begin(), order.end(), std::size_t{0});
  auto by_mass = [&](std::size_t a, std::size_t b) {
    if (prior.mass[a] != prior.mass[b]) return prior.mass[a] > prior.mass[b];
    return a < b;
  };
  if (static_cast<std::size_t>(k) < m_total)
    std::nth_element(order.begin(), order.begin() + k, order.end(), by_mass);

  GridBelief out;
  out.spec = spec;
  out.mass.assign(m_total, 0.0);

  const double v = params.velocity;
  const double sv = params.sigma_v;
  for (int s = 0; s < k; ++s) {
    const std::size_t m = order[s];
    const double pm = prior.mass[m];
    if (pm <= 0.0) continue;
    const Position2D c = spec.center(m);
    if (sv == 0.0 && v == 0.0) {
      out.mass[m] += pm;  // delta kernel
      continue;
    }
    // Half-cell tolerance ring stands in for the delta ring when sv == 0.
    const double reach = v + (sv > 0.0 ? kSigmaCutoff * sv : 0.5 * spec.cell_size);
    int c_lo = static_cast<int>(std::floor((c.x - reach - spec.x_min) / spec.cell_size - 0.5));
    int c_hi = static_cast<int>(std::ceil((c.x + reach - spec.x_min) / spec.cell_size - 0.5));
    int r_lo = static_cast<int>(std::floor((c.y - reach - spec.y_min) / spec.cell_size - 0.5));
    int r_hi = static_cast<int>(std::ceil((c.y + reach - spec.y_min) / spec.cell_size - 0.5));
    c_lo = std::max(c_lo, 0);
    r_lo = std::max(r_lo, 0);
    c_hi = std::min(c_hi, spec.cols - 1);
    r_hi = std::min(r_hi, spec.rows - 1);
    for (int row = r_lo; row <= r_hi; ++row) {
      for (int col = c_lo; col <= c_hi; ++col) {
        const std::size_t i = spec.cell(col, row);
        const double d = distance(spec.center(i), c);
        const double residual = d - v;
        if (sv > 0.0) {
          if (std::abs(residual) > kSigmaCutoff * sv) continue;
          out.mass[i] += pm * gaussian_unnormalized(residual, sv);
        } else if (std::abs(residual) <= 0.5 * spec.cell_size) {
          out.mass[i] += pm;
        }
      }
    }
  }

  double sum = 0.0;
  for (double x : out.mass) sum += x;
  if (!(sum > 0.0)) return prior;  // degenerate kernel left nothing; keep prior
  for (double& x : out.mass) x /= sum;
  return out;
}

HypothesisSet sample_hypotheses(const GridBelief& belief, double tau_percent,
                                int max_hypotheses) {
  std::vector<std::size_t> idx;
  idx.reserve(belief.mass.size());
  double total = 0.0;
  for (std::size_t i = 0; i < belief.mass.size(); ++i) {
    if (belief.mass[i] > 0.0) {
      idx.push_back(i);
      total += belief.mass[i];
    }
  }
  if (idx.empty() || !(total > 0.0))
    throw AllMassZero("cannot sample hypotheses from an all-zero belief");
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    if (belief.mass[a] != belief.mass[b]) return belief.mass[a] > belief.mass[b];
    return a < b;
  });

  const bool take_all = tau_percent >= 1.0;
  const double target = tau_percent * total;
  HypothesisSet set;
  double cum = 0.0;
  double kept = 0.0;
  for (std::size_t i : idx) {
    set.points.push_back(belief.spec.center(i));
    set.weights.push_back(belief.mass[i]);
    cum += belief.mass[i];
    kept += belief.mass[i];
    if (!take_all && cum >= target) break;
    if (max_hypotheses > 0 &&
        static_cast<int>(set.points.size()) >= max_hypotheses)
      break;
  }
  const double inv = 1.0 / kept;
  for (double& w : set.weights) w *= inv;
  return set;
}

namespace {

// Iterates the cells of one annulus |dist(cell, p) - z| <= cutoff and
// accumulates weight * gaussian into the field.
void accumulate_annulus(const GridSpec& spec, const Position2D& p, double z,
                        double weight, double sigma,
                        std::vector<double>& field) {
  const double band = kSigmaCutoff * sigma;
  const double hi = z + band;
  const double lo = std::max(z - band, 0.0);
  const double hi2 = hi * hi;
  const double lo2 = lo * lo;
  int r_lo = static_cast<int>(std::floor((p.y - hi - spec.y_min) / spec.cell_size - 0.5));
  int r_hi = static_cast<int>(std::ceil((p.y + hi - spec.y_min) / spec.cell_size - 0.5));
  r_lo = std::max(r_lo, 0);
  r_hi = std::min(r_hi, spec.rows - 1);
  for (int row = r_lo; row <= r_hi; ++row) {
    const double cy = spec.y_min + (row + 0.5) * spec.cell_size;
    const double dy = cy - p.y;
    const double rem = hi2 - dy * dy;
    if (rem < 0.0) continue;
    const double dx_hi = std::sqrt(rem);
    const double rem_lo = lo2 - dy * dy;
    const double dx_lo = rem_lo > 0.0 ? std::sqrt(rem_lo) : 0.0;
    // Up to two column intervals: [-dx_hi, -dx_lo] and [dx_lo, dx_hi].
    const double spans[2][2] = {{p.x - dx_hi, p.x - dx_lo},
                                {p.x + dx_lo, p.x + dx_hi}};
    const int n_spans = dx_lo > 0.0 ? 2 : 1;
    const double full_lo = dx_lo > 0.0 ? spans[0][0] : p.x - dx_hi;
    const double full_hi = p.x + dx_hi;
    for (int s = 0; s < n_spans; ++s) {
      const double xa = n_spans == 1 ? full_lo : spans[s][0];
      const double xb = n_spans == 1 ? full_hi : spans[s][1];
      int c_lo = static_cast<int>(std::ceil((xa - spec.x_min) / spec.cell_size - 0.5));
      int c_hi = static_cast<int>(std::floor((xb - spec.x_min) / spec.cell_size - 0.5));
      c_lo = std::max(c_lo, 0);
      c_hi = std::min(c_hi, spec.cols - 1);
      for (int col = c_lo; col <= c_hi; ++col) {
        const double cx = spec.x_min + (col + 0.5) * spec.cell_size;
        const double dx = cx - p.x;
        const double d2 = dx * dx + dy * dy;
        if (d2 < lo2 || d2 > hi2) continue;
        const double residual = std::sqrt(d2) - z;
        field[spec.cell(col, row)] += weight * gaussian_unnormalized(residual, sigma);
      }
    }
  }
}

// Inner sum of Eq-style weighted range likelihoods for one cell.
double hypothesis_factor(const Position2D& g, const HypothesisRef& ref,
                         double sigma) {
  const double band = kSigmaCutoff * sigma;
  const double hi = ref.range + band;
  const double lo = std::max(ref.range - band, 0.0);
  const double hi2 = hi * hi;
  const double lo2 = lo * lo;
  double sum = 0.0;
  const std::size_t n = ref.hypotheses.points.size();
  for (std::size_t l = 0; l < n; ++l) {
    const Position2D& p = ref.hypotheses.points[l];
    const double dx = g.x - p.x;
    const double dy = g.y - p.y;
    const double d2 = dx * dx + dy * dy;
    if (d2 < lo2 || d2 > hi2) continue;
    sum += ref.hypotheses.weights[l] *
           gaussian_unnormalized(std::sqrt(d2) - ref.range, sigma);
  }
  return sum;
}

}  // namespace

std::vector<double> likelihood_hypotheses(const GridSpec& spec,
                                          const std::vector<HypothesisRef>& refs,
                                          double sigma_r) {
  // Empty product convention: a flat field.
  if (refs.empty()) return std::vector<double>(spec.m_total, 1.0);

  // Cheapest (fewest hypotheses) reference first shrinks the support early;
  // the per-cell product does not depend on the order.
  std::vector<const HypothesisRef*> ordered;
  ordered.reserve(refs.size());
  for (const auto& r : refs) ordered.push_back(&r);
  std::stable_sort(ordered.begin(), ordered.end(),
                   [](const HypothesisRef* a, const HypothesisRef* b) {
                     return a->hypotheses.points.size() < b->hypotheses.points.size();
                   });

  std::vector<double> field(spec.m_total, 0.0);
  const HypothesisRef& first = *ordered.front();
  for (std::size_t l = 0; l < first.hypotheses.points.size(); ++l)
    accumulate_annulus(spec, first.hypotheses.points[l], first.range,
                       first.hypotheses.weights[l], sigma_r, field);

  std::vector<std::size_t> active;
  active.reserve(spec.m_total / 8);
  for (std::size_t i = 0; i < spec.m_total; ++i)
    if (field[i] > 0.0) active.push_back(i);

  for (std::size_t k = 1; k < ordered.size() && !active.empty(); ++k) {
    const HypothesisRef& ref = *ordered[k];
    std::vector<std::size_t> next;
    next.reserve(active.size());
    for (std::size_t i : active) {
      const double f = hypothesis_factor(spec.center(i), ref, sigma_r);
      if (f > 0.0) {
        field[i] *= f;
        if (field[i] > 0.0) {
          next.push_back(i);
          continue;
        }
      }
      field[i] = 0.0;
    }
    active.swap(next);
  }
  return field;
}

std::vector<double> likelihood_parametric(const GridSpec& spec,
                                          const std::vector<ParametricRef>& refs,
                                          double sigma_r) {
  if (refs.empty()) return std::vector<double>(spec.m_total, 1.0);

  std::vector<double> field(spec.m_total, 0.0);
  const ParametricRef& first = refs.front();
  accumulate_annulus(spec, first.point, first.range, 1.0,
                     sigma_r + first.sigma, field);

  std::vector<std::size_t> active;
  for (std::size_t i = 0; i < spec.m_total; ++i)
    if (field[i] > 0.0) active.push_back(i);

  for (std::size_t k = 1; k < refs.size() && !active.empty(); ++k) {
    const ParametricRef& ref = refs[k];
    const double sigma = sigma_r + ref.sigma;
    const double band = kSigmaCutoff * sigma;
    const double hi = ref.range + band;
    const double lo = std::max(ref.range - band, 0.0);
    const double hi2 = hi * hi;
    const double lo2 = lo * lo;
    std::vector<std::size_t> next;
    next.reserve(active.size());
    for (std::size_t i : active) {
      const Position2D g = spec.center(i);
      const double dx = g.x - ref.point.x;
      const double dy = g.y - ref.point.y;
      const double d2 = dx * dx + dy * dy;
      double f = 0.0;
      if (d2 >= lo2 && d2 <= hi2)
        f = gaussian_unnormalized(std::sqrt(d2) - ref.range, sigma);
      if (f > 0.0) {
        field[i] *= f;
        if (field[i] > 0.0) {
          next.push_back(i);
          continue;
        }
      }
      field[i] = 0.0;
    }
    active.swap(next);
  }
  return field;
}

GridBelief update(const GridBelief& predicted,
                  const std::vector<double>& likelihood_field) {
  if (likelihood_field.size() != predicted.mass.size())
    throw Error("likelihood field size does not match the grid");
  GridBelief out;
  out.spec = predicted.spec;
  out.mass.resize(predicted.mass.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < out.mass.size(); ++i) {
    const double v = predicted.mass[i] * likelihood_field[i];
    out.mass[i] = v;
    sum += v;
  }
  if (!std::isfinite(sum)) throw Error("non-finite posterior mass");
  if (!(sum > 0.0)) throw AllMassZero("posterior mass sums to zero");
  const double inv = 1.0 / sum;
  for (double& v : out.mass) v *= inv;
  return out;
}

Position2D estimate_position(const GridBelief& belief, double r_est) {
  const std::size_t mle = belief.argmax();
  const Position2D c0 = belief.spec.center(mle);
  double mx = 0.0, my = 0.0, msum = 0.0;
  // Only cells inside the bounding box of the estimation disc can qualify.
  const GridSpec& spec = belief.spec;
  int c_lo = static_cast<int>(std::floor((c0.x - r_est - spec.x_min) / spec.cell_size - 0.5));
  int c_hi = static_cast<int>(std::ceil((c0.x + r_est - spec.x_min) / spec.cell_size - 0.5));
  int r_lo = static_cast<int>(std::floor((c0.y - r_est - spec.y_min) / spec.cell_size - 0.5));
  int r_hi = static_cast<int>(std::ceil((c0.y + r_est - spec.y_min) / spec.cell_size - 0.5));
  c_lo = std::max(c_lo, 0);
  r_lo = std::max(r_lo, 0);
  c_hi = std::min(c_hi, spec.cols - 1);
  r_hi = std::min(r_hi, spec.rows - 1);
  for (int row = r_lo; row <= r_hi; ++row) {
    for (int col = c_lo; col <= c_hi; ++col) {
      const std::size_t i = spec.cell(col, row);
      if (belief.mass[i] == 0.0) continue;
      const Position2D c = spec.center(i);
      if (distance(c, c0) >= r_est) continue;
      mx += belief.mass[i] * c.x;
      my += belief.mass[i] * c.y;
      msum += belief.mass[i];
    }
  }
  if (!(msum > 0.0)) return c0;  // the MLE cell itself always qualifies
  return {mx / msum, my / msum};
}

Position2D smooth_ema(const Position2D& previous, const Position2D& current,
                      double alpha) {
  return {alpha * current.x + (1.0 - alpha) * previous.x,
          alpha * current.y + (1.0 - alpha) * previous.y};
}

namespace {

struct NodeState {
  bool is_origin = false;
  bool is_axis = false;
  bool is_halfplane = false;
  bool placed = false;       // origin/axis fixed point valid
  bool established = false;  // usable as a reference
  Position2D point;          // origin/axis position
  GridBelief belief;
  bool has_belief = false;
  std::optional<Position2D> raw_estimate;
  std::optional<Position2D> ema_state;
  std::deque<Position2D> median_window;
  HistogramResult histogram;  // axis node only
};

Position2D median_of_window(const std::deque<Position2D>& w) {
  auto med = [](std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
  };
  std::vector<double> xs, ys;
  for (const auto& p : w) {
    xs.push_back(p.x);
    ys.push_back(p.y);
  }
  return {med(xs), med(ys)};
}

void zero_negative_halfplane(GridBelief& b) {
  bool any = false;
  std::vector<double> saved;
  for (std::size_t i = 0; i < b.mass.size(); ++i) {
    if (b.spec.center(i).y < 0.0 && b.mass[i] != 0.0) {
      b.mass[i] = 0.0;
      any = true;
    }
  }
  if (!any) return;
  double sum = 0.0;
  for (double v : b.mass) sum += v;
  if (!(sum > 0.0)) return;  // would wipe the belief; leave it untouched
  for (double& v : b.mass) v /= sum;
}

HypothesisSet histogram_hypotheses(const HistogramResult& hist,
                                   const PgpParams& params) {
  std::vector<std::size_t> idx(hist.bins.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    if (hist.bins[a] != hist.bins[b]) return hist.bins[a] > hist.bins[b];
    return a < b;
  });
  const double step = params.d_max / static_cast<double>(params.h_bins - 1);
  const bool take_all = params.tau_percent >= 1.0;
  HypothesisSet set;
  double cum = 0.0;
  for (std::size_t j : idx) {
    if (hist.bins[j] <= 0.0) break;
    set.points.emplace_back(j * step, 0.0);
    set.weights.push_back(hist.bins[j]);
    cum += hist.bins[j];
    if (!take_all && cum >= params.tau_percent) break;
    if (params.max_hypotheses > 0 &&
        static_cast<int>(set.points.size()) >= params.max_hypotheses)
      break;
  }
  double kept = 0.0;
  for (double w : set.weights) kept += w;
  for (double& w : set.weights) w /= kept;
  return set;
}

double histogram_sigma(const HistogramResult& hist, const PgpParams& params) {
  const double step = params.d_max / static_cast<double>(params.h_bins - 1);
  double var = 0.0;
  for (std::size_t j = 0; j < hist.bins.size(); ++j) {
    const double d = j * step - hist.estimate;
    var += hist.bins[j] * d * d;
  }
  return std::sqrt(std::max(0.0, var));
}

}  // namespace

std::vector<cf::EpochResult> run_pgp(const std::vector<DistanceMatrix>& dataset,
                                     const cf::FrameAssumptions& frame,
                                     const GridSpec& spec,
                                     const PgpParams& params,
                                     const PgpRunOptions& options) {
  params.validate();
  if (dataset.empty()) throw Error("run_pgp needs at least one epoch");
  if (!frame.distinct()) throw DegenerateFrame("frame nodes not distinct");

  const int n = dataset.front().size();
  const int o = frame.origin_node.index;
  const int a = frame.axis_node.index;
  const int h = frame.halfplane_node.index;
  if (o < 0 || a < 0 || h < 0 || o >= n || a >= n || h >= n)
    throw Error("frame node index out of range");

  std::vector<NodeState> nodes(n);
  nodes[o].is_origin = true;
  nodes[a].is_axis = true;
  nodes[h].is_halfplane = true;

  nodes[o].point = {0.0, 0.0};
  nodes[o].placed = true;
  nodes[o].established = true;

  std::vector<cf::EpochResult> results;
  results.reserve(dataset.size());

  // Snapshot of reference data taken after anchor initialization each epoch
  // (Jacobi sweep: node updates within an epoch do not see each other).
  struct RefSnapshot {
    bool usable = false;
    bool is_point = false;
    Position2D point;
    HypothesisSet hypotheses;
    double sigma = 0.0;  // parametric stand-in
  };

  for (std::size_t epoch_idx = 0; epoch_idx < dataset.size(); ++epoch_idx) {
    const DistanceMatrix sym = symmetrize(dataset[epoch_idx]);
    if (sym.size() != n) throw DimensionMismatch("epoch node count changed");

    // --- anchor staging -------------------------------------------------
    if (!nodes[a].placed && sym.has(o, a)) {
      nodes[a].histogram = histogram_filter_a1(sym.at(o, a), params);
      nodes[a].point = {nodes[a].histogram.estimate, 0.0};
      nodes[a].placed = true;
      nodes[a].established = true;
    }

    bool halfplane_initialized_now = false;
    if (!nodes[h].established && nodes[a].placed && sym.has(o, h) &&
        sym.has(a, h)) {
      try {
        nodes[h].belief = init_anchor2_grid(nodes[o].point, nodes[a].point,
                                            sym.at(o, h), sym.at(a, h), spec,
                                            params);
        nodes[h].has_belief = true;
        nodes[h].established = true;
        nodes[h].raw_estimate = estimate_position(nodes[h].belief, params.r_est);
        halfplane_initialized_now = true;
      } catch (const AllMassZero&) {
        // grid bounds and ranges inconsistent this epoch; retry later
      }
    }

    // --- reference snapshot ---------------------------------------------
    std::vector<RefSnapshot> snap(n);
    auto fill_snapshot = [&](int j) {
      RefSnapshot& s = snap[j];
      const NodeState& st = nodes[j];
      if (st.placed && (st.is_origin || st.is_axis)) {
        s.usable = true;
        s.is_point = true;
        s.point = st.point;
        if (st.is_axis && options.a1_histogram_hypotheses) {
          s.is_point = false;
          s.hypotheses = histogram_hypotheses(st.histogram, params);
          s.sigma = histogram_sigma(st.histogram, params);
        }
        return;
      }
      if (st.established && st.has_belief) {
        s.usable = true;
        if (options.mode == UncertaintyMode::kHypotheses) {
          s.hypotheses = sample_hypotheses(st.belief, params.tau_percent,
                                           params.max_hypotheses);
        } else {
          s.point = estimate_position(st.belief, params.r_est);
          s.sigma = st.belief.sigma_trace();
          s.is_point = true;
        }
      }
    };
    for (int j = 0; j < n; ++j) fill_snapshot(j);

    // --- per-node measurement sweep --------------------------------------
    std::vector<unsigned char> had_refs(n, 0);  // plain bytes: thread-safe writes

    auto process_node = [&](int i) {
      NodeState& st = nodes[i];
      if (st.is_origin || st.is_axis) return;
      if (st.is_halfplane && halfplane_initialized_now) return;

      GridBelief prior;
      if (st.established) {
        prior = predict(st.belief, params);
        if (st.is_halfplane) zero_negative_halfplane(prior);
      } else {
        prior = GridBelief::uniform(spec);
        if (st.is_halfplane) zero_negative_halfplane(prior);
      }

      std::vector<HypothesisRef> hrefs;
      std::vector<ParametricRef> prefs;
      for (int j = 0; j < n; ++j) {
        if (j == i || !snap[j].usable || !sym.has(i, j)) continue;
        if (options.mode == UncertaintyMode::kHypotheses) {
          if (snap[j].is_point)
            hrefs.push_back({HypothesisSet::singleton(snap[j].point), sym.at(i, j)});
          else
            hrefs.push_back({snap[j].hypotheses, sym.at(i, j)});
        } else {
          prefs.push_back({snap[j].point, snap[j].sigma, sym.at(i, j)});
        }
      }
      const bool any_refs = !hrefs.empty() || !prefs.empty();
      had_refs[i] = any_refs ? 1 : 0;

      if (!any_refs) {
        if (st.established) {
          st.belief = std::move(prior);  // carried forward by predict only
          st.raw_estimate = estimate_position(st.belief, params.r_est);
        }
        return;
      }

      std::vector<double> field =
          options.mode == UncertaintyMode::kHypotheses
              ? likelihood_hypotheses(spec, hrefs, params.sigma_r)
              : likelihood_parametric(spec, prefs, params.sigma_r);
      // Rescaling the field is Bayes-neutral and avoids product underflow.
      double fmax = 0.0;
      for (double v : field) fmax = std::max(fmax, v);
      if (fmax > 0.0)
        for (double& v : field) v /= fmax;

      try {
        st.belief = update(prior, field);
        st.has_belief = true;
        st.established = true;
      } catch (const AllMassZero&) {
        if (!st.established) return;  // nothing informative yet
        st.belief = std::move(prior);  // measurement contradicts everything
      }
      st.raw_estimate = estimate_position(st.belief, params.r_est);
    };

    std::vector<int> sweep;
    for (int i = 0; i < n; ++i)
      if (!nodes[i].is_origin && !nodes[i].is_axis) sweep.push_back(i);

    const unsigned hw = std::thread::hardware_concurrency();
    if (options.parallel && !options.gauss_seidel && hw > 1 &&
        sweep.size() > 1) {
      const unsigned n_threads = std::min<unsigned>(hw, sweep.size());
      std::vector<std::thread> pool;
      std::vector<std::exception_ptr> errors(n_threads);
      for (unsigned t = 0; t < n_threads; ++t) {
        pool.emplace_back([&, t]() {
          try {
            for (std::size_t k = t; k < sweep.size(); k += n_threads)
              process_node(sweep[k]);
          } catch (...) {
            errors[t] = std::current_exception();
          }
        });
      }
      for (auto& th : pool) th.join();
      for (auto& e : errors)
        if (e) std::rethrow_exception(e);
    } else {
      for (int i : sweep) {
        process_node(i);
        if (options.gauss_seidel) fill_snapshot(i);  // immediate visibility
      }
    }

    // --- emit epoch result ------------------------------------------------
    cf::EpochResult result;
    result.epoch = sym.epoch();
    result.estimates.assign(n, std::nullopt);
    result.available.assign(n, false);

    for (int i = 0; i < n; ++i) {
      NodeState& st = nodes[i];
      std::optional<Position2D> raw;
      bool avail = false;
      if (st.is_origin) {
        raw = st.point;
        avail = true;
      } else if (st.is_axis) {
        if (st.placed) {
          raw = st.point;
          avail = true;
        }
      } else if (st.raw_estimate) {
        raw = *st.raw_estimate;
        avail = had_refs[i] != 0 ||
                (st.is_halfplane && halfplane_initialized_now);
      }
      if (!raw) continue;

      Position2D out = *raw;
      if (options.hybrid_median) {
        st.median_window.push_back(out);
        if (st.median_window.size() > 5) st.median_window.pop_front();
        out = median_of_window(st.median_window);
      }
      if (options.ema_enabled) {
        if (st.ema_state)
          out = smooth_ema(*st.ema_state, out, params.alpha);
        st.ema_state = out;
      }
      result.estimates[i] = out;
      result.available[i] = avail;
    }

    if (options.inspector) {
      for (int i = 0; i < n; ++i)
        if (nodes[i].has_belief)
          options.inspector(static_cast<int>(epoch_idx), i, nodes[i].belief);
    }

    results.push_back(std::move(result));
  }
  return results;
}

}  // namespace meshcal::pgp
