#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <utility>
#include <vector>

#include "meshcal/cf.hpp"
#include "meshcal/types.hpp"

namespace meshcal::pgp {

/// Regular 2-D grid over [x_min, x_max] x [y_min, y_max]. Cells are square
/// with side cell_size; cell m = row * cols + col has its center at
/// (x_min + (col + 0.5) * cell_size, y_min + (row + 0.5) * cell_size).
struct GridSpec {
  double x_min = 0.0;
  double x_max = 0.0;
  double y_min = 0.0;
  double y_max = 0.0;
  double cell_size = 0.0;
  int cols = 0;
  int rows = 0;
  std::size_t m_total = 0;

  static GridSpec make(double x_min, double x_max, double y_min, double y_max,
                       double cell_size);

  Position2D center(std::size_t m) const {
    const int r = static_cast<int>(m) / cols;
    const int c = static_cast<int>(m) % cols;
    return {x_min + (c + 0.5) * cell_size, y_min + (r + 0.5) * cell_size};
  }
  int col_of(std::size_t m) const { return static_cast<int>(m) % cols; }
  int row_of(std::size_t m) const { return static_cast<int>(m) / cols; }
  std::size_t cell(int col, int row) const {
    return static_cast<std::size_t>(row) * cols + col;
  }

  bool same_shape(const GridSpec& o) const {
    return cols == o.cols && rows == o.rows && cell_size == o.cell_size &&
           x_min == o.x_min && y_min == o.y_min;
  }
};

/// Discrete posterior over the grid: nonnegative mass per cell summing to 1.
struct GridBelief {
  GridSpec spec;
  std::vector<double> mass;

  static GridBelief uniform(const GridSpec& spec);

  /// Scales mass to unit sum. Throws AllMassZero when nothing is left.
  void normalize();
  /// Index of the highest-mass cell, ties broken toward the lower index.
  std::size_t argmax() const;
  /// Mean of the cell centers weighted by mass.
  Position2D mean() const;
  /// sqrt of the trace of the 2x2 position covariance of the mass.
  double sigma_trace() const;
};

/// Filter parameters. Velocity and its noise are per-epoch displacements.
struct PgpParams {
  double tau_percent = 0.9;  // cumulative probability mass kept as hypotheses
  double r_est = 1.0;        // estimation region radius around the MLE cell
  double sigma_r = 0.3;      // ranging standard deviation
  double velocity = 0.0;     // expected movement per epoch
  double sigma_v = 0.1;      // transition noise per epoch
  int k_top = 64;            // prediction support: highest-probability cells
  double alpha = 0.3;        // EMA smoothing factor
  int h_bins = 1201;         // 1-D histogram bins over [0, d_max]
  double d_max = 60.0;       // maximum operational range
  int max_hypotheses = 0;    // optional cap on hypotheses per node, 0 = off

  void validate() const;
};

/// Top probability cells of a belief, carried with renormalized weights.
struct HypothesisSet {
  std::vector<Position2D> points;
  std::vector<double> weights;

  static HypothesisSet singleton(const Position2D& p) {
    return {{p}, {1.0}};
  }
};

/// A ranging observation from one reference whose position is uncertain.
struct HypothesisRef {
  HypothesisSet hypotheses;
  double range = 0.0;
};

/// A ranging observation from one reference collapsed to a point estimate
/// with a covariance-trace stand-in sigma (parametric comparison mode).
struct ParametricRef {
  Position2D point;
  double sigma = 0.0;
  double range = 0.0;
};

struct HistogramResult {
  double estimate = 0.0;
  std::vector<double> bins;  // normalized over bin centers j*d_max/(h_bins-1)
  bool clamped = false;      // measurement exceeded d_max and was clamped
};

/// 1-D histogram filter along the positive x-axis for anchor 1. Bin j gets
/// the Gaussian range likelihood of z01, normalized; the estimate is the
/// probability-weighted mean of the bin centers.
HistogramResult histogram_filter_a1(double z01, const PgpParams& params);

/// Anchor-2 belief: product of the two anchor range likelihoods with the
/// positive-y half-plane prior, normalized. Throws AllMassZero when the
/// constraints wipe out the whole grid.
GridBelief init_anchor2_grid(const Position2D& a0, const Position2D& a1,
                             double z02, double z12, const GridSpec& spec,
                             const PgpParams& params);

/// Motion update: each of the k_top highest-probability cells spreads its
/// mass over neighbours with a Gaussian kernel in travelled distance.
GridBelief predict(const GridBelief& prior, const PgpParams& params);

/// Cells sorted by mass descending; the smallest prefix reaching tau of the
/// total mass is kept and its weights renormalized. Ties break toward the
/// lower cell index. max_hypotheses > 0 additionally caps the selection.
HypothesisSet sample_hypotheses(const GridBelief& belief, double tau_percent,
                                int max_hypotheses = 0);

/// Per-cell product over references of the hypothesis-weighted range
/// likelihood. Unnormalized.
std::vector<double> likelihood_hypotheses(const GridSpec& spec,
                                          const std::vector<HypothesisRef>& refs,
                                          double sigma_r);

/// Parametric comparison mode: per-cell product of single Gaussians with
/// sigma inflated by each reference's covariance trace. Unnormalized.
std::vector<double> likelihood_parametric(const GridSpec& spec,
                                          const std::vector<ParametricRef>& refs,
                                          double sigma_r);

/// Bayes measurement update: elementwise product with the likelihood field,
/// renormalized. Throws AllMassZero when the product sums to zero.
GridBelief update(const GridBelief& predicted,
                  const std::vector<double>& likelihood_field);

/// Mass-weighted centroid of the cells within r_est of the argmax cell.
Position2D estimate_position(const GridBelief& belief, double r_est);

/// Exponential moving average, alpha = 1 passes the current value through.
Position2D smooth_ema(const Position2D& previous, const Position2D& current,
                      double alpha);

enum class UncertaintyMode { kHypotheses, kParametric };

struct PgpRunOptions {
  UncertaintyMode mode = UncertaintyMode::kHypotheses;
  bool ema_enabled = false;
  bool hybrid_median = false;  // window-5 median before the EMA stage
  bool a1_histogram_hypotheses = false;  // feed a1's histogram into Eq. refs
  bool gauss_seidel = false;  // within-epoch belief visibility (default Jacobi)
  bool parallel = true;       // per-node updates on worker threads
  // Called after each epoch for every node that holds a belief.
  std::function<void(int epoch_index, int node, const GridBelief&)> inspector;
};

/// Full probabilistic grid positioning run: staged anchor initialization
/// (origin, 1-D histogram, anchor-2 grid) followed by recursive per-epoch
/// prediction and hypothesis-weighted measurement updates for every other
/// node. Never throws on data conditions; they fold into availability.
std::vector<cf::EpochResult> run_pgp(const std::vector<DistanceMatrix>& dataset,
                                     const cf::FrameAssumptions& frame,
                                     const GridSpec& spec,
                                     const PgpParams& params,
                                     const PgpRunOptions& options = {});

}  // namespace meshcal::pgp
