#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "meshcal/cf.hpp"
#include "meshcal/types.hpp"

namespace meshcal::eval {

/// Descriptive statistics of absolute ranging residuals for one propagation
/// class. Quantile rows are the 68.27 / 95.45 / 99.73 percentiles.
struct ClassStats {
  std::size_t count = 0;
  double share = 0.0;
  double mean = 0.0;
  double median = 0.0;
  double variance = 0.0;  // m^2
  double sigma1 = 0.0;
  double sigma2 = 0.0;
  double sigma3 = 0.0;
  double p25 = 0.0;
  double p50 = 0.0;
  double p75 = 0.0;
};

struct RangingStats {
  ClassStats los;
  ClassStats nlos;
  ClassStats overall;
  // Signed residuals per class, kept for distribution histograms.
  std::vector<double> signed_los;
  std::vector<double> signed_nlos;
};

struct PairwiseRmse {
  int n = 0;
  std::vector<double> rmse;         // NaN where no measurement ever appeared
  std::vector<std::size_t> counts;  // per unordered pair, mirrored

  double at(int i, int j) const { return rmse[static_cast<std::size_t>(i) * n + j]; }
  std::size_t count(int i, int j) const {
    return counts[static_cast<std::size_t>(i) * n + j];
  }
};

struct QqResult {
  std::vector<double> reference_q;  // 0..100th percentile grid
  std::vector<double> measured_q;
  double r_squared = 0.0;
  bool degenerate = false;  // constant measured distances
};

struct NodeRmse {
  double rmse = 0.0;  // NaN when no available epoch exists
  std::size_t epochs_used = 0;
  double availability = 0.0;
};

struct MethodConfigReport {
  std::string method;
  std::size_t config_index = 0;
  std::vector<NodeRmse> nodes;
  std::vector<double> ecdf_errors;  // sorted per-epoch position errors
  double all_node_rmse = 0.0;
};

struct PositioningReport {
  std::vector<MethodConfigReport> entries;
  std::vector<double> cf_delta;   // per-node cross-configuration RMSE spread
  std::vector<double> pgp_delta;
  double cf_max_delta = 0.0;
  double pgp_max_delta = 0.0;
  bool pgp_spread_smaller = false;
};

/// Table-style ranging statistics, residuals classified LOS/NLOS by the
/// truth visibility matrix. Throws NoTruth when truth does not cover the
/// dataset.
RangingStats ranging_stats(const std::vector<DistanceMatrix>& dataset,
                           const NetworkTruth& truth);

/// RMSE of ranging residuals per unordered node pair.
PairwiseRmse pairwise_rmse_matrix(const std::vector<DistanceMatrix>& dataset,
                                  const NetworkTruth& truth);

/// Matched quantiles of reference vs measured distances and the R^2 of
/// their least-squares fit. Throws InsufficientData below two measurements.
QqResult qq_correlation(const std::vector<DistanceMatrix>& dataset,
                        const NetworkTruth& truth);

/// Fraction of epochs with available == true, per node.
std::vector<double> availability(const std::vector<cf::EpochResult>& results);

/// Node-wise RMSE over available epochs, pooled error ECDFs and
/// cross-configuration deltas for both methods. Estimates are compared
/// against the raw ground truth transformed into each configuration frame.
PositioningReport positioning_report(
    const std::vector<std::vector<cf::EpochResult>>& cf_by_config,
    const std::vector<std::vector<cf::EpochResult>>& pgp_by_config,
    const std::vector<Position2D>& truth_raw,
    const std::vector<cf::FrameAssumptions>& configurations);

/// Linear-interpolation percentile of an unsorted sample, p in [0, 100].
double percentile(std::vector<double> values, double p);

}  // namespace meshcal::eval
