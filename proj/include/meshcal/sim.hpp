#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "meshcal/types.hpp"

namespace meshcal::sim {

/// Stochastic ranging error model. LOS errors are zero-mean Gaussian; NLOS
/// errors add a half-normal excess plus an exponential bias. Either class
/// may drop out or be replaced by a uniform outlier.
struct RangingModel {
  double sigma_los = 0.33;
  double nlos_bias_scale = 3.0;   // exponential mean of the NLOS bias
  double sigma_nlos_base = 0.5;   // half-normal NLOS excess
  double dropout_prob_los = 0.0;
  double dropout_prob_nlos = 0.0;
  double outlier_prob = 0.0;
  double outlier_max = 25.0;      // outliers are uniform in [d_ij, outlier_max]
  std::uint64_t seed = 1;

  void validate() const;
};

struct Rect {
  double x_min = 0.0;
  double y_min = 0.0;
  double x_max = 0.0;
  double y_max = 0.0;
};

enum class Layout { kGrid, kUniformRandom, kExplicit };

struct ScenarioSpec {
  int n_nodes = 12;
  double hall_width = 44.0;
  double hall_height = 30.0;
  int n_epochs = 2000;
  double epoch_rate = 10.0;  // Hz
  Layout layout = Layout::kGrid;
  std::vector<Position2D> positions;  // used when layout == kExplicit
  std::vector<std::string> labels;    // optional; default N00..Nxx
  std::vector<Rect> obstacles;

  void validate() const;
};

/// True iff the closed segment a-b intersects the closed rectangle.
bool segment_intersects_rect(const Position2D& a, const Position2D& b,
                             const Rect& r);

/// Places the nodes and derives the LOS/NLOS matrix: a pair is NLOS iff its
/// connecting segment crosses any obstacle. Throws LayoutInfeasible when
/// explicit positions fall outside the hall.
NetworkTruth generate_layout(const ScenarioSpec& spec, std::uint64_t seed = 0);

/// One measured range draw for the pair (i, j), or nullopt on dropout.
std::optional<double> sample_range(const NetworkTruth& truth, int i, int j,
                                   const RangingModel& model,
                                   std::mt19937_64& rng);

/// Full synthetic dataset: one symmetric matrix per epoch, one draw per
/// unordered pair. Bit-identical under a fixed seed.
std::pair<NetworkTruth, std::vector<DistanceMatrix>> generate_dataset(
    const ScenarioSpec& spec, const RangingModel& model);

std::vector<std::string> default_labels(int n);

/// Canned 12-node mixed LOS/NLOS scenario over a 44 x 30 m hall with three
/// obstructed, NLOS-dominated nodes. Pairs with default_model().
ScenarioSpec torgau_like_scenario();

/// Ranging model tuned so that dataset statistics land in the reference
/// bands (LOS mean ~0.28 m, NLOS mean ~3.8 m with heavy right tail).
RangingModel default_model();

}  // namespace meshcal::sim
