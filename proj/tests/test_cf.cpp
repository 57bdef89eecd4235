#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "meshcal/cf.hpp"
#include "meshcal/dataio.hpp"
#include "meshcal/sim.hpp"
#include "test_util.hpp"

using namespace meshcal;
using namespace meshcal::cf;
using testutil::exact_matrix;
using testutil::frame_of;

TEST_CASE("establish_frame pins a0 and a1") {
  DistanceMatrix m(0.0, 3);
  m.set(0, 1, 10.0);
  m.set(1, 0, 10.0);
  auto [a0, a1] = establish_frame(m, frame_of(0, 1, 2));
  CHECK(a0.x == 0.0);
  CHECK(a0.y == 0.0);
  CHECK(a1.x == doctest::Approx(10.0));
  CHECK(a1.y == 0.0);
}

TEST_CASE("establish_frame without z01 reports the missing range") {
  DistanceMatrix m(0.0, 3);
  CHECK_THROWS_AS(establish_frame(m, frame_of(0, 1, 2)), MissingRange);
}

TEST_CASE("establish_frame rejects a zero baseline") {
  DistanceMatrix m(0.0, 3);
  m.set(0, 1, 0.0);
  m.set(1, 0, 0.0);
  CHECK_THROWS_AS(establish_frame(m, frame_of(0, 1, 2)), DegenerateFrame);
}

TEST_CASE("place_anchor2 symmetric case") {
  const double z = std::sqrt(50.0);
  Position2D a2 = place_anchor2({10.0, 0.0}, z, z);
  CHECK(a2.x == doctest::Approx(5.0));
  CHECK(a2.y == doctest::Approx(5.0));
}

TEST_CASE("place_anchor2 asymmetric case verified by forward distances") {
  Position2D a2 = place_anchor2({10.0, 0.0}, 6.0, 8.0);
  CHECK(a2.x == doctest::Approx(3.6));
  CHECK(a2.y == doctest::Approx(4.8));
  // independent forward check against both anchors
  CHECK(std::hypot(a2.x, a2.y) == doctest::Approx(6.0));
  CHECK(std::hypot(a2.x - 10.0, a2.y) == doctest::Approx(8.0));
}

TEST_CASE("place_anchor2 flags infeasible geometry") {
  // no point is 1 m from a0 and 12 m from a1 when the baseline is 10 m;
  // brute-force feasibility: min over a coarse grid stays far from zero
  double best = 1e9;
  for (double x = -20.0; x <= 30.0; x += 0.05)
    for (double y = -20.0; y <= 20.0; y += 0.05) {
      const double e = std::abs(std::hypot(x, y) - 1.0) +
                       std::abs(std::hypot(x - 10.0, y) - 12.0);
      best = std::min(best, e);
    }
  CHECK(best > 0.5);
  CHECK_THROWS_AS(place_anchor2({10.0, 0.0}, 1.0, 12.0), ImaginaryRoot);
}

TEST_CASE("trilaterate_node recovers an exact position") {
  const Position2D target{3.0, 4.0};
  std::vector<std::pair<Position2D, double>> refs = {
      {{0.0, 0.0}, distance({0, 0}, target)},
      {{10.0, 0.0}, distance({10, 0}, target)},
      {{5.0, 5.0}, distance({5, 5}, target)},
  };
  TrilatResult r = trilaterate_node(refs);
  CHECK(r.position.x == doctest::Approx(3.0).epsilon(1e-6));
  CHECK(r.position.y == doctest::Approx(4.0).epsilon(1e-6));
  CHECK(r.residual_norm < 1e-6);
  CHECK_FALSE(r.ambiguous);
}

TEST_CASE("trilaterate_node wants at least min_refs references") {
  std::vector<std::pair<Position2D, double>> refs = {
      {{0.0, 0.0}, 5.0},
      {{10.0, 0.0}, 5.0},
  };
  CHECK_THROWS_AS(trilaterate_node(refs), InsufficientReferences);
}

TEST_CASE("collinear references are flagged ambiguous") {
  const Position2D target{5.0, 3.0};
  std::vector<std::pair<Position2D, double>> refs = {
      {{0.0, 0.0}, distance({0, 0}, target)},
      {{5.0, 0.0}, distance({5, 0}, target)},
      {{10.0, 0.0}, distance({10, 0}, target)},
  };
  TrilatResult r = trilaterate_node(refs);
  CHECK(r.ambiguous);
  // the solver lands on one of the two mirror solutions
  CHECK(r.position.x == doctest::Approx(5.0).epsilon(1e-6));
  CHECK(std::abs(r.position.y) == doctest::Approx(3.0).epsilon(1e-6));
  // mirror solutions carry identical residuals by reflection symmetry
  double rp = 0, rm = 0;
  for (const auto& [p, z] : refs) {
    const double dp = distance(p, {5.0, 3.0}) - z;
    const double dm = distance(p, {5.0, -3.0}) - z;
    rp += dp * dp;
    rm += dm * dm;
  }
  CHECK(rp == doctest::Approx(rm));
}

namespace {

NetworkTruth demo_truth() {
  sim::ScenarioSpec spec = sim::torgau_like_scenario();
  spec.obstacles.clear();  // full LOS for the exact-recovery checks
  return sim::generate_layout(spec);
}

}  // namespace

TEST_CASE("run_cf_epoch recovers a noiseless 12-node mesh") {
  NetworkTruth truth = demo_truth();
  DistanceMatrix m = exact_matrix(truth);
  FrameAssumptions frame = frame_of(0, 1, 7);
  EpochResult r = run_cf_epoch(m, frame);
  auto expected = io::transform_ground_truth(truth.positions, frame);
  for (int i = 0; i < truth.size(); ++i) {
    REQUIRE(r.available[i]);
    CHECK(distance(*r.estimates[i], expected[i]) < 1e-6);
  }
}

TEST_CASE("missing z01 kills the whole epoch") {
  NetworkTruth truth = demo_truth();
  DistanceMatrix m = exact_matrix(truth);
  m.clear(0, 1);
  m.clear(1, 0);
  EpochResult r = run_cf_epoch(m, frame_of(0, 1, 7));
  for (int i = 0; i < truth.size(); ++i) {
    CHECK_FALSE(r.available[i]);
    CHECK_FALSE(r.estimates[i].has_value());
  }
}

TEST_CASE("node missing its axis range is still placed through other refs") {
  NetworkTruth truth = demo_truth();
  DistanceMatrix m = exact_matrix(truth);
  m.clear(1, 9);
  m.clear(9, 1);
  EpochResult r = run_cf_epoch(m, frame_of(0, 1, 7));
  REQUIRE(r.available[9]);
  auto expected = io::transform_ground_truth(truth.positions, frame_of(0, 1, 7));
  CHECK(distance(*r.estimates[9], expected[9]) < 1e-6);
}

TEST_CASE("cf availability flags match estimate presence") {
  NetworkTruth truth = demo_truth();
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int rep = 0; rep < 20; ++rep) {
    DistanceMatrix m = exact_matrix(truth);
    for (int i = 0; i < truth.size(); ++i)
      for (int j = i + 1; j < truth.size(); ++j)
        if (unit(rng) < 0.35) {
          m.clear(i, j);
          m.clear(j, i);
        }
    EpochResult r = run_cf_epoch(m, frame_of(0, 1, 7));
    for (int i = 0; i < truth.size(); ++i)
      CHECK(r.available[i] == r.estimates[i].has_value());
  }
}

TEST_CASE("removing a measurement never grows the available set") {
  NetworkTruth truth = demo_truth();
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int rep = 0; rep < 30; ++rep) {
    DistanceMatrix m = exact_matrix(truth);
    for (int i = 0; i < truth.size(); ++i)
      for (int j = i + 1; j < truth.size(); ++j)
        if (unit(rng) < 0.25) {
          m.clear(i, j);
          m.clear(j, i);
        }
    EpochResult before = run_cf_epoch(m, frame_of(0, 1, 7));

    // drop one randomly chosen present off-diagonal pair
    std::vector<std::pair<int, int>> present;
    for (int i = 0; i < truth.size(); ++i)
      for (int j = i + 1; j < truth.size(); ++j)
        if (m.has(i, j)) present.emplace_back(i, j);
    if (present.empty()) continue;
    auto [pi, pj] = present[static_cast<std::size_t>(unit(rng) * present.size()) %
                            present.size()];
    m.clear(pi, pj);
    m.clear(pj, pi);
    EpochResult after = run_cf_epoch(m, frame_of(0, 1, 7));
    for (int i = 0; i < truth.size(); ++i)
      if (after.available[i]) CHECK(before.available[i]);
  }
}

TEST_CASE("frame failure mode mirrors anchor-dependent availability") {
  // Masking the a1<->halfplane range starves the strict anchor-2 placement
  // under the first frame; a frame whose connectivity suffices recovers.
  NetworkTruth truth = demo_truth();
  const int epochs = 25;
  std::vector<DistanceMatrix> dataset;
  for (int k = 0; k < epochs; ++k) {
    DistanceMatrix m = exact_matrix(truth, k * 0.1);
    m.clear(1, 5);
    m.clear(5, 1);
    dataset.push_back(m);
  }
  auto conf1 = run_cf(dataset, frame_of(0, 1, 5));
  auto conf2 = run_cf(dataset, frame_of(0, 2, 7));
  int avail1 = 0, avail2 = 0;
  for (int k = 0; k < epochs; ++k) {
    avail1 += conf1[k].available[5] ? 1 : 0;
    avail2 += conf2[k].available[5] ? 1 : 0;
  }
  CHECK(avail1 == 0);
  CHECK(avail2 == epochs);
}
