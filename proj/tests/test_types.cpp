#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "meshcal/types.hpp"

using namespace meshcal;

TEST_CASE("symmetrize averages double-sided readings") {
  DistanceMatrix m(0.0, 3);
  m.set(0, 1, 10.0);
  m.set(1, 0, 10.2);
  DistanceMatrix s = symmetrize(m);
  CHECK(s.at(0, 1) == doctest::Approx(10.1));
  CHECK(s.at(1, 0) == doctest::Approx(10.1));
}

TEST_CASE("symmetrize mirrors one-sided readings") {
  DistanceMatrix m(0.0, 3);
  m.set(0, 1, 5.0);
  DistanceMatrix s = symmetrize(m);
  CHECK(s.has(0, 1));
  CHECK(s.has(1, 0));
  CHECK(s.at(1, 0) == doctest::Approx(5.0));
}

TEST_CASE("symmetrize keeps missing pairs missing") {
  DistanceMatrix m(0.0, 3);
  m.set(0, 1, 5.0);
  DistanceMatrix s = symmetrize(m);
  CHECK_FALSE(s.has(0, 2));
  CHECK_FALSE(s.has(2, 0));
  CHECK_FALSE(s.has(1, 2));
}

TEST_CASE("symmetrize is idempotent on random matrices") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> value(0.0, 50.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int rep = 0; rep < 50; ++rep) {
    const int n = 2 + static_cast<int>(unit(rng) * 8);
    DistanceMatrix m(0.0, n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        if (i != j && unit(rng) < 0.6) m.set(i, j, value(rng));
    DistanceMatrix once = symmetrize(m);
    DistanceMatrix twice = symmetrize(once);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        CHECK(once.has(i, j) == twice.has(i, j));
        if (once.has(i, j)) CHECK(once.at(i, j) == twice.at(i, j));
      }
  }
}

TEST_CASE("true_distance on a 3-4-5 triangle") {
  NetworkTruth truth;
  truth.positions = {{0, 0}, {3, 4}};
  truth.visibility = VisibilityMatrix(2);
  CHECK(true_distance(truth, 0, 1) == doctest::Approx(5.0));
}

TEST_CASE("true_distance of a node to itself and coincident nodes") {
  NetworkTruth truth;
  truth.positions = {{1, 1}, {1, 1}};
  truth.visibility = VisibilityMatrix(2);
  CHECK(true_distance(truth, 0, 0) == 0.0);
  CHECK(true_distance(truth, 0, 1) == 0.0);
}

TEST_CASE("true_distance rejects bad indices") {
  NetworkTruth truth;
  truth.positions = {{0, 0}, {1, 0}};
  truth.visibility = VisibilityMatrix(2);
  CHECK_THROWS_AS(true_distance(truth, 0, 2), Error);
}

TEST_CASE("true_distance symmetry and triangle inequality") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> coord(-30.0, 30.0);
  NetworkTruth truth;
  for (int i = 0; i < 8; ++i) truth.positions.push_back({coord(rng), coord(rng)});
  truth.visibility = VisibilityMatrix(8);
  for (int i = 0; i < 8; ++i)
    for (int j = 0; j < 8; ++j) {
      CHECK(true_distance(truth, i, j) == true_distance(truth, j, i));
      for (int k = 0; k < 8; ++k)
        CHECK(true_distance(truth, i, k) <=
              true_distance(truth, i, j) + true_distance(truth, j, k) + 1e-12);
    }
}

TEST_CASE("distance matrix validation catches bad entries") {
  DistanceMatrix m(0.0, 2);
  m.set(0, 1, -1.0);
  CHECK_THROWS_AS(m.validate(), Error);
  DistanceMatrix d(0.0, 2);
  d.set(0, 0, 3.0);
  CHECK_THROWS_AS(d.validate(), Error);
}
