#include "meshcal/sim.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

namespace meshcal::sim {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

void check_prob(double p, const char* name) {
  if (p < 0.0 || p > 1.0)
    throw Error(std::string(name) + " must be a probability in [0, 1]");
}

}  // namespace

void RangingModel::validate() const {
  check_prob(dropout_prob_los, "dropout_prob_los");
  check_prob(dropout_prob_nlos, "dropout_prob_nlos");
  check_prob(outlier_prob, "outlier_prob");
  if (sigma_los < 0.0 || sigma_nlos_base < 0.0 || nlos_bias_scale < 0.0 ||
      outlier_max < 0.0)
    throw Error("ranging model scales must be nonnegative");
}

void ScenarioSpec::validate() const {
  if (n_nodes < 4) throw Error("scenario needs at least 4 nodes");
  if (!(hall_width > 0.0) || !(hall_height > 0.0))
    throw Error("hall dimensions must be positive");
  if (n_epochs < 1) throw Error("scenario needs at least one epoch");
  if (!(epoch_rate > 0.0)) throw Error("epoch_rate must be positive");
  if (layout == Layout::kExplicit &&
      static_cast<int>(positions.size()) != n_nodes)
    throw Error("explicit layout needs exactly n_nodes positions");
}

bool segment_intersects_rect(const Position2D& a, const Position2D& b,
                             const Rect& r) {
  // Liang-Barsky clipping of the parametric segment against the slabs.
  const double dx = b.x - a.x;
  const double dy = b.y - a.y;
  double t0 = 0.0, t1 = 1.0;
  const double p[4] = {-dx, dx, -dy, dy};
  const double q[4] = {a.x - r.x_min, r.x_max - a.x, a.y - r.y_min,
                       r.y_max - a.y};
  for (int k = 0; k < 4; ++k) {
    if (p[k] == 0.0) {
      if (q[k] < 0.0) return false;  // parallel and outside the slab
      continue;
    }
    const double t = q[k] / p[k];
    if (p[k] < 0.0) {
      if (t > t1) return false;
      t0 = std::max(t0, t);
    } else {
      if (t < t0) return false;
      t1 = std::min(t1, t);
    }
  }
  return t0 <= t1;
}

std::vector<std::string> default_labels(int n) {
  std::vector<std::string> labels;
  labels.reserve(n);
  char buf[16];
  for (int i = 0; i < n; ++i) {
    std::snprintf(buf, sizeof(buf), "N%02d", i);
    labels.emplace_back(buf);
  }
  return labels;
}

NetworkTruth generate_layout(const ScenarioSpec& spec, std::uint64_t seed) {
  spec.validate();
  NetworkTruth truth;
  const int n = spec.n_nodes;

  switch (spec.layout) {
    case Layout::kExplicit: {
      for (const auto& p : spec.positions) {
        if (p.x < 0.0 || p.x > spec.hall_width || p.y < 0.0 ||
            p.y > spec.hall_height)
          throw LayoutInfeasible("explicit position outside the hall bounds");
      }
      truth.positions = spec.positions;
      break;
    }
    case Layout::kGrid: {
      const int cols = static_cast<int>(std::ceil(std::sqrt(double(n))));
      const int rows = (n + cols - 1) / cols;
      const double dx = spec.hall_width / (cols + 1);
      const double dy = spec.hall_height / (rows + 1);
      for (int i = 0; i < n; ++i) {
        const int c = i % cols;
        const int r = i / cols;
        truth.positions.emplace_back((c + 1) * dx, (r + 1) * dy);
      }
      break;
    }
    case Layout::kUniformRandom: {
      std::mt19937_64 rng(splitmix64(seed ^ 0x1a2b3c4d5e6f7788ULL));
      std::uniform_real_distribution<double> ux(0.0, spec.hall_width);
      std::uniform_real_distribution<double> uy(0.0, spec.hall_height);
      for (int i = 0; i < n; ++i) {
        Position2D p;
        // keep nodes outside obstacles; bounded retry to stay deterministic
        for (int attempt = 0; attempt < 1000; ++attempt) {
          p = {ux(rng), uy(rng)};
          bool inside = false;
          for (const auto& r : spec.obstacles)
            if (p.x >= r.x_min && p.x <= r.x_max && p.y >= r.y_min &&
                p.y <= r.y_max) {
              inside = true;
              break;
            }
          if (!inside) break;
        }
        truth.positions.push_back(p);
      }
      break;
    }
  }

  truth.visibility = VisibilityMatrix(n, true);
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      bool los = true;
      for (const auto& r : spec.obstacles) {
        if (segment_intersects_rect(truth.positions[i], truth.positions[j], r)) {
          los = false;
          break;
        }
      }
      truth.visibility.set(i, j, los);
    }
  }
  return truth;
}

std::optional<double> sample_range(const NetworkTruth& truth, int i, int j,
                                   const RangingModel& model,
                                   std::mt19937_64& rng) {
  if (i == j) throw Error("sample_range needs two distinct nodes");
  const bool los = truth.visibility.los(i, j);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  const double dropout = los ? model.dropout_prob_los : model.dropout_prob_nlos;
  if (unit(rng) < dropout) return std::nullopt;

  const double d = true_distance(truth, i, j);
  double z;
  if (los) {
    double noise = 0.0;
    if (model.sigma_los > 0.0) {
      std::normal_distribution<double> g(0.0, model.sigma_los);
      noise = g(rng);
    }
    z = d + noise;
  } else {
    double excess = 0.0;
    if (model.sigma_nlos_base > 0.0) {
      std::normal_distribution<double> g(0.0, model.sigma_nlos_base);
      excess = std::abs(g(rng));
    }
    double bias = 0.0;
    if (model.nlos_bias_scale > 0.0) {
      std::exponential_distribution<double> e(1.0 / model.nlos_bias_scale);
      bias = e(rng);
    }
    z = d + excess + bias;
  }

  if (model.outlier_prob > 0.0 && unit(rng) < model.outlier_prob) {
    std::uniform_real_distribution<double> u(d, std::max(model.outlier_max, d));
    z = u(rng);
  }
  return std::max(z, 0.0);
}

std::pair<NetworkTruth, std::vector<DistanceMatrix>> generate_dataset(
    const ScenarioSpec& spec, const RangingModel& model) {
  spec.validate();
  model.validate();
  NetworkTruth truth = generate_layout(spec, model.seed);
  const int n = spec.n_nodes;

  std::vector<DistanceMatrix> records;
  records.reserve(spec.n_epochs);
  for (int k = 0; k < spec.n_epochs; ++k) {
    // Per-epoch generator split from the master seed: epochs can be drawn
    // in any order and still replay bit-identically.
    std::mt19937_64 rng(splitmix64(model.seed ^ splitmix64(0x6d5a3f + k)));
    DistanceMatrix m(k / spec.epoch_rate, n);
    for (int i = 0; i < n; ++i) {
      for (int j = i + 1; j < n; ++j) {
        auto z = sample_range(truth, i, j, model, rng);
        if (z) {
          m.set(i, j, *z);
          m.set(j, i, *z);
        }
      }
    }
    records.push_back(std::move(m));
  }
  return {std::move(truth), std::move(records)};
}

ScenarioSpec torgau_like_scenario() {
  ScenarioSpec spec;
  spec.n_nodes = 12;
  spec.hall_width = 44.0;
  spec.hall_height = 30.0;
  spec.n_epochs = 2000;
  spec.epoch_rate = 10.0;
  spec.layout = Layout::kExplicit;
  spec.positions = {
      {2.0, 2.0},  {12.0, 2.0},  {22.0, 2.0},  {32.0, 2.0},
      {42.0, 2.0}, {42.0, 15.0}, {42.0, 28.0}, {32.0, 28.0},
      {22.0, 28.0}, {12.0, 28.0}, {2.0, 28.0}, {2.0, 15.0},
  };
  spec.labels = default_labels(12);
  // Three obstructed regions leave nodes N04, N08 and N11 NLOS-dominated;
  // 16 of the 66 pairs lose line of sight (24.2 %).
  spec.obstacles = {
      {36.0, 0.0, 38.0, 4.5},
      {18.5, 23.5, 26.0, 25.5},
      {3.0, 9.0, 4.4, 15.3},
  };
  return spec;
}

RangingModel default_model() {
  RangingModel model;
  model.sigma_los = 0.33;
  model.nlos_bias_scale = 3.0;
  model.sigma_nlos_base = 0.5;
  model.dropout_prob_los = 0.02;
  model.dropout_prob_nlos = 0.25;
  model.outlier_prob = 0.003;
  model.outlier_max = 25.0;
  model.seed = 1;
  return model;
}

}  // namespace meshcal::sim
