#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "meshcal/errors.hpp"

namespace meshcal {

/// Node identity: a short label (as found in dataset headers) plus the
/// ordinal index of the node within its network.
struct NodeId {
  std::string label;
  int index = -1;
};

struct Position2D {
  double x = 0.0;
  double y = 0.0;

  Position2D() = default;
  Position2D(double x_, double y_) : x(x_), y(y_) {}

  Position2D operator+(const Position2D& o) const { return {x + o.x, y + o.y}; }
  Position2D operator-(const Position2D& o) const { return {x - o.x, y - o.y}; }
  Position2D operator*(double s) const { return {x * s, y * s}; }

  double norm() const { return std::hypot(x, y); }
  bool finite() const { return std::isfinite(x) && std::isfinite(y); }
};

inline double distance(const Position2D& a, const Position2D& b) {
  return std::hypot(a.x - b.x, a.y - b.y);
}

/// Symmetric per-epoch matrix of measured inter-node ranges. Missing
/// measurements are carried as an explicit mask, never as sentinel values.
class DistanceMatrix {
public:
  DistanceMatrix() = default;
  DistanceMatrix(double epoch, int n)
      : epoch_(epoch), n_(n), entries_(static_cast<std::size_t>(n) * n, 0.0),
        mask_(static_cast<std::size_t>(n) * n, 0) {}

  double epoch() const { return epoch_; }
  void set_epoch(double t) { epoch_ = t; }
  int size() const { return n_; }

  bool has(int i, int j) const { return mask_[idx(i, j)] != 0; }
  double at(int i, int j) const { return entries_[idx(i, j)]; }

  void set(int i, int j, double value) {
    entries_[idx(i, j)] = value;
    mask_[idx(i, j)] = 1;
  }
  void clear(int i, int j) {
    entries_[idx(i, j)] = 0.0;
    mask_[idx(i, j)] = 0;
  }

  /// Number of present entries (directed count).
  std::size_t present_count() const {
    std::size_t c = 0;
    for (auto m : mask_) c += m;
    return c;
  }

  /// Throws if any present entry is negative or non-finite, if the diagonal
  /// carries a nonzero measurement, or if i/j are out of range elsewhere.
  void validate() const;

private:
  std::size_t idx(int i, int j) const {
    if (i < 0 || j < 0 || i >= n_ || j >= n_)
      throw Error("distance matrix index out of range");
    return static_cast<std::size_t>(i) * n_ + j;
  }

  double epoch_ = 0.0;
  int n_ = 0;
  std::vector<double> entries_;
  std::vector<unsigned char> mask_;
};

/// Binary line-of-sight classification per node pair. Symmetric, diagonal
/// true by convention.
class VisibilityMatrix {
public:
  VisibilityMatrix() = default;
  explicit VisibilityMatrix(int n, bool all_los = true)
      : n_(n), los_(static_cast<std::size_t>(n) * n, all_los ? 1 : 0) {
    for (int i = 0; i < n; ++i) los_[static_cast<std::size_t>(i) * n + i] = 1;
  }

  int size() const { return n_; }
  bool los(int i, int j) const { return los_[idx(i, j)] != 0; }
  void set(int i, int j, bool is_los) {
    los_[idx(i, j)] = is_los ? 1 : 0;
    los_[idx(j, i)] = is_los ? 1 : 0;
  }

private:
  std::size_t idx(int i, int j) const {
    if (i < 0 || j < 0 || i >= n_ || j >= n_)
      throw Error("visibility matrix index out of range");
    return static_cast<std::size_t>(i) * n_ + j;
  }

  int n_ = 0;
  std::vector<unsigned char> los_;
};

/// Ground-truth node positions plus the pairwise LOS/NLOS matrix. True
/// distances are derived on demand, never stored.
struct NetworkTruth {
  std::vector<Position2D> positions;
  VisibilityMatrix visibility;

  int size() const { return static_cast<int>(positions.size()); }
};

/// Pairwise mean where both directions are present, mirror where only one
/// is. The diagonal is always masked absent.
DistanceMatrix symmetrize(const DistanceMatrix& matrix);

/// Euclidean distance between ground-truth positions of nodes i and j.
double true_distance(const NetworkTruth& truth, int i, int j);

}  // namespace meshcal
