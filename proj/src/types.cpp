#include "meshcal/types.hpp"

#include <cmath>

namespace meshcal {

void DistanceMatrix::validate() const {
  for (int i = 0; i < n_; ++i) {
    for (int j = 0; j < n_; ++j) {
      if (!has(i, j)) continue;
      const double v = at(i, j);
      if (!std::isfinite(v))
        throw Error("non-finite range at (" + std::to_string(i) + "," +
                    std::to_string(j) + ")");
      if (v < 0.0)
        throw Error("negative range at (" + std::to_string(i) + "," +
                    std::to_string(j) + ")");
      if (i == j && v != 0.0)
        throw Error("nonzero diagonal range at node " + std::to_string(i));
    }
  }
}

DistanceMatrix symmetrize(const DistanceMatrix& matrix) {
  const int n = matrix.size();
  DistanceMatrix out(matrix.epoch(), n);
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      const bool fwd = matrix.has(i, j);
      const bool bwd = matrix.has(j, i);
      if (fwd && bwd) {
        const double v = 0.5 * (matrix.at(i, j) + matrix.at(j, i));
        out.set(i, j, v);
        out.set(j, i, v);
      } else if (fwd || bwd) {
        const double v = fwd ? matrix.at(i, j) : matrix.at(j, i);
        out.set(i, j, v);
        out.set(j, i, v);
      }
    }
  }
  return out;
}

double true_distance(const NetworkTruth& truth, int i, int j) {
  const int n = truth.size();
  if (i < 0 || j < 0 || i >= n || j >= n)
    throw Error("true_distance: node index out of range");
  return distance(truth.positions[i], truth.positions[j]);
}

}  // namespace meshcal
