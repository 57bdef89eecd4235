#pragma once

#include <optional>
#include <vector>

#include "meshcal/types.hpp"

namespace meshcal::cf {

/// The three nodes that pin the coordinate frame: origin at a0, the
/// direction a0->a1 as positive x-axis, a2 in the positive-y half-plane.
struct FrameAssumptions {
  NodeId origin_node;
  NodeId axis_node;
  NodeId halfplane_node;

  bool distinct() const {
    return origin_node.index != axis_node.index &&
           origin_node.index != halfplane_node.index &&
           axis_node.index != halfplane_node.index;
  }
};

/// Per-epoch calibration output, shared by the closed-form and grid methods.
/// For the closed-form method available[i] holds exactly when estimates[i]
/// is present; the grid method may carry an estimate forward from its prior
/// while flagging the epoch unavailable.
struct EpochResult {
  double epoch = 0.0;
  std::vector<std::optional<Position2D>> estimates;
  std::vector<bool> available;
};

struct CfOptions {
  int min_refs = 3;
  int max_iterations = 50;
  double step_tolerance = 1e-9;  // Gauss-Newton step norm
};

struct TrilatResult {
  Position2D position;
  double residual_norm = 0.0;
  bool ambiguous = false;  // collinear references admit a mirror solution
  int iterations = 0;
};

/// Places a0 at the origin and a1 at (z01, 0).
/// Throws MissingRange when z01 is absent, DegenerateFrame when z01 == 0.
std::pair<Position2D, Position2D> establish_frame(const DistanceMatrix& matrix,
                                                  const FrameAssumptions& frame);

/// Closed-form trilateration of the third anchor from its ranges to a0 and
/// a1. x = (z02^2 - z12^2 + x1^2) / (2 x1), y = +sqrt(z02^2 - x^2); the
/// positive root enforces the half-plane assumption. Throws ImaginaryRoot
/// when z02^2 < x^2.
Position2D place_anchor2(const Position2D& a1, double z02, double z12);

/// Nonlinear least-squares position from range observations to already
/// placed references, Gauss-Newton seeded with the two-circle closed form.
/// references holds (position, measured range) pairs.
TrilatResult trilaterate_node(
    const std::vector<std::pair<Position2D, double>>& references,
    const CfOptions& opts = {});

/// One full closed-form epoch: frame, anchor 2, then the remaining nodes in
/// ascending index order against every already placed node with a present
/// range. Failures mark the affected node unavailable; a frame failure marks
/// the whole epoch unavailable. Never throws.
EpochResult run_cf_epoch(const DistanceMatrix& matrix,
                         const FrameAssumptions& frame,
                         const CfOptions& opts = {});

/// Epoch-independent sweep over a whole dataset.
std::vector<EpochResult> run_cf(const std::vector<DistanceMatrix>& dataset,
                                const FrameAssumptions& frame,
                                const CfOptions& opts = {});

}  // namespace meshcal::cf
