#pragma once

#include <istream>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "meshcal/cf.hpp"
#include "meshcal/types.hpp"

namespace meshcal::io {

/// In-memory image of one dataset file.
///
/// On-disk grammar (all floats printed with 4 decimals):
///   # nodes: <label> <label> ...        mandatory first directive
///   # visibility                        optional; N rows of 0/1
///   # truth                             optional; N rows of "x y"
///   t=<seconds>                         one per epoch, then N matrix rows
///   <v> <v> ... <v>                     row entries; "-" or "nan" = absent
/// Any other line starting with '#' is a comment.
struct DatasetFile {
  std::vector<std::string> labels;
  std::vector<DistanceMatrix> records;
  std::optional<VisibilityMatrix> visibility;
  std::optional<std::vector<Position2D>> ground_truth;
  std::vector<std::string> warnings;  // symmetrization, timestamp reordering

  int node_count() const { return static_cast<int>(labels.size()); }
  int index_of(const std::string& label) const;  // -1 when unknown
};

/// Parses and validates a dataset. Matrices are symmetrized on load (with a
/// warning when the raw input was one-sided or asymmetric) and diagonal
/// readings are dropped. Non-monotone timestamps are reordered with a
/// warning. Throws ParseError / DimensionMismatch on malformed input.
DatasetFile parse_dataset(std::istream& in);
DatasetFile parse_dataset_file(const std::string& path);

void write_dataset(const DatasetFile& data, std::ostream& out);
void write_dataset_file(const DatasetFile& data, const std::string& path);

/// Rigid transform of surveyed coordinates into the calibration frame:
/// the origin node moves to (0,0), the axis node onto the positive x-axis,
/// and the half-plane node is reflected to positive y if needed. Distances
/// are preserved. Throws DegenerateFrame when origin and axis coincide.
std::vector<Position2D> transform_ground_truth(
    const std::vector<Position2D>& raw_positions,
    const cf::FrameAssumptions& frame);

}  // namespace meshcal::io
