#pragma once

#include <optional>
#include <string>
#include <string_view>

#include "cytobench/geometry.hpp"

namespace cytobench {

enum class InstanceClass { NucleusOnly, WholeCell };
enum class Source { Gold, Predicted };

std::string_view to_string(InstanceClass c);
std::string_view to_string(Source s);

// A nucleus, optionally paired with its whole-cell outline. The class follows
// from whether a cell polygon is present.
struct CellInstance {
  std::string id;
  std::string patch_id;
  Polygon nucleus;
  std::optional<Polygon> cell;
  std::optional<double> confidence;
  Source source = Source::Predicted;

  InstanceClass kind() const { return cell ? InstanceClass::WholeCell : InstanceClass::NucleusOnly; }
  double score() const { return confidence.value_or(1.0); }

  // Throws GeometryError when the nucleus centroid lies outside the cell, or
  // InvalidArgument for a confidence outside [0, 1].
  void validate() const;
};

}  // namespace cytobench
