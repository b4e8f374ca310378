#include "cytobench/cell.hpp"

#include "cytobench/error.hpp"

namespace cytobench {

std::string_view to_string(InstanceClass c) {
  return c == InstanceClass::WholeCell ? "whole-cell" : "nucleus-only";
}

std::string_view to_string(Source s) { return s == Source::Gold ? "gold" : "predicted"; }

void CellInstance::validate() const {
  if (confidence && !(*confidence >= 0.0 && *confidence <= 1.0)) {
    throw InvalidArgument("instance " + id + ": confidence outside [0, 1]");
  }
  if (cell && !cell->contains(nucleus.centroid())) {
    throw GeometryError("instance " + id + ": nucleus centroid outside cell polygon");
  }
}

}  // namespace cytobench
