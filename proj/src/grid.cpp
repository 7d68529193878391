#include "hcadapt/grid.hpp"

#include "hcadapt/error.hpp"

namespace hcadapt {

SpatialGrid::SpatialGrid(double length_x, double length_y, std::size_t nx, std::size_t ny)
    : lx_(length_x), ly_(length_y), nx_(nx), ny_(ny) {
  if (!(length_x > 0.0) || !(length_y > 0.0)) throw InvalidArgument("grid extent must be positive");
  if (nx == 0 || ny == 0) throw InvalidArgument("grid must have at least one cell per axis");
}

std::array<double, 2> SpatialGrid::center(std::size_t c) const {
  const std::size_t i = c % nx_;
  const std::size_t j = c / nx_;
  return {(static_cast<double>(i) + 0.5) * hx(), (static_cast<double>(j) + 0.5) * hy()};
}

}  // namespace hcadapt
