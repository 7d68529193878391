#pragma once

#include <array>
#include <cstddef>

namespace hcadapt {

/// Uniform rectangular cell-centered grid on [0, Lx] x [0, Ly].
///
/// Cells are numbered x-fastest: cell(i, j) = i + nx * j. A 1x1 grid of unit
/// extent stands in for scalar quantities of interest.
class SpatialGrid {
 public:
  SpatialGrid() : SpatialGrid(1.0, 1.0, 1, 1) {}
  SpatialGrid(double length_x, double length_y, std::size_t nx, std::size_t ny);

  static SpatialGrid single_point() { return SpatialGrid(); }

  std::size_t nx() const { return nx_; }
  std::size_t ny() const { return ny_; }
  std::size_t size() const { return nx_ * ny_; }
  double length_x() const { return lx_; }
  double length_y() const { return ly_; }
  double hx() const { return lx_ / static_cast<double>(nx_); }
  double hy() const { return ly_ / static_cast<double>(ny_); }
  double cell_area() const { return hx() * hy(); }
  double area() const { return lx_ * ly_; }

  std::size_t cell(std::size_t i, std::size_t j) const { return i + nx_ * j; }
  std::array<double, 2> center(std::size_t c) const;

  bool operator==(const SpatialGrid&) const = default;

 private:
  double lx_;
  double ly_;
  std::size_t nx_;
  std::size_t ny_;
};

}  // namespace hcadapt
