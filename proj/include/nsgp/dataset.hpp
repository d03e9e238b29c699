#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

#include "nsgp/geo.hpp"

namespace nsgp {

inline constexpr double kMissing = std::numeric_limits<double>::quiet_NaN();
/// Cells at or beyond this absolute latitude are dropped at ingestion.
inline constexpr double kPoleLatitude = 89.0;

struct Cell {
  std::int64_t cell_id = 0;
  double longitude = 0.0;
  double latitude = 0.0;
  int land = 0;
  double rv20 = kMissing;  // NaN marks a missing response
  XyzPoint xyz;

  [[nodiscard]] bool observed() const { return !std::isnan(rv20); }
};

/// Gridded cells with covariates, response and rounded 3-D coordinates.
struct SpatialDataset {
  std::vector<Cell> cells;

  [[nodiscard]] std::size_t size() const { return cells.size(); }

  [[nodiscard]] std::vector<std::size_t> observed_indices() const {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < cells.size(); ++i)
      if (cells[i].observed()) idx.push_back(i);
    return idx;
  }

  [[nodiscard]] std::vector<std::size_t> missing_indices() const {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < cells.size(); ++i)
      if (!cells[i].observed()) idx.push_back(i);
    return idx;
  }

  [[nodiscard]] SpatialDataset subset(const std::vector<std::size_t>& idx) const {
    SpatialDataset out;
    out.cells.reserve(idx.size());
    for (std::size_t i : idx) out.cells.push_back(cells[i]);
    return out;
  }

  [[nodiscard]] std::vector<XyzPoint> points() const {
    std::vector<XyzPoint> pts;
    pts.reserve(cells.size());
    for (const auto& c : cells) pts.push_back(c.xyz);
    return pts;
  }

  [[nodiscard]] std::vector<double> response() const {
    std::vector<double> z;
    z.reserve(cells.size());
    for (const auto& c : cells) z.push_back(c.rv20);
    return z;
  }

  [[nodiscard]] std::vector<double> latitudes() const {
    std::vector<double> v;
    v.reserve(cells.size());
    for (const auto& c : cells) v.push_back(c.latitude);
    return v;
  }
};

/// Fills the rounded Cartesian coordinates from longitude/latitude.
inline void assign_xyz(Cell& c) { c.xyz = round_xyz(to_xyz({c.longitude, c.latitude})); }

}  // namespace nsgp
