#pragma once

// Binary PGM (P5, maxval 255) frame export.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include "stgrid/errors.hpp"
#include "stgrid/grid.hpp"
#include "stgrid/maps.hpp"

namespace stgrid {

inline void write_pgm(const std::string& path, std::size_t rows, std::size_t cols,
                      const std::vector<std::uint8_t>& pixels) {
  if (pixels.size() != rows * cols) throw ConfigurationError("write_pgm: pixel count mismatch");
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ConfigurationError("cannot open frame file " + path);
  out << "P5\n" << cols << " " << rows << "\n255\n";
  out.write(reinterpret_cast<const char*>(pixels.data()), static_cast<std::streamsize>(pixels.size()));
}

// State ids spread evenly over [0, 255].
inline std::vector<std::uint8_t> state_pixels(const StateMap& s, std::size_t states) {
  std::vector<std::uint8_t> px(s.size());
  const double scale = states > 1 ? 255.0 / static_cast<double>(states - 1) : 0.0;
  for (std::size_t i = 0; i < s.size(); ++i)
    px[i] = static_cast<std::uint8_t>(std::lround(s.cells()[i] * scale));
  return px;
}

// Observation ids shifted by one; unobserved cells are 0.
inline std::vector<std::uint8_t> observation_pixels(const ObservationMap& y, std::size_t observations) {
  std::vector<std::uint8_t> px(y.cells.size(), 0);
  const double scale = 255.0 / static_cast<double>(observations);
  for (std::size_t i = 0; i < px.size(); ++i)
    if (y.mask.cells()[i]) px[i] = static_cast<std::uint8_t>(std::lround((y.cells.cells()[i] + 1) * scale));
  return px;
}

// Probability channel m scaled to [0, 255].
inline std::vector<std::uint8_t> channel_pixels(const Grid3& g, std::size_t m) {
  std::vector<std::uint8_t> px(g.rows() * g.cols());
  for (std::size_t i = 0; i < g.rows(); ++i)
    for (std::size_t j = 0; j < g.cols(); ++j)
      px[i * g.cols() + j] =
          static_cast<std::uint8_t>(std::lround(std::clamp(g(m, i, j), 0.0, 1.0) * 255.0));
  return px;
}

inline std::string frame_path(const std::string& dir, const std::string& quantity, long k) {
  return dir + "/" + quantity + "_" + std::to_string(k) + ".pgm";
}

}  // namespace stgrid
