#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "tdsim/common.hpp"

namespace tdsim {

/// Row-major grayscale image, intensities in [0, maxval].
struct GrayImage {
  int width = 0;
  int height = 0;
  int maxval = 255;
  std::vector<std::uint16_t> samples;

  std::uint16_t at(int x, int y) const { return samples[static_cast<std::size_t>(y) * width + x]; }
  void set(int x, int y, std::uint16_t v) { samples[static_cast<std::size_t>(y) * width + x] = v; }
};

GrayImage make_gray(int width, int height, int maxval = 255);

/// Row-major boolean mask; true marks foreground.
struct BinaryImage {
  int width = 0;
  int height = 0;
  std::vector<char> bits;

  bool at(int x, int y) const { return bits[static_cast<std::size_t>(y) * width + x] != 0; }
  void set(int x, int y, bool v) { bits[static_cast<std::size_t>(y) * width + x] = v ? 1 : 0; }
};

BinaryImage make_binary(int width, int height);

/// Sub-pixel point locations; pixel centers sit at integer coordinates.
struct PointSet {
  std::vector<Eigen::Vector2d> points;
};

/// Foreground = (sample >= level).
BinaryImage threshold(const GrayImage& img, int level);

/// 8-connected components of size >= min_pixels collapse to their centroid
/// (mean of member pixel coordinates); smaller clusters are discarded.
PointSet cluster_centroids(const BinaryImage& img, int min_pixels = 9);

/// Foreground pixel count times the pixel area.
double projected_area(const BinaryImage& img, double pixel_scale);

/// PGM (P2/P5) reader; maxval up to 65535. Errors carry the byte offset.
GrayImage pgm_read(const std::string& path);
void pgm_write(const GrayImage& img, const std::string& path, bool binary = true);

}  // namespace tdsim
