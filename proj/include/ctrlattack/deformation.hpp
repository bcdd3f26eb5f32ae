#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "ctrlattack/linalg.hpp"
#include "ctrlattack/trajectory.hpp"

namespace ctrlattack {

/// Fixed d x (s*s*2) projection from control codes to coarse velocity fields.
/// Column index for cell (row, col) and axis a is (row*s + col)*2 + a.
class SpatialProjection {
 public:
  SpatialProjection(std::size_t code_dim, std::size_t grid_side, std::uint64_t seed);

  std::size_t code_dim() const { return matrix_.rows(); }
  std::size_t grid_side() const { return grid_side_; }
  std::uint64_t seed() const { return seed_; }
  const Matrix& matrix() const { return matrix_; }

 private:
  std::size_t grid_side_;
  std::uint64_t seed_;
  Matrix matrix_;
};

/// Rows are filled from a std::mt19937_64 seeded with `seed`, drawing
/// standard normals row by row in column order, then each row is scaled to
/// unit Euclidean norm.
SpatialProjection build_projection(std::size_t code_dim, std::size_t grid_side, std::uint64_t seed);

/// Row-major h x w grid of 2-vectors.
class VectorGrid {
 public:
  VectorGrid() = default;
  VectorGrid(std::size_t height, std::size_t width, Vec2 fill = {})
      : height_(height), width_(width), values_(height * width, fill) {}

  std::size_t height() const { return height_; }
  std::size_t width() const { return width_; }
  std::size_t size() const { return values_.size(); }

  Vec2& operator()(std::size_t r, std::size_t c) { return values_[r * width_ + c]; }
  const Vec2& operator()(std::size_t r, std::size_t c) const { return values_[r * width_ + c]; }
  std::span<Vec2> values() { return values_; }
  std::span<const Vec2> values() const { return values_; }

  Vec2 mean() const;
  bool all_finite() const;
  bool operator==(const VectorGrid&) const = default;

 private:
  std::size_t height_ = 0;
  std::size_t width_ = 0;
  std::vector<Vec2> values_;
};

/// s x s velocity field, pixels/frame.
struct CoarseVelocityField : VectorGrid {
  using VectorGrid::VectorGrid;
};
/// h x w displacement field at ROI resolution, pixels.
struct DisplacementField : VectorGrid {
  using VectorGrid::VectorGrid;
};
/// h x w sample coordinates in source-pixel units.
struct SamplingGrid : VectorGrid {
  using VectorGrid::VectorGrid;
};

/// H x W x C feature array, row-major over (y, x, channel).
class FeatureMap {
 public:
  FeatureMap() = default;
  FeatureMap(std::size_t height, std::size_t width, std::size_t channels, double fill = 0.0)
      : height_(height), width_(width), channels_(channels), values_(height * width * channels, fill) {}

  std::size_t height() const { return height_; }
  std::size_t width() const { return width_; }
  std::size_t channels() const { return channels_; }
  bool empty() const { return values_.empty(); }

  double& operator()(std::size_t y, std::size_t x, std::size_t c) {
    return values_[(y * width_ + x) * channels_ + c];
  }
  double operator()(std::size_t y, std::size_t x, std::size_t c) const {
    return values_[(y * width_ + x) * channels_ + c];
  }
  std::span<const double> values() const { return values_; }
  std::span<double> values() { return values_; }

  bool operator==(const FeatureMap&) const = default;

 private:
  std::size_t height_ = 0;
  std::size_t width_ = 0;
  std::size_t channels_ = 0;
  std::vector<double> values_;
};

/// Per grid point and channel: (d sample / dx, d sample / dy).
class SampleJacobian {
 public:
  SampleJacobian(std::size_t height, std::size_t width, std::size_t channels)
      : height_(height), width_(width), channels_(channels), grads_(height * width * channels) {}

  std::size_t height() const { return height_; }
  std::size_t width() const { return width_; }
  std::size_t channels() const { return channels_; }
  Vec2& operator()(std::size_t r, std::size_t c, std::size_t ch) {
    return grads_[(r * width_ + c) * channels_ + ch];
  }
  const Vec2& operator()(std::size_t r, std::size_t c, std::size_t ch) const {
    return grads_[(r * width_ + c) * channels_ + ch];
  }

 private:
  std::size_t height_;
  std::size_t width_;
  std::size_t channels_;
  std::vector<Vec2> grads_;
};

CoarseVelocityField project_code(std::span<const double> code, const SpatialProjection& projection);

/// Adjoint of project_code: gradient w.r.t. the code given a gradient w.r.t. the field.
std::vector<double> project_code_adjoint(const CoarseVelocityField& field_grad,
                                         const SpatialProjection& projection);

/// Corner-aligned bilinear upsampling: coarse cell (i, j) lands on ROI
/// position (i*(h-1)/(s-1), j*(w-1)/(s-1)). A singleton axis on either side
/// maps to the midpoint of the other.
DisplacementField upsample_to_roi(const VectorGrid& field, std::size_t roi_height, std::size_t roi_width);

/// Adjoint of upsample_to_roi onto a coarse grid of the given shape.
CoarseVelocityField upsample_to_roi_adjoint(const VectorGrid& roi_grad, std::size_t coarse_height,
                                            std::size_t coarse_width);

/// Evenly spaced grid spanning the box corners inclusively.
SamplingGrid make_roi_grid(const BoundingBox& box, std::size_t grid_height, std::size_t grid_width);

SamplingGrid modulate_grid(const SamplingGrid& grid, const VectorGrid& displacement);

/// Bilinear sampling in source pixel space with clamp-to-border.
FeatureMap grid_sample(const FeatureMap& features, const SamplingGrid& grid);

/// Exact partial derivatives of grid_sample w.r.t. the sample coordinates.
/// Right-sided at integer coordinates; zero along an axis that is clamped.
SampleJacobian grid_sample_jacobian(const FeatureMap& features, const SamplingGrid& grid);

}  // namespace ctrlattack
