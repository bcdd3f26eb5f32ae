#pragma once

#include <cstddef>
#include <span>

#include "ctrlattack/linalg.hpp"

namespace ctrlattack {

/// Orthonormal DCT-II basis over `frame_count` frames restricted to the
/// first `mode_count` modes. Column 0 is the constant mode.
class TemporalBasis {
 public:
  TemporalBasis(std::size_t frame_count, std::size_t mode_count);

  std::size_t frame_count() const { return matrix_.rows(); }
  std::size_t mode_count() const { return matrix_.cols(); }
  const Matrix& matrix() const { return matrix_; }
  double operator()(std::size_t t, std::size_t j) const { return matrix_(t, j); }

 private:
  Matrix matrix_;
};

TemporalBasis build_dct_basis(std::size_t frame_count, std::size_t mode_count);

/// d x k coefficient matrix; row i drives control axis i.
class ControlCoefficients {
 public:
  ControlCoefficients() = default;
  explicit ControlCoefficients(Matrix values);
  ControlCoefficients(std::size_t axis_count, std::size_t mode_count)
      : values_(axis_count, mode_count) {}

  std::size_t axis_count() const { return values_.rows(); }
  std::size_t mode_count() const { return values_.cols(); }
  const Matrix& values() const { return values_; }
  Matrix& values() { return values_; }

  bool operator==(const ControlCoefficients&) const = default;

 private:
  Matrix values_;
};

/// A per-frame track of d-dimensional vectors. Tag distinguishes velocity
/// tracks (pixels/frame) from displacement tracks (pixels).
template <class Tag>
class FrameTrack {
 public:
  FrameTrack() = default;
  FrameTrack(std::size_t frame_count, std::size_t dim) : values_(frame_count, dim) {}
  explicit FrameTrack(Matrix values) : values_(std::move(values)) {
    if (!values_.all_finite()) throw ValidationError("track contains non-finite entries");
  }

  std::size_t frame_count() const { return values_.rows(); }
  std::size_t dim() const { return values_.cols(); }
  bool empty() const { return values_.rows() == 0; }

  double& operator()(std::size_t t, std::size_t axis) { return values_(t, axis); }
  double operator()(std::size_t t, std::size_t axis) const { return values_(t, axis); }
  std::span<const double> frame(std::size_t t) const { return values_.row(t); }

  // Only meaningful for two-axis tracks.
  Vec2 vec2(std::size_t t) const { return {values_(t, 0), values_(t, 1)}; }

  const Matrix& values() const { return values_; }
  Matrix& values() { return values_; }

  bool operator==(const FrameTrack&) const = default;

 private:
  Matrix values_;
};

struct VelocityTag {};
struct DisplacementTag {};
using VelocityTrack = FrameTrack<VelocityTag>;
using DisplacementTrack = FrameTrack<DisplacementTag>;

/// v_t = A * basis_row(t) for every frame t.
VelocityTrack evaluate_codes(const ControlCoefficients& coeffs, const TemporalBasis& basis);

/// u_t = sum of v_1..v_t, accumulated in ascending frame order.
DisplacementTrack integrate(const VelocityTrack& velocities);

/// v_1 = u_1, v_{t+1} = u_{t+1} - u_t.
VelocityTrack differentiate(const DisplacementTrack& displacements);

/// Coefficients of each track axis on the basis columns (k x d), i.e.
/// basis^T * track. With a full basis (k = T) this is the complete DCT.
Matrix project_onto_basis(const Matrix& track, const TemporalBasis& basis);

}  // namespace ctrlattack
