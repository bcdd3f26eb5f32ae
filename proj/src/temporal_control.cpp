#include "ctrlattack/temporal_control.hpp"

#include <cmath>
#include <numbers>
#include <string>

namespace ctrlattack {

TemporalBasis::TemporalBasis(std::size_t frame_count, std::size_t mode_count) {
  if (frame_count == 0 || mode_count == 0 || mode_count > frame_count) {
    throw InvalidArgument("mode_count must satisfy 1 <= mode_count <= frame_count (mode_count=" +
                          std::to_string(mode_count) + ", frame_count=" + std::to_string(frame_count) +
                          ")");
  }
  const double n = static_cast<double>(frame_count);
  matrix_ = Matrix(frame_count, mode_count);
  for (std::size_t j = 0; j < mode_count; ++j) {
    const double w = j == 0 ? 1.0 / std::sqrt(n) : std::sqrt(2.0 / n);
    for (std::size_t t = 0; t < frame_count; ++t) {
      const double phase = std::numbers::pi * static_cast<double>((2 * t + 1) * j) / (2.0 * n);
      matrix_(t, j) = w * std::cos(phase);
    }
  }
}

TemporalBasis build_dct_basis(std::size_t frame_count, std::size_t mode_count) {
  return TemporalBasis(frame_count, mode_count);
}

ControlCoefficients::ControlCoefficients(Matrix values) : values_(std::move(values)) {
  if (values_.rows() == 0 || values_.cols() == 0) throw InvalidArgument("coefficient matrix is empty");
  if (!values_.all_finite()) throw ValidationError("coefficient matrix contains non-finite entries");
}

VelocityTrack evaluate_codes(const ControlCoefficients& coeffs, const TemporalBasis& basis) {
  if (coeffs.mode_count() != basis.mode_count()) {
    throw ShapeError("coefficients have " + std::to_string(coeffs.mode_count()) + " modes, basis has " +
                     std::to_string(basis.mode_count()));
  }
  const Matrix& a = coeffs.values();
  VelocityTrack out(basis.frame_count(), coeffs.axis_count());
  for (std::size_t t = 0; t < basis.frame_count(); ++t) {
    for (std::size_t i = 0; i < a.rows(); ++i) {
      double acc = 0.0;
      for (std::size_t j = 0; j < a.cols(); ++j) acc += a(i, j) * basis(t, j);
      out(t, i) = acc;
    }
  }
  return out;
}

DisplacementTrack integrate(const VelocityTrack& velocities) {
  if (velocities.empty()) throw InvalidArgument("cannot integrate an empty velocity track");
  DisplacementTrack out(velocities.frame_count(), velocities.dim());
  for (std::size_t i = 0; i < velocities.dim(); ++i) out(0, i) = velocities(0, i);
  for (std::size_t t = 1; t < velocities.frame_count(); ++t) {
    for (std::size_t i = 0; i < velocities.dim(); ++i) out(t, i) = out(t - 1, i) + velocities(t, i);
  }
  return out;
}

VelocityTrack differentiate(const DisplacementTrack& displacements) {
  if (displacements.empty()) throw InvalidArgument("cannot differentiate an empty displacement track");
  VelocityTrack out(displacements.frame_count(), displacements.dim());
  for (std::size_t i = 0; i < displacements.dim(); ++i) out(0, i) = displacements(0, i);
  for (std::size_t t = 1; t < displacements.frame_count(); ++t) {
    for (std::size_t i = 0; i < displacements.dim(); ++i) {
      out(t, i) = displacements(t, i) - displacements(t - 1, i);
    }
  }
  return out;
}

Matrix project_onto_basis(const Matrix& track, const TemporalBasis& basis) {
  if (track.rows() != basis.frame_count()) {
    throw ShapeError("track has " + std::to_string(track.rows()) + " frames, basis has " +
                     std::to_string(basis.frame_count()));
  }
  Matrix out(basis.mode_count(), track.cols());
  for (std::size_t j = 0; j < basis.mode_count(); ++j) {
    for (std::size_t i = 0; i < track.cols(); ++i) {
      double acc = 0.0;
      for (std::size_t t = 0; t < track.rows(); ++t) acc += basis(t, j) * track(t, i);
      out(j, i) = acc;
    }
  }
  return out;
}

}  // namespace ctrlattack
