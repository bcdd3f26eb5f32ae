#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "ctrlattack/deformation.hpp"
#include "ctrlattack/linalg.hpp"
#include "ctrlattack/trajectory.hpp"

namespace ctrlattack {

struct GenerationRequest {
  TrajectoryCondition trajectory;
  std::uint64_t seed = 0;
  std::size_t track_points = 8;
  // Opaque image identifier forwarded to external victims.
  std::optional<std::string> image_ref;

  void validate() const {
    if (track_points < 1) throw InvalidArgument("track_points must be >= 1");
  }
};

/// K tracked points per frame, rectangular, all finite.
class ObservedTracks {
 public:
  ObservedTracks() = default;
  ObservedTracks(std::size_t frame_count, std::size_t points_per_frame)
      : frame_count_(frame_count), points_(points_per_frame), values_(frame_count * points_per_frame) {}
  /// Validating constructor from ragged input; throws ValidationError if not
  /// rectangular or not finite.
  explicit ObservedTracks(const std::vector<std::vector<Vec2>>& frames);

  std::size_t frame_count() const { return frame_count_; }
  std::size_t points_per_frame() const { return points_; }

  Vec2& operator()(std::size_t t, std::size_t k) { return values_[t * points_ + k]; }
  const Vec2& operator()(std::size_t t, std::size_t k) const { return values_[t * points_ + k]; }
  std::span<const Vec2> frame(std::size_t t) const { return {values_.data() + t * points_, points_}; }

  bool operator==(const ObservedTracks&) const = default;

 private:
  std::size_t frame_count_ = 0;
  std::size_t points_ = 0;
  std::vector<Vec2> values_;
};

struct InertialParams {
  double alpha = 0.3;         // stiffness, 1/frame^2
  double beta = 0.2;          // damping, 1/frame
  double v_max = 4.0;         // speed saturation, px/frame
  double jitter_sigma = 0.5;  // px

  void validate() const;
};

/// Black-box victim: maps a generation request to observed tracks.
class Victim {
 public:
  virtual ~Victim() = default;
  virtual ObservedTracks generate(const GenerationRequest& request) = 0;
  virtual std::string name() const = 0;
};

ObservedTracks faithful_follower(const GenerationRequest& request, double jitter_sigma);
ObservedTracks inertial_follower(const GenerationRequest& request, const InertialParams& params);

class FaithfulVictim : public Victim {
 public:
  explicit FaithfulVictim(double jitter_sigma = 0.0) : jitter_sigma_(jitter_sigma) {}
  ObservedTracks generate(const GenerationRequest& request) override {
    return faithful_follower(request, jitter_sigma_);
  }
  std::string name() const override { return "faithful"; }

 private:
  double jitter_sigma_;
};

class InertialVictim : public Victim {
 public:
  explicit InertialVictim(InertialParams params) : params_(params) { params_.validate(); }
  ObservedTracks generate(const GenerationRequest& request) override {
    return inertial_follower(request, params_);
  }
  std::string name() const override { return "inertial"; }
  const InertialParams& params() const { return params_; }

 private:
  InertialParams params_;
};

/// Wraps another victim and counts invocations.
class CountingVictim : public Victim {
 public:
  explicit CountingVictim(Victim& inner) : inner_(inner) {}
  ObservedTracks generate(const GenerationRequest& request) override {
    ++count_;
    return inner_.generate(request);
  }
  std::string name() const override { return inner_.name(); }
  std::size_t count() const { return count_; }

 private:
  Victim& inner_;
  std::size_t count_ = 0;
};

// ---------------------------------------------------------------------------
// Coordinate-field victim: per-frame feature maps whose two channels hold the
// pixel coordinates (plus noise). The object position read out through a ROI
// grid therefore moves one-for-one with the grid displacement.

struct CoordFieldParams {
  double noise_sigma = 0.1;
  std::size_t roi_grid = 8;        // ROI sampling grid is roi_grid x roi_grid
  double jitter_spread = 1.0;      // spread of emitted points around the position
  std::size_t align_iterations = 50;
  double align_step = 0.25;

  void validate() const;
};

/// F_t(x, y) = (x, y) + N(0, noise_sigma) per entry, for every frame of the request.
std::vector<FeatureMap> coordfield_build(const GenerationRequest& request, std::size_t height,
                                         std::size_t width, double noise_sigma);

/// Stage-1 alignment of internal per-frame offsets o_t by gradient descent on
/// sum_t |mean(grid_sample(F_t, roi_grid(b_t) + o_t)) - center(b_t)|^2.
std::vector<Vec2> coordfield_align(const std::vector<FeatureMap>& features, const TrajectoryCondition& traj,
                                   std::size_t iterations, std::size_t roi_grid, double step,
                                   std::vector<Vec2> initial_offsets = {});

/// Per-frame object positions p_t. `deformations` may be empty (no deformation).
std::vector<Vec2> coordfield_positions(const std::vector<FeatureMap>& features, const TrajectoryCondition& traj,
                                       const std::vector<Vec2>& offsets,
                                       const std::vector<DisplacementField>& deformations, std::size_t roi_grid);

/// Emits K points per frame around the positions; the spread is centred so the
/// point mean equals the position.
ObservedTracks coordfield_emit(const std::vector<Vec2>& positions, const GenerationRequest& request,
                               double jitter_spread);

ObservedTracks coordfield_generate(const std::vector<FeatureMap>& features, const TrajectoryCondition& traj,
                                   const std::vector<Vec2>& offsets,
                                   const std::vector<DisplacementField>& deformations,
                                   const GenerationRequest& request, std::size_t roi_grid, double jitter_spread);

/// dp_t / d(u_t at grid point (r, c)); one roi_grid x roi_grid block field per frame.
struct PositionJacobian {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<Mat2> blocks;  // row-major
  const Mat2& operator()(std::size_t r, std::size_t c) const { return blocks[r * width + c]; }
};

std::vector<PositionJacobian> coordfield_position_gradient(const std::vector<FeatureMap>& features,
                                                           const TrajectoryCondition& traj,
                                                           const std::vector<Vec2>& offsets,
                                                           const std::vector<DisplacementField>& deformations,
                                                           std::size_t roi_grid);

/// What the white-box attack needs from a victim.
class WhiteBoxVictim {
 public:
  virtual ~WhiteBoxVictim() = default;
  virtual const TrajectoryCondition& trajectory() const = 0;
  virtual std::size_t roi_height() const = 0;
  virtual std::size_t roi_width() const = 0;
  virtual std::vector<Vec2> align(std::size_t iterations) = 0;
  virtual std::vector<Vec2> positions(const std::vector<Vec2>& offsets,
                                      const std::vector<DisplacementField>& deformations) const = 0;
  virtual std::vector<PositionJacobian> position_jacobians(
      const std::vector<Vec2>& offsets, const std::vector<DisplacementField>& deformations) const = 0;
  virtual ObservedTracks generate(const std::vector<Vec2>& offsets,
                                  const std::vector<DisplacementField>& deformations) const = 0;
};

/// Coordinate-field victim bound to one request (features are built once).
class CoordFieldModel : public WhiteBoxVictim {
 public:
  CoordFieldModel(GenerationRequest request, CoordFieldParams params);

  const TrajectoryCondition& trajectory() const override { return request_.trajectory; }
  std::size_t roi_height() const override { return params_.roi_grid; }
  std::size_t roi_width() const override { return params_.roi_grid; }
  std::vector<Vec2> align(std::size_t iterations) override;
  std::vector<Vec2> positions(const std::vector<Vec2>& offsets,
                              const std::vector<DisplacementField>& deformations) const override;
  std::vector<PositionJacobian> position_jacobians(
      const std::vector<Vec2>& offsets, const std::vector<DisplacementField>& deformations) const override;
  ObservedTracks generate(const std::vector<Vec2>& offsets,
                          const std::vector<DisplacementField>& deformations) const override;

  const std::vector<FeatureMap>& features() const { return features_; }
  const CoordFieldParams& params() const { return params_; }

 private:
  GenerationRequest request_;
  CoordFieldParams params_;
  std::vector<FeatureMap> features_;
};

/// Black-box view of the coordinate-field victim: build, align, read out
/// with no deformation.
class CoordFieldVictim : public Victim {
 public:
  explicit CoordFieldVictim(CoordFieldParams params) : params_(params) { params_.validate(); }
  ObservedTracks generate(const GenerationRequest& request) override;
  std::string name() const override { return "coordfield"; }

 private:
  CoordFieldParams params_;
};

}  // namespace ctrlattack
