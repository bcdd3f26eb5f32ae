#include "ctrlattack/victims.hpp"

#include <cmath>
#include <random>

#include "rng.hpp"

namespace ctrlattack {

ObservedTracks::ObservedTracks(const std::vector<std::vector<Vec2>>& frames) {
  if (frames.empty()) throw ValidationError("tracks must contain at least one frame");
  const std::size_t k = frames.front().size();
  if (k == 0) throw ValidationError("tracks must contain at least one point per frame");
  frame_count_ = frames.size();
  points_ = k;
  values_.reserve(frame_count_ * k);
  for (std::size_t t = 0; t < frames.size(); ++t) {
    if (frames[t].size() != k) {
      throw ValidationError("frame " + std::to_string(t) + " has " + std::to_string(frames[t].size()) +
                            " points, expected " + std::to_string(k));
    }
    for (const Vec2& p : frames[t]) {
      if (!std::isfinite(p.x) || !std::isfinite(p.y)) {
        throw ValidationError("frame " + std::to_string(t) + " has a non-finite point");
      }
      values_.push_back(p);
    }
  }
}

void InertialParams::validate() const {
  if (!(alpha > 0.0 && alpha <= 1.0)) throw InvalidArgument("inertial alpha must lie in (0, 1]");
  if (!(beta >= 0.0 && beta <= 1.0)) throw InvalidArgument("inertial beta must lie in [0, 1]");
  if (!(v_max > 0.0)) throw InvalidArgument("inertial v_max must be > 0");
  if (!(jitter_sigma >= 0.0)) throw InvalidArgument("inertial jitter_sigma must be >= 0");
}

void CoordFieldParams::validate() const {
  if (!(noise_sigma >= 0.0)) throw InvalidArgument("coordfield noise_sigma must be >= 0");
  if (roi_grid < 1) throw InvalidArgument("coordfield roi_grid must be >= 1");
  if (!(jitter_spread >= 0.0)) throw InvalidArgument("coordfield jitter_spread must be >= 0");
  if (!(align_step > 0.0)) throw InvalidArgument("coordfield align_step must be > 0");
}

namespace {

// Positions plus isotropic Gaussian jitter; the draws depend only on the seed
// and the track shape, never on the positions.
ObservedTracks jittered(const std::vector<Vec2>& positions, const GenerationRequest& request, double sigma) {
  request.validate();
  auto rng = detail::make_rng(request.seed, detail::kJitterStream);
  std::normal_distribution<double> normal(0.0, 1.0);
  ObservedTracks tracks(positions.size(), request.track_points);
  for (std::size_t t = 0; t < positions.size(); ++t) {
    for (std::size_t k = 0; k < request.track_points; ++k) {
      const double jx = normal(rng);
      const double jy = normal(rng);
      tracks(t, k) = positions[t] + Vec2{sigma * jx, sigma * jy};
    }
  }
  return tracks;
}

}  // namespace

ObservedTracks faithful_follower(const GenerationRequest& request, double jitter_sigma) {
  if (!(jitter_sigma >= 0.0)) throw InvalidArgument("jitter_sigma must be >= 0");
  return jittered(centers(request.trajectory), request, jitter_sigma);
}

ObservedTracks inertial_follower(const GenerationRequest& request, const InertialParams& params) {
  params.validate();
  const auto target = centers(request.trajectory);
  std::vector<Vec2> positions(target.size());
  Vec2 p = target[0];
  Vec2 w{};
  positions[0] = p;
  for (std::size_t t = 0; t + 1 < target.size(); ++t) {
    w = (1.0 - params.beta) * w + params.alpha * (target[t] - p);
    const double speed = w.norm();
    if (speed > params.v_max) w = (params.v_max / speed) * w;
    p += w;
    positions[t + 1] = p;
  }
  return jittered(positions, request, params.jitter_sigma);
}

// ---------------------------------------------------------------------------

std::vector<FeatureMap> coordfield_build(const GenerationRequest& request, std::size_t height, std::size_t width,
                                         double noise_sigma) {
  if (height < 2 || width < 2) throw InvalidArgument("coordinate field needs H, W >= 2");
  if (!(noise_sigma >= 0.0)) throw InvalidArgument("noise_sigma must be >= 0");
  auto rng = detail::make_rng(request.seed, detail::kFeatureNoiseStream);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<FeatureMap> maps;
  maps.reserve(request.trajectory.frame_count());
  for (std::size_t t = 0; t < request.trajectory.frame_count(); ++t) {
    FeatureMap f(height, width, 2);
    for (std::size_t y = 0; y < height; ++y) {
      for (std::size_t x = 0; x < width; ++x) {
        f(y, x, 0) = static_cast<double>(x);
        f(y, x, 1) = static_cast<double>(y);
        if (noise_sigma > 0.0) {
          f(y, x, 0) += noise_sigma * normal(rng);
          f(y, x, 1) += noise_sigma * normal(rng);
        }
      }
    }
    maps.push_back(std::move(f));
  }
  return maps;
}

namespace {

void check_frames(const std::vector<FeatureMap>& features, const TrajectoryCondition& traj,
                  const std::vector<Vec2>& offsets, const std::vector<DisplacementField>& deformations) {
  if (features.size() != traj.frame_count()) throw ShapeError("one feature map per frame required");
  if (!offsets.empty() && offsets.size() != traj.frame_count()) throw ShapeError("one offset per frame required");
  if (!deformations.empty() && deformations.size() != traj.frame_count()) {
    throw ShapeError("one deformation field per frame required");
  }
  for (const FeatureMap& f : features) {
    if (f.channels() != 2) throw ShapeError("coordinate-field features must have 2 channels");
  }
}

SamplingGrid frame_grid(const TrajectoryCondition& traj, std::size_t t, const std::vector<Vec2>& offsets,
                        const std::vector<DisplacementField>& deformations, std::size_t roi_grid) {
  SamplingGrid grid = make_roi_grid(traj.box(t), roi_grid, roi_grid);
  if (!offsets.empty()) {
    for (Vec2& p : grid.values()) p += offsets[t];
  }
  if (!deformations.empty()) grid = modulate_grid(grid, deformations[t]);
  return grid;
}

Vec2 channel_mean(const FeatureMap& sampled) {
  double sx = 0.0;
  double sy = 0.0;
  for (std::size_t r = 0; r < sampled.height(); ++r) {
    for (std::size_t c = 0; c < sampled.width(); ++c) {
      sx += sampled(r, c, 0);
      sy += sampled(r, c, 1);
    }
  }
  const double n = static_cast<double>(sampled.height() * sampled.width());
  return {sx / n, sy / n};
}

// d(mean readout)/d(uniform shift of the grid).
Mat2 mean_jacobian(const SampleJacobian& jac) {
  Mat2 m;
  for (std::size_t r = 0; r < jac.height(); ++r) {
    for (std::size_t c = 0; c < jac.width(); ++c) {
      m.xx += jac(r, c, 0).x;
      m.xy += jac(r, c, 0).y;
      m.yx += jac(r, c, 1).x;
      m.yy += jac(r, c, 1).y;
    }
  }
  const double n = static_cast<double>(jac.height() * jac.width());
  return {m.xx / n, m.xy / n, m.yx / n, m.yy / n};
}

}  // namespace

std::vector<Vec2> coordfield_align(const std::vector<FeatureMap>& features, const TrajectoryCondition& traj,
                                   std::size_t iterations, std::size_t roi_grid, double step,
                                   std::vector<Vec2> initial_offsets) {
  std::vector<Vec2> offsets =
      initial_offsets.empty() ? std::vector<Vec2>(traj.frame_count()) : std::move(initial_offsets);
  check_frames(features, traj, offsets, {});
  for (std::size_t t = 0; t < traj.frame_count(); ++t) {
    const Vec2 target = traj.box(t).center();
    for (std::size_t it = 0; it < iterations; ++it) {
      const SamplingGrid grid = frame_grid(traj, t, offsets, {}, roi_grid);
      const Vec2 residual = channel_mean(grid_sample(features[t], grid)) - target;
      const Vec2 grad = 2.0 * mean_jacobian(grid_sample_jacobian(features[t], grid)).apply_transpose(residual);
      offsets[t] -= step * grad;
    }
  }
  return offsets;
}

std::vector<Vec2> coordfield_positions(const std::vector<FeatureMap>& features, const TrajectoryCondition& traj,
                                       const std::vector<Vec2>& offsets,
                                       const std::vector<DisplacementField>& deformations, std::size_t roi_grid) {
  check_frames(features, traj, offsets, deformations);
  std::vector<Vec2> positions(traj.frame_count());
  for (std::size_t t = 0; t < traj.frame_count(); ++t) {
    positions[t] = channel_mean(grid_sample(features[t], frame_grid(traj, t, offsets, deformations, roi_grid)));
  }
  return positions;
}

ObservedTracks coordfield_emit(const std::vector<Vec2>& positions, const GenerationRequest& request,
                               double jitter_spread) {
  request.validate();
  auto rng = detail::make_rng(request.seed, detail::kSpreadStream);
  std::normal_distribution<double> normal(0.0, 1.0);
  const std::size_t k = request.track_points;
  ObservedTracks tracks(positions.size(), k);
  std::vector<Vec2> spread(k);
  for (std::size_t t = 0; t < positions.size(); ++t) {
    Vec2 mean{};
    for (Vec2& s : spread) {
      const double sx = normal(rng);
      const double sy = normal(rng);
      s = {jitter_spread * sx, jitter_spread * sy};
      mean += s;
    }
    mean = (1.0 / static_cast<double>(k)) * mean;
    for (std::size_t i = 0; i < k; ++i) tracks(t, i) = positions[t] + (spread[i] - mean);
  }
  return tracks;
}

ObservedTracks coordfield_generate(const std::vector<FeatureMap>& features, const TrajectoryCondition& traj,
                                   const std::vector<Vec2>& offsets,
                                   const std::vector<DisplacementField>& deformations,
                                   const GenerationRequest& request, std::size_t roi_grid, double jitter_spread) {
  return coordfield_emit(coordfield_positions(features, traj, offsets, deformations, roi_grid), request,
                         jitter_spread);
}

std::vector<PositionJacobian> coordfield_position_gradient(const std::vector<FeatureMap>& features,
                                                           const TrajectoryCondition& traj,
                                                           const std::vector<Vec2>& offsets,
                                                           const std::vector<DisplacementField>& deformations,
                                                           std::size_t roi_grid) {
  check_frames(features, traj, offsets, deformations);
  std::vector<PositionJacobian> out(traj.frame_count());
  const double inv = 1.0 / static_cast<double>(roi_grid * roi_grid);
  for (std::size_t t = 0; t < traj.frame_count(); ++t) {
    const SampleJacobian jac =
        grid_sample_jacobian(features[t], frame_grid(traj, t, offsets, deformations, roi_grid));
    PositionJacobian& pj = out[t];
    pj.height = roi_grid;
    pj.width = roi_grid;
    pj.blocks.resize(roi_grid * roi_grid);
    for (std::size_t r = 0; r < roi_grid; ++r) {
      for (std::size_t c = 0; c < roi_grid; ++c) {
        pj.blocks[r * roi_grid + c] = {inv * jac(r, c, 0).x, inv * jac(r, c, 0).y, inv * jac(r, c, 1).x,
                                       inv * jac(r, c, 1).y};
      }
    }
  }
  return out;
}

// ---------------------------------------------------------------------------

CoordFieldModel::CoordFieldModel(GenerationRequest request, CoordFieldParams params)
    : request_(std::move(request)), params_(params) {
  params_.validate();
  request_.validate();
  // One extra row/column so every continuous coordinate in [0, W] x [0, H] is interior.
  features_ = coordfield_build(request_, static_cast<std::size_t>(request_.trajectory.frame_height()) + 1,
                               static_cast<std::size_t>(request_.trajectory.frame_width()) + 1,
                               params_.noise_sigma);
}

std::vector<Vec2> CoordFieldModel::align(std::size_t iterations) {
  return coordfield_align(features_, request_.trajectory, iterations, params_.roi_grid, params_.align_step);
}

std::vector<Vec2> CoordFieldModel::positions(const std::vector<Vec2>& offsets,
                                             const std::vector<DisplacementField>& deformations) const {
  return coordfield_positions(features_, request_.trajectory, offsets, deformations, params_.roi_grid);
}

std::vector<PositionJacobian> CoordFieldModel::position_jacobians(
    const std::vector<Vec2>& offsets, const std::vector<DisplacementField>& deformations) const {
  return coordfield_position_gradient(features_, request_.trajectory, offsets, deformations, params_.roi_grid);
}

ObservedTracks CoordFieldModel::generate(const std::vector<Vec2>& offsets,
                                         const std::vector<DisplacementField>& deformations) const {
  return coordfield_emit(positions(offsets, deformations), request_, params_.jitter_spread);
}

ObservedTracks CoordFieldVictim::generate(const GenerationRequest& request) {
  CoordFieldModel model(request, params_);
  const auto offsets = model.align(params_.align_iterations);
  return model.generate(offsets, {});
}

}  // namespace ctrlattack
