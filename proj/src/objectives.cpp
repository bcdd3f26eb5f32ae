#include "ctrlattack/objectives.hpp"

#include <cmath>

namespace ctrlattack {

MotionEstimate estimate_motion(const std::vector<Vec2>& centers) {
  if (centers.size() < 2) throw InvalidArgument("motion estimation needs at least 2 frames");
  MotionEstimate est;
  est.centers = centers;
  est.velocities = VelocityTrack(centers.size() - 1, 2);
  for (std::size_t t = 0; t + 1 < centers.size(); ++t) {
    est.velocities(t, 0) = centers[t + 1].x - centers[t].x;
    est.velocities(t, 1) = centers[t + 1].y - centers[t].y;
  }
  return est;
}

MotionEstimate estimate_motion(const ObservedTracks& tracks) {
  if (tracks.frame_count() < 2) throw InvalidArgument("motion estimation needs at least 2 frames");
  std::vector<Vec2> means(tracks.frame_count());
  const double inv = 1.0 / static_cast<double>(tracks.points_per_frame());
  for (std::size_t t = 0; t < tracks.frame_count(); ++t) {
    Vec2 acc{};
    for (const Vec2& p : tracks.frame(t)) acc += p;
    means[t] = inv * acc;
  }
  return estimate_motion(means);
}

double objmc_objective(const MotionEstimate& estimate, const VelocityTrack& reference) {
  const VelocityTrack& v = estimate.velocities;
  if (v.frame_count() != reference.frame_count() || reference.dim() != 2) {
    throw ShapeError("estimate has " + std::to_string(v.frame_count()) + " velocities, reference has " +
                     std::to_string(reference.frame_count()));
  }
  if (v.frame_count() == 0) throw ShapeError("empty velocity tracks");
  double acc = 0.0;
  for (std::size_t t = 0; t < v.frame_count(); ++t) acc += (v.vec2(t) - reference.vec2(t)).norm();
  return acc / static_cast<double>(v.frame_count());
}

double objmc_metric(const ObservedTracks& tracks, const TrajectoryCondition& reference) {
  if (tracks.frame_count() != reference.frame_count()) {
    throw ShapeError("tracks have " + std::to_string(tracks.frame_count()) + " frames, reference has " +
                     std::to_string(reference.frame_count()));
  }
  const double inv = 1.0 / static_cast<double>(tracks.points_per_frame());
  double acc = 0.0;
  for (std::size_t t = 0; t < tracks.frame_count(); ++t) {
    Vec2 mean{};
    for (const Vec2& p : tracks.frame(t)) mean += p;
    acc += (inv * mean - reference.box(t).center()).norm();
  }
  return acc / static_cast<double>(tracks.frame_count());
}

bool attack_succeeded(double objmc_attack, double objmc_clean) { return objmc_attack > objmc_clean; }

double compute_asr(const std::vector<EvalRecord>& records) {
  std::size_t total = 0;
  std::size_t successes = 0;
  for (const EvalRecord& r : records) {
    if (r.incomplete) continue;
    ++total;
    if (attack_succeeded(r.objmc_attack, r.objmc_clean)) ++successes;
  }
  if (total == 0) throw InvalidArgument("ASR needs at least one complete record");
  return static_cast<double>(successes) / static_cast<double>(total);
}

}  // namespace ctrlattack
