#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "ctrlattack/linalg.hpp"
#include "ctrlattack/temporal_control.hpp"
#include "ctrlattack/trajectory.hpp"
#include "ctrlattack/victims.hpp"

namespace ctrlattack {

struct MotionEstimate {
  std::vector<Vec2> centers;  // T entries
  VelocityTrack velocities;   // T-1 entries
};

/// p_t = unweighted mean of the K points, v_t = p_{t+1} - p_t.
MotionEstimate estimate_motion(const ObservedTracks& tracks);
MotionEstimate estimate_motion(const std::vector<Vec2>& centers);

/// Mean Euclidean distance between estimated and reference velocities.
/// The black-box attack maximizes this.
double objmc_objective(const MotionEstimate& estimate, const VelocityTrack& reference);

/// Mean distance between estimated centers and reference box centers (the
/// evaluation metric).
double objmc_metric(const ObservedTracks& tracks, const TrajectoryCondition& reference);

struct EvalRecord {
  std::string instance_id;
  double objmc_clean = 0.0;
  double objmc_attack = 0.0;
  bool success = false;
  std::size_t queries_used = 0;
  double budget_used = 0.0;  // max per-frame per-axis |applied displacement|
  bool incomplete = false;
  std::optional<std::string> error;

  bool operator==(const EvalRecord&) const = default;
};

/// Strict ratio test attack/clean > 1. clean == 0 with attack > 0 counts as
/// a success, 0/0 as a failure; both reduce to attack > clean.
bool attack_succeeded(double objmc_attack, double objmc_clean);

/// Fraction of successful records. Records flagged incomplete are left out
/// of the denominator. Throws InvalidArgument if nothing remains.
double compute_asr(const std::vector<EvalRecord>& records);

}  // namespace ctrlattack
