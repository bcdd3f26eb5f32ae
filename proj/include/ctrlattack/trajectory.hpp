#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "ctrlattack/linalg.hpp"
#include "ctrlattack/temporal_control.hpp"

namespace ctrlattack {

struct BoundingBox {
  double x0 = 0.0;
  double y0 = 0.0;
  double x1 = 0.0;
  double y1 = 0.0;

  double width() const { return x1 - x0; }
  double height() const { return y1 - y0; }
  Vec2 center() const { return {0.5 * (x0 + x1), 0.5 * (y0 + y1)}; }
  bool well_formed() const;

  bool operator==(const BoundingBox&) const = default;
};

/// A single-object trajectory condition: one box per frame.
/// Construction validates T >= 2, well-formed boxes and frame containment;
/// violations throw ValidationError naming the offending frame.
class TrajectoryCondition {
 public:
  TrajectoryCondition(int frame_width, int frame_height, std::vector<BoundingBox> boxes);

  int frame_width() const { return frame_width_; }
  int frame_height() const { return frame_height_; }
  std::size_t frame_count() const { return boxes_.size(); }
  const std::vector<BoundingBox>& boxes() const { return boxes_; }
  const BoundingBox& box(std::size_t t) const { return boxes_[t]; }

  bool operator==(const TrajectoryCondition&) const = default;

 private:
  int frame_width_;
  int frame_height_;
  std::vector<BoundingBox> boxes_;
};

/// Per-axis limit on the per-frame box translation, pixels. Zero is allowed
/// and means "no perturbation".
struct PerturbationBudget {
  double eps_max = 16.0;

  explicit PerturbationBudget(double eps) : eps_max(eps) {
    if (!(eps >= 0.0) || !std::isfinite(eps)) throw InvalidArgument("eps_max must be finite and >= 0");
  }
};

std::vector<Vec2> centers(const TrajectoryCondition& traj);

/// center_{t+1} - center_t for t = 1..T-1.
VelocityTrack reference_velocities(const TrajectoryCondition& traj);

/// The frozen mapping Delta: clamp each displacement component to
/// [-eps_max, eps_max], translate the box, then shrink the translation so the
/// box stays inside the frame. Width and height are kept.
TrajectoryCondition apply_delta(const TrajectoryCondition& traj, const DisplacementTrack& displacements,
                                const PerturbationBudget& budget);

TrajectoryCondition load_trajectory(const std::filesystem::path& path);
void save_trajectory(const TrajectoryCondition& traj, const std::filesystem::path& path);

// Text forms of the same schema, used by the wire protocol and tests.
TrajectoryCondition parse_trajectory(const std::string& text);
std::string format_trajectory(const TrajectoryCondition& traj);

enum class MotionFamily { linear, arc, sinusoid };

MotionFamily parse_motion_family(const std::string& name);
std::string to_string(MotionFamily family);

struct InstanceSpec {
  std::size_t count = 1;
  std::size_t frame_count = 14;
  int frame_width = 256;
  int frame_height = 256;
  MotionFamily family = MotionFamily::linear;
  std::uint64_t seed = 0;
  // Minimum distance between any box and the frame edge.
  double margin = 24.0;
};

/// Procedural trajectories. Per-frame center motion never exceeds 10 px.
std::vector<TrajectoryCondition> generate_instances(const InstanceSpec& spec);

}  // namespace ctrlattack
