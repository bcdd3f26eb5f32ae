#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "ctrlattack/deformation.hpp"
#include "ctrlattack/temporal_control.hpp"
#include "ctrlattack/trajectory.hpp"
#include "ctrlattack/victims.hpp"

namespace ctrlattack {

enum class AblationMode { full, no_temporal_coupling, no_temporal_integration };

AblationMode parse_ablation_mode(const std::string& name);
std::string to_string(AblationMode mode);

struct WhiteBoxConfig {
  std::size_t k = 6;
  std::size_t d = 8;
  std::size_t s = 4;
  double step_size = 0.5;
  std::size_t iterations = 60;
  std::size_t stage1_iterations = 50;
  double eps_max = 16.0;
  std::uint64_t seed = 0;

  void validate(std::size_t frame_count) const;
};

struct BlackBoxConfig {
  std::size_t population = 16;
  double sigma = 0.1;
  double step = 0.5;
  std::size_t query_budget = 300;
  bool antithetic = true;
  std::size_t k = 6;
  double eps_max = 16.0;
  std::uint64_t seed = 0;

  void validate(std::size_t frame_count) const;
};

/// Linear map from the flat optimization variable theta to a per-frame
/// control track (T x axes), for each ablation mode:
///   full:   theta = A (axes x k), codes v_t = A T_t, integrated to u_t
///   no_ti:  theta = A (axes x k), u_t = A T_t directly
///   no_tc:  theta = T independent per-frame vectors, u_t = theta_t
class ControlParameterization {
 public:
  ControlParameterization(AblationMode mode, std::size_t frame_count, std::size_t mode_count,
                          std::size_t axes);

  AblationMode mode() const { return mode_; }
  std::size_t parameter_count() const;
  std::size_t frame_count() const { return frame_count_; }
  std::size_t axes() const { return axes_; }
  /// Whether codes() are velocities that must be integrated.
  bool integrates() const { return mode_ == AblationMode::full; }

  /// Per-frame codes before any integration.
  Matrix codes(std::span<const double> theta) const;
  /// Adjoint of codes(): gradient w.r.t. theta from a gradient w.r.t. the codes.
  std::vector<double> codes_adjoint(const Matrix& code_grad) const;

  /// Displacement track (codes, integrated in full mode).
  DisplacementTrack displacements(std::span<const double> theta) const;
  /// Adjoint of displacements().
  std::vector<double> displacements_adjoint(const Matrix& displacement_grad) const;

  ControlCoefficients as_coefficients(std::span<const double> theta) const;

 private:
  AblationMode mode_;
  std::size_t frame_count_;
  std::size_t axes_;
  std::optional<TemporalBasis> basis_;
};

struct AttackResult {
  ControlCoefficients best_coefficients;
  double best_objective = 0.0;
  DisplacementTrack best_displacements;                // black-box: applied u_t (T x 2)
  std::optional<TrajectoryCondition> perturbed_trajectory;  // black-box
  std::vector<DisplacementField> displacement_fields;  // white-box, ROI resolution
  std::vector<Vec2> internal_offsets;                  // white-box stage-1 offsets
  std::vector<double> objective_history;               // running best per iteration
  std::size_t queries_used = 0;
  bool incomplete = false;
  std::string incomplete_reason;
};

// ---------------------------------------------------------------------------
// NES

using ObjectiveOracle = std::function<double(std::span<const double>)>;

struct NesStep {
  std::vector<double> theta;      // updated parameters
  std::vector<double> direction;  // (1/(m sigma)) sum z_j eps_j, before the step size
  std::vector<std::vector<double>> candidates;
  std::vector<double> values;     // J for each candidate, same order
  std::size_t evaluations = 0;
};

/// One NES iteration. Objective values are standardized before forming the
/// update; a population with std < 1e-12 produces no update. Candidate j is
/// theta + sigma * eps_j; with antithetic sampling the second half of the
/// population mirrors the first.
NesStep nes_step(std::span<const double> theta, const ObjectiveOracle& evaluate, const BlackBoxConfig& cfg,
                 std::mt19937_64& rng);

/// Victim-facing query: trajectory + seed -> tracks.
using VictimQuery = std::function<ObservedTracks(const TrajectoryCondition&)>;

AttackResult blackbox_attack(const VictimQuery& query, const TrajectoryCondition& traj, const BlackBoxConfig& cfg,
                             AblationMode mode = AblationMode::full);

AttackResult whitebox_attack(WhiteBoxVictim& victim, const WhiteBoxConfig& cfg,
                             AblationMode mode = AblationMode::full);

// Spatial forward chain used by the white-box attack, exposed for testing.
struct WhiteBoxChain {
  SpatialProjection projection;
  ControlParameterization parameterization;
  std::size_t roi_height;
  std::size_t roi_width;

  /// codes -> project -> integrate coarse fields (full mode) -> upsample.
  std::vector<DisplacementField> fields(std::span<const double> theta) const;
  /// Gradient of sum_t <g_t, field_t> w.r.t. theta given per-frame ROI field gradients.
  std::vector<double> pullback(const std::vector<DisplacementField>& field_grads) const;
};

WhiteBoxChain make_whitebox_chain(const WhiteBoxConfig& cfg, AblationMode mode, std::size_t frame_count,
                                  std::size_t roi_height, std::size_t roi_width);

/// J and dJ/dtheta for the white-box objective at theta.
struct WhiteBoxEvaluation {
  double objective = 0.0;
  std::vector<double> gradient;
  std::vector<Vec2> mean_displacements;
};

WhiteBoxEvaluation evaluate_whitebox(const WhiteBoxVictim& victim, const WhiteBoxChain& chain,
                                     const std::vector<Vec2>& offsets, std::span<const double> theta,
                                     bool with_gradient = true);

/// Runs the requested mode. The two drivers above dispatch on `mode` already;
/// this is the named entry point for ablation studies.
inline AttackResult run_ablation(AblationMode mode, const VictimQuery& query, const TrajectoryCondition& traj,
                                 const BlackBoxConfig& cfg) {
  return blackbox_attack(query, traj, cfg, mode);
}
inline AttackResult run_ablation(AblationMode mode, WhiteBoxVictim& victim, const WhiteBoxConfig& cfg) {
  return whitebox_attack(victim, cfg, mode);
}

}  // namespace ctrlattack
