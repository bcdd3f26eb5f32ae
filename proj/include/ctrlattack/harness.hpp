#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "ctrlattack/attack.hpp"
#include "ctrlattack/objectives.hpp"
#include "ctrlattack/victim_server.hpp"
#include "ctrlattack/victims.hpp"

namespace ctrlattack {

enum class VictimKind { faithful, inertial, coordfield, external };

struct VictimSpec {
  VictimKind kind = VictimKind::inertial;
  std::size_t track_points = 8;
  double jitter_sigma = 0.0;  // faithful
  InertialParams inertial;
  CoordFieldParams coordfield;
  // external
  std::string transport = "stdio";  // stdio | http
  std::vector<std::string> command;  // stdio: argv of the server process
  std::string url;                   // http: base URL
  double timeout_seconds = 120.0;
  std::size_t max_retries = 2;
};

struct InstanceSetSpec {
  std::size_t count = 100;
  std::size_t frame_count = 14;
  int frame_width = 256;
  int frame_height = 256;
  std::vector<MotionFamily> families = {MotionFamily::linear, MotionFamily::arc, MotionFamily::sinusoid};
  std::uint64_t seed = 1;
  double margin = 24.0;
};

enum class AttackKind { blackbox, whitebox };

struct ExperimentConfig {
  VictimSpec victim;
  InstanceSetSpec instances;
  AttackKind attack = AttackKind::blackbox;
  BlackBoxConfig blackbox;
  WhiteBoxConfig whitebox;
  AblationMode ablation = AblationMode::full;
  std::filesystem::path output_dir = "campaign_out";
  std::size_t parallelism = 1;

  void validate() const;
};

/// Parses a config document. Unknown keys anywhere are rejected with ConfigError.
ExperimentConfig parse_config(const nlohmann::json& doc);
ExperimentConfig load_config(const std::filesystem::path& path);
/// Canonical form: every field present, keys sorted.
nlohmann::json config_to_json(const ExperimentConfig& cfg);
/// SHA-256 over the canonical serialization, excluding output_dir and
/// parallelism (neither affects results).
std::string config_fingerprint(const ExperimentConfig& cfg);

VictimFactory make_victim_factory(const VictimSpec& spec);
VictimSpec parse_victim_spec(const nlohmann::json& doc);

/// The generated instance set (instance i uses families[i % n] and a seed derived from i).
std::vector<TrajectoryCondition> build_instances(const InstanceSetSpec& spec);
/// Victim seed paired between the clean and attacked runs of instance i.
std::uint64_t instance_seed(const ExperimentConfig& cfg, std::size_t index);

struct InstanceOutcome {
  EvalRecord record;
  TrajectoryCondition trajectory;
  std::optional<TrajectoryCondition> perturbed;
  std::optional<ObservedTracks> clean_tracks;
  std::optional<ObservedTracks> attack_tracks;
  std::optional<AttackResult> attack;
};

InstanceOutcome run_instance(const ExperimentConfig& cfg, const TrajectoryCondition& traj, std::size_t index,
                             Victim* victim);

struct CampaignResult {
  std::vector<EvalRecord> records;
  double asr = 0.0;
  double mean_objmc_clean = 0.0;
  double mean_objmc_attack = 0.0;
  std::size_t total_queries = 0;
  double wall_seconds = 0.0;
  std::string fingerprint;
  std::string label;
};

/// Runs every instance, persists everything under cfg.output_dir and returns
/// the aggregates. Results do not depend on cfg.parallelism.
CampaignResult run_campaign(const ExperimentConfig& cfg);

/// Sets a numeric field addressed by a dotted path (e.g. "attack.query_budget").
ExperimentConfig with_parameter(const ExperimentConfig& base, const std::string& path, double value);

/// One campaign per value on the shared instance set, written to
/// <output_dir>/<param>=<value>/.
std::vector<CampaignResult> run_sweep(const ExperimentConfig& base, const std::string& path,
                                      const std::vector<double>& values);

/// Loads a persisted campaign and cross-checks the stored aggregates against
/// the records. Throws ValidationError on mismatch.
CampaignResult load_campaign(const std::filesystem::path& dir);

nlohmann::json record_to_json(const EvalRecord& record);
EvalRecord record_from_json(const nlohmann::json& doc);
nlohmann::json tracks_to_json(const ObservedTracks& tracks);

}  // namespace ctrlattack
