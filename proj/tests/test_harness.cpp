#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "ctrlattack/harness.hpp"
#include "ctrlattack/report.hpp"

using namespace ctrlattack;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("ctrlattack_harness_" + name);
  fs::remove_all(p);
  return p;
}

ExperimentConfig small_faithful(const fs::path& out, std::size_t count = 10) {
  ExperimentConfig cfg = parse_config(json{{"victim", {{"kind", "faithful"}}},
                                           {"instances", {{"count", count}}},
                                           {"attack", {{"kind", "blackbox"}, {"query_budget", 300}}}});
  cfg.output_dir = out;
  return cfg;
}

std::string config_error(const json& doc) {
  try {
    parse_config(doc);
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST_CASE("config defaults") {
  const ExperimentConfig cfg = parse_config(json::object());
  CHECK(cfg.victim.kind == VictimKind::inertial);
  CHECK(cfg.instances.count == 100);
  CHECK(cfg.attack == AttackKind::blackbox);
  CHECK(cfg.blackbox.population == 16);
  CHECK(cfg.blackbox.query_budget == 300);
  CHECK(cfg.ablation == AblationMode::full);
  CHECK(cfg.parallelism == 1);
}

TEST_CASE("config rejects unknown keys with their path") {
  CHECK(config_error({{"victims", json::object()}}).find("victims") != std::string::npos);
  CHECK(config_error({{"victim", {{"kind", "inertial"}, {"gamma", 1}}}}).find("victim.gamma") != std::string::npos);
  CHECK(config_error({{"attack", {{"kind", "whitebox"}, {"population", 4}}}}).find("attack.population") !=
        std::string::npos);
  CHECK(config_error({{"instances", {{"count", 3}, {"size", 4}}}}).find("instances.size") != std::string::npos);
}

TEST_CASE("config rejects invalid values") {
  CHECK_FALSE(config_error({{"victim", {{"kind", "diffusion"}}}}).empty());
  CHECK_FALSE(config_error({{"victim", {{"kind", "inertial"}, {"alpha", 2.0}}}}).empty());
  CHECK_FALSE(config_error({{"victim", {{"kind", "external"}, {"transport", "stdio"}}}}).empty());
  CHECK_FALSE(config_error({{"victim", {{"kind", "external"}, {"transport", "smoke"}, {"url", "x"}}}}).empty());
  CHECK_FALSE(config_error({{"attack", {{"kind", "whitebox"}}}}).empty());
  CHECK_FALSE(config_error({{"attack", {{"kind", "blackbox"}, {"population", 15}}}}).empty());
  CHECK_FALSE(config_error({{"attack", {{"kind", "blackbox"}, {"query_budget", 8}}}}).empty());
  CHECK_FALSE(config_error({{"attack", {{"kind", "blackbox"}, {"k", "six"}}}}).empty());
  CHECK_FALSE(config_error({{"attack", {{"kind", "blackbox"}, {"k", -1}}}}).empty());
  CHECK_FALSE(config_error({{"instances", {{"families", {"spiral"}}}}}).empty());
  CHECK_FALSE(config_error({{"instances", {{"count", 0}}}}).empty());
  CHECK_FALSE(config_error({{"ablation", "partial"}}).empty());
  CHECK_FALSE(config_error({{"parallelism", 0}}).empty());
  CHECK_FALSE(config_error(json::array()).empty());
}

TEST_CASE("canonical form round trips and drives the fingerprint") {
  ExperimentConfig cfg = parse_config(json{{"victim", {{"kind", "coordfield"}, {"noise_sigma", 0.25}}},
                                           {"attack", {{"kind", "whitebox"}, {"k", 4}}},
                                           {"ablation", "no_ti"}});
  const json canon = config_to_json(cfg);
  CHECK(config_to_json(parse_config(canon)) == canon);
  const std::string fp = config_fingerprint(cfg);
  CHECK(fp.size() == 64);
  CHECK(fp == config_fingerprint(parse_config(canon)));

  ExperimentConfig moved = cfg;
  moved.output_dir = "/somewhere/else";
  moved.parallelism = 8;
  CHECK(config_fingerprint(moved) == fp);

  ExperimentConfig changed = cfg;
  changed.whitebox.k = 5;
  CHECK(config_fingerprint(changed) != fp);
}

TEST_CASE("with_parameter addresses numeric fields") {
  const ExperimentConfig base = parse_config(json::object());
  CHECK(with_parameter(base, "attack.query_budget", 600).blackbox.query_budget == 600);
  CHECK(with_parameter(base, "attack.k", 2).blackbox.k == 2);
  CHECK(with_parameter(base, "attack.sigma", 0.25).blackbox.sigma == 0.25);
  CHECK(with_parameter(base, "victim.v_max", 3.5).victim.inertial.v_max == 3.5);
  CHECK_THROWS_AS(with_parameter(base, "attack.iterations", 10), ConfigError);
  CHECK_THROWS_AS(with_parameter(base, "attack.query_budget", 150.5), ConfigError);
  CHECK_THROWS_AS(with_parameter(base, "attack.kind", 1), ConfigError);
  CHECK_THROWS_AS(with_parameter(base, "attack.query_budget", 4), ConfigError);
}

TEST_CASE("instance sets are deterministic and cycle through families") {
  InstanceSetSpec spec;
  spec.count = 9;
  const auto a = build_instances(spec);
  CHECK(a == build_instances(spec));
  REQUIRE(a.size() == 9);
  spec.seed = 2;
  CHECK_FALSE(a == build_instances(spec));
  // Linear members (indices 0, 3, 6) have constant velocity.
  for (std::size_t i : {0u, 3u, 6u}) {
    const auto v = reference_velocities(a[i]);
    CHECK((v.vec2(5) - v.vec2(0)).norm() < 1e-9);
  }
}

TEST_CASE("faithful campaign succeeds everywhere and persists everything") {
  const fs::path out = scratch("faithful");
  const ExperimentConfig cfg = small_faithful(out);
  const CampaignResult r = run_campaign(cfg);
  CHECK(r.records.size() == 10);
  CHECK(r.asr == 1.0);
  CHECK(r.mean_objmc_attack > r.mean_objmc_clean);
  CHECK(r.total_queries == 10 * 288);
  CHECK(r.fingerprint == config_fingerprint(cfg));
  for (const auto& rec : r.records) {
    CHECK(rec.queries_used <= 300);
    CHECK(rec.budget_used <= 16.0);
    CHECK_FALSE(rec.incomplete);
    const fs::path dir = out / "instances" / rec.instance_id;
    for (const char* f : {"trajectory.json", "perturbed.json", "clean_tracks.json", "attack_tracks.json", "attack.json",
                          "record.json"}) {
      CHECK(fs::exists(dir / f));
    }
  }
  CHECK(fs::exists(out / "config.json"));
  CHECK(parse_config(json::parse(std::ifstream(out / "config.json"))).output_dir == out);

  const CampaignResult loaded = load_campaign(out);
  CHECK(loaded.records == r.records);
  CHECK(loaded.asr == r.asr);
  CHECK(loaded.mean_objmc_clean == r.mean_objmc_clean);
  CHECK(loaded.mean_objmc_attack == r.mean_objmc_attack);
  CHECK(loaded.fingerprint == r.fingerprint);
  fs::remove_all(out);
}

TEST_CASE("campaign reruns are bitwise identical and independent of the pool size") {
  const fs::path a = scratch("det_a"), b = scratch("det_b");
  ExperimentConfig cfg = parse_config(json{{"instances", {{"count", 8}}}, {"attack", {{"query_budget", 96}}}});
  cfg.output_dir = a;
  const CampaignResult first = run_campaign(cfg);
  cfg.output_dir = b;
  cfg.parallelism = 4;
  const CampaignResult second = run_campaign(cfg);
  CHECK(first.records == second.records);
  CHECK(first.asr == second.asr);
  CHECK(first.fingerprint == second.fingerprint);
  fs::remove_all(a);
  fs::remove_all(b);
}

TEST_CASE("zero budget gives zero ASR") {
  const fs::path out = scratch("zero");
  ExperimentConfig cfg = small_faithful(out, 6);
  cfg.victim.jitter_sigma = 0.5;
  cfg.blackbox.eps_max = 0.0;
  const CampaignResult r = run_campaign(cfg);
  CHECK(r.asr == 0.0);
  for (const auto& rec : r.records) CHECK(rec.objmc_attack == rec.objmc_clean);
  fs::remove_all(out);
}

TEST_CASE("white-box campaign runs on the coordinate-field victim") {
  const fs::path out = scratch("wb");
  ExperimentConfig cfg = parse_config(json{{"victim", {{"kind", "coordfield"}}},
                                           {"instances", {{"count", 3}}},
                                           {"attack", {{"kind", "whitebox"}, {"iterations", 10}}}});
  cfg.output_dir = out;
  const CampaignResult r = run_campaign(cfg);
  CHECK(r.records.size() == 3);
  for (const auto& rec : r.records) {
    CHECK(rec.queries_used == 11);
    CHECK(rec.budget_used <= 16.0 + 1e-9);
  }
  CHECK(fs::exists(out / "instances" / "0000" / "attack.json"));
  fs::remove_all(out);
}

TEST_CASE("campaign through the stdio victim server equals the in-process run") {
  const fs::path a = scratch("ext_a"), b = scratch("ext_b");
  ExperimentConfig local = small_faithful(a, 4);
  local.blackbox.query_budget = 64;
  local.victim.jitter_sigma = 0.4;
  ExperimentConfig remote = local;
  remote.output_dir = b;
  remote.victim.kind = VictimKind::external;
  remote.victim.command = {CTRLATTACK_CLI, "victim-serve", "--kind", "faithful", "--params", R"({"jitter_sigma":0.4})"};
  const auto r1 = run_campaign(local);
  const auto r2 = run_campaign(remote);
  CHECK(r1.records == r2.records);
  fs::remove_all(a);
  fs::remove_all(b);
}

TEST_CASE("victim failures mark the record incomplete") {
  struct Broken : Victim {
    ObservedTracks generate(const GenerationRequest&) override { throw TransportError("victim unreachable"); }
    std::string name() const override { return "broken"; }
  };
  const ExperimentConfig cfg = small_faithful(scratch("broken"), 1);
  Broken victim;
  const auto outcome = run_instance(cfg, build_instances(cfg.instances)[0], 0, &victim);
  CHECK(outcome.record.incomplete);
  REQUIRE(outcome.record.error);
  CHECK(outcome.record.error->find("victim unreachable") != std::string::npos);
  CHECK_FALSE(outcome.record.success);
}

TEST_CASE("load_campaign detects tampered aggregates") {
  const fs::path out = scratch("tamper");
  run_campaign(small_faithful(out, 3));
  json summary = json::parse(std::ifstream(out / "campaign.json"));
  summary["asr"] = 0.5;
  std::ofstream(out / "campaign.json") << summary.dump();
  CHECK_THROWS_AS(load_campaign(out), ValidationError);
  fs::remove_all(out);
}

TEST_CASE("unwritable output directory reports the path") {
  const fs::path base = scratch("blocked");
  fs::create_directories(base);
  std::ofstream(base / "file") << "x";
  ExperimentConfig cfg = small_faithful(base / "file" / "out", 1);
  try {
    run_campaign(cfg);
    FAIL("expected an I/O failure");
  } catch (const std::runtime_error& e) {
    CHECK(std::string(e.what()).find((base / "file" / "out").string()) != std::string::npos);
  }
  fs::remove_all(base);
}

TEST_CASE("sweep runs one campaign per value on shared instances") {
  const fs::path out = scratch("sweep");
  ExperimentConfig base = parse_config(json{{"instances", {{"count", 4}}}});
  base.output_dir = out;
  const std::vector<double> values = {75, 150, 300, 600};
  const auto results = run_sweep(base, "attack.query_budget", values);
  REQUIRE(results.size() == 4);
  for (std::size_t i = 0; i < 4; ++i) {
    const fs::path dir = out / ("attack.query_budget=" + format_double(values[i]));
    CHECK(fs::exists(dir / "campaign.json"));
    CHECK(load_trajectory(dir / "instances" / "0002" / "trajectory.json") ==
          load_trajectory(out / "attack.query_budget=75" / "instances" / "0002" / "trajectory.json"));
    CHECK(results[i].total_queries <= 4 * static_cast<std::size_t>(values[i]));
  }
  CHECK(fs::exists(out / "sweep.json"));
  CHECK(fs::exists(out / "report.csv"));
  CHECK(fs::exists(out / "sweep.svg"));
  CHECK_THROWS_AS(run_sweep(base, "attack.nothing", {1}), ConfigError);
  fs::remove_all(out);
}
