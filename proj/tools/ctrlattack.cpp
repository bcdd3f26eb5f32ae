// Command-line front end: attack, campaign, sweep, eval, report, victim-serve.
#include <csignal>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <pthread.h>
#include <sstream>
#include <thread>

#include <CLI11.hpp>
#include <json.hpp>

#include "ctrlattack/errors.hpp"
#include "ctrlattack/harness.hpp"
#include "ctrlattack/report.hpp"
#include "ctrlattack/victim_server.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace ctrlattack;

namespace {

constexpr int kUsageError = 1;
constexpr int kRuntimeError = 2;

json summary_json(const CampaignResult& r) {
  std::size_t incomplete = 0;
  for (const auto& rec : r.records) incomplete += rec.incomplete ? 1 : 0;
  return {{"label", r.label},
          {"asr", r.asr},
          {"mean_objmc_clean", r.mean_objmc_clean},
          {"mean_objmc_attack", r.mean_objmc_attack},
          {"total_queries", r.total_queries},
          {"instances", r.records.size()},
          {"incomplete", incomplete},
          {"wall_seconds", r.wall_seconds},
          {"fingerprint", r.fingerprint}};
}

std::size_t parse_instance_id(const std::string& id, std::size_t count) {
  std::size_t pos = 0;
  unsigned long long v = 0;
  try {
    v = std::stoull(id, &pos);
  } catch (const std::exception&) {
    pos = 0;
  }
  if (pos != id.size() || id.empty()) throw ConfigError("--instance: expected a numeric id, got '" + id + "'");
  if (v >= count) {
    throw ConfigError("--instance: id " + id + " out of range (config has " + std::to_string(count) + " instances)");
  }
  return static_cast<std::size_t>(v);
}

std::vector<double> parse_values(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    std::size_t pos = 0;
    double v = 0.0;
    try {
      v = std::stod(item, &pos);
    } catch (const std::exception&) {
      pos = 0;
    }
    if (pos == 0 || pos != item.size()) throw ConfigError("--values: cannot parse '" + item + "'");
    out.push_back(v);
  }
  if (out.empty()) throw ConfigError("--values: no values given");
  return out;
}

int cmd_attack(const std::string& config_path, const std::string& instance, const std::string& out) {
  const ExperimentConfig cfg = load_config(config_path);
  const std::size_t index = parse_instance_id(instance, cfg.instances.count);
  const auto instances = build_instances(cfg.instances);
  std::unique_ptr<Victim> victim;
  if (cfg.attack == AttackKind::blackbox) victim = make_victim_factory(cfg.victim)();
  const InstanceOutcome o = run_instance(cfg, instances[index], index, victim.get());
  json doc = record_to_json(o.record);
  if (o.attack) doc["objective_history"] = o.attack->objective_history;
  if (!out.empty() && o.perturbed) save_trajectory(*o.perturbed, out);
  std::cout << doc.dump(2) << "\n";
  return o.record.error && !o.record.incomplete ? kRuntimeError : 0;
}

int cmd_campaign(const std::string& config_path) {
  const ExperimentConfig cfg = load_config(config_path);
  const CampaignResult r = run_campaign(cfg);
  emit_report({r}, cfg.output_dir);
  std::cout << summary_json(r).dump(2) << "\n";
  return 0;
}

int cmd_sweep(const std::string& config_path, const std::string& param, const std::string& values) {
  const ExperimentConfig cfg = load_config(config_path);
  const auto vals = parse_values(values);
  const auto results = run_sweep(cfg, param, vals);
  json arr = json::array();
  for (std::size_t i = 0; i < results.size(); ++i) {
    json s = summary_json(results[i]);
    s["value"] = vals[i];
    arr.push_back(s);
  }
  std::cout << json{{"parameter", param}, {"campaigns", arr}}.dump(2) << "\n";
  return 0;
}

int cmd_eval(const std::string& dir) {
  const CampaignResult r = load_campaign(dir);
  std::cout << summary_json(r).dump(2) << "\n";
  return 0;
}

json read_json_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
}

int cmd_report(const fs::path& in, const fs::path& out) {
  if (fs::exists(in / "sweep.json")) {
    const json index = read_json_file(in / "sweep.json");
    std::vector<SweepPoint> points;
    for (const json& p : index.at("points")) {
      CampaignResult r = load_campaign(in / p.at("dir").get<std::string>());
      points.push_back({p.at("value").get<double>(), std::move(r)});
    }
    emit_sweep_report(index.at("parameter").get<std::string>(), points, out);
  } else if (fs::exists(in / "campaign.json")) {
    emit_report({load_campaign(in)}, out);
  } else {
    throw std::runtime_error(in.string() + ": neither campaign.json nor sweep.json found");
  }
  std::cout << "wrote " << (out / "report.csv").string() << "\n";
  return 0;
}

int cmd_serve(const std::string& kind, const std::string& params, const std::string& transport,
              const std::string& host, int port, std::size_t workers) {
  json spec = json::object();
  if (!params.empty()) {
    try {
      spec = json::parse(params);
    } catch (const json::exception& e) {
      throw ConfigError(std::string("--params: ") + e.what());
    }
    if (!spec.is_object()) throw ConfigError("--params: expected a JSON object");
  }
  spec["kind"] = kind;
  const VictimSpec vs = parse_victim_spec(spec);
  if (vs.kind == VictimKind::external) throw ConfigError("--kind: cannot serve an external victim");
  const VictimFactory factory = make_victim_factory(vs);

  if (transport == "stdio") {
    serve_stream(std::cin, std::cout, factory, workers);
    return 0;
  }
  // Route SIGINT/SIGTERM to a waiter thread so the server can shut down cleanly.
  sigset_t set;
  sigemptyset(&set);
  sigaddset(&set, SIGINT);
  sigaddset(&set, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &set, nullptr);

  HttpVictimServer server(factory);
  const int bound = server.bind(host, port);
  std::cerr << "listening on " << host << ":" << bound << std::endl;
  std::thread waiter([&] {
    int sig = 0;
    sigwait(&set, &sig);
    server.stop();
  });
  waiter.detach();
  server.listen();
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Trajectory-control attacks against trajectory-conditioned video generators"};
  app.require_subcommand(1);

  std::string config, instance, out, param, values, dir, in_dir, out_dir;
  std::string kind = "faithful", params, transport = "stdio", host = "127.0.0.1";
  int port = 8080;
  std::size_t workers = 4;

  auto* attack = app.add_subcommand("attack", "Attack a single instance and print its record");
  attack->add_option("--config", config, "Experiment config (JSON)")->required()->check(CLI::ExistingFile);
  attack->add_option("--instance", instance, "Instance index")->required();
  attack->add_option("--out", out, "Write the perturbed trajectory here");

  auto* campaign = app.add_subcommand("campaign", "Run a campaign over the configured instance set");
  campaign->add_option("--config", config, "Experiment config (JSON)")->required()->check(CLI::ExistingFile);

  auto* sweep = app.add_subcommand("sweep", "Run one campaign per value of a config field");
  sweep->add_option("--config", config, "Experiment config (JSON)")->required()->check(CLI::ExistingFile);
  sweep->add_option("--param", param, "Dotted path of a numeric field, e.g. attack.query_budget")->required();
  sweep->add_option("--values", values, "Comma-separated values")->required();

  auto* eval = app.add_subcommand("eval", "Reload a campaign and verify its aggregates");
  eval->add_option("--records", dir, "Campaign output directory")->required()->check(CLI::ExistingDirectory);

  auto* report = app.add_subcommand("report", "Write CSV/JSON tables (and SVG for sweeps)");
  report->add_option("--in", in_dir, "Campaign or sweep directory")->required()->check(CLI::ExistingDirectory);
  report->add_option("--out", out_dir, "Output directory")->required();

  auto* serve = app.add_subcommand("victim-serve", "Serve a built-in victim over the wire protocol");
  serve->add_option("--kind", kind, "faithful | inertial | coordfield")->required();
  serve->add_option("--params", params, "Victim parameters as a JSON object");
  serve->add_option("--transport", transport, "stdio | http")->check(CLI::IsMember({"stdio", "http"}));
  serve->add_option("--host", host, "HTTP bind address");
  serve->add_option("--port", port, "HTTP port (0 picks a free one)")->check(CLI::Range(0, 65535));
  serve->add_option("--workers", workers, "Concurrent request handlers (stdio)")->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kUsageError;
  }

  try {
    if (*attack) return cmd_attack(config, instance, out);
    if (*campaign) return cmd_campaign(config);
    if (*sweep) return cmd_sweep(config, param, values);
    if (*eval) return cmd_eval(dir);
    if (*report) return cmd_report(in_dir, out_dir);
    if (*serve) return cmd_serve(kind, params, transport, host, port, workers);
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsageError;
  } catch (const ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsageError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kRuntimeError;
  }
  return kUsageError;
}
