#include "ctrlattack/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>
#include <thread>

#include <openssl/evp.h>

#include "ctrlattack/external_victim.hpp"
#include "ctrlattack/report.hpp"

namespace ctrlattack {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

// Reads keys from one JSON object and rejects whatever was not consumed.
class ObjectReader {
 public:
  ObjectReader(const json& doc, std::string path) : doc_(doc), path_(std::move(path)) {
    if (!doc_.is_object()) throw ConfigError(where() + "expected an object");
  }

  bool has(const std::string& key) const { return doc_.contains(key); }

  template <class T>
  T get(const std::string& key, T fallback) {
    used_.insert(key);
    if (!doc_.contains(key)) return fallback;
    const json& v = doc_.at(key);
    try {
      if constexpr (std::is_same_v<T, bool>) {
        if (!v.is_boolean()) throw ConfigError(where(key) + "expected a boolean");
      } else if constexpr (std::is_integral_v<T>) {
        if (!v.is_number_integer()) throw ConfigError(where(key) + "expected an integer");
        if constexpr (std::is_unsigned_v<T>) {
          if (v.is_number_integer() && !v.is_number_unsigned() && v.get<std::int64_t>() < 0) {
            throw ConfigError(where(key) + "must be non-negative");
          }
        }
      } else if constexpr (std::is_floating_point_v<T>) {
        if (!v.is_number()) throw ConfigError(where(key) + "expected a number");
      } else if constexpr (std::is_same_v<T, std::string>) {
        if (!v.is_string()) throw ConfigError(where(key) + "expected a string");
      }
      return v.get<T>();
    } catch (const json::exception& e) {
      throw ConfigError(where(key) + e.what());
    }
  }

  const json& raw(const std::string& key) {
    used_.insert(key);
    return doc_.at(key);
  }

  void finish() const {
    for (const auto& [key, _] : doc_.items()) {
      if (!used_.count(key)) throw ConfigError(where(key) + "unknown key");
    }
  }

  std::string where(const std::string& key = "") const {
    std::string p = path_.empty() ? key : (key.empty() ? path_ : path_ + "." + key);
    return p.empty() ? "config: " : "config." + p + ": ";
  }

 private:
  const json& doc_;
  std::string path_;
  std::set<std::string> used_;
};

std::string kind_name(VictimKind kind) {
  switch (kind) {
    case VictimKind::faithful: return "faithful";
    case VictimKind::inertial: return "inertial";
    case VictimKind::coordfield: return "coordfield";
    case VictimKind::external: return "external";
  }
  return "unknown";
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

VictimSpec parse_victim_spec(const json& doc) {
  ObjectReader r(doc, "victim");
  VictimSpec spec;
  const std::string kind = r.get<std::string>("kind", "inertial");
  spec.track_points = r.get<std::size_t>("track_points", spec.track_points);
  if (kind == "faithful") {
    spec.kind = VictimKind::faithful;
    spec.jitter_sigma = r.get<double>("jitter_sigma", 0.0);
  } else if (kind == "inertial") {
    spec.kind = VictimKind::inertial;
    spec.inertial.alpha = r.get<double>("alpha", spec.inertial.alpha);
    spec.inertial.beta = r.get<double>("beta", spec.inertial.beta);
    spec.inertial.v_max = r.get<double>("v_max", spec.inertial.v_max);
    spec.inertial.jitter_sigma = r.get<double>("jitter_sigma", spec.inertial.jitter_sigma);
  } else if (kind == "coordfield") {
    spec.kind = VictimKind::coordfield;
    auto& c = spec.coordfield;
    c.noise_sigma = r.get<double>("noise_sigma", c.noise_sigma);
    c.roi_grid = r.get<std::size_t>("roi_grid", c.roi_grid);
    c.jitter_spread = r.get<double>("jitter_spread", c.jitter_spread);
    c.align_iterations = r.get<std::size_t>("align_iterations", c.align_iterations);
    c.align_step = r.get<double>("align_step", c.align_step);
  } else if (kind == "external") {
    spec.kind = VictimKind::external;
    spec.transport = r.get<std::string>("transport", spec.transport);
    if (r.has("command")) {
      const json& cmd = r.raw("command");
      if (!cmd.is_array() || !std::all_of(cmd.begin(), cmd.end(), [](const json& v) { return v.is_string(); })) {
        throw ConfigError("config.victim.command: expected an array of strings");
      }
      spec.command = cmd.get<std::vector<std::string>>();
    }
    spec.url = r.get<std::string>("url", "");
    spec.timeout_seconds = r.get<double>("timeout_seconds", spec.timeout_seconds);
    spec.max_retries = r.get<std::size_t>("max_retries", spec.max_retries);
  } else {
    throw ConfigError("config.victim.kind: unknown victim kind '" + kind + "'");
  }
  r.finish();
  return spec;
}

namespace {

json victim_to_json(const VictimSpec& v) {
  json j;
  j["kind"] = kind_name(v.kind);
  j["track_points"] = v.track_points;
  switch (v.kind) {
    case VictimKind::faithful: j["jitter_sigma"] = v.jitter_sigma; break;
    case VictimKind::inertial:
      j["alpha"] = v.inertial.alpha;
      j["beta"] = v.inertial.beta;
      j["v_max"] = v.inertial.v_max;
      j["jitter_sigma"] = v.inertial.jitter_sigma;
      break;
    case VictimKind::coordfield:
      j["noise_sigma"] = v.coordfield.noise_sigma;
      j["roi_grid"] = v.coordfield.roi_grid;
      j["jitter_spread"] = v.coordfield.jitter_spread;
      j["align_iterations"] = v.coordfield.align_iterations;
      j["align_step"] = v.coordfield.align_step;
      break;
    case VictimKind::external:
      j["transport"] = v.transport;
      j["command"] = v.command;
      j["url"] = v.url;
      j["timeout_seconds"] = v.timeout_seconds;
      j["max_retries"] = v.max_retries;
      break;
  }
  return j;
}

}  // namespace

void ExperimentConfig::validate() const {
  if (instances.count < 1) throw ConfigError("config.instances.count: must be >= 1");
  if (instances.frame_count < 2) throw ConfigError("config.instances.frame_count: must be >= 2");
  if (instances.families.empty()) throw ConfigError("config.instances.families: must not be empty");
  if (parallelism < 1) throw ConfigError("config.parallelism: must be >= 1");
  if (victim.track_points < 1) throw ConfigError("config.victim.track_points: must be >= 1");
  try {
    switch (victim.kind) {
      case VictimKind::inertial: victim.inertial.validate(); break;
      case VictimKind::coordfield: victim.coordfield.validate(); break;
      case VictimKind::faithful:
        if (!(victim.jitter_sigma >= 0.0)) throw InvalidArgument("jitter_sigma must be >= 0");
        break;
      case VictimKind::external:
        if (victim.transport == "stdio" && victim.command.empty()) {
          throw InvalidArgument("stdio transport needs a command");
        }
        if (victim.transport == "http" && victim.url.empty()) throw InvalidArgument("http transport needs a url");
        if (victim.transport != "stdio" && victim.transport != "http") {
          throw InvalidArgument("transport must be stdio or http");
        }
        break;
    }
    if (attack == AttackKind::blackbox) {
      blackbox.validate(instances.frame_count);
    } else {
      whitebox.validate(instances.frame_count);
      if (victim.kind != VictimKind::coordfield) {
        throw InvalidArgument("the white-box attack needs the coordfield victim");
      }
    }
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
}

ExperimentConfig parse_config(const json& doc) {
  ObjectReader r(doc, "");
  ExperimentConfig cfg;
  if (r.has("victim")) cfg.victim = parse_victim_spec(r.raw("victim"));

  if (r.has("instances")) {
    ObjectReader ir(r.raw("instances"), "instances");
    auto& s = cfg.instances;
    s.count = ir.get<std::size_t>("count", s.count);
    s.frame_count = ir.get<std::size_t>("frame_count", s.frame_count);
    s.frame_width = ir.get<int>("frame_width", s.frame_width);
    s.frame_height = ir.get<int>("frame_height", s.frame_height);
    s.seed = ir.get<std::uint64_t>("seed", s.seed);
    s.margin = ir.get<double>("margin", s.margin);
    if (ir.has("families")) {
      const json& fam = ir.raw("families");
      if (!fam.is_array()) throw ConfigError("config.instances.families: expected an array");
      s.families.clear();
      for (const json& f : fam) {
        if (!f.is_string()) throw ConfigError("config.instances.families: expected strings");
        try {
          s.families.push_back(parse_motion_family(f.get<std::string>()));
        } catch (const InvalidArgument& e) {
          throw ConfigError(std::string("config.instances.families: ") + e.what());
        }
      }
    }
    ir.finish();
  }

  if (r.has("attack")) {
    ObjectReader ar(r.raw("attack"), "attack");
    const std::string kind = ar.get<std::string>("kind", "blackbox");
    if (kind == "blackbox") {
      cfg.attack = AttackKind::blackbox;
      auto& b = cfg.blackbox;
      b.population = ar.get<std::size_t>("population", b.population);
      b.sigma = ar.get<double>("sigma", b.sigma);
      b.step = ar.get<double>("step", b.step);
      b.query_budget = ar.get<std::size_t>("query_budget", b.query_budget);
      b.antithetic = ar.get<bool>("antithetic", b.antithetic);
      b.k = ar.get<std::size_t>("k", b.k);
      b.eps_max = ar.get<double>("eps_max", b.eps_max);
      b.seed = ar.get<std::uint64_t>("seed", b.seed);
    } else if (kind == "whitebox") {
      cfg.attack = AttackKind::whitebox;
      auto& w = cfg.whitebox;
      w.k = ar.get<std::size_t>("k", w.k);
      w.d = ar.get<std::size_t>("d", w.d);
      w.s = ar.get<std::size_t>("s", w.s);
      w.step_size = ar.get<double>("step_size", w.step_size);
      w.iterations = ar.get<std::size_t>("iterations", w.iterations);
      w.stage1_iterations = ar.get<std::size_t>("stage1_iterations", w.stage1_iterations);
      w.eps_max = ar.get<double>("eps_max", w.eps_max);
      w.seed = ar.get<std::uint64_t>("seed", w.seed);
    } else {
      throw ConfigError("config.attack.kind: unknown attack kind '" + kind + "'");
    }
    ar.finish();
  }

  try {
    cfg.ablation = parse_ablation_mode(r.get<std::string>("ablation", "full"));
  } catch (const InvalidArgument& e) {
    throw ConfigError(std::string("config.ablation: ") + e.what());
  }
  cfg.output_dir = r.get<std::string>("output_dir", cfg.output_dir.string());
  cfg.parallelism = r.get<std::size_t>("parallelism", cfg.parallelism);
  r.finish();
  cfg.validate();
  return cfg;
}

ExperimentConfig load_config(const fs::path& path) {
  const std::string text = read_text(path);
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  return parse_config(doc);
}

json config_to_json(const ExperimentConfig& cfg) {
  json j;
  j["victim"] = victim_to_json(cfg.victim);
  json inst;
  inst["count"] = cfg.instances.count;
  inst["frame_count"] = cfg.instances.frame_count;
  inst["frame_width"] = cfg.instances.frame_width;
  inst["frame_height"] = cfg.instances.frame_height;
  inst["seed"] = cfg.instances.seed;
  inst["margin"] = cfg.instances.margin;
  inst["families"] = json::array();
  for (MotionFamily f : cfg.instances.families) inst["families"].push_back(to_string(f));
  j["instances"] = inst;
  json a;
  if (cfg.attack == AttackKind::blackbox) {
    const auto& b = cfg.blackbox;
    a = {{"kind", "blackbox"},      {"population", b.population}, {"sigma", b.sigma},
         {"step", b.step},          {"query_budget", b.query_budget}, {"antithetic", b.antithetic},
         {"k", b.k},                {"eps_max", b.eps_max},       {"seed", b.seed}};
  } else {
    const auto& w = cfg.whitebox;
    a = {{"kind", "whitebox"},     {"k", w.k},
         {"d", w.d},               {"s", w.s},
         {"step_size", w.step_size}, {"iterations", w.iterations},
         {"stage1_iterations", w.stage1_iterations}, {"eps_max", w.eps_max},
         {"seed", w.seed}};
  }
  j["attack"] = a;
  j["ablation"] = to_string(cfg.ablation);
  j["output_dir"] = cfg.output_dir.string();
  j["parallelism"] = cfg.parallelism;
  return j;
}

std::string config_fingerprint(const ExperimentConfig& cfg) {
  json j = config_to_json(cfg);
  j.erase("output_dir");
  j.erase("parallelism");
  const std::string canonical = j.dump();
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(canonical.data(), canonical.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
    throw std::runtime_error("SHA-256 digest failed");
  }
  std::ostringstream hex;
  for (unsigned int i = 0; i < len; ++i) hex << std::hex << std::setw(2) << std::setfill('0') << int(digest[i]);
  return hex.str();
}

VictimFactory make_victim_factory(const VictimSpec& spec) {
  switch (spec.kind) {
    case VictimKind::faithful:
      return [sigma = spec.jitter_sigma] { return std::make_unique<FaithfulVictim>(sigma); };
    case VictimKind::inertial:
      return [p = spec.inertial] { return std::make_unique<InertialVictim>(p); };
    case VictimKind::coordfield:
      return [p = spec.coordfield] { return std::make_unique<CoordFieldVictim>(p); };
    case VictimKind::external:
      return [spec]() -> std::unique_ptr<Victim> {
        std::unique_ptr<Transport> transport;
        if (spec.transport == "http") {
          transport = std::make_unique<HttpTransport>(spec.url);
        } else {
          transport = std::make_unique<SubprocessTransport>(spec.command);
        }
        const auto timeout = std::chrono::milliseconds(static_cast<long long>(spec.timeout_seconds * 1000.0));
        return std::make_unique<ExternalVictim>(std::move(transport), timeout, RetryPolicy{spec.max_retries});
      };
  }
  throw ConfigError("unknown victim kind");
}

std::vector<TrajectoryCondition> build_instances(const InstanceSetSpec& spec) {
  std::vector<TrajectoryCondition> out;
  out.reserve(spec.count);
  for (std::size_t i = 0; i < spec.count; ++i) {
    InstanceSpec one;
    one.count = 1;
    one.frame_count = spec.frame_count;
    one.frame_width = spec.frame_width;
    one.frame_height = spec.frame_height;
    one.family = spec.families[i % spec.families.size()];
    one.seed = splitmix64(spec.seed * 0x100000001B3ULL + i);
    one.margin = spec.margin;
    out.push_back(std::move(generate_instances(one).front()));
  }
  return out;
}

std::uint64_t instance_seed(const ExperimentConfig& cfg, std::size_t index) {
  return splitmix64(splitmix64(cfg.instances.seed) ^ (0xC0FFEEULL + index));
}

namespace {

std::string instance_id(std::size_t index) {
  std::ostringstream s;
  s << std::setw(4) << std::setfill('0') << index;
  return s.str();
}

double max_center_shift(const TrajectoryCondition& a, const TrajectoryCondition& b) {
  double mx = 0.0;
  for (std::size_t t = 0; t < a.frame_count(); ++t) {
    const Vec2 d = b.box(t).center() - a.box(t).center();
    mx = std::max({mx, std::abs(d.x), std::abs(d.y)});
  }
  return mx;
}

}  // namespace

InstanceOutcome run_instance(const ExperimentConfig& cfg, const TrajectoryCondition& traj, std::size_t index,
                             Victim* victim) {
  InstanceOutcome out{EvalRecord{}, traj, std::nullopt, std::nullopt, std::nullopt, std::nullopt};
  EvalRecord& rec = out.record;
  rec.instance_id = instance_id(index);
  GenerationRequest request{traj, instance_seed(cfg, index), cfg.victim.track_points, std::nullopt};
  try {
    if (cfg.attack == AttackKind::blackbox) {
      if (!victim) throw std::logic_error("black-box campaign needs a victim");
      out.clean_tracks = victim->generate(request);
      VictimQuery query = [&](const TrajectoryCondition& perturbed) {
        GenerationRequest r = request;
        r.trajectory = perturbed;
        return victim->generate(r);
      };
      out.attack = blackbox_attack(query, traj, cfg.blackbox, cfg.ablation);
      out.perturbed = out.attack->perturbed_trajectory;
      GenerationRequest attacked = request;
      attacked.trajectory = *out.perturbed;
      out.attack_tracks = victim->generate(attacked);
      rec.budget_used = max_center_shift(traj, *out.perturbed);
    } else {
      CoordFieldModel model(request, cfg.victim.coordfield);
      out.attack = whitebox_attack(model, cfg.whitebox, cfg.ablation);
      out.clean_tracks = model.generate(out.attack->internal_offsets, {});
      out.attack_tracks = model.generate(out.attack->internal_offsets, out.attack->displacement_fields);
      double peak = 0.0;
      for (const auto& f : out.attack->displacement_fields) {
        const Vec2 m = f.mean();
        peak = std::max({peak, std::abs(m.x), std::abs(m.y)});
      }
      rec.budget_used = peak;
    }
    rec.objmc_clean = objmc_metric(*out.clean_tracks, traj);
    rec.objmc_attack = objmc_metric(*out.attack_tracks, traj);
    rec.success = attack_succeeded(rec.objmc_attack, rec.objmc_clean);
    rec.queries_used = out.attack->queries_used;
    if (out.attack->incomplete) {
      rec.incomplete = true;
      rec.error = out.attack->incomplete_reason;
    }
  } catch (const std::exception& e) {
    rec.incomplete = true;
    rec.success = false;
    rec.error = e.what();
  }
  return out;
}

json record_to_json(const EvalRecord& r) {
  json j;
  j["instance_id"] = r.instance_id;
  j["objmc_clean"] = r.objmc_clean;
  j["objmc_attack"] = r.objmc_attack;
  j["success"] = r.success;
  j["queries_used"] = r.queries_used;
  j["budget_used"] = r.budget_used;
  j["incomplete"] = r.incomplete;
  j["error"] = r.error ? json(*r.error) : json(nullptr);
  return j;
}

EvalRecord record_from_json(const json& j) {
  EvalRecord r;
  try {
    r.instance_id = j.at("instance_id").get<std::string>();
    r.objmc_clean = j.at("objmc_clean").get<double>();
    r.objmc_attack = j.at("objmc_attack").get<double>();
    r.success = j.at("success").get<bool>();
    r.queries_used = j.at("queries_used").get<std::size_t>();
    r.budget_used = j.at("budget_used").get<double>();
    r.incomplete = j.at("incomplete").get<bool>();
    if (!j.at("error").is_null()) r.error = j.at("error").get<std::string>();
  } catch (const json::exception& e) {
    throw ValidationError(std::string("malformed record: ") + e.what());
  }
  if (r.objmc_clean < 0.0 || r.objmc_attack < 0.0) throw ValidationError("record has negative ObjMC");
  return r;
}

json tracks_to_json(const ObservedTracks& tracks) {
  json frames = json::array();
  for (std::size_t t = 0; t < tracks.frame_count(); ++t) {
    json pts = json::array();
    for (const Vec2& p : tracks.frame(t)) pts.push_back({p.x, p.y});
    frames.push_back(std::move(pts));
  }
  return frames;
}

namespace {

void aggregate(CampaignResult& result) {
  result.asr = compute_asr(result.records);
  double clean = 0.0;
  double attack = 0.0;
  std::size_t n = 0;
  result.total_queries = 0;
  for (const EvalRecord& r : result.records) {
    result.total_queries += r.queries_used;
    if (r.incomplete) continue;
    clean += r.objmc_clean;
    attack += r.objmc_attack;
    ++n;
  }
  result.mean_objmc_clean = clean / static_cast<double>(n);
  result.mean_objmc_attack = attack / static_cast<double>(n);
}

json campaign_summary(const CampaignResult& r) {
  json j;
  j["label"] = r.label;
  j["asr"] = r.asr;
  j["mean_objmc_clean"] = r.mean_objmc_clean;
  j["mean_objmc_attack"] = r.mean_objmc_attack;
  j["total_queries"] = r.total_queries;
  j["wall_seconds"] = r.wall_seconds;
  j["fingerprint"] = r.fingerprint;
  j["instance_count"] = r.records.size();
  return j;
}

void persist_instance(const fs::path& dir, const InstanceOutcome& o) {
  fs::create_directories(dir);
  save_trajectory(o.trajectory, dir / "trajectory.json");
  if (o.perturbed) save_trajectory(*o.perturbed, dir / "perturbed.json");
  if (o.clean_tracks) write_text(dir / "clean_tracks.json", tracks_to_json(*o.clean_tracks).dump() + "\n");
  if (o.attack_tracks) write_text(dir / "attack_tracks.json", tracks_to_json(*o.attack_tracks).dump() + "\n");
  if (o.attack) {
    const AttackResult& a = *o.attack;
    json j;
    const Matrix& c = a.best_coefficients.values();
    json coeffs = json::array();
    for (std::size_t i = 0; i < c.rows(); ++i) {
      coeffs.push_back(std::vector<double>(c.row(i).begin(), c.row(i).end()));
    }
    j["best_coefficients"] = coeffs;
    j["best_objective"] = a.best_objective;
    j["objective_history"] = a.objective_history;
    j["queries_used"] = a.queries_used;
    j["incomplete"] = a.incomplete;
    json means = json::array();
    for (const auto& f : a.displacement_fields) {
      const Vec2 m = f.mean();
      means.push_back({m.x, m.y});
    }
    j["mean_field_displacements"] = means;
    write_text(dir / "attack.json", j.dump() + "\n");
  }
  write_text(dir / "record.json", record_to_json(o.record).dump() + "\n");
}

}  // namespace

CampaignResult run_campaign(const ExperimentConfig& cfg) {
  cfg.validate();
  const auto started = std::chrono::steady_clock::now();
  std::error_code ec;
  fs::create_directories(cfg.output_dir, ec);
  if (ec) throw std::runtime_error("cannot create output directory " + cfg.output_dir.string() + ": " + ec.message());

  const auto instances = build_instances(cfg.instances);
  std::vector<std::optional<InstanceOutcome>> outcomes(instances.size());
  const VictimFactory factory =
      cfg.attack == AttackKind::blackbox ? make_victim_factory(cfg.victim) : VictimFactory{};

  std::atomic<std::size_t> next{0};
  auto work = [&] {
    std::unique_ptr<Victim> victim;
    if (factory) victim = factory();
    for (std::size_t i = next++; i < instances.size(); i = next++) {
      outcomes[i] = run_instance(cfg, instances[i], i, victim.get());
    }
  };
  const std::size_t workers = std::min(cfg.parallelism, instances.size());
  if (workers <= 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work);
    for (auto& t : pool) t.join();
  }

  CampaignResult result;
  result.fingerprint = config_fingerprint(cfg);
  result.label = cfg.output_dir.filename().string();
  json records_lines;
  std::string jsonl;
  for (std::size_t i = 0; i < outcomes.size(); ++i) {
    persist_instance(cfg.output_dir / "instances" / outcomes[i]->record.instance_id, *outcomes[i]);
    result.records.push_back(outcomes[i]->record);
    jsonl += record_to_json(outcomes[i]->record).dump() + "\n";
  }
  aggregate(result);
  result.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();

  write_text(cfg.output_dir / "config.json", config_to_json(cfg).dump(2) + "\n");
  write_text(cfg.output_dir / "records.jsonl", jsonl);
  write_text(cfg.output_dir / "campaign.json", campaign_summary(result).dump(2) + "\n");
  return result;
}

CampaignResult load_campaign(const fs::path& dir) {
  json summary;
  try {
    summary = json::parse(read_text(dir / "campaign.json"));
  } catch (const json::exception& e) {
    throw ValidationError((dir / "campaign.json").string() + ": " + e.what());
  }
  CampaignResult result;
  std::istringstream lines(read_text(dir / "records.jsonl"));
  std::string line;
  while (std::getline(lines, line)) {
    if (line.empty()) continue;
    try {
      result.records.push_back(record_from_json(json::parse(line)));
    } catch (const json::exception& e) {
      throw ValidationError((dir / "records.jsonl").string() + ": " + e.what());
    }
  }
  aggregate(result);
  try {
    result.fingerprint = summary.at("fingerprint").get<std::string>();
    result.label = summary.at("label").get<std::string>();
    result.wall_seconds = summary.at("wall_seconds").get<double>();
    if (summary.at("asr").get<double>() != result.asr ||
        summary.at("mean_objmc_clean").get<double>() != result.mean_objmc_clean ||
        summary.at("mean_objmc_attack").get<double>() != result.mean_objmc_attack ||
        summary.at("total_queries").get<std::size_t>() != result.total_queries) {
      throw ValidationError(dir.string() + ": stored aggregates do not match the records");
    }
  } catch (const json::exception& e) {
    throw ValidationError((dir / "campaign.json").string() + ": " + e.what());
  }
  return result;
}

ExperimentConfig with_parameter(const ExperimentConfig& base, const std::string& path, double value) {
  json doc = config_to_json(base);
  json* node = &doc;
  std::istringstream parts(path);
  std::string part;
  while (std::getline(parts, part, '.')) {
    if (!node->is_object() || !node->contains(part)) throw ConfigError("unknown parameter path '" + path + "'");
    node = &(*node)[part];
  }
  if (node->is_number_integer()) {
    if (value < 0.0 || value != std::floor(value)) {
      throw ConfigError("parameter '" + path + "' needs a non-negative integer value");
    }
    *node = static_cast<std::uint64_t>(value);
  } else if (node->is_number_float()) {
    *node = value;
  } else {
    throw ConfigError("parameter path '" + path + "' does not address a numeric field");
  }
  return parse_config(doc);
}

std::vector<CampaignResult> run_sweep(const ExperimentConfig& base, const std::string& path,
                                      const std::vector<double>& values) {
  if (values.empty()) throw ConfigError("sweep needs at least one value");
  std::vector<SweepPoint> points;
  std::vector<CampaignResult> results;
  json index;
  index["parameter"] = path;
  index["points"] = json::array();
  for (double v : values) {
    ExperimentConfig cfg = with_parameter(base, path, v);
    const std::string name = path + "=" + format_double(v);
    cfg.output_dir = base.output_dir / name;
    CampaignResult r = run_campaign(cfg);
    r.label = name;
    points.push_back({v, r});
    results.push_back(r);
    index["points"].push_back({{"value", v}, {"dir", name}});
  }
  fs::create_directories(base.output_dir);
  write_text(base.output_dir / "sweep.json", index.dump(2) + "\n");
  emit_sweep_report(path, points, base.output_dir);
  return results;
}

}  // namespace ctrlattack
