#include <doctest.h>

#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <regex>
#include <thread>

#include <csignal>
#include <sys/wait.h>
#include <unistd.h>

#include <json.hpp>

#include "ctrlattack/external_victim.hpp"
#include "ctrlattack/report.hpp"

using namespace ctrlattack;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code;
  std::string out;
};

Run run(const std::string& args) {
  const std::string cmd = std::string(CTRLATTACK_CLI) + " " + args + " 2>/dev/null";
  FILE* pipe = popen(cmd.c_str(), "r");
  REQUIRE(pipe != nullptr);
  std::string out;
  std::array<char, 4096> buf;
  while (std::size_t n = fread(buf.data(), 1, buf.size(), pipe)) out.append(buf.data(), n);
  const int status = pclose(pipe);
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, out};
}

fs::path workdir() {
  static const fs::path dir = [] {
    const fs::path d = fs::temp_directory_path() / "ctrlattack_cli_test";
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

fs::path write_config(const std::string& name, json doc) {
  const fs::path p = workdir() / (name + ".json");
  if (!doc.contains("output_dir")) doc["output_dir"] = (workdir() / (name + "_out")).string();
  std::ofstream(p) << doc.dump(2);
  return p;
}

json small_config() {
  return {{"victim", {{"kind", "inertial"}}}, {"instances", {{"count", 4}}}, {"attack", {{"query_budget", 64}}}};
}

}  // namespace

TEST_CASE("usage errors exit with 1") {
  CHECK(run("").code == 1);
  CHECK(run("frobnicate").code == 1);
  CHECK(run("campaign").code == 1);
  CHECK(run("campaign --config /does/not/exist.json").code == 1);
  CHECK(run("--help").code == 0);

  json bad = small_config();
  bad["attack"]["typo"] = 1;
  CHECK(run("campaign --config " + write_config("bad", bad).string()).code == 1);

  const fs::path broken = workdir() / "broken.json";
  std::ofstream(broken) << "{ not json";
  CHECK(run("campaign --config " + broken.string()).code == 1);
  CHECK(run("victim-serve --kind dragon").code == 1);
  CHECK(run("victim-serve --kind faithful --transport carrier-pigeon").code == 1);
}

TEST_CASE("campaign, eval and report") {
  const fs::path cfg = write_config("camp", small_config());
  const Run r = run("campaign --config " + cfg.string());
  REQUIRE(r.code == 0);
  const json summary = json::parse(r.out);
  CHECK(summary["instances"] == 4);
  const fs::path out = workdir() / "camp_out";
  CHECK(fs::exists(out / "report.csv"));

  const Run e = run("eval --records " + out.string());
  REQUIRE(e.code == 0);
  CHECK(json::parse(e.out)["asr"] == summary["asr"]);

  const fs::path rep = workdir() / "camp_report";
  REQUIRE(run("report --in " + out.string() + " --out " + rep.string()).code == 0);
  const auto rows = read_csv(rep / "report.csv");
  CHECK(rows.size() == 2);

  json tampered = json::parse(std::ifstream(out / "campaign.json"));
  tampered["mean_objmc_attack"] = 1e9;
  std::ofstream(out / "campaign.json") << tampered.dump();
  CHECK(run("eval --records " + out.string()).code == 2);
}

TEST_CASE("attack on a single instance") {
  const fs::path cfg = write_config("single", small_config());
  const fs::path traj = workdir() / "perturbed.json";
  const Run r = run("attack --config " + cfg.string() + " --instance 2 --out " + traj.string());
  REQUIRE(r.code == 0);
  const json rec = json::parse(r.out);
  CHECK(rec["instance_id"] == "0002");
  CHECK(rec["queries_used"] == 64);
  CHECK(load_trajectory(traj).frame_count() == 14);
  CHECK(run("attack --config " + cfg.string() + " --instance 7").code == 1);
  CHECK(run("attack --config " + cfg.string() + " --instance two").code == 1);
}

TEST_CASE("sweep writes a plot") {
  const fs::path cfg = write_config("sweep", small_config());
  const Run r = run("sweep --config " + cfg.string() + " --param attack.query_budget --values 32,64");
  REQUIRE(r.code == 0);
  CHECK(json::parse(r.out)["campaigns"].size() == 2);
  const fs::path out = workdir() / "sweep_out";
  CHECK(fs::exists(out / "sweep.svg"));
  const fs::path rep = workdir() / "sweep_report";
  REQUIRE(run("report --in " + out.string() + " --out " + rep.string()).code == 0);
  CHECK(fs::exists(rep / "sweep.svg"));
  CHECK(run("sweep --config " + cfg.string() + " --param attack.bogus --values 1").code == 1);
  CHECK(run("sweep --config " + cfg.string() + " --param attack.k --values 1,x").code == 1);
}

TEST_CASE("http victim server runs until terminated") {
  int err_pipe[2];
  REQUIRE(pipe(err_pipe) == 0);
  const pid_t pid = fork();
  REQUIRE(pid >= 0);
  if (pid == 0) {
    dup2(err_pipe[1], STDERR_FILENO);
    close(err_pipe[0]);
    close(err_pipe[1]);
    execl(CTRLATTACK_CLI, CTRLATTACK_CLI, "victim-serve", "--kind", "faithful", "--transport", "http", "--port", "0",
          "--params", "{\"jitter_sigma\": 0.2}", static_cast<char*>(nullptr));
    _exit(127);
  }
  close(err_pipe[1]);
  std::string banner;
  char c;
  while (read(err_pipe[0], &c, 1) == 1 && c != '\n') banner += c;
  close(err_pipe[0]);
  std::smatch m;
  REQUIRE(std::regex_search(banner, m, std::regex(R"(:(\d+)$)")));
  const std::string url = "http://127.0.0.1:" + m[1].str();

  std::vector<BoundingBox> boxes;
  for (int t = 0; t < 14; ++t) boxes.push_back({40.0 + 2 * t, 50, 70.0 + 2 * t, 90});
  const GenerationRequest req{TrajectoryCondition(256, 256, boxes), 11, 8, std::nullopt};
  ExternalVictim client(std::make_unique<HttpTransport>(url), std::chrono::seconds(10));
  CHECK(client.generate(req) == FaithfulVictim(0.2).generate(req));

  kill(pid, SIGTERM);
  int status = 0;
  waitpid(pid, &status, 0);
  CHECK(WIFEXITED(status));
  CHECK(WEXITSTATUS(status) == 0);
}
