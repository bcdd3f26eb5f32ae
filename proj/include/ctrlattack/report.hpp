#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "ctrlattack/harness.hpp"

namespace ctrlattack {

struct SweepPoint {
  double value;
  CampaignResult result;
};

/// report.csv (one row per campaign) and report.json with the same data.
void emit_report(const std::vector<CampaignResult>& results, const std::filesystem::path& out_dir);

/// Same tables plus sweep.svg plotting ASR against the swept value.
void emit_sweep_report(const std::string& parameter, const std::vector<SweepPoint>& points,
                       const std::filesystem::path& out_dir);

std::string render_sweep_svg(const std::string& parameter, const std::vector<SweepPoint>& points);

/// Rows of a CSV file, header row first.
std::vector<std::vector<std::string>> read_csv(const std::filesystem::path& path);

/// Shortest decimal text that parses back to the same double.
std::string format_double(double value);

}  // namespace ctrlattack
