#include "ctrlattack/report.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

namespace ctrlattack {

namespace fs = std::filesystem;
using nlohmann::json;

std::string format_double(double value) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, value);
  return std::string(buf, res.ptr);
}

namespace {

const std::vector<std::string> kColumns = {"label",        "value",           "asr",
                                           "mean_objmc_clean", "mean_objmc_attack", "total_queries",
                                           "instances",    "incomplete",      "fingerprint"};

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::size_t incomplete_count(const CampaignResult& r) {
  return static_cast<std::size_t>(
      std::count_if(r.records.begin(), r.records.end(), [](const EvalRecord& e) { return e.incomplete; }));
}

std::vector<std::string> row_for(const CampaignResult& r, const std::string& value) {
  return {r.label,
          value,
          format_double(r.asr),
          format_double(r.mean_objmc_clean),
          format_double(r.mean_objmc_attack),
          std::to_string(r.total_queries),
          std::to_string(r.records.size()),
          std::to_string(incomplete_count(r)),
          r.fingerprint};
}

json row_json(const CampaignResult& r, const std::optional<double>& value) {
  json j;
  j["label"] = r.label;
  j["value"] = value ? json(*value) : json(nullptr);
  j["asr"] = r.asr;
  j["mean_objmc_clean"] = r.mean_objmc_clean;
  j["mean_objmc_attack"] = r.mean_objmc_attack;
  j["total_queries"] = r.total_queries;
  j["instances"] = r.records.size();
  j["incomplete"] = incomplete_count(r);
  j["fingerprint"] = r.fingerprint;
  return j;
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

void write_tables(const std::vector<std::vector<std::string>>& rows, const json& doc, const fs::path& out_dir) {
  fs::create_directories(out_dir);
  std::ostringstream csv;
  for (std::size_t i = 0; i < kColumns.size(); ++i) csv << (i ? "," : "") << kColumns[i];
  csv << "\n";
  for (const auto& row : rows) {
    for (std::size_t i = 0; i < row.size(); ++i) csv << (i ? "," : "") << csv_field(row[i]);
    csv << "\n";
  }
  write_file(out_dir / "report.csv", csv.str());
  write_file(out_dir / "report.json", doc.dump(2) + "\n");
}

std::string xml_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

}  // namespace

void emit_report(const std::vector<CampaignResult>& results, const fs::path& out_dir) {
  std::vector<std::vector<std::string>> rows;
  json doc = {{"campaigns", json::array()}};
  for (const auto& r : results) {
    rows.push_back(row_for(r, ""));
    doc["campaigns"].push_back(row_json(r, std::nullopt));
  }
  write_tables(rows, doc, out_dir);
}

void emit_sweep_report(const std::string& parameter, const std::vector<SweepPoint>& points,
                       const fs::path& out_dir) {
  std::vector<std::vector<std::string>> rows;
  json doc = {{"parameter", parameter}, {"campaigns", json::array()}};
  for (const auto& p : points) {
    rows.push_back(row_for(p.result, format_double(p.value)));
    doc["campaigns"].push_back(row_json(p.result, p.value));
  }
  write_tables(rows, doc, out_dir);
  write_file(out_dir / "sweep.svg", render_sweep_svg(parameter, points));
}

std::string render_sweep_svg(const std::string& parameter, const std::vector<SweepPoint>& points) {
  constexpr double W = 480, H = 320, L = 60, R = 20, T = 20, B = 50;
  double lo = 0.0, hi = 1.0;
  if (!points.empty()) {
    lo = hi = points.front().value;
    for (const auto& p : points) {
      lo = std::min(lo, p.value);
      hi = std::max(hi, p.value);
    }
  }
  if (hi == lo) {
    lo -= 0.5;
    hi += 0.5;
  }
  auto px = [&](double v) { return L + (v - lo) / (hi - lo) * (W - L - R); };
  auto py = [&](double asr) { return T + (1.0 - asr) * (H - T - B); };

  std::ostringstream s;
  s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\">\n";
  s << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  s << "<line x1=\"" << L << "\" y1=\"" << H - B << "\" x2=\"" << W - R << "\" y2=\"" << H - B
    << "\" stroke=\"black\"/>\n";
  s << "<line x1=\"" << L << "\" y1=\"" << T << "\" x2=\"" << L << "\" y2=\"" << H - B << "\" stroke=\"black\"/>\n";
  for (double tick : {0.0, 0.5, 1.0}) {
    s << "<text x=\"" << L - 8 << "\" y=\"" << py(tick) + 4 << "\" font-size=\"11\" text-anchor=\"end\">"
      << format_double(tick) << "</text>\n";
  }
  s << "<text x=\"" << (L + W - R) / 2 << "\" y=\"" << H - 12 << "\" font-size=\"12\" text-anchor=\"middle\">"
    << xml_escape(parameter) << "</text>\n";
  s << "<text x=\"16\" y=\"" << (T + H - B) / 2 << "\" font-size=\"12\" transform=\"rotate(-90 16 "
    << (T + H - B) / 2 << ")\" text-anchor=\"middle\">ASR</text>\n";

  std::vector<SweepPoint> sorted = points;
  std::sort(sorted.begin(), sorted.end(), [](const SweepPoint& a, const SweepPoint& b) { return a.value < b.value; });
  if (!sorted.empty()) {
    s << "<polyline fill=\"none\" stroke=\"steelblue\" stroke-width=\"2\" points=\"";
    for (const auto& p : sorted) s << px(p.value) << "," << py(p.result.asr) << " ";
    s << "\"/>\n";
  }
  for (const auto& p : sorted) {
    s << "<circle class=\"point\" cx=\"" << px(p.value) << "\" cy=\"" << py(p.result.asr)
      << "\" r=\"4\" fill=\"steelblue\" data-value=\"" << format_double(p.value) << "\" data-asr=\""
      << format_double(p.result.asr) << "\"/>\n";
    s << "<text x=\"" << px(p.value) << "\" y=\"" << H - B + 16 << "\" font-size=\"11\" text-anchor=\"middle\">"
      << format_double(p.value) << "</text>\n";
  }
  s << "</svg>\n";
  return s.str();
}

std::vector<std::vector<std::string>> read_csv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::vector<std::vector<std::string>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> row;
    std::string field;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
      const char c = line[i];
      if (quoted) {
        if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
          field += '"';
          ++i;
        } else if (c == '"') {
          quoted = false;
        } else {
          field += c;
        }
      } else if (c == '"') {
        quoted = true;
      } else if (c == ',') {
        row.push_back(std::move(field));
        field.clear();
      } else {
        field += c;
      }
    }
    row.push_back(std::move(field));
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace ctrlattack
