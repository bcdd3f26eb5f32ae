#include "ctrlattack/trajectory.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <random>
#include <sstream>

#include <json.hpp>

namespace ctrlattack {

bool BoundingBox::well_formed() const {
  return std::isfinite(x0) && std::isfinite(y0) && std::isfinite(x1) && std::isfinite(y1) && x0 < x1 && y0 < y1;
}

TrajectoryCondition::TrajectoryCondition(int frame_width, int frame_height, std::vector<BoundingBox> boxes)
    : frame_width_(frame_width), frame_height_(frame_height), boxes_(std::move(boxes)) {
  if (frame_width_ < 1 || frame_height_ < 1) throw ValidationError("frame dimensions must be positive");
  if (boxes_.size() < 2) {
    throw ValidationError("trajectory needs at least 2 frames, got " + std::to_string(boxes_.size()));
  }
  for (std::size_t t = 0; t < boxes_.size(); ++t) {
    const BoundingBox& b = boxes_[t];
    if (!b.well_formed()) {
      throw ValidationError("frame " + std::to_string(t) + ": box must satisfy x0 < x1, y0 < y1 with finite values");
    }
    if (b.x0 < 0.0 || b.y0 < 0.0 || b.x1 > frame_width_ || b.y1 > frame_height_) {
      throw ValidationError("frame " + std::to_string(t) + ": box lies outside the frame");
    }
  }
}

std::vector<Vec2> centers(const TrajectoryCondition& traj) {
  std::vector<Vec2> out;
  out.reserve(traj.frame_count());
  for (const BoundingBox& b : traj.boxes()) out.push_back(b.center());
  return out;
}

VelocityTrack reference_velocities(const TrajectoryCondition& traj) {
  if (traj.frame_count() < 2) throw InvalidArgument("reference velocities need at least 2 frames");
  const auto c = centers(traj);
  VelocityTrack v(c.size() - 1, 2);
  for (std::size_t t = 0; t + 1 < c.size(); ++t) {
    v(t, 0) = c[t + 1].x - c[t].x;
    v(t, 1) = c[t + 1].y - c[t].y;
  }
  return v;
}

namespace {

// Translate [lo, hi] by `shift` (already budget-clamped) without leaving [0, extent].
std::pair<double, double> shift_inside(double lo, double hi, double shift, double extent) {
  const double size = hi - lo;
  shift = std::clamp(shift, -lo, extent - hi);
  double nlo = lo + shift;
  double nhi = hi + shift;
  if (nhi > extent) {
    nhi = extent;
    nlo = extent - size;
  }
  if (nlo < 0.0) {
    nlo = 0.0;
    nhi = size;
  }
  return {nlo, nhi};
}

}  // namespace

TrajectoryCondition apply_delta(const TrajectoryCondition& traj, const DisplacementTrack& displacements,
                                const PerturbationBudget& budget) {
  if (displacements.dim() != 2) {
    throw InvalidArgument("apply_delta needs a two-axis displacement track, got " +
                          std::to_string(displacements.dim()) + " axes");
  }
  if (displacements.frame_count() != traj.frame_count()) {
    throw ShapeError("displacement track has " + std::to_string(displacements.frame_count()) +
                     " frames, trajectory has " + std::to_string(traj.frame_count()));
  }
  const double eps = budget.eps_max;
  std::vector<BoundingBox> boxes;
  boxes.reserve(traj.frame_count());
  for (std::size_t t = 0; t < traj.frame_count(); ++t) {
    const BoundingBox& b = traj.box(t);
    const double dx = displacements(t, 0);
    const double dy = displacements(t, 1);
    if (dx == 0.0 && dy == 0.0) {
      boxes.push_back(b);
      continue;
    }
    const auto [x0, x1] = shift_inside(b.x0, b.x1, std::clamp(dx, -eps, eps), traj.frame_width());
    const auto [y0, y1] = shift_inside(b.y0, b.y1, std::clamp(dy, -eps, eps), traj.frame_height());
    boxes.push_back({x0, y0, x1, y1});
  }
  return TrajectoryCondition(traj.frame_width(), traj.frame_height(), std::move(boxes));
}

namespace {

std::size_t line_of(const std::string& text, std::size_t byte) {
  byte = std::min(byte, text.size());
  return 1 + static_cast<std::size_t>(std::count(text.begin(), text.begin() + static_cast<long>(byte), '\n'));
}

int frame_dim(const nlohmann::json& doc, const char* key) {
  if (!doc.contains(key)) throw ParseError(key, "missing field");
  const auto& v = doc.at(key);
  if (!v.is_number_integer()) throw ParseError(key, "expected an integer");
  return v.get<int>();
}

}  // namespace

TrajectoryCondition parse_trajectory(const std::string& text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError("line " + std::to_string(line_of(text, e.byte)), e.what());
  }
  if (!doc.is_object()) throw ParseError("document", "expected a JSON object");
  for (const auto& [key, _] : doc.items()) {
    if (key != "frame_width" && key != "frame_height" && key != "boxes") throw ParseError(key, "unknown field");
  }
  const int width = frame_dim(doc, "frame_width");
  const int height = frame_dim(doc, "frame_height");
  if (!doc.contains("boxes")) throw ParseError("boxes", "missing field");
  const auto& arr = doc.at("boxes");
  if (!arr.is_array()) throw ParseError("boxes", "expected an array");
  std::vector<BoundingBox> boxes;
  boxes.reserve(arr.size());
  for (std::size_t t = 0; t < arr.size(); ++t) {
    const auto& entry = arr[t];
    const std::string where = "boxes[" + std::to_string(t) + "]";
    if (!entry.is_array() || entry.size() != 4) throw ParseError(where, "expected [x0, y0, x1, y1]");
    double v[4];
    for (std::size_t i = 0; i < 4; ++i) {
      if (!entry[i].is_number()) throw ParseError(where + "[" + std::to_string(i) + "]", "expected a number");
      v[i] = entry[i].get<double>();
    }
    boxes.push_back({v[0], v[1], v[2], v[3]});
  }
  return TrajectoryCondition(width, height, std::move(boxes));
}

std::string format_trajectory(const TrajectoryCondition& traj) {
  nlohmann::ordered_json doc;
  doc["frame_width"] = traj.frame_width();
  doc["frame_height"] = traj.frame_height();
  auto boxes = nlohmann::ordered_json::array();
  for (const BoundingBox& b : traj.boxes()) boxes.push_back({b.x0, b.y0, b.x1, b.y1});
  doc["boxes"] = std::move(boxes);
  return doc.dump();
}

TrajectoryCondition load_trajectory(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open trajectory file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_trajectory(ss.str());
}

void save_trajectory(const TrajectoryCondition& traj, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write trajectory file " + path.string());
  out << format_trajectory(traj) << '\n';
  if (!out) throw std::runtime_error("failed writing trajectory file " + path.string());
}

MotionFamily parse_motion_family(const std::string& name) {
  if (name == "linear") return MotionFamily::linear;
  if (name == "arc") return MotionFamily::arc;
  if (name == "sinusoid") return MotionFamily::sinusoid;
  throw InvalidArgument("unknown motion family '" + name + "' (expected linear, arc or sinusoid)");
}

std::string to_string(MotionFamily family) {
  switch (family) {
    case MotionFamily::linear: return "linear";
    case MotionFamily::arc: return "arc";
    case MotionFamily::sinusoid: return "sinusoid";
  }
  return "unknown";
}

namespace {

// Center path relative to its start, one entry per frame.
std::vector<Vec2> sample_path(MotionFamily family, std::size_t frames, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  auto uniform = [&](double lo, double hi) { return lo + (hi - lo) * unit(rng); };
  const double speed = uniform(1.0, 6.0);
  const double heading = uniform(0.0, 2.0 * std::numbers::pi);
  const Vec2 dir{std::cos(heading), std::sin(heading)};
  std::vector<Vec2> path(frames);
  switch (family) {
    case MotionFamily::linear:
      for (std::size_t t = 0; t < frames; ++t) path[t] = (speed * static_cast<double>(t)) * dir;
      break;
    case MotionFamily::arc: {
      const double radius = uniform(40.0, 90.0);
      const double turn = (unit(rng) < 0.5 ? -1.0 : 1.0) * speed / radius;
      for (std::size_t t = 0; t < frames; ++t) {
        const double a = heading + turn * static_cast<double>(t);
        path[t] = {radius * (std::cos(a) - std::cos(heading)), radius * (std::sin(a) - std::sin(heading))};
      }
      break;
    }
    case MotionFamily::sinusoid: {
      // |lateral step| <= amplitude * freq <= 3.6, so total step stays under 10 px.
      const double amplitude = uniform(3.0, 6.0);
      const double freq = uniform(0.3, 0.6);
      const Vec2 normal{-dir.y, dir.x};
      for (std::size_t t = 0; t < frames; ++t) {
        const double tt = static_cast<double>(t);
        path[t] = (speed * tt) * dir + (amplitude * std::sin(freq * tt)) * normal;
      }
      break;
    }
  }
  return path;
}

}  // namespace

std::vector<TrajectoryCondition> generate_instances(const InstanceSpec& spec) {
  if (spec.count < 1) throw InvalidArgument("instance count must be >= 1");
  if (spec.frame_count < 2) throw InvalidArgument("frame_count must be >= 2");
  std::mt19937_64 rng(spec.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<TrajectoryCondition> out;
  out.reserve(spec.count);
  for (std::size_t n = 0; n < spec.count; ++n) {
    const double bw = 24.0 + 32.0 * unit(rng);
    const double bh = 24.0 + 32.0 * unit(rng);
    const auto path = sample_path(spec.family, spec.frame_count, rng);
    Vec2 lo{path[0]}, hi{path[0]};
    for (const Vec2& p : path) {
      lo = {std::min(lo.x, p.x), std::min(lo.y, p.y)};
      hi = {std::max(hi.x, p.x), std::max(hi.y, p.y)};
    }
    // Range of start offsets keeping every box `margin` away from the frame edges.
    const double min_x = spec.margin + 0.5 * bw - lo.x;
    const double max_x = spec.frame_width - spec.margin - 0.5 * bw - hi.x;
    const double min_y = spec.margin + 0.5 * bh - lo.y;
    const double max_y = spec.frame_height - spec.margin - 0.5 * bh - hi.y;
    if (min_x > max_x || min_y > max_y) {
      throw InvalidArgument("frame " + std::to_string(spec.frame_width) + "x" + std::to_string(spec.frame_height) +
                            " is too small for the requested motion and margin");
    }
    const Vec2 origin{min_x + (max_x - min_x) * unit(rng), min_y + (max_y - min_y) * unit(rng)};
    std::vector<BoundingBox> boxes;
    boxes.reserve(path.size());
    for (const Vec2& p : path) {
      const Vec2 c = origin + p;
      boxes.push_back({c.x - 0.5 * bw, c.y - 0.5 * bh, c.x + 0.5 * bw, c.y + 0.5 * bh});
    }
    out.emplace_back(spec.frame_width, spec.frame_height, std::move(boxes));
  }
  return out;
}

}  // namespace ctrlattack
