#include "ctrlattack/wire_protocol.hpp"

#include <algorithm>
#include <cmath>

#include <json.hpp>

namespace ctrlattack::wire {

using nlohmann::json;
using nlohmann::ordered_json;

std::string excerpt(const std::string& payload, std::size_t limit) {
  if (payload.size() <= limit) return payload;
  return payload.substr(0, limit) + "...";
}

std::string encode_request(const std::string& id, const GenerationRequest& request) {
  ordered_json doc;
  doc["id"] = id;
  doc["frame_width"] = request.trajectory.frame_width();
  doc["frame_height"] = request.trajectory.frame_height();
  auto boxes = ordered_json::array();
  for (const BoundingBox& b : request.trajectory.boxes()) boxes.push_back({b.x0, b.y0, b.x1, b.y1});
  doc["boxes"] = std::move(boxes);
  doc["seed"] = request.seed;
  doc["track_points"] = request.track_points;
  doc["image_ref"] = request.image_ref ? ordered_json(*request.image_ref) : ordered_json(nullptr);
  return doc.dump();
}

namespace {

json parse_object(const std::string& line) {
  json doc;
  try {
    doc = json::parse(line);
  } catch (const json::parse_error& e) {
    throw ProtocolError(std::string("malformed JSON: ") + e.what(), excerpt(line));
  }
  if (!doc.is_object()) throw ProtocolError("message is not a JSON object", excerpt(line));
  return doc;
}

[[noreturn]] void bad_field(const std::string& field, const std::string& what, const std::string& line) {
  throw ProtocolError("field '" + field + "': " + what, excerpt(line));
}

}  // namespace

DecodedRequest decode_request(const std::string& line, std::string* id_out) {
  const json doc = parse_object(line);
  if (!doc.contains("id") || !doc["id"].is_string()) bad_field("id", "missing or not a string", line);
  const std::string id = doc["id"].get<std::string>();
  if (id_out) *id_out = id;

  static const char* const kFields[] = {"id",   "frame_width",  "frame_height", "boxes",
                                        "seed", "track_points", "image_ref"};
  for (const auto& [key, _] : doc.items()) {
    if (std::find(std::begin(kFields), std::end(kFields), key) == std::end(kFields)) {
      bad_field(key, "unknown field", line);
    }
  }
  for (const char* key : {"frame_width", "frame_height", "track_points"}) {
    if (!doc.contains(key) || !doc[key].is_number_integer()) bad_field(key, "missing or not an integer", line);
  }
  if (!doc.contains("seed") || !doc["seed"].is_number_integer()) bad_field("seed", "missing or not an integer", line);
  std::uint64_t seed = 0;
  if (doc["seed"].is_number_unsigned()) {
    seed = doc["seed"].get<std::uint64_t>();
  } else {
    const auto s = doc["seed"].get<std::int64_t>();
    if (s < 0) bad_field("seed", "must be non-negative", line);
    seed = static_cast<std::uint64_t>(s);
  }
  const auto points = doc["track_points"].get<std::int64_t>();
  if (points < 1) bad_field("track_points", "must be >= 1", line);
  std::optional<std::string> image_ref;

  if (doc.contains("image_ref") && !doc["image_ref"].is_null()) {
    if (!doc["image_ref"].is_string()) bad_field("image_ref", "must be a string or null", line);
    image_ref = doc["image_ref"].get<std::string>();
  }

  if (!doc.contains("boxes") || !doc["boxes"].is_array()) bad_field("boxes", "missing or not an array", line);
  std::vector<BoundingBox> boxes;
  for (std::size_t t = 0; t < doc["boxes"].size(); ++t) {
    const json& b = doc["boxes"][t];
    if (!b.is_array() || b.size() != 4 || !std::all_of(b.begin(), b.end(), [](const json& v) { return v.is_number(); })) {
      bad_field("boxes[" + std::to_string(t) + "]", "expected [x0, y0, x1, y1]", line);
    }
    boxes.push_back({b[0].get<double>(), b[1].get<double>(), b[2].get<double>(), b[3].get<double>()});
  }
  try {
    TrajectoryCondition traj(doc["frame_width"].get<int>(), doc["frame_height"].get<int>(), std::move(boxes));
    return DecodedRequest{id, GenerationRequest{std::move(traj), seed, static_cast<std::size_t>(points), image_ref}};
  } catch (const ValidationError& e) {
    throw ProtocolError(std::string("invalid trajectory: ") + e.what(), excerpt(line));
  }
}

std::string encode_tracks(const std::string& id, const ObservedTracks& tracks) {
  ordered_json doc;
  doc["id"] = id;
  auto frames = ordered_json::array();
  for (std::size_t t = 0; t < tracks.frame_count(); ++t) {
    auto pts = ordered_json::array();
    for (const Vec2& p : tracks.frame(t)) pts.push_back({p.x, p.y});
    frames.push_back(std::move(pts));
  }
  doc["tracks"] = std::move(frames);
  return doc.dump();
}

std::string encode_error(const std::string& id, const std::string& message) {
  ordered_json doc;
  doc["id"] = id;
  doc["error"] = message;
  return doc.dump(-1, ' ', false, json::error_handler_t::replace);
}

DecodedResponse decode_response(const std::string& line) {
  const json doc = parse_object(line);
  if (!doc.contains("id") || !doc["id"].is_string()) bad_field("id", "missing or not a string", line);
  DecodedResponse out;
  out.id = doc["id"].get<std::string>();
  const bool has_tracks = doc.contains("tracks");
  const bool has_error = doc.contains("error");
  if (has_tracks == has_error) throw ProtocolError("response needs exactly one of 'tracks' or 'error'", excerpt(line));
  for (const auto& [key, _] : doc.items()) {
    if (key != "id" && key != "tracks" && key != "error") bad_field(key, "unknown field", line);
  }
  if (has_error) {
    if (!doc["error"].is_string()) bad_field("error", "not a string", line);
    out.error = doc["error"].get<std::string>();
    return out;
  }
  const json& frames = doc["tracks"];
  if (!frames.is_array()) bad_field("tracks", "not an array", line);
  std::vector<std::vector<Vec2>> pts(frames.size());
  for (std::size_t t = 0; t < frames.size(); ++t) {
    if (!frames[t].is_array()) bad_field("tracks[" + std::to_string(t) + "]", "not an array", line);
    for (std::size_t k = 0; k < frames[t].size(); ++k) {
      const json& p = frames[t][k];
      if (!p.is_array() || p.size() != 2 || !p[0].is_number() || !p[1].is_number()) {
        bad_field("tracks[" + std::to_string(t) + "][" + std::to_string(k) + "]", "expected [x, y]", line);
      }
      pts[t].push_back({p[0].get<double>(), p[1].get<double>()});
    }
  }
  try {
    out.tracks = ObservedTracks(pts);
  } catch (const ValidationError& e) {
    throw ProtocolError(std::string("invalid tracks: ") + e.what(), excerpt(line));
  }
  return out;
}

}  // namespace ctrlattack::wire
