#pragma once

#include <string>

#include "ctrlattack/victims.hpp"

namespace ctrlattack::wire {

// Newline-delimited JSON messages exchanged with external victims.
//   request:  {"id", "frame_width", "frame_height", "boxes", "seed", "track_points", "image_ref"}
//   response: {"id", "tracks"} or {"id", "error"}

std::string encode_request(const std::string& id, const GenerationRequest& request);

struct DecodedRequest {
  std::string id;
  GenerationRequest request;
};

/// Throws ProtocolError on malformed input. `id_out` receives the id whenever
/// it could be recovered, so the caller can still address an error response.
DecodedRequest decode_request(const std::string& line, std::string* id_out = nullptr);

std::string encode_tracks(const std::string& id, const ObservedTracks& tracks);
std::string encode_error(const std::string& id, const std::string& message);

struct DecodedResponse {
  std::string id;
  std::optional<ObservedTracks> tracks;
  std::optional<std::string> error;
};

/// Validates schema and track shape (rectangular, finite). Throws ProtocolError.
DecodedResponse decode_response(const std::string& line);

/// Short prefix of a payload for diagnostics.
std::string excerpt(const std::string& payload, std::size_t limit = 200);

}  // namespace ctrlattack::wire
