#pragma once

#include <cstdint>
#include <string>

#include "seqpar/model.hpp"
#include "seqpar/simhost.hpp"

namespace seqpar {

enum class LengthMode { Ratio, Absolute, Full };

const char* to_string(LengthMode m);
LengthMode length_mode_from_string(const std::string& s);

// Everything a run needs, loadable from a JSON file with flag overrides.
// Every field has a default; unknown keys in the file are rejected.
struct RunConfig {
  uint64_t seed = 1;
  ModelConfig model;

  // input
  int frames = 64;
  int query_tokens = 8;
  bool needle = false;
  int needle_frame = 0;
  float needle_gain = 8.0f;

  // parallel
  int hosts = 2;
  LengthMode anchor_mode = LengthMode::Ratio;
  double anchor_value = 1.0 / 64.0;  // ratio of n, or absolute token count
  LengthMode passing_mode = LengthMode::Ratio;
  double passing_value = 1.0 / 128.0;  // ratio of n, absolute count, or Full
  bool zigzag = true;
  SchedulePolicy schedule = SchedulePolicy::Overlapped;
  bool query_self_all_hosts = false;
  int designated_host = -1;
  bool softmax_scores = true;

  // outputs ("" = do not write)
  std::string summary_path;
  std::string trace_path;
  std::string heatmap_path;

  int sequence_length() const;  // n = n_v + n_t
  int video_length() const;     // n_v
  // Resolves anchor/passing modes against the sequence geometry.
  std::pair<int, int> resolve_lengths() const;  // {l_a, l_p}
  SimOptions sim_options() const;
};

RunConfig parse_config(const std::string& json_text);
RunConfig load_config(const std::string& path);
std::string serialize_config(const RunConfig& cfg);

}  // namespace seqpar
