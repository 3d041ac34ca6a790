#include "seqpar/config.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace seqpar {

using nlohmann::json;

const char* to_string(LengthMode m) {
  switch (m) {
    case LengthMode::Ratio: return "ratio";
    case LengthMode::Absolute: return "absolute";
    case LengthMode::Full: return "full";
  }
  return "unknown";
}

LengthMode length_mode_from_string(const std::string& s) {
  if (s == "ratio") return LengthMode::Ratio;
  if (s == "absolute") return LengthMode::Absolute;
  if (s == "full") return LengthMode::Full;
  throw std::invalid_argument("unknown length mode: " + s);
}

int RunConfig::video_length() const { return frames * model.tokens_per_frame(); }

int RunConfig::sequence_length() const { return video_length() + query_tokens; }

std::pair<int, int> RunConfig::resolve_lengths() const {
  const int n = sequence_length();
  int l_a = 0;
  switch (anchor_mode) {
    case LengthMode::Ratio: l_a = static_cast<int>(n * anchor_value); break;
    case LengthMode::Absolute: l_a = static_cast<int>(anchor_value); break;
    case LengthMode::Full:
      throw std::invalid_argument("anchor mode 'full' is not meaningful");
  }
  // Block length implied by the split geometry.
  const int vh = 2 * hosts;
  const int remainder = video_length() - l_a;
  if (remainder <= 0) throw std::invalid_argument("anchor consumes the whole context");
  const int l_b = (remainder + (vh - remainder % vh) % vh) / vh;
  int l_p = 0;
  switch (passing_mode) {
    case LengthMode::Ratio: l_p = static_cast<int>(n * passing_value); break;
    case LengthMode::Absolute: l_p = static_cast<int>(passing_value); break;
    case LengthMode::Full: l_p = l_b; break;
  }
  l_p = std::clamp(l_p, 0, l_b);
  return {l_a, l_p};
}

SimOptions RunConfig::sim_options() const {
  SimOptions opt;
  opt.policy = schedule;
  opt.zigzag = zigzag;
  opt.query_self_all_hosts = query_self_all_hosts;
  opt.designated_host = designated_host;
  opt.softmax_scores = softmax_scores;
  return opt;
}

namespace {

void reject_unknown(const json& j, std::initializer_list<const char*> allowed,
                    const std::string& where) {
  for (const auto& [key, value] : j.items()) {
    if (std::find_if(allowed.begin(), allowed.end(),
                     [&](const char* a) { return key == a; }) == allowed.end()) {
      throw std::invalid_argument("unknown config key '" + key + "' in " + where);
    }
  }
}

template <typename T>
void get_if_present(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

}  // namespace

RunConfig parse_config(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw std::invalid_argument(std::string("config parse error: ") + e.what());
  }
  RunConfig c;
  reject_unknown(j, {"seed", "model", "input", "parallel", "outputs"}, "top level");
  get_if_present(j, "seed", c.seed);
  if (j.contains("model")) {
    const json& m = j.at("model");
    reject_unknown(m,
                   {"layers", "d", "ffn_dim", "heads", "vocab", "d_v", "patch_h", "patch_w",
                    "pool", "norm"},
                   "model");
    get_if_present(m, "layers", c.model.layers);
    get_if_present(m, "d", c.model.d);
    get_if_present(m, "ffn_dim", c.model.ffn_dim);
    get_if_present(m, "heads", c.model.heads);
    get_if_present(m, "vocab", c.model.vocab);
    get_if_present(m, "d_v", c.model.d_v);
    get_if_present(m, "patch_h", c.model.patch_h);
    get_if_present(m, "patch_w", c.model.patch_w);
    get_if_present(m, "pool", c.model.pool);
    get_if_present(m, "norm", c.model.norm);
  }
  if (j.contains("input")) {
    const json& i = j.at("input");
    reject_unknown(i, {"frames", "query_tokens", "needle", "needle_frame", "needle_gain"},
                   "input");
    get_if_present(i, "frames", c.frames);
    get_if_present(i, "query_tokens", c.query_tokens);
    get_if_present(i, "needle", c.needle);
    get_if_present(i, "needle_frame", c.needle_frame);
    get_if_present(i, "needle_gain", c.needle_gain);
  }
  if (j.contains("parallel")) {
    const json& p = j.at("parallel");
    reject_unknown(p,
                   {"hosts", "anchor_mode", "anchor_value", "passing_mode", "passing_value",
                    "zigzag", "schedule", "query_self_all_hosts", "designated_host",
                    "softmax_scores"},
                   "parallel");
    get_if_present(p, "hosts", c.hosts);
    if (p.contains("anchor_mode")) {
      c.anchor_mode = length_mode_from_string(p.at("anchor_mode").get<std::string>());
    }
    get_if_present(p, "anchor_value", c.anchor_value);
    if (p.contains("passing_mode")) {
      c.passing_mode = length_mode_from_string(p.at("passing_mode").get<std::string>());
    }
    get_if_present(p, "passing_value", c.passing_value);
    get_if_present(p, "zigzag", c.zigzag);
    if (p.contains("schedule")) {
      const std::string s = p.at("schedule").get<std::string>();
      if (s == "overlapped") {
        c.schedule = SchedulePolicy::Overlapped;
      } else if (s == "serialized") {
        c.schedule = SchedulePolicy::Serialized;
      } else {
        throw std::invalid_argument("unknown schedule: " + s);
      }
    }
    get_if_present(p, "query_self_all_hosts", c.query_self_all_hosts);
    get_if_present(p, "designated_host", c.designated_host);
    get_if_present(p, "softmax_scores", c.softmax_scores);
  }
  if (j.contains("outputs")) {
    const json& o = j.at("outputs");
    reject_unknown(o, {"summary", "trace", "heatmap"}, "outputs");
    get_if_present(o, "summary", c.summary_path);
    get_if_present(o, "trace", c.trace_path);
    get_if_present(o, "heatmap", c.heatmap_path);
  }
  return c;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open config file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::string serialize_config(const RunConfig& c) {
  json j;
  j["seed"] = c.seed;
  j["model"] = {{"layers", c.model.layers}, {"d", c.model.d},
                {"ffn_dim", c.model.ffn_dim}, {"heads", c.model.heads},
                {"vocab", c.model.vocab},   {"d_v", c.model.d_v},
                {"patch_h", c.model.patch_h}, {"patch_w", c.model.patch_w},
                {"pool", c.model.pool},     {"norm", c.model.norm}};
  j["input"] = {{"frames", c.frames},
                {"query_tokens", c.query_tokens},
                {"needle", c.needle},
                {"needle_frame", c.needle_frame},
                {"needle_gain", c.needle_gain}};
  j["parallel"] = {{"hosts", c.hosts},
                   {"anchor_mode", to_string(c.anchor_mode)},
                   {"anchor_value", c.anchor_value},
                   {"passing_mode", to_string(c.passing_mode)},
                   {"passing_value", c.passing_value},
                   {"zigzag", c.zigzag},
                   {"schedule",
                    c.schedule == SchedulePolicy::Overlapped ? "overlapped" : "serialized"},
                   {"query_self_all_hosts", c.query_self_all_hosts},
                   {"designated_host", c.designated_host},
                   {"softmax_scores", c.softmax_scores}};
  j["outputs"] = {
      {"summary", c.summary_path}, {"trace", c.trace_path}, {"heatmap", c.heatmap_path}};
  return j.dump(2);
}

}  // namespace seqpar
