#pragma once

#include <chrono>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "seqpar/approx.hpp"
#include "seqpar/costs.hpp"
#include "seqpar/matrix.hpp"
#include "seqpar/model.hpp"
#include "seqpar/partition.hpp"

namespace seqpar {

enum class EventKind { CommIssued, CommWaitStart, CommCompleted, ComputeBegin, ComputeEnd };

const char* to_string(EventKind kind);
EventKind event_kind_from_string(const std::string& s);

// One entry of the happens-before log. `clock` is a logical (Lamport)
// timestamp: it advances per event on a host and jumps past the issuing
// clocks of all contributors when a gather completes, so sorting by
// (clock, host, seq) yields a deterministic global interleaving that
// respects causality regardless of OS scheduling.
struct Event {
  int host = 0;
  int seq = 0;  // per-host, strictly increasing
  EventKind kind = EventKind::ComputeBegin;
  std::string label;
  int layer = -1;
  std::string tag;
  uint64_t clock = 0;
  uint64_t global_index = 0;
};

struct EventTrace {
  std::vector<Event> events;  // global order
};

// Empty iff every happens-before constraint of the overlap schedule holds.
std::vector<std::string> validate_trace(const EventTrace& trace);

void write_trace(const EventTrace& trace, std::ostream& os);
EventTrace read_trace(std::istream& is);

enum class SchedulePolicy { Overlapped, Serialized };

// Delivery delay injected into one host's contribution to one gather tag.
struct DelayInjection {
  int host = -1;          // -1 matches every host
  std::string tag_prefix; // e.g. "pass2"
  std::chrono::milliseconds amount{0};
};

struct SimOptions {
  SchedulePolicy policy = SchedulePolicy::Overlapped;
  bool zigzag = true;
  bool query_self_all_hosts = false;  // replicate query keys on every host
  int designated_host = -1;           // host carrying query self-keys; -1 = last
  bool softmax_scores = true;
  std::chrono::milliseconds watchdog{30000};
  std::vector<DelayInjection> delays;
};

struct SimInputs {
  PatchifiedVideo video;
  std::vector<int> query_tokens;
  bool needle = false;
  int needle_frame = 0;
  float needle_gain = 8.0f;
};

struct SelectionRecord {
  int layer = 0;
  int vhost = 0;
  std::vector<float> scores;          // per-key, block-local
  std::vector<int> selected_global;   // global token indices
};

struct SimulationResult {
  BlockPlan plan;
  HostTopology topo;
  int layers = 0;
  Matrix final_hidden;    // pad rows dropped, n x d
  Matrix gathered_video;  // E_v after the encode gather (needle applied)
  Matrix embedded_query;
  EventTrace trace;
  std::vector<CostCounters> counters;       // per physical host
  std::vector<uint64_t> selection_counts;   // per video token index
  std::vector<SelectionRecord> selections;  // every per-layer scoring event
  std::vector<std::string> violations;      // structural audit failures
  uint64_t comm_payload_bytes = 0;
  double wall_seconds = 0.0;
};

// Runs the full distributed prefill on `hosts` worker threads: frame-parallel
// encode, gather, context split, and the per-layer two-stage approximate
// attention schedule. Deterministic for a fixed seed and configuration.
SimulationResult simulate(int hosts, const ModelParams& params, const SimInputs& inputs, int l_a,
                          int l_p, const SimOptions& options = {});

// Full embedded sequence [E_v; E_Q] with the needle transform applied; the
// dense oracle consumes exactly this.
Matrix embedded_sequence(const ModelParams& params, const SimInputs& inputs);

// Plants the needle: rows of the chosen frame are replaced by a fixed
// high-gain pattern along the mean query-embedding direction.
void apply_needle(Matrix& e_v, const Matrix& e_q, const ModelConfig& cfg, int needle_frame,
                  float gain);

}  // namespace seqpar
