#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <algorithm>
#include <sstream>
#include <vector>

#include "doctest.h"
#include "seqpar/model.hpp"
#include "seqpar/simhost.hpp"

using namespace seqpar;

namespace {

SimInputs small_inputs(uint64_t seed, const ModelConfig& cfg, int frames, int n_t) {
  SimInputs in;
  in.video = make_random_video(seed, cfg, frames);
  in.query_tokens = make_random_tokens(seed, cfg, n_t);
  return in;
}

ModelConfig small_cfg() {
  ModelConfig cfg;
  cfg.layers = 2;
  cfg.d = 16;
  cfg.ffn_dim = 32;
  cfg.heads = 2;
  return cfg;
}

bool traces_equal(const EventTrace& a, const EventTrace& b) {
  if (a.events.size() != b.events.size()) return false;
  for (size_t i = 0; i < a.events.size(); ++i) {
    const Event &x = a.events[i], &y = b.events[i];
    if (x.host != y.host || x.seq != y.seq || x.kind != y.kind || x.label != y.label ||
        x.layer != y.layer || x.tag != y.tag) {
      return false;
    }
  }
  return true;
}

}  // namespace

TEST_CASE("same seed gives an identical result including the trace") {
  const ModelConfig cfg = small_cfg();
  const ModelParams params = init_params(3, cfg);
  const SimInputs inputs = small_inputs(3, cfg, 16, 5);
  SimulationResult a = simulate(2, params, inputs, 8, 4);
  SimulationResult b = simulate(2, params, inputs, 8, 4);
  CHECK(a.final_hidden == b.final_hidden);
  CHECK(a.selection_counts == b.selection_counts);
  CHECK(traces_equal(a.trace, b.trace));
  CHECK(a.violations.empty());
  CHECK(validate_trace(a.trace).empty());
}

TEST_CASE("gathered video embeddings equal the single-host encode") {
  const ModelConfig cfg = small_cfg();
  const ModelParams params = init_params(4, cfg);
  const SimInputs inputs = small_inputs(4, cfg, 13, 4);  // uneven frame split
  SimulationResult r = simulate(3, params, inputs, 6, 2);

  std::vector<int> all(13);
  for (int f = 0; f < 13; ++f) all[f] = f;
  CHECK(r.gathered_video == encode_frames(inputs.video, params, all));
}

TEST_CASE("overlapped and serialized schedules are numerically identical") {
  const ModelConfig cfg = small_cfg();
  const ModelParams params = init_params(5, cfg);
  const SimInputs inputs = small_inputs(5, cfg, 16, 5);

  SimOptions overlapped;
  SimOptions serialized;
  serialized.policy = SchedulePolicy::Serialized;
  SimulationResult a = simulate(2, params, inputs, 8, 3, overlapped);
  SimulationResult b = simulate(2, params, inputs, 8, 3, serialized);
  CHECK(a.final_hidden == b.final_hidden);
  CHECK_FALSE(traces_equal(a.trace, b.trace));
  CHECK(validate_trace(b.trace).empty());

  // Overlap means compute runs between issuing and waiting on pass1.
  bool overlap_seen = false;
  int issued = -1, waited = -1, computed = -1;
  for (const Event& e : a.trace.events) {
    if (e.host != 0 || e.layer != 0) continue;
    if (e.kind == EventKind::CommIssued && e.label == "pass1") issued = e.seq;
    if (e.kind == EventKind::CommWaitStart && e.label == "pass1") waited = e.seq;
    if (e.kind == EventKind::ComputeBegin && e.label == "query_attn") computed = e.seq;
  }
  overlap_seen = issued >= 0 && computed > issued && computed < waited;
  CHECK(overlap_seen);
}

TEST_CASE("delivery delays never change the values") {
  const ModelConfig cfg = small_cfg();
  const ModelParams params = init_params(6, cfg);
  const SimInputs inputs = small_inputs(6, cfg, 16, 4);
  SimulationResult base = simulate(2, params, inputs, 8, 3);

  SimOptions delayed;
  delayed.delays = {{1, "pass2", std::chrono::milliseconds(20)},
                    {-1, "qpartial", std::chrono::milliseconds(10)}};
  SimulationResult r = simulate(2, params, inputs, 8, 3, delayed);
  CHECK(r.final_hidden == base.final_hidden);
  CHECK(validate_trace(r.trace).empty());
}

TEST_CASE("single host trace respects causality") {
  const ModelConfig cfg = small_cfg();
  const ModelParams params = init_params(7, cfg);
  const SimInputs inputs = small_inputs(7, cfg, 8, 3);
  SimulationResult r = simulate(1, params, inputs, 4, 2);
  CHECK(validate_trace(r.trace).empty());
  for (const Event& e : r.trace.events) {
    if (e.kind != EventKind::CommCompleted) continue;
    bool issued_before = false;
    for (const Event& f : r.trace.events) {
      if (f.kind == EventKind::CommIssued && f.tag == e.tag &&
          f.global_index < e.global_index) {
        issued_before = true;
      }
    }
    CHECK(issued_before);
  }
}

TEST_CASE("naive mapping still produces a valid run") {
  const ModelConfig cfg = small_cfg();
  const ModelParams params = init_params(8, cfg);
  const SimInputs inputs = small_inputs(8, cfg, 16, 4);
  SimOptions naive;
  naive.zigzag = false;
  SimulationResult r = simulate(2, params, inputs, 8, 3, naive);
  CHECK(r.violations.empty());
  CHECK(validate_trace(r.trace).empty());
  CHECK(r.final_hidden.all_finite());
}

TEST_CASE("validate_trace flags constructed schedule violations") {
  // Minimal single-host, single-layer trace obeying every constraint.
  auto ev = [](int seq, EventKind kind, const char* label, int layer,
               const char* tag) -> Event {
    return {0, seq, kind, label, layer, tag, static_cast<uint64_t>(seq + 1),
            static_cast<uint64_t>(seq)};
  };
  EventTrace good;
  good.events = {
      ev(0, EventKind::CommIssued, "pass1", 0, "pass1.L0"),
      ev(1, EventKind::CommIssued, "pass2", 0, "pass2.L0"),
      ev(2, EventKind::ComputeBegin, "query_attn", 0, ""),
      ev(3, EventKind::ComputeEnd, "query_attn", 0, ""),
      ev(4, EventKind::CommIssued, "qpartial", 0, "qpartial.L0"),
      ev(5, EventKind::CommWaitStart, "pass1", 0, "pass1.L0"),
      ev(6, EventKind::CommCompleted, "pass1", 0, "pass1.L0"),
      ev(7, EventKind::ComputeBegin, "stage1", 0, ""),
      ev(8, EventKind::ComputeEnd, "stage1", 0, ""),
      ev(9, EventKind::CommWaitStart, "pass2", 0, "pass2.L0"),
      ev(10, EventKind::CommCompleted, "pass2", 0, "pass2.L0"),
      ev(11, EventKind::ComputeBegin, "stage2", 0, ""),
      ev(12, EventKind::ComputeEnd, "stage2", 0, ""),
      ev(13, EventKind::CommWaitStart, "qpartial", 0, "qpartial.L0"),
      ev(14, EventKind::CommCompleted, "qpartial", 0, "qpartial.L0"),
      ev(15, EventKind::ComputeBegin, "merge", 0, ""),
      ev(16, EventKind::ComputeEnd, "merge", 0, ""),
  };
  CHECK(validate_trace(good).empty());

  // Merge begins before the qpartial gather completed.
  EventTrace merge_early = good;
  std::swap(merge_early.events[14].seq, merge_early.events[15].seq);
  CHECK_FALSE(validate_trace(merge_early).empty());

  // Stage2 begins before the pass2 wait started.
  EventTrace stage2_early = good;
  std::swap(stage2_early.events[9].seq, stage2_early.events[11].seq);
  CHECK_FALSE(validate_trace(stage2_early).empty());

  // Wait without a prior issue of the same tag.
  EventTrace no_issue = good;
  no_issue.events.erase(no_issue.events.begin());
  CHECK_FALSE(validate_trace(no_issue).empty());
}

TEST_CASE("trace writes and reads back identically") {
  const ModelConfig cfg = small_cfg();
  const ModelParams params = init_params(9, cfg);
  const SimInputs inputs = small_inputs(9, cfg, 8, 3);
  SimulationResult r = simulate(2, params, inputs, 4, 2);

  std::stringstream ss;
  write_trace(r.trace, ss);
  EventTrace back = read_trace(ss);
  CHECK(traces_equal(r.trace, back));
  CHECK(validate_trace(back).empty());
}

TEST_CASE("needle helper rewrites exactly one frame's rows") {
  const ModelConfig cfg = small_cfg();
  const ModelParams params = init_params(10, cfg);
  SimInputs inputs = small_inputs(10, cfg, 8, 3);

  std::vector<int> all = {0, 1, 2, 3, 4, 5, 6, 7};
  Matrix e_v = encode_frames(inputs.video, params, all);
  Matrix before = e_v;
  Matrix e_q = embed_text(inputs.query_tokens, params);
  apply_needle(e_v, e_q, cfg, 3, 8.0f);
  const int tpf = cfg.tokens_per_frame();
  for (int r = 0; r < e_v.rows; ++r) {
    const bool in_needle = r >= 3 * tpf && r < 4 * tpf;
    CHECK((e_v.slice_rows(r, r + 1) == before.slice_rows(r, r + 1)) == !in_needle);
  }
  CHECK_THROWS(apply_needle(e_v, e_q, cfg, 8, 8.0f));
}
