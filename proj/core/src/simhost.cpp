#include "seqpar/simhost.hpp"

#include <algorithm>
#include <cmath>
#include <condition_variable>
#include <istream>
#include <map>
#include <mutex>
#include <ostream>
#include <stdexcept>
#include <thread>
#include <tuple>
#include <variant>

#include "json.hpp"

namespace seqpar {

const char* to_string(EventKind kind) {
  switch (kind) {
    case EventKind::CommIssued: return "comm_issued";
    case EventKind::CommWaitStart: return "comm_wait_start";
    case EventKind::CommCompleted: return "comm_completed";
    case EventKind::ComputeBegin: return "compute_begin";
    case EventKind::ComputeEnd: return "compute_end";
  }
  return "unknown";
}

EventKind event_kind_from_string(const std::string& s) {
  if (s == "comm_issued") return EventKind::CommIssued;
  if (s == "comm_wait_start") return EventKind::CommWaitStart;
  if (s == "comm_completed") return EventKind::CommCompleted;
  if (s == "compute_begin") return EventKind::ComputeBegin;
  if (s == "compute_end") return EventKind::ComputeEnd;
  throw std::invalid_argument("unknown event kind: " + s);
}

namespace {

struct QueryPartialPayload {
  Matrix out;
  Matrix lse;
  std::vector<int> keys;
};

using GatherPayload = std::variant<Matrix, PassingBlock, QueryPartialPayload>;

uint64_t payload_bytes(const GatherPayload& p) {
  if (const auto* m = std::get_if<Matrix>(&p)) {
    return m->data.size() * sizeof(float);
  }
  if (const auto* b = std::get_if<PassingBlock>(&p)) {
    return (b->k.data.size() + b->v.data.size()) * sizeof(float) +
           b->indices.size() * sizeof(int32_t);
  }
  const auto& q = std::get<QueryPartialPayload>(p);
  return (q.out.data.size() + q.lse.data.size()) * sizeof(float);
}

// Ordered AllGather over an in-process mailbox. Hosts must issue the same
// tag sequence; payload order in the result is fixed by physical host index.
class GatherFabric {
 public:
  explicit GatherFabric(int hosts, std::vector<DelayInjection> delays,
                        std::chrono::milliseconds watchdog)
      : hosts_(hosts), delays_(std::move(delays)), watchdog_(watchdog), next_round_(hosts, 0) {}

  struct Handle {
    int round = -1;
  };

  Handle issue(int host, const std::string& tag, GatherPayload payload, uint64_t clock) {
    std::unique_lock lock(mu_);
    check_error();
    const int round = next_round_[host]++;
    if (static_cast<int>(rounds_.size()) <= round) rounds_.resize(round + 1);
    Round& r = rounds_[round];
    if (r.arrived == 0 && r.tag.empty()) {
      r.tag = tag;
      r.slots.resize(hosts_);
      r.clocks.assign(hosts_, 0);
      r.release.assign(hosts_, std::chrono::steady_clock::time_point{});
    } else if (r.tag != tag) {
      error_ = "gather tag mismatch in round " + std::to_string(round) + ": '" + r.tag +
               "' vs '" + tag + "' from host " + std::to_string(host);
      cv_.notify_all();
      throw std::runtime_error(error_);
    }
    bytes_ += payload_bytes(payload);
    r.slots[host] = std::move(payload);
    r.clocks[host] = clock;
    r.release[host] = std::chrono::steady_clock::now() + delay_for(host, tag);
    ++r.arrived;
    cv_.notify_all();
    return Handle{round};
  }

  // Blocks until every contribution arrived and its injected delivery delay
  // elapsed. Returns payloads ordered by host index plus the max issuing
  // clock for the Lamport update.
  std::pair<std::vector<GatherPayload>, uint64_t> wait(Handle handle) {
    std::unique_lock lock(mu_);
    const auto deadline = std::chrono::steady_clock::now() + watchdog_;
    while (true) {
      check_error();
      if (handle.round < static_cast<int>(rounds_.size()) &&
          rounds_[handle.round].arrived == hosts_) {
        break;
      }
      if (cv_.wait_until(lock, deadline) == std::cv_status::timeout) {
        error_ = "watchdog timeout waiting for gather round " + std::to_string(handle.round);
        cv_.notify_all();
        throw std::runtime_error(error_);
      }
    }
    Round& r = rounds_[handle.round];
    auto latest = *std::max_element(r.release.begin(), r.release.end());
    uint64_t clock = *std::max_element(r.clocks.begin(), r.clocks.end());
    std::vector<GatherPayload> out = r.slots;
    lock.unlock();
    std::this_thread::sleep_until(latest);
    return {std::move(out), clock};
  }

  void fail(const std::string& msg) {
    std::lock_guard lock(mu_);
    if (error_.empty()) error_ = msg;
    cv_.notify_all();
  }

  uint64_t bytes() const { return bytes_; }

 private:
  void check_error() const {
    if (!error_.empty()) throw std::runtime_error(error_);
  }

  std::chrono::milliseconds delay_for(int host, const std::string& tag) const {
    std::chrono::milliseconds total{0};
    for (const DelayInjection& d : delays_) {
      if (d.host >= 0 && d.host != host) continue;
      if (tag.rfind(d.tag_prefix, 0) != 0) continue;
      total += d.amount;
    }
    return total;
  }

  struct Round {
    std::string tag;
    int arrived = 0;
    std::vector<GatherPayload> slots;
    std::vector<uint64_t> clocks;
    std::vector<std::chrono::steady_clock::time_point> release;
  };

  const int hosts_;
  const std::vector<DelayInjection> delays_;
  const std::chrono::milliseconds watchdog_;
  std::mutex mu_;
  std::condition_variable cv_;
  std::vector<Round> rounds_;
  std::vector<int> next_round_;
  std::string error_;
  uint64_t bytes_ = 0;
};

struct HostRecorder {
  int host = 0;
  uint64_t clock = 0;
  int seq = 0;
  std::vector<Event> events;

  void record(EventKind kind, const std::string& label, int layer, const std::string& tag,
              uint64_t merge_clock = 0) {
    clock = std::max(clock, merge_clock) + 1;
    events.push_back({host, seq++, kind, label, layer, tag, clock, 0});
  }
};

struct HostOutput {
  Matrix anchor, lo, hi, query;
  std::vector<SelectionRecord> selections;
  CostCounters counters;
  std::vector<Event> events;
  Matrix e_v;
  Matrix e_q;
  std::vector<std::vector<std::vector<int>>> qkeys;  // [layer][host] attended key indices
  std::string error;
};

struct GroupQkv {
  Matrix q, k, v;
};

GroupQkv project(const Matrix& x, const LayerWeights& w, bool norm) {
  const Matrix xn = norm ? layer_norm(x, w.g1) : x;
  return {matmul(xn, w.wq), matmul(xn, w.wk), matmul(xn, w.wv)};
}

// Output projection + residual + feed-forward half of a layer.
void finish_group(Matrix& x, const Matrix& attn_out, const LayerWeights& w, bool norm) {
  add_inplace(x, matmul(attn_out, w.wo));
  const Matrix f_in = norm ? layer_norm(x, w.g2) : x;
  Matrix f = matmul(relu(matmul(f_in, w.w1)), w.w2);
  add_inplace(x, f);
}

ScoreVector score_block(const Matrix& q_qr, const Matrix& k_block, int heads,
                        const std::vector<uint8_t>* pad, int source, bool softmax_scores,
                        CostCounters* counters) {
  const int dh = q_qr.cols / heads;
  const float scale = 1.0f / std::sqrt(static_cast<float>(dh));
  ScoreVector total;
  total.source = source;
  total.scores.assign(k_block.rows, 0.0f);
  for (int h = 0; h < heads; ++h) {
    Matrix qh = q_qr.slice_cols(h * dh, (h + 1) * dh);
    Matrix kh = k_block.slice_cols(h * dh, (h + 1) * dh);
    ScoreVector part = score_context(qh, kh, scale, pad, source, softmax_scores, counters);
    for (size_t j = 0; j < total.scores.size(); ++j) total.scores[j] += part.scores[j];
  }
  return total;
}

}  // namespace

void apply_needle(Matrix& e_v, const Matrix& e_q, const ModelConfig& cfg, int needle_frame,
                  float gain) {
  const int per_frame = cfg.tokens_per_frame();
  const int r0 = needle_frame * per_frame;
  if (r0 < 0 || r0 + per_frame > e_v.rows) {
    throw std::out_of_range("apply_needle: needle frame out of range");
  }
  std::vector<double> dir(cfg.d, 0.0);
  for (int r = 0; r < e_q.rows; ++r) {
    for (int c = 0; c < cfg.d; ++c) dir[c] += e_q.at(r, c);
  }
  double norm = 0.0;
  for (double v : dir) norm += v * v;
  norm = std::sqrt(norm);
  if (norm == 0.0) norm = 1.0;
  // Alternating sign guarantees that for every query row one needle key has
  // a positive (selected-toward) logit regardless of the random projections;
  // distinct amplitudes keep the softmax weight from splitting across
  // identical keys.
  for (int r = r0; r < r0 + per_frame; ++r) {
    const int local = r - r0;
    const float amp = gain * (1.0f + static_cast<float>(local) / per_frame) *
                      (local % 2 == 0 ? 1.0f : -1.0f);
    for (int c = 0; c < cfg.d; ++c) {
      e_v.at(r, c) = amp * static_cast<float>(dir[c] / norm);
    }
  }
}

Matrix embedded_sequence(const ModelParams& params, const SimInputs& inputs) {
  std::vector<int> all(inputs.video.frames);
  for (int f = 0; f < inputs.video.frames; ++f) all[f] = f;
  Matrix e_v = encode_frames(inputs.video, params, all);
  Matrix e_q = embed_text(inputs.query_tokens, params);
  if (inputs.needle) {
    apply_needle(e_v, e_q, params.cfg, inputs.needle_frame, inputs.needle_gain);
  }
  const Matrix* parts[] = {&e_v, &e_q};
  return concat_rows(parts);
}

namespace {

void run_host(int h, int hosts, const ModelParams& params, const SimInputs& inputs, int l_a,
              int l_p, const SimOptions& opt, const HostTopology& topo, GatherFabric& fabric,
              HostOutput& out) {
  const ModelConfig& cfg = params.cfg;
  const bool serialized = opt.policy == SchedulePolicy::Serialized;
  const int designated = opt.designated_host < 0 ? hosts - 1 : opt.designated_host;
  HostRecorder rec;
  rec.host = h;

  // --- frame-parallel encode ---
  rec.record(EventKind::ComputeBegin, "encode", -1, "");
  const std::vector<int> frame_counts = frame_partition(inputs.video.frames, hosts);
  int first = 0;
  for (int g = 0; g < h; ++g) first += frame_counts[g];
  std::vector<int> mine(frame_counts[h]);
  for (int i = 0; i < frame_counts[h]; ++i) mine[i] = first + i;
  Matrix enc = encode_frames(inputs.video, params, mine);
  Matrix e_q = embed_text(inputs.query_tokens, params);
  rec.record(EventKind::ComputeEnd, "encode", -1, "");

  rec.record(EventKind::CommIssued, "encode", -1, "encode");
  auto enc_handle = fabric.issue(h, "encode", std::move(enc), rec.clock);
  rec.record(EventKind::CommWaitStart, "encode", -1, "encode");
  auto [enc_parts, enc_clock] = fabric.wait(enc_handle);
  rec.record(EventKind::CommCompleted, "encode", -1, "encode", enc_clock);

  std::vector<const Matrix*> enc_ptrs;
  for (const GatherPayload& p : enc_parts) enc_ptrs.push_back(&std::get<Matrix>(p));
  Matrix e_v = concat_rows(enc_ptrs);
  if (inputs.needle) apply_needle(e_v, e_q, cfg, inputs.needle_frame, inputs.needle_gain);

  auto [plan, split] = split_context(e_v, e_q, hosts, l_a, l_p);
  auto [v_lo, v_hi] = topo.virtual_pair(h);
  const auto aslice = slice_anchor(plan.l_a, hosts, h);
  const int q_off = plan.query_offset();
  const bool include_self = opt.query_self_all_hosts || h == designated;

  Matrix anchor = split.anchor;
  Matrix lo = split.blocks[v_lo];
  Matrix hi = split.blocks[v_hi];
  Matrix query = split.query;
  const std::vector<uint8_t>& pad_lo = split.pad_mask[v_lo];
  const std::vector<uint8_t>& pad_hi = split.pad_mask[v_hi];

  out.qkeys.assign(cfg.layers, {});

  for (int layer = 0; layer < cfg.layers; ++layer) {
    const LayerWeights& w = params.decoder[layer];
    const std::string suffix = ".L" + std::to_string(layer);

    // Phase: projections, importance scoring, essential-KV selection.
    rec.record(EventKind::ComputeBegin, "score", layer, "");
    GroupQkv qa = project(anchor, w, cfg.norm);
    GroupQkv qlo = project(lo, w, cfg.norm);
    GroupQkv qhi = project(hi, w, cfg.norm);
    GroupQkv qq = project(query, w, cfg.norm);

    ScoreVector s_lo = score_block(qq.q, qlo.k, cfg.heads, &pad_lo, v_lo, opt.softmax_scores,
                                   &out.counters);
    ScoreVector s_hi = score_block(qq.q, qhi.k, cfg.heads, &pad_hi, v_hi, opt.softmax_scores,
                                   &out.counters);
    PassingBlock sel_lo = select_essential(qlo.k, qlo.v, s_lo, plan.l_p, plan.block_offset(v_lo));
    PassingBlock sel_hi = select_essential(qhi.k, qhi.v, s_hi, plan.l_p, plan.block_offset(v_hi));
    out.selections.push_back({layer, v_lo, s_lo.scores, sel_lo.indices});
    out.selections.push_back({layer, v_hi, s_hi.scores, sel_hi.indices});
    rec.record(EventKind::ComputeEnd, "score", layer, "");

    bool waited1 = false, waited2 = false, waited3 = false;
    std::vector<PassingBlock> received;
    std::vector<QueryPartialPayload> qparts;
    uint64_t c1 = 0, c2 = 0, c3 = 0;

    rec.record(EventKind::CommIssued, "pass1", layer, "pass1" + suffix);
    auto h1 = fabric.issue(h, "pass1" + suffix, sel_lo, rec.clock);
    auto do_wait1 = [&] {
      rec.record(EventKind::CommWaitStart, "pass1", layer, "pass1" + suffix);
      auto [parts, c] = fabric.wait(h1);
      c1 = c;
      for (GatherPayload& p : parts) received.push_back(std::get<PassingBlock>(std::move(p)));
      rec.record(EventKind::CommCompleted, "pass1", layer, "pass1" + suffix, c1);
      waited1 = true;
    };
    if (serialized) do_wait1();

    rec.record(EventKind::CommIssued, "pass2", layer, "pass2" + suffix);
    auto h2 = fabric.issue(h, "pass2" + suffix, sel_hi, rec.clock);
    auto do_wait2 = [&] {
      rec.record(EventKind::CommWaitStart, "pass2", layer, "pass2" + suffix);
      auto [parts, c] = fabric.wait(h2);
      c2 = c;
      for (GatherPayload& p : parts) received.push_back(std::get<PassingBlock>(std::move(p)));
      rec.record(EventKind::CommCompleted, "pass2", layer, "pass2" + suffix, c2);
      waited2 = true;
    };
    if (serialized) do_wait2();

    rec.record(EventKind::ComputeBegin, "query_attn", layer, "");
    std::vector<int> qkeys;
    BlockQkv blk_lo{v_lo, {}, qlo.k, qlo.v, &pad_lo, plan.block_offset(v_lo)};
    BlockQkv blk_hi{v_hi, {}, qhi.k, qhi.v, &pad_hi, plan.block_offset(v_hi)};
    MultiHeadPartial qpartial =
        query_attention(qq.q, qa.k, qa.v, aslice, blk_lo, blk_hi, &qq.k, &qq.v, include_self,
                        cfg.heads, q_off, &qkeys, &out.counters);
    rec.record(EventKind::ComputeEnd, "query_attn", layer, "");

    rec.record(EventKind::CommIssued, "qpartial", layer, "qpartial" + suffix);
    auto h3 = fabric.issue(h, "qpartial" + suffix,
                           QueryPartialPayload{qpartial.out, qpartial.lse, qkeys}, rec.clock);
    auto do_wait3 = [&] {
      rec.record(EventKind::CommWaitStart, "qpartial", layer, "qpartial" + suffix);
      auto [parts, c] = fabric.wait(h3);
      c3 = c;
      for (GatherPayload& p : parts) {
        qparts.push_back(std::get<QueryPartialPayload>(std::move(p)));
      }
      rec.record(EventKind::CommCompleted, "qpartial", layer, "qpartial" + suffix, c3);
      waited3 = true;
    };
    if (serialized) do_wait3();

    if (!waited1) do_wait1();
    // Under the contiguous (non-zigzag) mapping the low block may also need
    // essential KVs carried by the second gather.
    const bool stage1_needs_pass2 = [&] {
      std::vector<bool> have(plan.virtual_hosts, false);
      for (const PassingBlock& pb : received) have[pb.source] = true;
      for (int s = 0; s < v_lo; ++s) {
        if (!have[s]) return true;
      }
      return false;
    }();
    if (stage1_needs_pass2 && !waited2) do_wait2();

    rec.record(EventKind::ComputeBegin, "stage1", layer, "");
    Matrix anchor_out = anchor_attention(qa.q, qa.k, qa.v, cfg.heads, &out.counters);
    blk_lo.q = qlo.q;
    Matrix lo_out = block_attention(blk_lo, qa.k, qa.v, assemble_passing(v_lo, received),
                                    cfg.heads, &out.counters);
    rec.record(EventKind::ComputeEnd, "stage1", layer, "");

    if (!waited2) do_wait2();
    rec.record(EventKind::ComputeBegin, "stage2", layer, "");
    blk_hi.q = qhi.q;
    Matrix hi_out = block_attention(blk_hi, qa.k, qa.v, assemble_passing(v_hi, received),
                                    cfg.heads, &out.counters);
    rec.record(EventKind::ComputeEnd, "stage2", layer, "");

    if (!waited3) do_wait3();
    rec.record(EventKind::ComputeBegin, "merge", layer, "");
    std::vector<MultiHeadPartial> merge_in;
    merge_in.reserve(qparts.size());
    for (QueryPartialPayload& qp : qparts) {
      merge_in.push_back({std::move(qp.out), std::move(qp.lse)});
    }
    Matrix merged = mha_merge(merge_in, cfg.heads);
    rec.record(EventKind::ComputeEnd, "merge", layer, "");

    out.qkeys[layer].resize(hosts);
    for (int g = 0; g < hosts; ++g) out.qkeys[layer][g] = std::move(qparts[g].keys);

    rec.record(EventKind::ComputeBegin, "ffn", layer, "");
    finish_group(anchor, anchor_out, w, cfg.norm);
    finish_group(lo, lo_out, w, cfg.norm);
    finish_group(hi, hi_out, w, cfg.norm);
    finish_group(query, merged, w, cfg.norm);
    rec.record(EventKind::ComputeEnd, "ffn", layer, "");
  }

  out.anchor = std::move(anchor);
  out.lo = std::move(lo);
  out.hi = std::move(hi);
  out.query = std::move(query);
  out.e_v = std::move(e_v);
  out.e_q = std::move(e_q);
  out.events = std::move(rec.events);
}

}  // namespace

SimulationResult simulate(int hosts, const ModelParams& params, const SimInputs& inputs, int l_a,
                          int l_p, const SimOptions& options) {
  if (hosts < 1) throw std::invalid_argument("simulate: need at least one host");
  const auto t0 = std::chrono::steady_clock::now();
  const HostTopology topo = options.zigzag ? zigzag_map(hosts) : naive_map(hosts);
  GatherFabric fabric(hosts, options.delays, options.watchdog);
  std::vector<HostOutput> outputs(hosts);

  std::vector<std::thread> workers;
  workers.reserve(hosts);
  for (int h = 0; h < hosts; ++h) {
    workers.emplace_back([&, h] {
      try {
        run_host(h, hosts, params, inputs, l_a, l_p, options, topo, fabric, outputs[h]);
      } catch (const std::exception& e) {
        outputs[h].error = e.what();
        fabric.fail("host " + std::to_string(h) + ": " + e.what());
      }
    });
  }
  for (std::thread& t : workers) t.join();
  for (int h = 0; h < hosts; ++h) {
    if (!outputs[h].error.empty()) {
      throw std::runtime_error("host " + std::to_string(h) + ": " + outputs[h].error);
    }
  }

  SimulationResult result;
  result.topo = topo;
  result.layers = params.cfg.layers;
  {
    auto [plan, split] = split_context(outputs[0].e_v, outputs[0].e_q, hosts, l_a, l_p);
    result.plan = plan;
  }
  result.gathered_video = outputs[0].e_v;
  result.embedded_query = outputs[0].e_q;
  result.comm_payload_bytes = fabric.bytes();

  // Reassemble the sequence in virtual-host order, dropping pad rows.
  const BlockPlan& plan = result.plan;
  result.final_hidden = Matrix(plan.n_v + plan.n_t, params.cfg.d);
  result.final_hidden.paste_rows(0, outputs[0].anchor);
  int row = plan.l_a;
  for (int v = 0; v < plan.virtual_hosts; ++v) {
    const int owner = topo.physical_of(v);
    const Matrix& block =
        topo.virtual_pair(owner).first == v ? outputs[owner].lo : outputs[owner].hi;
    for (int r = 0; r < plan.l_b; ++r) {
      if (plan.block_offset(v) + r >= plan.n_v) {
        break;  // pad tail
      }
      result.final_hidden.paste_rows(row++, block.slice_rows(r, r + 1));
    }
  }
  result.final_hidden.paste_rows(plan.n_v, outputs[0].query);
  if (!result.final_hidden.all_finite()) {
    result.violations.push_back("non-finite values in reassembled hidden states");
  }

  // Merge per-host logs.
  result.counters.resize(hosts);
  result.selection_counts.assign(plan.n_v, 0);
  for (int h = 0; h < hosts; ++h) {
    result.counters[h] = outputs[h].counters;
    for (SelectionRecord& s : outputs[h].selections) {
      const int receivers = plan.virtual_hosts - 1 - s.vhost;
      for (int idx : s.selected_global) {
        if (idx < plan.n_v) result.selection_counts[idx] += receivers;
      }
      result.selections.push_back(std::move(s));
    }
  }

  // Audit: across hosts, the query-attention key sets must tile
  // {anchor} + {all non-pad block keys} + {query keys once} with no overlap.
  if (!options.query_self_all_hosts) {
    for (int layer = 0; layer < params.cfg.layers; ++layer) {
      std::vector<int> all;
      for (int g = 0; g < hosts; ++g) {
        const auto& keys = outputs[0].qkeys[layer][g];
        all.insert(all.end(), keys.begin(), keys.end());
      }
      std::sort(all.begin(), all.end());
      std::vector<int> expected;
      for (int i = 0; i < plan.l_a; ++i) expected.push_back(i);
      for (int v = 0; v < plan.virtual_hosts; ++v) {
        for (int r = 0; r < plan.l_b; ++r) {
          if (plan.block_offset(v) + r < plan.n_v) expected.push_back(plan.block_offset(v) + r);
        }
      }
      for (int i = 0; i < plan.n_t; ++i) expected.push_back(plan.query_offset() + i);
      std::sort(expected.begin(), expected.end());
      if (all != expected) {
        result.violations.push_back("query key sets do not tile the sequence at layer " +
                                    std::to_string(layer));
      }
    }
  }

  // Deterministic global interleaving: sort by (lamport clock, host, seq).
  for (int h = 0; h < hosts; ++h) {
    result.trace.events.insert(result.trace.events.end(), outputs[h].events.begin(),
                               outputs[h].events.end());
  }
  std::sort(result.trace.events.begin(), result.trace.events.end(),
            [](const Event& a, const Event& b) {
              return std::tie(a.clock, a.host, a.seq) < std::tie(b.clock, b.host, b.seq);
            });
  for (size_t i = 0; i < result.trace.events.size(); ++i) {
    result.trace.events[i].global_index = i;
  }

  result.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return result;
}

std::vector<std::string> validate_trace(const EventTrace& trace) {
  std::vector<std::string> violations;
  std::map<int, std::vector<const Event*>> per_host;
  for (const Event& e : trace.events) per_host[e.host].push_back(&e);

  // Index of an event within a host's own order, by (layer, kind, label).
  for (auto& [host, events] : per_host) {
    for (size_t i = 1; i < events.size(); ++i) {
      if (events[i]->seq <= events[i - 1]->seq) {
        violations.push_back("host " + std::to_string(host) + ": sequence numbers not increasing");
        break;
      }
    }
    std::map<std::string, int> issued_seq;
    for (const Event* e : events) {
      if (e->kind == EventKind::CommIssued) issued_seq[e->tag] = e->seq;
      if (e->kind == EventKind::CommWaitStart &&
          (!issued_seq.count(e->tag) || issued_seq[e->tag] >= e->seq)) {
        violations.push_back("host " + std::to_string(host) + ": wait on '" + e->tag +
                             "' without prior issue");
      }
    }

    auto find_seq = [&](int layer, EventKind kind, const std::string& label) -> int {
      for (const Event* e : events) {
        if (e->layer == layer && e->kind == kind && e->label == label) return e->seq;
      }
      return -1;
    };
    int max_layer = -1;
    for (const Event* e : events) max_layer = std::max(max_layer, e->layer);
    for (int layer = 0; layer <= max_layer; ++layer) {
      struct Need {
        int a;
        int b;
        const char* what;
      };
      const int issued1 = find_seq(layer, EventKind::CommIssued, "pass1");
      const int issued2 = find_seq(layer, EventKind::CommIssued, "pass2");
      const int issued3 = find_seq(layer, EventKind::CommIssued, "qpartial");
      const int qbegin = find_seq(layer, EventKind::ComputeBegin, "query_attn");
      const int qend = find_seq(layer, EventKind::ComputeEnd, "query_attn");
      const int wait1 = find_seq(layer, EventKind::CommWaitStart, "pass1");
      const int wait2 = find_seq(layer, EventKind::CommWaitStart, "pass2");
      const int done3 = find_seq(layer, EventKind::CommCompleted, "qpartial");
      const int s1 = find_seq(layer, EventKind::ComputeBegin, "stage1");
      const int s2 = find_seq(layer, EventKind::ComputeBegin, "stage2");
      const int merge = find_seq(layer, EventKind::ComputeBegin, "merge");
      const Need needs[] = {
          {issued1, issued2, "pass1 issued before pass2 issued"},
          {issued2, qbegin, "pass2 issued before query attention"},
          {qend, issued3, "query attention finished before qpartial issued"},
          {wait1, s1, "pass1 wait started before stage1"},
          {wait2, s2, "pass2 wait started before stage2"},
          {done3, merge, "qpartial completed before merge"},
      };
      for (const Need& n : needs) {
        if (n.a < 0 || n.b < 0) {
          violations.push_back("host " + std::to_string(host) + " layer " +
                               std::to_string(layer) + ": missing event for '" + n.what + "'");
        } else if (n.a >= n.b) {
          violations.push_back("host " + std::to_string(host) + " layer " +
                               std::to_string(layer) + ": ordering violated: " + n.what);
        }
      }
    }
  }

  // Causality in the global interleaving: a gather cannot complete before
  // every contributor issued it.
  std::map<std::string, uint64_t> last_issue_index;
  std::map<std::string, int> issue_count;
  for (const Event& e : trace.events) {
    if (e.kind == EventKind::CommIssued) {
      last_issue_index[e.tag] = e.global_index;
      issue_count[e.tag]++;
    }
  }
  const int hosts = static_cast<int>(per_host.size());
  for (const Event& e : trace.events) {
    if (e.kind != EventKind::CommCompleted) continue;
    if (issue_count[e.tag] != hosts) {
      violations.push_back("tag '" + e.tag + "': completion with " +
                           std::to_string(issue_count[e.tag]) + "/" + std::to_string(hosts) +
                           " issues");
    } else if (last_issue_index[e.tag] >= e.global_index) {
      violations.push_back("tag '" + e.tag + "': completed before all contributors issued");
    }
  }
  return violations;
}

void write_trace(const EventTrace& trace, std::ostream& os) {
  for (const Event& e : trace.events) {
    nlohmann::json j{{"global_index", e.global_index}, {"host", e.host},   {"seq", e.seq},
                     {"kind", to_string(e.kind)},      {"label", e.label}, {"layer", e.layer},
                     {"tag", e.tag},                   {"clock", e.clock}};
    os << j.dump() << "\n";
  }
}

EventTrace read_trace(std::istream& is) {
  EventTrace trace;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    nlohmann::json j = nlohmann::json::parse(line);
    Event e;
    e.global_index = j.at("global_index").get<uint64_t>();
    e.host = j.at("host").get<int>();
    e.seq = j.at("seq").get<int>();
    e.kind = event_kind_from_string(j.at("kind").get<std::string>());
    e.label = j.at("label").get<std::string>();
    e.layer = j.at("layer").get<int>();
    e.tag = j.at("tag").get<std::string>();
    e.clock = j.value("clock", 0ull);
    trace.events.push_back(std::move(e));
  }
  return trace;
}

}  // namespace seqpar
