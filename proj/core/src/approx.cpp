#include "seqpar/approx.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace seqpar {

namespace {
constexpr float kNegInf = -std::numeric_limits<float>::infinity();
}

ScoreVector score_context(const Matrix& q_qr, const Matrix& k_block, float scale,
                          const std::vector<uint8_t>* pad_mask, int source,
                          bool softmax_aggregation, CostCounters* counters) {
  if (q_qr.rows == 0) throw std::invalid_argument("score_context: empty query");
  if (q_qr.cols != k_block.cols) throw std::invalid_argument("score_context: width mismatch");
  if (pad_mask && static_cast<int>(pad_mask->size()) != k_block.rows) {
    throw std::invalid_argument("score_context: pad mask length mismatch");
  }
  if (counters) {
    counters->add(AttnSite::Score,
                  2ull * q_qr.rows * k_block.rows * q_qr.cols);
  }

  ScoreVector sv;
  sv.source = source;
  sv.scores.assign(k_block.rows, 0.0f);
  Matrix logits = matmul_nt(q_qr, k_block);
  bool any_visible = false;
  for (int j = 0; j < k_block.rows; ++j) {
    if (!pad_mask || !(*pad_mask)[j]) any_visible = true;
  }
  if (!any_visible) {
    std::fill(sv.scores.begin(), sv.scores.end(), kNegInf);
    return sv;
  }
  for (int i = 0; i < q_qr.rows; ++i) {
    float* lrow = logits.row(i);
    if (softmax_aggregation) {
      double mx = -std::numeric_limits<double>::infinity();
      for (int j = 0; j < k_block.rows; ++j) {
        if (pad_mask && (*pad_mask)[j]) continue;
        mx = std::max(mx, static_cast<double>(lrow[j]) * scale);
      }
      double sum = 0.0;
      for (int j = 0; j < k_block.rows; ++j) {
        if (pad_mask && (*pad_mask)[j]) continue;
        sum += std::exp(static_cast<double>(lrow[j]) * scale - mx);
      }
      for (int j = 0; j < k_block.rows; ++j) {
        if (pad_mask && (*pad_mask)[j]) continue;
        sv.scores[j] +=
            static_cast<float>(std::exp(static_cast<double>(lrow[j]) * scale - mx) / sum);
      }
    } else {
      for (int j = 0; j < k_block.rows; ++j) {
        if (pad_mask && (*pad_mask)[j]) continue;
        sv.scores[j] += lrow[j] * scale;
      }
    }
  }
  for (int j = 0; j < k_block.rows; ++j) {
    if (pad_mask && (*pad_mask)[j]) sv.scores[j] = kNegInf;
  }
  return sv;
}

PassingBlock select_essential(const Matrix& k_block, const Matrix& v_block,
                              const ScoreVector& scores, int l_p, int global_offset) {
  if (l_p < 0 || l_p > k_block.rows) {
    throw std::invalid_argument("select_essential: l_p out of range");
  }
  if (static_cast<int>(scores.scores.size()) != k_block.rows) {
    throw std::invalid_argument("select_essential: score length mismatch");
  }
  std::vector<int> order(k_block.rows);
  std::iota(order.begin(), order.end(), 0);
  // Descending by score, ties toward the lower index.
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return scores.scores[a] > scores.scores[b]; });
  std::vector<int> chosen;
  for (int idx : order) {
    if (static_cast<int>(chosen.size()) == l_p) break;
    if (!std::isfinite(scores.scores[idx])) break;  // pads sort last
    chosen.push_back(idx);
  }
  std::sort(chosen.begin(), chosen.end());

  PassingBlock pb;
  pb.source = scores.source;
  pb.k = Matrix(static_cast<int>(chosen.size()), k_block.cols);
  pb.v = Matrix(static_cast<int>(chosen.size()), v_block.cols);
  for (size_t i = 0; i < chosen.size(); ++i) {
    pb.indices.push_back(global_offset + chosen[i]);
    pb.k.paste_rows(static_cast<int>(i), k_block.slice_rows(chosen[i], chosen[i] + 1));
    pb.v.paste_rows(static_cast<int>(i), v_block.slice_rows(chosen[i], chosen[i] + 1));
  }
  return pb;
}

PassingAssembly assemble_passing(int v, std::span<const PassingBlock> all_compressed) {
  std::vector<const PassingBlock*> sources(v, nullptr);
  for (const PassingBlock& pb : all_compressed) {
    if (pb.source < v) sources[pb.source] = &pb;
  }
  int rows = 0;
  int kc = 0;
  int vc = 0;
  for (int s = 0; s < v; ++s) {
    if (!sources[s]) {
      throw std::invalid_argument("assemble_passing: missing source block " + std::to_string(s));
    }
    rows += sources[s]->k.rows;
    kc = sources[s]->k.cols;
    vc = sources[s]->v.cols;
  }
  PassingAssembly out;
  out.k = Matrix(rows, kc);
  out.v = Matrix(rows, vc);
  int r = 0;
  for (int s = 0; s < v; ++s) {
    out.k.paste_rows(r, sources[s]->k);
    out.v.paste_rows(r, sources[s]->v);
    out.indices.insert(out.indices.end(), sources[s]->indices.begin(),
                       sources[s]->indices.end());
    r += sources[s]->k.rows;
  }
  return out;
}

Matrix anchor_attention(const Matrix& q_a, const Matrix& k_a, const Matrix& v_a, int heads,
                        CostCounters* counters) {
  const KeySegment seg{&k_a, &v_a, MaskKind::CausalWithin, nullptr, AttnSite::AnchorSelf};
  return mha_lse(q_a, std::span<const KeySegment>(&seg, 1), heads, false, counters).out;
}

Matrix block_attention(const BlockQkv& block, const Matrix& k_a, const Matrix& v_a,
                       const PassingAssembly& passing, int heads, CostCounters* counters) {
  std::vector<KeySegment> segs;
  if (k_a.rows > 0) {
    segs.push_back({&k_a, &v_a, MaskKind::FullyVisible, nullptr, AttnSite::BlockAnchor});
  }
  if (passing.k.rows > 0) {
    segs.push_back({&passing.k, &passing.v, MaskKind::FullyVisible, nullptr,
                    AttnSite::BlockPassing});
  }
  segs.push_back({&block.k, &block.v, MaskKind::CausalWithin, block.pad, AttnSite::BlockOwn});
  // Pad query rows may end up with no visible keys; they come out as zero
  // rows and are dropped at reassembly.
  return mha_lse(block.q, segs, heads, /*allow_invalid_rows=*/true, counters).out;
}

MultiHeadPartial query_attention(const Matrix& q_qr, const Matrix& anchor_k,
                                 const Matrix& anchor_v, std::pair<int, int> anchor_slice,
                                 const BlockQkv& block_lo, const BlockQkv& block_hi,
                                 const Matrix* query_k, const Matrix* query_v,
                                 bool include_query_self, int heads, int query_offset,
                                 std::vector<int>* key_indices, CostCounters* counters) {
  const Matrix ka = anchor_k.slice_rows(anchor_slice.first, anchor_slice.second);
  const Matrix va = anchor_v.slice_rows(anchor_slice.first, anchor_slice.second);
  std::vector<KeySegment> segs;
  if (ka.rows > 0) {
    segs.push_back({&ka, &va, MaskKind::FullyVisible, nullptr, AttnSite::QueryAttn});
  }
  segs.push_back(
      {&block_lo.k, &block_lo.v, MaskKind::FullyVisible, block_lo.pad, AttnSite::QueryAttn});
  segs.push_back(
      {&block_hi.k, &block_hi.v, MaskKind::FullyVisible, block_hi.pad, AttnSite::QueryAttn});
  if (include_query_self) {
    segs.push_back({query_k, query_v, MaskKind::CausalWithin, nullptr, AttnSite::QueryAttn});
  }
  if (key_indices) {
    for (int i = anchor_slice.first; i < anchor_slice.second; ++i) key_indices->push_back(i);
    for (const BlockQkv* b : {&block_lo, &block_hi}) {
      for (int i = 0; i < b->k.rows; ++i) {
        if (b->pad && (*b->pad)[i]) continue;
        key_indices->push_back(b->global_offset + i);
      }
    }
    if (include_query_self) {
      for (int i = 0; i < q_qr.rows; ++i) key_indices->push_back(query_offset + i);
    }
  }
  return mha_lse(q_qr, segs, heads, /*allow_invalid_rows=*/true, counters);
}

}  // namespace seqpar
