#pragma once

#include <span>
#include <vector>

#include "seqpar/costs.hpp"
#include "seqpar/matrix.hpp"

namespace seqpar {

// Visibility of one key segment relative to the query rows. CausalWithin
// aligns query row i with key rows 0..i of the same segment and therefore
// requires the segment to have exactly as many keys as there are query rows.
enum class MaskKind { CausalWithin, FullyVisible };

struct KeySegment {
  const Matrix* k = nullptr;
  const Matrix* v = nullptr;
  MaskKind mask = MaskKind::FullyVisible;
  // Optional per-key padding mask; pad[j] != 0 hides key j unconditionally.
  const std::vector<uint8_t>* pad = nullptr;
  AttnSite site = AttnSite::Other;
};

// Attention output paired with the per-row log-sum-exp of the scaled masked
// logits. A row with an empty visible key set carries lse = -inf and a zero
// output row; such rows are only produced when allow_invalid_rows is set.
struct AttnPartial {
  Matrix out;
  std::vector<float> lse;

  bool row_valid(int r) const;
};

float invalid_lse();

// Softmax attention of q over the union of visible keys across the segments,
// masking implemented additively (-inf logits). Scale is applied to every
// logit; lse accumulates in f64.
AttnPartial attention_lse(const Matrix& q, std::span<const KeySegment> segments, float scale,
                          bool allow_invalid_rows = false, CostCounters* counters = nullptr);

// Combines partial attention outputs computed over pairwise disjoint key
// sets into the attention over the union. Parts must be ordered by host
// index; the weighting order is fixed for determinism. Rows where a part is
// invalid are merged over the remaining parts; a row invalid in every part
// is an error.
Matrix merge_partials(std::span<const AttnPartial> parts);

// Position-wise feed-forward with residual: h + relu(h*w1)*w2.
Matrix ffn(const Matrix& h, const Matrix& w1, const Matrix& w2);

// Per-head attention over column slices of d-wide Q/K/V, with per-head lse
// kept side by side (lse is n_q x heads). Per-head scale is 1/sqrt(d/heads).
struct MultiHeadPartial {
  Matrix out;  // n_q x d
  Matrix lse;  // n_q x heads
};

MultiHeadPartial mha_lse(const Matrix& q, std::span<const KeySegment> segments, int heads,
                         bool allow_invalid_rows = false, CostCounters* counters = nullptr);

Matrix mha_merge(std::span<const MultiHeadPartial> parts, int heads);

}  // namespace seqpar
