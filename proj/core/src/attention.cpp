#include "seqpar/attention.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace seqpar {

namespace {
constexpr float kNegInf = -std::numeric_limits<float>::infinity();
}

float invalid_lse() { return kNegInf; }

bool AttnPartial::row_valid(int r) const { return std::isfinite(lse[r]); }

AttnPartial attention_lse(const Matrix& q, std::span<const KeySegment> segments, float scale,
                          bool allow_invalid_rows, CostCounters* counters) {
  const int d = q.cols;
  int vwidth = -1;
  for (const KeySegment& seg : segments) {
    if (seg.k->cols != d) throw std::invalid_argument("attention_lse: key width != query width");
    if (seg.k->rows != seg.v->rows) throw std::invalid_argument("attention_lse: K/V row mismatch");
    if (vwidth < 0) vwidth = seg.v->cols;
    if (seg.v->cols != vwidth) throw std::invalid_argument("attention_lse: V width mismatch");
    if (seg.mask == MaskKind::CausalWithin && seg.k->rows != q.rows) {
      throw std::invalid_argument("attention_lse: causal segment must match query rows");
    }
    if (seg.pad && static_cast<int>(seg.pad->size()) != seg.k->rows) {
      throw std::invalid_argument("attention_lse: pad mask length mismatch");
    }
    if (counters) {
      const uint64_t pair_cost = seg.mask == MaskKind::CausalWithin ? 2u : 4u;
      counters->add(seg.site, pair_cost * static_cast<uint64_t>(q.rows) * seg.k->rows * d);
    }
  }
  if (vwidth < 0) vwidth = 0;

  AttnPartial result;
  result.out = Matrix(q.rows, vwidth);
  result.lse.assign(q.rows, kNegInf);

  std::vector<float> logits;
  std::vector<const float*> vrows;
  for (int i = 0; i < q.rows; ++i) {
    logits.clear();
    vrows.clear();
    const float* qrow = q.row(i);
    for (const KeySegment& seg : segments) {
      const int limit = seg.mask == MaskKind::CausalWithin ? i + 1 : seg.k->rows;
      for (int j = 0; j < limit; ++j) {
        if (seg.pad && (*seg.pad)[j]) continue;
        const float* krow = seg.k->row(j);
        float acc = 0.0f;
        for (int c = 0; c < d; ++c) acc += qrow[c] * krow[c];
        logits.push_back(acc * scale);
        vrows.push_back(seg.v->row(j));
      }
    }
    if (logits.empty()) {
      if (!allow_invalid_rows) {
        throw std::invalid_argument("attention_lse: query row " + std::to_string(i) +
                                    " has no visible keys");
      }
      continue;  // zero output row, lse stays -inf
    }
    float mx = kNegInf;
    for (float l : logits) mx = std::max(mx, l);
    double sum = 0.0;
    for (float& l : logits) {
      const double e = std::exp(static_cast<double>(l - mx));
      sum += e;
      l = static_cast<float>(e);
    }
    result.lse[i] = static_cast<float>(mx + std::log(sum));
    const float inv = static_cast<float>(1.0 / sum);
    float* orow = result.out.row(i);
    for (size_t t = 0; t < vrows.size(); ++t) {
      const float w = logits[t] * inv;
      const float* vrow = vrows[t];
      for (int c = 0; c < vwidth; ++c) orow[c] += w * vrow[c];
    }
  }
  return result;
}

Matrix merge_partials(std::span<const AttnPartial> parts) {
  if (parts.empty()) throw std::invalid_argument("merge_partials: empty part list");
  const Matrix& first = parts.front().out;
  for (const AttnPartial& p : parts) {
    if (!p.out.same_shape(first) || static_cast<int>(p.lse.size()) != first.rows) {
      throw std::invalid_argument("merge_partials: part shape mismatch");
    }
  }
  Matrix out(first.rows, first.cols);
  for (int i = 0; i < first.rows; ++i) {
    double mx = -std::numeric_limits<double>::infinity();
    for (const AttnPartial& p : parts) {
      if (p.row_valid(i)) mx = std::max(mx, static_cast<double>(p.lse[i]));
    }
    if (!std::isfinite(mx)) {
      throw std::invalid_argument("merge_partials: row " + std::to_string(i) +
                                  " invalid in every part");
    }
    double denom = 0.0;
    for (const AttnPartial& p : parts) {
      if (p.row_valid(i)) denom += std::exp(p.lse[i] - mx);
    }
    float* orow = out.row(i);
    for (const AttnPartial& p : parts) {
      if (!p.row_valid(i)) continue;
      const float w = static_cast<float>(std::exp(p.lse[i] - mx) / denom);
      const float* prow = p.out.row(i);
      for (int c = 0; c < out.cols; ++c) orow[c] += w * prow[c];
    }
  }
  return out;
}

Matrix ffn(const Matrix& h, const Matrix& w1, const Matrix& w2) {
  if (h.cols != w1.rows || w1.cols != w2.rows || w2.cols != h.cols) {
    throw std::invalid_argument("ffn: weight shapes inconsistent with input");
  }
  Matrix mid = relu(matmul(h, w1));
  Matrix out = matmul(mid, w2);
  add_inplace(out, h);
  return out;
}

namespace {

// Column slices of each segment for one head, keeping mask/pad/site.
struct HeadScratch {
  std::vector<Matrix> ks;
  std::vector<Matrix> vs;
  std::vector<KeySegment> segs;
};

void slice_head(std::span<const KeySegment> segments, int c0, int c1, HeadScratch& scratch) {
  scratch.ks.clear();
  scratch.vs.clear();
  scratch.segs.clear();
  scratch.ks.reserve(segments.size());
  scratch.vs.reserve(segments.size());
  for (const KeySegment& seg : segments) {
    scratch.ks.push_back(seg.k->slice_cols(c0, c1));
    scratch.vs.push_back(seg.v->slice_cols(c0, c1));
  }
  for (size_t s = 0; s < segments.size(); ++s) {
    scratch.segs.push_back(
        {&scratch.ks[s], &scratch.vs[s], segments[s].mask, segments[s].pad, segments[s].site});
  }
}

}  // namespace

MultiHeadPartial mha_lse(const Matrix& q, std::span<const KeySegment> segments, int heads,
                         bool allow_invalid_rows, CostCounters* counters) {
  if (heads < 1 || q.cols % heads != 0) {
    throw std::invalid_argument("mha_lse: model width not divisible by head count");
  }
  const int dh = q.cols / heads;
  const float scale = 1.0f / std::sqrt(static_cast<float>(dh));
  MultiHeadPartial result;
  result.out = Matrix(q.rows, q.cols);
  result.lse = Matrix(q.rows, heads);
  HeadScratch scratch;
  for (int h = 0; h < heads; ++h) {
    const int c0 = h * dh;
    Matrix qh = q.slice_cols(c0, c0 + dh);
    slice_head(segments, c0, c0 + dh, scratch);
    AttnPartial part = attention_lse(qh, scratch.segs, scale, allow_invalid_rows, counters);
    result.out.paste_cols(c0, part.out);
    for (int r = 0; r < q.rows; ++r) result.lse.at(r, h) = part.lse[r];
  }
  return result;
}

Matrix mha_merge(std::span<const MultiHeadPartial> parts, int heads) {
  if (parts.empty()) throw std::invalid_argument("mha_merge: empty part list");
  const int rows = parts.front().out.rows;
  const int d = parts.front().out.cols;
  const int dh = d / heads;
  Matrix out(rows, d);
  std::vector<AttnPartial> head_parts(parts.size());
  for (int h = 0; h < heads; ++h) {
    const int c0 = h * dh;
    for (size_t p = 0; p < parts.size(); ++p) {
      head_parts[p].out = parts[p].out.slice_cols(c0, c0 + dh);
      head_parts[p].lse.resize(rows);
      for (int r = 0; r < rows; ++r) head_parts[p].lse[r] = parts[p].lse.at(r, h);
    }
    out.paste_cols(c0, merge_partials(head_parts));
  }
  return out;
}

}  // namespace seqpar
