#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <random>
#include <vector>

#include "doctest.h"
#include "seqpar/attention.hpp"
#include "seqpar/matrix.hpp"
#include "seqpar/rng.hpp"

using namespace seqpar;

namespace {

Matrix random_matrix(int rows, int cols, std::mt19937_64& gen) {
  std::normal_distribution<float> dist(0.0f, 1.0f);
  Matrix m(rows, cols);
  for (float& v : m.data) v = dist(gen);
  return m;
}

// Brute-force masked attention over one visible-key list; the oracle for
// attention_lse and merge_partials.
Matrix naive_attention(const Matrix& q, const Matrix& k, const Matrix& v,
                       const std::vector<std::vector<int>>& visible, float scale) {
  Matrix out(q.rows, v.cols);
  for (int i = 0; i < q.rows; ++i) {
    std::vector<double> logits;
    for (int j : visible[i]) {
      double dot = 0.0;
      for (int c = 0; c < q.cols; ++c) dot += static_cast<double>(q.at(i, c)) * k.at(j, c);
      logits.push_back(dot * scale);
    }
    double mx = *std::max_element(logits.begin(), logits.end());
    double denom = 0.0;
    for (double l : logits) denom += std::exp(l - mx);
    for (size_t t = 0; t < visible[i].size(); ++t) {
      const double w = std::exp(logits[t] - mx) / denom;
      for (int c = 0; c < v.cols; ++c) {
        out.at(i, c) += static_cast<float>(w * v.at(visible[i][t], c));
      }
    }
  }
  return out;
}

}  // namespace

TEST_CASE("matmul identity and hand example") {
  Matrix id(2, 2);
  id.at(0, 0) = 1;
  id.at(1, 1) = 1;
  auto gen = substream(7, "test.matmul");
  Matrix m = random_matrix(2, 2, gen);
  CHECK(matmul(id, m) == m);

  Matrix a(2, 2);
  a.data = {1, 2, 3, 4};
  Matrix b(2, 1);
  b.data = {0, 1};
  Matrix c = matmul(a, b);
  CHECK(c.at(0, 0) == 2);
  CHECK(c.at(1, 0) == 4);
}

TEST_CASE("matmul equals triple-loop oracle") {
  auto gen = substream(7, "test.matmul.oracle");
  Matrix a = random_matrix(7, 5, gen);
  Matrix b = random_matrix(5, 3, gen);
  Matrix c = matmul(a, b);
  for (int i = 0; i < 7; ++i) {
    for (int j = 0; j < 3; ++j) {
      float acc = 0.0f;
      for (int k = 0; k < 5; ++k) acc += a.at(i, k) * b.at(k, j);
      CHECK(c.at(i, j) == acc);  // same accumulation order, exact
    }
  }
}

TEST_CASE("matmul dimension mismatch throws") {
  CHECK_THROWS(matmul(Matrix(2, 3), Matrix(4, 2)));
}

TEST_CASE("softmax_rows closed forms") {
  Matrix m(1, 2);
  CHECK(softmax_rows(m).at(0, 0) == doctest::Approx(0.5));

  m.data = {1000, 1000};
  Matrix s = softmax_rows(m);
  CHECK(s.all_finite());
  CHECK(s.at(0, 1) == doctest::Approx(0.5));

  m.data = {0.0f, std::log(3.0f)};
  s = softmax_rows(m);
  CHECK(s.at(0, 0) == doctest::Approx(0.25));
  CHECK(s.at(0, 1) == doctest::Approx(0.75));
}

TEST_CASE("softmax rows sum to one") {
  auto gen = substream(8, "test.softmax");
  Matrix m = random_matrix(6, 9, gen);
  Matrix s = softmax_rows(m);
  for (int i = 0; i < s.rows; ++i) {
    double sum = 0.0;
    for (int j = 0; j < s.cols; ++j) sum += s.at(i, j);
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-6));
  }
}

TEST_CASE("softmax rejects fully masked row") {
  Matrix m(1, 2);
  m.data = {-std::numeric_limits<float>::infinity(), -std::numeric_limits<float>::infinity()};
  CHECK_THROWS(softmax_rows(m));
}

TEST_CASE("attention_lse single visible key") {
  auto gen = substream(9, "test.attn.single");
  Matrix q = random_matrix(1, 4, gen);
  Matrix k = random_matrix(1, 4, gen);
  Matrix v = random_matrix(1, 4, gen);
  const float scale = 0.5f;
  KeySegment seg{&k, &v, MaskKind::FullyVisible, nullptr, AttnSite::Other};
  AttnPartial p = attention_lse(q, std::span<const KeySegment>(&seg, 1), scale);
  for (int c = 0; c < 4; ++c) CHECK(p.out.at(0, c) == doctest::Approx(v.at(0, c)));
  float logit = 0.0f;
  for (int c = 0; c < 4; ++c) logit += q.at(0, c) * k.at(0, c);
  CHECK(p.lse[0] == doctest::Approx(logit * scale).epsilon(1e-5));
}

TEST_CASE("attention_lse segment concatenation invariance") {
  auto gen = substream(10, "test.attn.concat");
  Matrix q = random_matrix(3, 8, gen);
  Matrix k1 = random_matrix(4, 8, gen), v1 = random_matrix(4, 8, gen);
  Matrix k2 = random_matrix(5, 8, gen), v2 = random_matrix(5, 8, gen);
  const Matrix* kparts[] = {&k1, &k2};
  const Matrix* vparts[] = {&v1, &v2};
  Matrix k = concat_rows(kparts), v = concat_rows(vparts);

  std::vector<KeySegment> split = {{&k1, &v1, MaskKind::FullyVisible, nullptr, AttnSite::Other},
                                   {&k2, &v2, MaskKind::FullyVisible, nullptr, AttnSite::Other}};
  KeySegment whole{&k, &v, MaskKind::FullyVisible, nullptr, AttnSite::Other};
  AttnPartial a = attention_lse(q, split, 0.25f);
  AttnPartial b = attention_lse(q, std::span<const KeySegment>(&whole, 1), 0.25f);
  CHECK(max_abs_diff(a.out, b.out) <= 1e-6f);
  for (int i = 0; i < 3; ++i) CHECK(a.lse[i] == doctest::Approx(b.lse[i]).epsilon(1e-6));
}

TEST_CASE("causal attention equals brute-force masked oracle") {
  auto gen = substream(11, "test.attn.causal");
  Matrix q = random_matrix(4, 6, gen);
  Matrix k = random_matrix(4, 6, gen);
  Matrix v = random_matrix(4, 6, gen);
  const float scale = 1.0f / std::sqrt(6.0f);
  KeySegment seg{&k, &v, MaskKind::CausalWithin, nullptr, AttnSite::Other};
  AttnPartial p = attention_lse(q, std::span<const KeySegment>(&seg, 1), scale);
  std::vector<std::vector<int>> visible(4);
  for (int i = 0; i < 4; ++i) {
    for (int j = 0; j <= i; ++j) visible[i].push_back(j);
  }
  CHECK(max_abs_diff(p.out, naive_attention(q, k, v, visible, scale)) <= 1e-6f);
}

TEST_CASE("attention rejects rows with no visible keys") {
  auto gen = substream(12, "test.attn.invalid");
  Matrix q = random_matrix(2, 4, gen);
  Matrix k = random_matrix(3, 4, gen);
  Matrix v = random_matrix(3, 4, gen);
  std::vector<uint8_t> pad = {1, 1, 1};
  KeySegment seg{&k, &v, MaskKind::FullyVisible, &pad, AttnSite::Other};
  CHECK_THROWS(attention_lse(q, std::span<const KeySegment>(&seg, 1), 1.0f));
  AttnPartial p = attention_lse(q, std::span<const KeySegment>(&seg, 1), 1.0f, true);
  CHECK_FALSE(p.row_valid(0));
  CHECK(p.out.at(0, 0) == 0.0f);
}

TEST_CASE("merge_partials single part identity and symmetric duplicate") {
  auto gen = substream(13, "test.merge.single");
  Matrix q = random_matrix(2, 4, gen);
  Matrix k = random_matrix(3, 4, gen);
  Matrix v = random_matrix(3, 4, gen);
  KeySegment seg{&k, &v, MaskKind::FullyVisible, nullptr, AttnSite::Other};
  AttnPartial p = attention_lse(q, std::span<const KeySegment>(&seg, 1), 0.5f);
  std::vector<AttnPartial> one = {p};
  CHECK(max_abs_diff(merge_partials(one), p.out) <= 1e-6f);

  std::vector<AttnPartial> two = {p, p};  // identical key sets, equal lse
  CHECK(max_abs_diff(merge_partials(two), p.out) <= 1e-6f);
}

TEST_CASE("merge over random disjoint partitions equals dense attention") {
  for (uint64_t seed = 0; seed < 25; ++seed) {
    auto gen = substream(seed, "test.merge.partition");
    std::uniform_int_distribution<int> nk_dist(2, 24);
    const int n_q = 3, d = 8, n_k = nk_dist(gen);
    Matrix q = random_matrix(n_q, d, gen);
    Matrix k = random_matrix(n_k, d, gen);
    Matrix v = random_matrix(n_k, d, gen);
    const float scale = 1.0f / std::sqrt(static_cast<float>(d));

    // Random partition into <= 8 nonempty segments.
    std::uniform_int_distribution<int> seg_dist(1, std::min(8, n_k));
    const int segments = seg_dist(gen);
    std::uniform_int_distribution<int> pick(0, segments - 1);
    std::vector<int> assign(n_k);
    for (int j = 0; j < n_k; ++j) assign[j] = j < segments ? j : pick(gen);
    std::shuffle(assign.begin(), assign.end(), gen);

    std::vector<AttnPartial> parts;
    for (int s = 0; s < segments; ++s) {
      std::vector<int> members;
      for (int j = 0; j < n_k; ++j) {
        if (assign[j] == s) members.push_back(j);
      }
      Matrix ks(static_cast<int>(members.size()), d), vs(static_cast<int>(members.size()), d);
      for (size_t t = 0; t < members.size(); ++t) {
        ks.paste_rows(static_cast<int>(t), k.slice_rows(members[t], members[t] + 1));
        vs.paste_rows(static_cast<int>(t), v.slice_rows(members[t], members[t] + 1));
      }
      KeySegment seg{&ks, &vs, MaskKind::FullyVisible, nullptr, AttnSite::Other};
      parts.push_back(attention_lse(q, std::span<const KeySegment>(&seg, 1), scale));
    }
    std::vector<std::vector<int>> visible(n_q);
    for (int i = 0; i < n_q; ++i) {
      for (int j = 0; j < n_k; ++j) visible[i].push_back(j);
    }
    CHECK(max_abs_diff(merge_partials(parts), naive_attention(q, k, v, visible, scale)) <=
          1e-6f);
  }
}

TEST_CASE("ffn residual and oracle") {
  Matrix z(2, 4);
  Matrix w1(4, 8), w2(8, 4);
  CHECK(ffn(z, w1, w2) == z);  // zero weights: pure residual

  auto gen = substream(14, "test.ffn");
  Matrix h = random_matrix(3, 8, gen);
  w1 = random_matrix(8, 16, gen);
  w2 = random_matrix(16, 8, gen);
  Matrix out = ffn(h, w1, w2);
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 8; ++j) {
      float acc = h.at(i, j);
      for (int m = 0; m < 16; ++m) {
        float inner = 0.0f;
        for (int c = 0; c < 8; ++c) inner += h.at(i, c) * w1.at(c, m);
        acc += std::max(0.0f, inner) * w2.at(m, j);
      }
      CHECK(out.at(i, j) == doctest::Approx(acc).epsilon(1e-5));
    }
  }
}

TEST_CASE("determinism: identical inputs give bit-identical outputs") {
  auto gen = substream(15, "test.det");
  Matrix q = random_matrix(5, 8, gen);
  Matrix k = random_matrix(7, 8, gen);
  Matrix v = random_matrix(7, 8, gen);
  KeySegment seg{&k, &v, MaskKind::FullyVisible, nullptr, AttnSite::Other};
  AttnPartial a = attention_lse(q, std::span<const KeySegment>(&seg, 1), 0.3f);
  AttnPartial b = attention_lse(q, std::span<const KeySegment>(&seg, 1), 0.3f);
  CHECK(a.out == b.out);
  CHECK(a.lse == b.lse);
}
