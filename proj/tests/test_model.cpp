#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <vector>

#include "doctest.h"
#include "seqpar/matrix.hpp"
#include "seqpar/model.hpp"

using namespace seqpar;

TEST_CASE("init_params is a pure function of the seed") {
  ModelConfig cfg;
  ModelParams a = init_params(42, cfg);
  ModelParams b = init_params(42, cfg);
  CHECK(a.decoder[0].wq == b.decoder[0].wq);
  CHECK(a.decoder[1].w2 == b.decoder[1].w2);
  CHECK(a.embedding == b.embedding);
  CHECK(a.connector == b.connector);

  ModelParams c = init_params(43, cfg);
  CHECK_FALSE(a.decoder[0].wq == c.decoder[0].wq);
}

TEST_CASE("init_params rejects inconsistent dimensions") {
  ModelConfig cfg;
  cfg.d = 30;
  cfg.heads = 4;  // d not divisible by heads
  CHECK_THROWS(init_params(1, cfg));

  ModelConfig cfg2;
  cfg2.pool = 5;  // 16 patches not divisible by 5
  CHECK_THROWS(init_params(1, cfg2));
}

TEST_CASE("per-head dimension arithmetic") {
  ModelConfig cfg;
  cfg.d = 64;
  cfg.heads = 4;
  CHECK(cfg.head_dim() == 16);
}

TEST_CASE("encode_frames shape and per-frame independence") {
  ModelConfig cfg;
  ModelParams params = init_params(5, cfg);
  PatchifiedVideo video = make_random_video(5, cfg, 6);
  const int per_frame = cfg.tokens_per_frame();

  std::vector<int> all = {0, 1, 2, 3, 4, 5};
  Matrix full = encode_frames(video, params, all);
  CHECK(full.rows == 6 * per_frame);
  CHECK(full.cols == cfg.d);

  std::vector<int> one = {3};
  Matrix single = encode_frames(video, params, one);
  CHECK(single == full.slice_rows(3 * per_frame, 4 * per_frame));

  // Input order does not matter; rows always sorted by frame index.
  std::vector<int> permuted = {5, 0, 3};
  std::vector<int> sorted = {0, 3, 5};
  CHECK(encode_frames(video, params, permuted) == encode_frames(video, params, sorted));

  std::vector<int> bad = {6};
  CHECK_THROWS(encode_frames(video, params, bad));
}

TEST_CASE("embed_text is a table lookup") {
  ModelConfig cfg;
  ModelParams params = init_params(6, cfg);
  CHECK(embed_text(std::vector<int>{}, params).rows == 0);

  Matrix one = embed_text(std::vector<int>{5}, params);
  CHECK(one == params.embedding.slice_rows(5, 6));

  Matrix twice = embed_text(std::vector<int>{9, 9}, params);
  CHECK(twice.slice_rows(0, 1) == twice.slice_rows(1, 2));

  CHECK_THROWS(embed_text(std::vector<int>{cfg.vocab}, params));
}

TEST_CASE("dense oracle with zero layers returns the input") {
  ModelConfig cfg;
  cfg.layers = 0;
  ModelParams params = init_params(7, cfg);
  Matrix e = embed_text(make_random_tokens(7, cfg, 5), params);
  CHECK(dense_prefill_oracle(e, params) == e);
}

TEST_CASE("dense oracle single-token closed form") {
  ModelConfig cfg;
  cfg.layers = 1;
  cfg.norm = false;  // closed form without normalization
  ModelParams params = init_params(8, cfg);
  Matrix e = embed_text(std::vector<int>{17}, params);
  const LayerWeights& w = params.decoder[0];

  // One token attends only itself: attention output is its value row.
  Matrix x = add(e, matmul(matmul(e, w.wv), w.wo));
  Matrix expect = ffn(x, w.w1, w.w2);
  CHECK(max_abs_diff(dense_prefill_oracle(e, params), expect) <= 1e-6f);
}

TEST_CASE("dense oracle determinism and finiteness") {
  ModelConfig cfg;
  cfg.layers = 3;
  ModelParams params = init_params(9, cfg);
  PatchifiedVideo video = make_random_video(9, cfg, 16);
  std::vector<int> frames;
  for (int f = 0; f < 16; ++f) frames.push_back(f);
  Matrix e_v = encode_frames(video, params, frames);
  Matrix e_q = embed_text(make_random_tokens(9, cfg, 7), params);
  const Matrix* parts[] = {&e_v, &e_q};
  Matrix e = concat_rows(parts);

  Matrix a = dense_prefill_oracle(e, params);
  Matrix b = dense_prefill_oracle(e, params);
  CHECK(a == b);
  CHECK(a.all_finite());
  CHECK(a.rows == e.rows);
  CHECK(a.cols == cfg.d);
}
