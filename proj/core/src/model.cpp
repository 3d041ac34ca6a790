#include "seqpar/model.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "seqpar/rng.hpp"

namespace seqpar {

namespace {

Matrix random_matrix(std::mt19937_64& gen, int rows, int cols, float stddev) {
  std::normal_distribution<float> dist(0.0f, stddev);
  Matrix m(rows, cols);
  for (float& v : m.data) v = dist(gen);
  return m;
}

LayerWeights random_layer(std::mt19937_64& gen, int d, int ffn_dim) {
  const float s = 1.0f / std::sqrt(static_cast<float>(d));
  LayerWeights w;
  w.wq = random_matrix(gen, d, d, s);
  w.wk = random_matrix(gen, d, d, s);
  w.wv = random_matrix(gen, d, d, s);
  w.wo = random_matrix(gen, d, d, s);
  w.w1 = random_matrix(gen, d, ffn_dim, s);
  w.w2 = random_matrix(gen, ffn_dim, d, 1.0f / std::sqrt(static_cast<float>(ffn_dim)));
  w.g1.assign(d, 1.0f);
  w.g2.assign(d, 1.0f);
  return w;
}

}  // namespace

ModelParams init_params(uint64_t seed, const ModelConfig& cfg) {
  if (cfg.d % cfg.heads != 0) {
    throw std::invalid_argument("init_params: d must be divisible by heads");
  }
  if ((cfg.patch_h * cfg.patch_w) % cfg.pool != 0) {
    throw std::invalid_argument("init_params: patch count must be divisible by pool factor");
  }
  ModelParams p;
  p.cfg = cfg;
  p.seed = seed;
  auto gen = substream(seed, "params");
  p.decoder.reserve(cfg.layers);
  for (int l = 0; l < cfg.layers; ++l) {
    p.decoder.push_back(random_layer(gen, cfg.d, cfg.ffn_dim));
  }
  p.encoder = random_layer(gen, cfg.d_v, 2 * cfg.d_v);
  p.connector = random_matrix(gen, cfg.d_v, cfg.d, 1.0f / std::sqrt(static_cast<float>(cfg.d_v)));
  p.embedding = random_matrix(gen, cfg.vocab, cfg.d, 1.0f);
  return p;
}

namespace {

// Shared layer skeleton: attention over caller-provided segments, output
// projection, residual, then the feed-forward half.
Matrix layer_step(const Matrix& x, const LayerWeights& w, bool norm, int heads,
                  MaskKind self_mask, AttnSite site, CostCounters* counters) {
  const Matrix x_in = norm ? layer_norm(x, w.g1) : x;
  Matrix q = matmul(x_in, w.wq);
  Matrix k = matmul(x_in, w.wk);
  Matrix v = matmul(x_in, w.wv);
  const KeySegment seg{&k, &v, self_mask, nullptr, site};
  MultiHeadPartial attn = mha_lse(q, std::span<const KeySegment>(&seg, 1), heads, false, counters);
  Matrix h = add(x, matmul(attn.out, w.wo));
  const Matrix f_in = norm ? layer_norm(h, w.g2) : h;
  Matrix f = matmul(relu(matmul(f_in, w.w1)), w.w2);
  add_inplace(h, f);
  return h;
}

}  // namespace

Matrix encode_frames(const PatchifiedVideo& video, const ModelParams& params,
                     std::span<const int> frame_indices) {
  const ModelConfig& cfg = params.cfg;
  if (video.d_v != cfg.d_v || video.patch_h != cfg.patch_h || video.patch_w != cfg.patch_w) {
    throw std::invalid_argument("encode_frames: video geometry does not match config");
  }
  std::vector<int> order(frame_indices.begin(), frame_indices.end());
  std::sort(order.begin(), order.end());
  const int per_frame = cfg.tokens_per_frame();
  Matrix out(static_cast<int>(order.size()) * per_frame, cfg.d);
  int r = 0;
  for (int f : order) {
    if (f < 0 || f >= video.frames) {
      throw std::out_of_range("encode_frames: frame index " + std::to_string(f));
    }
    Matrix enc = layer_step(video.frame_patches[f], params.encoder, cfg.norm, 1,
                            MaskKind::FullyVisible, AttnSite::EncodeAttn, nullptr);
    // Connector: mean-pool groups of `pool` consecutive patch outputs, then
    // project into the decoder width.
    Matrix pooled(per_frame, cfg.d_v);
    for (int g = 0; g < per_frame; ++g) {
      for (int c = 0; c < cfg.d_v; ++c) {
        float acc = 0.0f;
        for (int j = 0; j < cfg.pool; ++j) acc += enc.at(g * cfg.pool + j, c);
        pooled.at(g, c) = acc / static_cast<float>(cfg.pool);
      }
    }
    out.paste_rows(r, matmul(pooled, params.connector));
    r += per_frame;
  }
  return out;
}

Matrix embed_text(std::span<const int> tokens, const ModelParams& params) {
  Matrix out(static_cast<int>(tokens.size()), params.cfg.d);
  for (size_t i = 0; i < tokens.size(); ++i) {
    if (tokens[i] < 0 || tokens[i] >= params.cfg.vocab) {
      throw std::out_of_range("embed_text: token id " + std::to_string(tokens[i]));
    }
    out.paste_rows(static_cast<int>(i), params.embedding.slice_rows(tokens[i], tokens[i] + 1));
  }
  return out;
}

Matrix decoder_layer_dense(const Matrix& x, const LayerWeights& w, const ModelConfig& cfg,
                           CostCounters* counters) {
  return layer_step(x, w, cfg.norm, cfg.heads, MaskKind::CausalWithin, AttnSite::Other, counters);
}

Matrix dense_prefill_oracle(const Matrix& e, const ModelParams& params, CostCounters* counters) {
  Matrix x = e;
  for (const LayerWeights& w : params.decoder) {
    x = decoder_layer_dense(x, w, params.cfg, counters);
  }
  return x;
}

PatchifiedVideo make_random_video(uint64_t seed, const ModelConfig& cfg, int frames) {
  PatchifiedVideo v;
  v.frames = frames;
  v.patch_h = cfg.patch_h;
  v.patch_w = cfg.patch_w;
  v.d_v = cfg.d_v;
  auto gen = substream(seed, "input.video");
  std::normal_distribution<float> dist(0.0f, 1.0f);
  v.frame_patches.reserve(frames);
  for (int f = 0; f < frames; ++f) {
    Matrix m(cfg.patch_h * cfg.patch_w, cfg.d_v);
    for (float& x : m.data) x = dist(gen);
    v.frame_patches.push_back(std::move(m));
  }
  return v;
}

std::vector<int> make_random_tokens(uint64_t seed, const ModelConfig& cfg, int count) {
  auto gen = substream(seed, "input.text");
  std::uniform_int_distribution<int> dist(0, cfg.vocab - 1);
  std::vector<int> tokens(count);
  for (int& t : tokens) t = dist(gen);
  return tokens;
}

}  // namespace seqpar
