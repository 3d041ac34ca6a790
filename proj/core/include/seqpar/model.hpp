#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "seqpar/attention.hpp"
#include "seqpar/matrix.hpp"

namespace seqpar {

struct ModelConfig {
  int layers = 2;
  int d = 32;
  int ffn_dim = 64;
  int heads = 2;
  int vocab = 256;
  int d_v = 16;     // patch embedding width
  int patch_h = 4;  // patch grid
  int patch_w = 4;
  int pool = 2;  // patches per output video embedding
  bool norm = true;

  int head_dim() const { return d / heads; }
  int tokens_per_frame() const { return (patch_h * patch_w) / pool; }
};

struct LayerWeights {
  Matrix wq, wk, wv, wo;
  Matrix w1, w2;
  std::vector<float> g1, g2;  // norm gains (pre-attention, pre-ffn)
};

struct ModelParams {
  ModelConfig cfg;
  std::vector<LayerWeights> decoder;
  LayerWeights encoder;  // one attention+ffn layer over patches, width d_v
  Matrix connector;      // d_v -> d projection after pooling
  Matrix embedding;      // vocab x d
  uint64_t seed = 0;
};

struct PatchifiedVideo {
  int frames = 0;
  int patch_h = 0;
  int patch_w = 0;
  int d_v = 0;
  std::vector<Matrix> frame_patches;  // frames matrices of (patch_h*patch_w) x d_v
};

// Deterministic pseudo-random parameters; identical seed+config gives
// bit-identical weights.
ModelParams init_params(uint64_t seed, const ModelConfig& cfg);

// One encoder layer over each listed frame's patches, then mean-pool groups
// of `pool` patch outputs and project d_v -> d. Output rows are ordered by
// ascending frame index; encoding a frame does not depend on which other
// frames are in the batch.
Matrix encode_frames(const PatchifiedVideo& video, const ModelParams& params,
                     std::span<const int> frame_indices);

Matrix embed_text(std::span<const int> tokens, const ModelParams& params);

// One decoder layer step shared by the oracle and the distributed pipeline:
// x + attn(norm(x)) * W_o followed by x + relu(norm(x) w1) w2.
Matrix decoder_layer_dense(const Matrix& x, const LayerWeights& w, const ModelConfig& cfg,
                           CostCounters* counters = nullptr);

// Monolithic full-causal-attention forward over all layers; the ground truth
// every distributed run is compared against.
Matrix dense_prefill_oracle(const Matrix& e, const ModelParams& params,
                            CostCounters* counters = nullptr);

PatchifiedVideo make_random_video(uint64_t seed, const ModelConfig& cfg, int frames);
std::vector<int> make_random_tokens(uint64_t seed, const ModelConfig& cfg, int count);

}  // namespace seqpar
