#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace seqpar {

// Dense row-major f32 matrix, the universal carrier for embeddings,
// hidden states and Q/K/V blocks.
struct Matrix {
  int rows = 0;
  int cols = 0;
  std::vector<float> data;

  Matrix() = default;
  Matrix(int r, int c) : rows(r), cols(c), data(static_cast<size_t>(r) * c, 0.0f) {}

  float& at(int r, int c) { return data[static_cast<size_t>(r) * cols + c]; }
  float at(int r, int c) const { return data[static_cast<size_t>(r) * cols + c]; }
  float* row(int r) { return data.data() + static_cast<size_t>(r) * cols; }
  const float* row(int r) const { return data.data() + static_cast<size_t>(r) * cols; }

  bool same_shape(const Matrix& o) const { return rows == o.rows && cols == o.cols; }
  bool all_finite() const;

  Matrix slice_rows(int r0, int r1) const;
  Matrix slice_cols(int c0, int c1) const;
  void paste_rows(int r0, const Matrix& src);
  void paste_cols(int c0, const Matrix& src);
};

bool operator==(const Matrix& a, const Matrix& b);

// Standard product with a fixed accumulation order (row-major, ascending k),
// so repeated runs are bit-identical.
Matrix matmul(const Matrix& a, const Matrix& b);

// a * b^T, used for attention logits.
Matrix matmul_nt(const Matrix& a, const Matrix& b);

// Row-wise softmax with max subtraction. Every row must contain at least one
// finite entry; a fully masked (-inf) row is an error.
Matrix softmax_rows(const Matrix& m);

Matrix add(const Matrix& a, const Matrix& b);
void add_inplace(Matrix& a, const Matrix& b);
Matrix relu(const Matrix& m);

// Per-row normalization with a learned gain and no bias.
Matrix layer_norm(const Matrix& m, std::span<const float> gain);

Matrix concat_rows(std::span<const Matrix* const> parts);

float max_abs_diff(const Matrix& a, const Matrix& b);

}  // namespace seqpar
