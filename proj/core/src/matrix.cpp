#include "seqpar/matrix.hpp"

#include <cmath>
#include <cstring>
#include <limits>
#include <stdexcept>
#include <string>

namespace seqpar {

namespace {
[[noreturn]] void shape_error(const std::string& what) {
  throw std::invalid_argument("matrix shape mismatch: " + what);
}
}  // namespace

bool Matrix::all_finite() const {
  for (float v : data) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

Matrix Matrix::slice_rows(int r0, int r1) const {
  if (r0 < 0 || r1 < r0 || r1 > rows) shape_error("slice_rows out of range");
  Matrix out(r1 - r0, cols);
  std::memcpy(out.data.data(), row(r0), static_cast<size_t>(r1 - r0) * cols * sizeof(float));
  return out;
}

Matrix Matrix::slice_cols(int c0, int c1) const {
  if (c0 < 0 || c1 < c0 || c1 > cols) shape_error("slice_cols out of range");
  Matrix out(rows, c1 - c0);
  for (int r = 0; r < rows; ++r) {
    std::memcpy(out.row(r), row(r) + c0, static_cast<size_t>(c1 - c0) * sizeof(float));
  }
  return out;
}

void Matrix::paste_rows(int r0, const Matrix& src) {
  if (src.cols != cols || r0 < 0 || r0 + src.rows > rows) shape_error("paste_rows");
  std::memcpy(row(r0), src.data.data(), static_cast<size_t>(src.rows) * cols * sizeof(float));
}

void Matrix::paste_cols(int c0, const Matrix& src) {
  if (src.rows != rows || c0 < 0 || c0 + src.cols > cols) shape_error("paste_cols");
  for (int r = 0; r < rows; ++r) {
    std::memcpy(row(r) + c0, src.row(r), static_cast<size_t>(src.cols) * sizeof(float));
  }
}

bool operator==(const Matrix& a, const Matrix& b) {
  return a.rows == b.rows && a.cols == b.cols && a.data == b.data;
}

Matrix matmul(const Matrix& a, const Matrix& b) {
  if (a.cols != b.rows) shape_error("matmul inner dims");
  Matrix out(a.rows, b.cols);
  for (int i = 0; i < a.rows; ++i) {
    const float* arow = a.row(i);
    float* orow = out.row(i);
    for (int k = 0; k < a.cols; ++k) {
      const float aik = arow[k];
      const float* brow = b.row(k);
      for (int j = 0; j < b.cols; ++j) {
        orow[j] += aik * brow[j];
      }
    }
  }
  return out;
}

Matrix matmul_nt(const Matrix& a, const Matrix& b) {
  if (a.cols != b.cols) shape_error("matmul_nt inner dims");
  Matrix out(a.rows, b.rows);
  for (int i = 0; i < a.rows; ++i) {
    const float* arow = a.row(i);
    for (int j = 0; j < b.rows; ++j) {
      const float* brow = b.row(j);
      float acc = 0.0f;
      for (int k = 0; k < a.cols; ++k) acc += arow[k] * brow[k];
      out.at(i, j) = acc;
    }
  }
  return out;
}

Matrix softmax_rows(const Matrix& m) {
  Matrix out(m.rows, m.cols);
  for (int i = 0; i < m.rows; ++i) {
    const float* in = m.row(i);
    float mx = -std::numeric_limits<float>::infinity();
    for (int j = 0; j < m.cols; ++j) mx = std::max(mx, in[j]);
    if (!std::isfinite(mx)) {
      throw std::invalid_argument("softmax_rows: fully masked row " + std::to_string(i));
    }
    double sum = 0.0;
    float* o = out.row(i);
    for (int j = 0; j < m.cols; ++j) {
      const double e = std::isfinite(in[j]) ? std::exp(static_cast<double>(in[j] - mx)) : 0.0;
      o[j] = static_cast<float>(e);
      sum += e;
    }
    const float inv = static_cast<float>(1.0 / sum);
    for (int j = 0; j < m.cols; ++j) o[j] *= inv;
  }
  return out;
}

Matrix add(const Matrix& a, const Matrix& b) {
  if (!a.same_shape(b)) shape_error("add");
  Matrix out = a;
  for (size_t i = 0; i < out.data.size(); ++i) out.data[i] += b.data[i];
  return out;
}

void add_inplace(Matrix& a, const Matrix& b) {
  if (!a.same_shape(b)) shape_error("add_inplace");
  for (size_t i = 0; i < a.data.size(); ++i) a.data[i] += b.data[i];
}

Matrix relu(const Matrix& m) {
  Matrix out = m;
  for (float& v : out.data) v = v > 0.0f ? v : 0.0f;
  return out;
}

Matrix layer_norm(const Matrix& m, std::span<const float> gain) {
  if (static_cast<int>(gain.size()) != m.cols) shape_error("layer_norm gain width");
  constexpr double kEps = 1e-5;
  Matrix out(m.rows, m.cols);
  for (int i = 0; i < m.rows; ++i) {
    const float* in = m.row(i);
    double mean = 0.0;
    for (int j = 0; j < m.cols; ++j) mean += in[j];
    mean /= m.cols;
    double var = 0.0;
    for (int j = 0; j < m.cols; ++j) {
      const double c = in[j] - mean;
      var += c * c;
    }
    var /= m.cols;
    const double inv = 1.0 / std::sqrt(var + kEps);
    float* o = out.row(i);
    for (int j = 0; j < m.cols; ++j) {
      o[j] = static_cast<float>((in[j] - mean) * inv) * gain[j];
    }
  }
  return out;
}

Matrix concat_rows(std::span<const Matrix* const> parts) {
  int rows = 0;
  int cols = -1;
  for (const Matrix* p : parts) {
    rows += p->rows;
    if (cols < 0) cols = p->cols;
    if (p->cols != cols && p->rows > 0) shape_error("concat_rows widths");
  }
  Matrix out(rows, cols < 0 ? 0 : cols);
  int r = 0;
  for (const Matrix* p : parts) {
    if (p->rows > 0) out.paste_rows(r, *p);
    r += p->rows;
  }
  return out;
}

float max_abs_diff(const Matrix& a, const Matrix& b) {
  if (!a.same_shape(b)) shape_error("max_abs_diff");
  float mx = 0.0f;
  for (size_t i = 0; i < a.data.size(); ++i) {
    mx = std::max(mx, std::abs(a.data[i] - b.data[i]));
  }
  return mx;
}

}  // namespace seqpar
