#pragma once

#include <cmath>
#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

#include "cacdn/common.hpp"

namespace cacdn {

// Dense row-major tensor. Activations use [N, C, H, W]; stored grids in
// data records use [C, H, W]. Scalar type is a template parameter so the
// finite-difference gradient checks can run the whole stack in double.
template <typename T>
struct TensorT {
  std::vector<int> shape;
  std::vector<T> data;

  TensorT() = default;
  explicit TensorT(std::vector<int> s)
      : shape(std::move(s)), data(static_cast<size_t>(numel_of(shape)), T(0)) {}

  static int64_t numel_of(const std::vector<int>& s) {
    int64_t n = 1;
    for (int d : s) n *= d;
    return n;
  }

  static TensorT zeros(std::vector<int> s) { return TensorT(std::move(s)); }

  static TensorT full(std::vector<int> s, T v) {
    TensorT t(std::move(s));
    std::fill(t.data.begin(), t.data.end(), v);
    return t;
  }

  int64_t numel() const { return static_cast<int64_t>(data.size()); }
  int ndim() const { return static_cast<int>(shape.size()); }
  int dim(int i) const { return shape[static_cast<size_t>(i)]; }
  bool empty() const { return data.empty(); }

  T* ptr() { return data.data(); }
  const T* ptr() const { return data.data(); }

  void fill(T v) { std::fill(data.begin(), data.end(), v); }

  bool same_shape(const TensorT& o) const { return shape == o.shape; }

  // [C,H,W] indexing
  T& at3(int c, int h, int w) {
    return data[(static_cast<size_t>(c) * shape[1] + h) * shape[2] + w];
  }
  T at3(int c, int h, int w) const {
    return data[(static_cast<size_t>(c) * shape[1] + h) * shape[2] + w];
  }

  // [N,C,H,W] indexing
  T& at4(int n, int c, int h, int w) {
    return data[((static_cast<size_t>(n) * shape[1] + c) * shape[2] + h) *
                    shape[3] + w];
  }
  T at4(int n, int c, int h, int w) const {
    return data[((static_cast<size_t>(n) * shape[1] + c) * shape[2] + h) *
                    shape[3] + w];
  }

  bool all_finite() const {
    for (T v : data)
      if (!std::isfinite(static_cast<double>(v))) return false;
    return true;
  }

  std::string shape_str() const {
    std::string s = "[";
    for (size_t i = 0; i < shape.size(); ++i) {
      if (i) s += ",";
      s += std::to_string(shape[i]);
    }
    return s + "]";
  }

  template <typename U>
  TensorT<U> cast() const {
    TensorT<U> out;
    out.shape = shape;
    out.data.resize(data.size());
    for (size_t i = 0; i < data.size(); ++i)
      out.data[i] = static_cast<U>(data[i]);
    return out;
  }
};

using Tensor = TensorT<float>;

template <typename T>
inline void check_shape(const TensorT<T>& t, const std::vector<int>& want,
                        const std::string& what) {
  if (t.shape != want) {
    TensorT<T> w;
    w.shape = want;
    fail("shape_mismatch", what + ": got " + t.shape_str() + ", want " +
                               w.shape_str());
  }
}

// Slice one sample [C,H,W] out of a batch tensor [N,C,H,W] (copy).
template <typename T>
TensorT<T> slice_sample(const TensorT<T>& batch, int n) {
  TensorT<T> out({batch.dim(1), batch.dim(2), batch.dim(3)});
  size_t sz = static_cast<size_t>(out.numel());
  std::copy_n(batch.data.begin() + static_cast<ptrdiff_t>(sz) * n, sz,
              out.data.begin());
  return out;
}

// Stack per-sample [C,H,W] tensors into [N,C,H,W].
template <typename T>
TensorT<T> stack_samples(const std::vector<const TensorT<T>*>& samples) {
  TensorT<T> out({static_cast<int>(samples.size()), samples[0]->dim(0),
                  samples[0]->dim(1), samples[0]->dim(2)});
  size_t sz = static_cast<size_t>(samples[0]->numel());
  for (size_t n = 0; n < samples.size(); ++n)
    std::copy_n(samples[n]->data.begin(), sz,
                out.data.begin() + static_cast<ptrdiff_t>(sz * n));
  return out;
}

}  // namespace cacdn
