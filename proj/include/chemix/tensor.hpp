// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <initializer_list>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include "chemix/types.hpp"

namespace chemix {

using Shape = std::vector<Index>;

inline Index shape_size(const Shape& s) {
  Index n = 1;
  for (Index d : s) n *= d;
  return n;
}

std::string shape_to_string(const Shape& s);

/// Dense tensor of 64-bit floats with row-major flat storage. Value
/// semantics; rank is the shape length and every dimension is >= 1.
class Tensor {
 public:
  Tensor() = default;

  explicit Tensor(Shape shape) : shape_(std::move(shape)) {
    validate_shape();
    data_ = ArrayX::Zero(shape_size(shape_));
  }

  Tensor(Shape shape, ArrayX data) : shape_(std::move(shape)), data_(std::move(data)) {
    validate_shape();
    if (data_.size() != shape_size(shape_))
      throw std::invalid_argument("tensor data length does not match shape " +
                                  shape_to_string(shape_));
  }

  Tensor(Shape shape, std::initializer_list<Scalar> values)
      : Tensor(std::move(shape), [&] {
          ArrayX a(static_cast<Index>(values.size()));
          Index i = 0;
          for (Scalar v : values) a[i++] = v;
          return a;
        }()) {}

  static Tensor zeros(Shape shape) { return Tensor(std::move(shape)); }

  static Tensor full(Shape shape, Scalar value) {
    Tensor t(std::move(shape));
    t.data_.setConstant(value);
    return t;
  }

  const Shape& shape() const { return shape_; }
  Index rank() const { return static_cast<Index>(shape_.size()); }
  Index dim(Index i) const { return shape_[static_cast<std::size_t>(i)]; }
  Index size() const { return data_.size(); }

  ArrayX& array() { return data_; }
  const ArrayX& array() const { return data_; }
  Scalar* data() { return data_.data(); }
  const Scalar* data() const { return data_.data(); }

  Scalar& operator[](Index i) { return data_[i]; }
  Scalar operator[](Index i) const { return data_[i]; }

  /// 2-D view (rank must be 2).
  MatMap matrix() {
    require_rank(2);
    return MatMap(data_.data(), shape_[0], shape_[1]);
  }
  ConstMatMap matrix() const {
    require_rank(2);
    return ConstMatMap(data_.data(), shape_[0], shape_[1]);
  }

  /// (everything-but-last, last) view; works for any rank >= 1.
  MatMap by_last() {
    const Index last = shape_.back();
    return MatMap(data_.data(), data_.size() / last, last);
  }
  ConstMatMap by_last() const {
    const Index last = shape_.back();
    return ConstMatMap(data_.data(), data_.size() / last, last);
  }

  bool all_finite() const { return data_.isFinite().all(); }

  bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }

 private:
  void validate_shape() const {
    if (shape_.empty()) throw std::invalid_argument("tensor rank must be >= 1");
    for (Index d : shape_)
      if (d < 1) throw std::invalid_argument("tensor dims must be >= 1, got " +
                                             shape_to_string(shape_));
  }
  void require_rank(Index r) const {
    if (rank() != r)
      throw std::invalid_argument("expected rank " + std::to_string(r) + " tensor, got shape " +
                                  shape_to_string(shape_));
  }

  Shape shape_;
  ArrayX data_;
};

}  // namespace chemix
