#pragma once

#include <cassert>
#include <cstddef>
#include <memory>
#include <string>
#include <vector>

#include "respore/errors.hpp"

namespace respore {

// Dimensions of a 4-D tensor: batch, channels, rows, cols.
struct Shape {
  int n = 0, c = 0, h = 0, w = 0;

  std::size_t count() const {
    return static_cast<std::size_t>(n) * c * h * w;
  }
  bool operator==(const Shape&) const = default;
  std::string str() const {
    return "(" + std::to_string(n) + "," + std::to_string(c) + "," +
           std::to_string(h) + "," + std::to_string(w) + ")";
  }
};

// Dense 4-D array in n-major, then c, then h, then w order. Storage is
// shared between copies; treat a tensor as immutable once it has been
// handed to anyone else. In-place mutation (`data_mut`, `at_mut`) is for
// single-owner builders only.
template <typename T>
class BasicTensor {
 public:
  BasicTensor() : shape_{0, 0, 0, 0}, data_(std::make_shared<std::vector<T>>()) {}

  BasicTensor(Shape shape, T fill) : shape_(shape) {
    check_shape(shape);
    data_ = std::make_shared<std::vector<T>>(shape.count(), fill);
  }

  BasicTensor(Shape shape, std::vector<T>&& values) : shape_(shape) {
    check_shape(shape);
    if (values.size() != shape.count()) {
      throw ShapeError("tensor data length " + std::to_string(values.size()) +
                       " does not match shape " + shape.str());
    }
    data_ = std::make_shared<std::vector<T>>(std::move(values));
  }

  const Shape& shape() const { return shape_; }
  std::size_t count() const { return shape_.count(); }

  const T* data() const { return data_->data(); }
  T* data_mut() { return data_->data(); }

  // Unchecked access. Callers guarantee indices are in bounds.
  T operator()(int n, int c, int h, int w) const {
    return (*data_)[offset_unchecked(n, c, h, w)];
  }

  // Bounds-checked access.
  T at(int n, int c, int h, int w) const {
    return (*data_)[offset(n, c, h, w)];
  }
  T& at_mut(int n, int c, int h, int w) {
    return (*data_)[offset(n, c, h, w)];
  }

  std::size_t offset(int n, int c, int h, int w) const {
    if (n < 0 || n >= shape_.n || c < 0 || c >= shape_.c || h < 0 ||
        h >= shape_.h || w < 0 || w >= shape_.w) {
      throw ShapeError("index (" + std::to_string(n) + "," + std::to_string(c) +
                       "," + std::to_string(h) + "," + std::to_string(w) +
                       ") out of bounds for shape " + shape_.str());
    }
    return offset_unchecked(n, c, h, w);
  }

  // Pointer to the start of one (n, c) plane of h*w values.
  const T* plane(int n, int c) const {
    return data() + (static_cast<std::size_t>(n) * shape_.c + c) *
                        (static_cast<std::size_t>(shape_.h) * shape_.w);
  }
  T* plane_mut(int n, int c) {
    return data_mut() + (static_cast<std::size_t>(n) * shape_.c + c) *
                            (static_cast<std::size_t>(shape_.h) * shape_.w);
  }

 private:
  static void check_shape(const Shape& s) {
    if (s.n < 1 || s.c < 1 || s.h < 1 || s.w < 1) {
      throw ShapeError("all tensor dimensions must be >= 1, got " + s.str());
    }
  }

  std::size_t offset_unchecked(int n, int c, int h, int w) const {
    return ((static_cast<std::size_t>(n) * shape_.c + c) * shape_.h + h) *
               shape_.w +
           w;
  }

  Shape shape_;
  std::shared_ptr<std::vector<T>> data_;
};

using Tensor = BasicTensor<double>;
using TensorF = BasicTensor<float>;

template <typename T>
BasicTensor<T> zeros_like(const BasicTensor<T>& x) {
  return BasicTensor<T>(x.shape(), T(0));
}

// Pointwise binary/scalar operations. Tensor-tensor forms require equal
// shapes.
template <typename T>
BasicTensor<T> add(const BasicTensor<T>& a, const BasicTensor<T>& b);
template <typename T>
BasicTensor<T> sub(const BasicTensor<T>& a, const BasicTensor<T>& b);
template <typename T>
BasicTensor<T> mul(const BasicTensor<T>& a, const BasicTensor<T>& b);
template <typename T>
BasicTensor<T> scale(const BasicTensor<T>& a, T s);

extern template BasicTensor<double> add(const BasicTensor<double>&, const BasicTensor<double>&);
extern template BasicTensor<double> sub(const BasicTensor<double>&, const BasicTensor<double>&);
extern template BasicTensor<double> mul(const BasicTensor<double>&, const BasicTensor<double>&);
extern template BasicTensor<double> scale(const BasicTensor<double>&, double);
extern template BasicTensor<float> add(const BasicTensor<float>&, const BasicTensor<float>&);
extern template BasicTensor<float> sub(const BasicTensor<float>&, const BasicTensor<float>&);
extern template BasicTensor<float> mul(const BasicTensor<float>&, const BasicTensor<float>&);
extern template BasicTensor<float> scale(const BasicTensor<float>&, float);

}  // namespace respore
