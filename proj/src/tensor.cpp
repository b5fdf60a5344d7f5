#include "respore/tensor.hpp"

namespace respore {

namespace {

template <typename T>
void require_same_shape(const BasicTensor<T>& a, const BasicTensor<T>& b,
                        const char* op) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(op) + ": shape mismatch " + a.shape().str() +
                     " vs " + b.shape().str());
  }
}

}  // namespace

template <typename T>
BasicTensor<T> add(const BasicTensor<T>& a, const BasicTensor<T>& b) {
  require_same_shape(a, b, "add");
  std::vector<T> out(a.count());
  const T* pa = a.data();
  const T* pb = b.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = pa[i] + pb[i];
  return BasicTensor<T>(a.shape(), std::move(out));
}

template <typename T>
BasicTensor<T> sub(const BasicTensor<T>& a, const BasicTensor<T>& b) {
  require_same_shape(a, b, "sub");
  std::vector<T> out(a.count());
  const T* pa = a.data();
  const T* pb = b.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = pa[i] - pb[i];
  return BasicTensor<T>(a.shape(), std::move(out));
}

template <typename T>
BasicTensor<T> mul(const BasicTensor<T>& a, const BasicTensor<T>& b) {
  require_same_shape(a, b, "mul");
  std::vector<T> out(a.count());
  const T* pa = a.data();
  const T* pb = b.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = pa[i] * pb[i];
  return BasicTensor<T>(a.shape(), std::move(out));
}

template <typename T>
BasicTensor<T> scale(const BasicTensor<T>& a, T s) {
  std::vector<T> out(a.count());
  const T* pa = a.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = pa[i] * s;
  return BasicTensor<T>(a.shape(), std::move(out));
}

template BasicTensor<double> add(const BasicTensor<double>&, const BasicTensor<double>&);
template BasicTensor<double> sub(const BasicTensor<double>&, const BasicTensor<double>&);
template BasicTensor<double> mul(const BasicTensor<double>&, const BasicTensor<double>&);
template BasicTensor<double> scale(const BasicTensor<double>&, double);
template BasicTensor<float> add(const BasicTensor<float>&, const BasicTensor<float>&);
template BasicTensor<float> sub(const BasicTensor<float>&, const BasicTensor<float>&);
template BasicTensor<float> mul(const BasicTensor<float>&, const BasicTensor<float>&);
template BasicTensor<float> scale(const BasicTensor<float>&, float);

}  // namespace respore
