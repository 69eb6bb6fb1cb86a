#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace hit {

using Shape = std::vector<std::size_t>;

std::size_t shape_size(const Shape& shape);
std::string shape_string(const Shape& shape);

// Dense row-major array. Every extent is positive. Operations treat a tensor
// as a matrix of rows() x cols(): the last extent is the column count and all
// leading extents fold into rows, so a rank-1 tensor of length n is a 1 x n
// row vector.
template <typename T>
class Tensor {
 public:
  using value_type = T;

  Tensor() = default;
  explicit Tensor(Shape shape, T fill = T(0));
  Tensor(Shape shape, std::vector<T> values);

  static Tensor from_rows(std::initializer_list<std::initializer_list<T>> rows);
  static Tensor vector(std::initializer_list<T> values);
  static Tensor scalar(T value) { return Tensor({1, 1}, std::vector<T>{value}); }

  const Shape& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }
  std::size_t rows() const;
  std::size_t cols() const { return shape_.empty() ? 0 : shape_.back(); }

  std::span<const T> data() const { return data_; }
  std::span<T> data() { return data_; }
  std::span<const T> row(std::size_t r) const {
    return std::span<const T>(data_).subspan(r * cols(), cols());
  }
  std::span<T> row(std::size_t r) {
    return std::span<T>(data_).subspan(r * cols(), cols());
  }

  T operator()(std::size_t r, std::size_t c) const { return data_[r * cols() + c]; }
  T& operator()(std::size_t r, std::size_t c) { return data_[r * cols() + c]; }
  T operator[](std::size_t i) const { return data_[i]; }
  T& operator[](std::size_t i) { return data_[i]; }

  // Value of a one-element tensor.
  T item() const;
  bool all_finite() const;

  template <typename U>
  Tensor<U> cast() const {
    std::vector<U> out(data_.begin(), data_.end());
    return Tensor<U>(shape_, std::move(out));
  }

  friend bool operator==(const Tensor& a, const Tensor& b) = default;

 private:
  Shape shape_;
  std::vector<T> data_;
};

extern template class Tensor<float>;
extern template class Tensor<double>;

}  // namespace hit
