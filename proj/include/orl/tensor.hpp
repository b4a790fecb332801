#pragma once

#include "orl/errors.hpp"

#include <Eigen/Core>

#include <cstddef>
#include <functional>
#include <numeric>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace orl {

using Shape = std::vector<std::size_t>;

inline std::size_t shape_size(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string shape_string(const Shape& shape);

/// Shaped dense array with flat row-major storage.
template <typename Scalar>
class Tensor {
 public:
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  using RowMajorMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  using MatrixMap = Eigen::Map<RowMajorMatrix>;
  using ConstMatrixMap = Eigen::Map<const RowMajorMatrix>;

  Tensor() = default;

  explicit Tensor(Shape shape) : shape_(std::move(shape)) {
    validate_shape();
    data_ = Vector::Zero(static_cast<Eigen::Index>(shape_size(shape_)));
  }

  Tensor(Shape shape, Vector data) : shape_(std::move(shape)), data_(std::move(data)) {
    validate_shape();
    if (static_cast<std::size_t>(data_.size()) != shape_size(shape_)) {
      throw InvalidArgument("tensor data length " + std::to_string(data_.size()) +
                            " does not match shape " + shape_string(shape_));
    }
  }

  const Shape& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  Eigen::Index size() const { return data_.size(); }

  Vector& data() { return data_; }
  const Vector& data() const { return data_; }

  // 2-D view; rank-1 tensors are viewed as a single column.
  MatrixMap matrix() { return MatrixMap(data_.data(), rows(), cols()); }
  ConstMatrixMap matrix() const { return ConstMatrixMap(data_.data(), rows(), cols()); }

  bool all_finite() const { return data_.allFinite(); }

  friend bool operator==(const Tensor& a, const Tensor& b) {
    return a.shape_ == b.shape_ && a.data_.size() == b.data_.size() &&
           (a.data_.size() == 0 || a.data_ == b.data_);
  }

 private:
  void validate_shape() const {
    for (std::size_t d : shape_) {
      if (d == 0) throw InvalidArgument("tensor dimensions must be positive, got " + shape_string(shape_));
    }
  }
  Eigen::Index rows() const {
    if (rank() == 0) return 1;
    return static_cast<Eigen::Index>(shape_[0]);
  }
  Eigen::Index cols() const {
    if (rank() <= 1) return 1;
    return static_cast<Eigen::Index>(shape_size(shape_) / shape_[0]);
  }

  Shape shape_;
  Vector data_;
};

using RealArray = Tensor<double>;

/// Named, ordered collection of arrays. Order is insertion order and is what
/// checkpoints serialize.
class NetParams {
 public:
  using Entry = std::pair<std::string, RealArray>;

  void add(std::string name, RealArray value);

  bool contains(std::string_view name) const;
  RealArray& at(std::string_view name);
  const RealArray& at(std::string_view name) const;

  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }
  std::size_t parameter_count() const;

  auto begin() { return entries_.begin(); }
  auto end() { return entries_.end(); }
  auto begin() const { return entries_.begin(); }
  auto end() const { return entries_.end(); }
  Entry& operator[](std::size_t i) { return entries_[i]; }
  const Entry& operator[](std::size_t i) const { return entries_[i]; }

  // Same names, order and shapes.
  bool same_layout(const NetParams& other) const;
  NetParams zeros_like() const;

  // Copies entries whose name starts with `prefix`, with the prefix stripped.
  NetParams with_prefix_stripped(std::string_view prefix) const;
  void append_prefixed(std::string_view prefix, const NetParams& other);

  friend bool operator==(const NetParams& a, const NetParams& b) { return a.entries_ == b.entries_; }

 private:
  std::vector<Entry> entries_;
};

void require_same_layout(const NetParams& a, const NetParams& b, std::string_view context);

}  // namespace orl
