#ifndef FNET_TENSOR_HPP
#define FNET_TENSOR_HPP

#include <Eigen/Core>

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace fnet {

enum class TensorErrc {
  ShapeMismatch,
  BadShape,
};

class TensorError : public std::runtime_error {
 public:
  TensorError(TensorErrc code, const std::string& what)
      : std::runtime_error(what), code_(code) {}
  TensorErrc code() const { return code_; }

 private:
  TensorErrc code_;
};

// Dense n-d array, row-major, templated on scalar so the same op graph can
// run in float for training and double for finite-difference checks.
template <typename Scalar>
class Tensor {
 public:
  using Storage = Eigen::Array<Scalar, Eigen::Dynamic, 1>;

  Tensor() = default;

  explicit Tensor(std::vector<int> shape) : shape_(std::move(shape)) {
    data_.setZero(checked_numel(shape_));
  }

  Tensor(std::vector<int> shape, std::vector<Scalar> values)
      : shape_(std::move(shape)) {
    const std::int64_t n = checked_numel(shape_);
    if (static_cast<std::int64_t>(values.size()) != n) {
      throw TensorError(TensorErrc::ShapeMismatch,
                        "tensor data length does not match shape");
    }
    data_ = Eigen::Map<const Storage>(values.data(), n);
  }

  static Tensor zeros(std::vector<int> shape) { return Tensor(std::move(shape)); }

  static Tensor full(std::vector<int> shape, Scalar v) {
    Tensor t(std::move(shape));
    t.data_.setConstant(v);
    return t;
  }

  static Tensor scalar(Scalar v) { return full({1}, v); }

  const std::vector<int>& shape() const { return shape_; }
  int rank() const { return static_cast<int>(shape_.size()); }
  int dim(int i) const { return shape_.at(static_cast<std::size_t>(i)); }
  std::int64_t numel() const { return data_.size(); }
  bool empty() const { return data_.size() == 0; }

  Scalar* data() { return data_.data(); }
  const Scalar* data() const { return data_.data(); }
  Storage& array() { return data_; }
  const Storage& array() const { return data_; }

  Scalar& operator[](std::int64_t i) { return data_[i]; }
  Scalar operator[](std::int64_t i) const { return data_[i]; }

  bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }

  bool all_finite() const {
    for (std::int64_t i = 0; i < data_.size(); ++i) {
      if (!std::isfinite(static_cast<double>(data_[i]))) return false;
    }
    return true;
  }

  void fill(Scalar v) { data_.setConstant(v); }
  void set_zero() { data_.setZero(); }

  // Reinterpret the flat buffer as a r x c row-major matrix view.
  auto as_matrix(std::int64_t r, std::int64_t c) {
    if (r * c != numel()) {
      throw TensorError(TensorErrc::ShapeMismatch, "matrix view size mismatch");
    }
    return Eigen::Map<
        Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
        data_.data(), r, c);
  }

  auto as_matrix(std::int64_t r, std::int64_t c) const {
    if (r * c != numel()) {
      throw TensorError(TensorErrc::ShapeMismatch, "matrix view size mismatch");
    }
    return Eigen::Map<const Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic,
                                          Eigen::RowMajor>>(data_.data(), r, c);
  }

  template <typename Other>
  Tensor<Other> cast() const {
    Tensor<Other> out(shape_);
    for (std::int64_t i = 0; i < numel(); ++i) {
      out[i] = static_cast<Other>(data_[i]);
    }
    return out;
  }

  std::string shape_str() const {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < shape_.size(); ++i) {
      if (i) os << 'x';
      os << shape_[i];
    }
    os << ']';
    return os.str();
  }

 private:
  static std::int64_t checked_numel(const std::vector<int>& shape) {
    std::int64_t n = 1;
    for (int d : shape) {
      if (d < 1) {
        throw TensorError(TensorErrc::BadShape, "tensor dims must be positive");
      }
      n *= d;
    }
    return n;
  }

  std::vector<int> shape_;
  Storage data_;
};

using Tensor32 = Tensor<float>;
using Tensor64 = Tensor<double>;

}  // namespace fnet

#endif  // FNET_TENSOR_HPP
