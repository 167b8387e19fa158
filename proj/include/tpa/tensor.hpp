#pragma once

#include <Eigen/Dense>
#include <initializer_list>
#include <optional>
#include <string>
#include <vector>

#include "tpa/errors.hpp"

namespace tpa {

using Index = Eigen::Index;
using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ArrayXd = Eigen::ArrayXd;

std::string shape_str(const std::vector<Index>& shape);

// Dense tensor of 64-bit reals, row-major. Rank 0..2 covers every value the
// model manipulates; the container allows any rank. Carries an optional
// gradient buffer of identical shape, filled in by Tape::backward.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::vector<Index> shape);
  Tensor(std::vector<Index> shape, ArrayXd data);

  static Tensor zeros(std::vector<Index> shape);
  static Tensor full(std::vector<Index> shape, double value);
  static Tensor scalar(double value);
  static Tensor row(std::initializer_list<double> values);
  static Tensor matrix(std::initializer_list<std::initializer_list<double>> rows);

  const std::vector<Index>& shape() const { return shape_; }
  Index rank() const { return static_cast<Index>(shape_.size()); }
  Index size() const { return data_.size(); }

  // Matrix view extents: rank 0 is 1x1, rank 1 is 1xN (a row vector).
  Index rows() const;
  Index cols() const;

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }
  ArrayXd& flat() { return data_; }
  const ArrayXd& flat() const { return data_; }

  Eigen::Map<RowMat> mat();
  Eigen::Map<const RowMat> mat() const;

  double& operator()(Index i) { return data_(i); }
  double operator()(Index i) const { return data_(i); }
  double& operator()(Index i, Index j) { return data_(i * cols() + j); }
  double operator()(Index i, Index j) const { return data_(i * cols() + j); }

  bool requires_grad() const { return requires_grad_; }
  Tensor& set_requires_grad(bool on) {
    requires_grad_ = on;
    return *this;
  }

  bool has_grad() const { return grad_.has_value(); }
  ArrayXd& grad() const;  // zero-initialised on first access
  void zero_grad() const;
  void drop_grad() const { grad_.reset(); }

  bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }

 private:
  std::vector<Index> shape_;
  ArrayXd data_;
  bool requires_grad_ = false;
  mutable std::optional<ArrayXd> grad_;
};

Index shape_size(const std::vector<Index>& shape);

}  // namespace tpa
