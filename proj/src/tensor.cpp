#include "tpa/tensor.hpp"

#include <sstream>

namespace tpa {

std::string shape_str(const std::vector<Index>& shape) {
  std::ostringstream os;
  os << "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << "x";
    os << shape[i];
  }
  os << "]";
  return os.str();
}

Index shape_size(const std::vector<Index>& shape) {
  Index n = 1;
  for (Index e : shape) n *= e;
  return n;
}

Tensor::Tensor(std::vector<Index> shape) : shape_(std::move(shape)) {
  for (Index e : shape_) {
    if (e < 0) throw DimensionError("negative extent in shape " + shape_str(shape_));
  }
  data_ = ArrayXd::Zero(shape_size(shape_));
}

Tensor::Tensor(std::vector<Index> shape, ArrayXd data) : shape_(std::move(shape)), data_(std::move(data)) {
  if (shape_size(shape_) != data_.size()) {
    throw DimensionError("shape " + shape_str(shape_) + " does not match buffer of " +
                         std::to_string(data_.size()) + " values");
  }
}

Tensor Tensor::zeros(std::vector<Index> shape) { return Tensor(std::move(shape)); }

Tensor Tensor::full(std::vector<Index> shape, double value) {
  Tensor t(std::move(shape));
  t.data_.setConstant(value);
  return t;
}

Tensor Tensor::scalar(double value) {
  Tensor t{std::vector<Index>{}};
  t.data_(0) = value;
  return t;
}

Tensor Tensor::row(std::initializer_list<double> values) {
  Tensor t({static_cast<Index>(values.size())});
  Index i = 0;
  for (double v : values) t.data_(i++) = v;
  return t;
}

Tensor Tensor::matrix(std::initializer_list<std::initializer_list<double>> rows) {
  const Index r = static_cast<Index>(rows.size());
  const Index c = r > 0 ? static_cast<Index>(rows.begin()->size()) : 0;
  Tensor t({r, c});
  Index i = 0;
  for (const auto& row : rows) {
    if (static_cast<Index>(row.size()) != c) throw DimensionError("ragged matrix literal");
    for (double v : row) t.data_(i++) = v;
  }
  return t;
}

Index Tensor::rows() const {
  if (rank() <= 1) return 1;
  if (rank() == 2) return shape_[0];
  throw DimensionError("matrix view of rank-" + std::to_string(rank()) + " tensor " + shape_str(shape_));
}

Index Tensor::cols() const {
  if (rank() == 0) return 1;
  if (rank() == 1) return shape_[0];
  if (rank() == 2) return shape_[1];
  throw DimensionError("matrix view of rank-" + std::to_string(rank()) + " tensor " + shape_str(shape_));
}

Eigen::Map<RowMat> Tensor::mat() { return {data_.data(), rows(), cols()}; }

Eigen::Map<const RowMat> Tensor::mat() const { return {data_.data(), rows(), cols()}; }

ArrayXd& Tensor::grad() const {
  if (!grad_) grad_ = ArrayXd::Zero(data_.size());
  return *grad_;
}

void Tensor::zero_grad() const {
  if (grad_) grad_->setZero();
}

}  // namespace tpa
