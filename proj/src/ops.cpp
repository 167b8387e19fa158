#include "tpa/ops.hpp"

#include <cmath>
#include <utility>

namespace tpa {

namespace {

Eigen::Map<RowMat> grad_mat(Tape& t, int id) {
  const Tensor& v = t.value(id);
  return {t.grad(id).data(), v.rows(), v.cols()};
}

void check_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (!a.same_shape(b)) {
    throw DimensionError(std::string(op) + ": shapes " + shape_str(a.shape()) + " and " +
                         shape_str(b.shape()) + " differ");
  }
}

void check_same_tape(Var a, Var b) {
  if (&a.tape() != &b.tape()) throw NumericError("operands recorded on different tapes");
}

double sigmoid_scalar(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace

Var matmul(Var a, Var b) {
  check_same_tape(a, b);
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  if (av.rank() > 2 || bv.rank() != 2 || av.cols() != bv.rows()) {
    throw DimensionError("matmul: shapes " + shape_str(av.shape()) + " and " + shape_str(bv.shape()) +
                         " are incompatible");
  }
  std::vector<Index> out_shape =
      av.rank() == 1 ? std::vector<Index>{bv.cols()} : std::vector<Index>{av.rows(), bv.cols()};
  Tensor out(std::move(out_shape));
  out.mat() = av.mat() * bv.mat();
  const int ai = a.id(), bi = b.id();
  return a.tape().record(std::move(out), {ai, bi}, [ai, bi](Tape& t, int self) {
    auto dc = grad_mat(t, self);
    grad_mat(t, ai) += dc * t.value(bi).mat().transpose();
    grad_mat(t, bi) += t.value(ai).mat().transpose() * dc;
  });
}

Var add(Var a, Var b) {
  check_same_tape(a, b);
  check_same_shape(a.value(), b.value(), "add");
  Tensor out(a.value().shape(), a.value().flat() + b.value().flat());
  const int ai = a.id(), bi = b.id();
  return a.tape().record(std::move(out), {ai, bi}, [ai, bi](Tape& t, int self) {
    t.grad(ai) += t.grad(self);
    t.grad(bi) += t.grad(self);
  });
}

Var sub(Var a, Var b) {
  check_same_tape(a, b);
  check_same_shape(a.value(), b.value(), "sub");
  Tensor out(a.value().shape(), a.value().flat() - b.value().flat());
  const int ai = a.id(), bi = b.id();
  return a.tape().record(std::move(out), {ai, bi}, [ai, bi](Tape& t, int self) {
    t.grad(ai) += t.grad(self);
    t.grad(bi) -= t.grad(self);
  });
}

Var mul(Var a, Var b) {
  check_same_tape(a, b);
  check_same_shape(a.value(), b.value(), "mul");
  Tensor out(a.value().shape(), a.value().flat() * b.value().flat());
  const int ai = a.id(), bi = b.id();
  return a.tape().record(std::move(out), {ai, bi}, [ai, bi](Tape& t, int self) {
    t.grad(ai) += t.grad(self) * t.value(bi).flat();
    t.grad(bi) += t.grad(self) * t.value(ai).flat();
  });
}

Var scale(Var a, double c) {
  Tensor out(a.value().shape(), a.value().flat() * c);
  const int ai = a.id();
  return a.tape().record(std::move(out), {ai}, [ai, c](Tape& t, int self) {
    t.grad(ai) += t.grad(self) * c;
  });
}

Var add_scalar(Var a, double c) {
  Tensor out(a.value().shape(), a.value().flat() + c);
  const int ai = a.id();
  return a.tape().record(std::move(out), {ai}, [ai](Tape& t, int self) {
    t.grad(ai) += t.grad(self);
  });
}

Var relu(Var a) {
  Tensor out(a.value().shape(), a.value().flat().max(0.0));
  const int ai = a.id();
  // subgradient at exactly 0 is 0
  return a.tape().record(std::move(out), {ai}, [ai](Tape& t, int self) {
    t.grad(ai) += t.grad(self) * (t.value(ai).flat() > 0.0).cast<double>();
  });
}

Var sigmoid(Var a) {
  Tensor out(a.value().shape(), a.value().flat().unaryExpr([](double x) { return sigmoid_scalar(x); }));
  const int ai = a.id();
  return a.tape().record(std::move(out), {ai}, [ai](Tape& t, int self) {
    const ArrayXd& y = t.value(self).flat();
    t.grad(ai) += t.grad(self) * y * (1.0 - y);
  });
}

Var swish(Var a) {
  Tensor out(a.value().shape(),
             a.value().flat().unaryExpr([](double x) { return x * sigmoid_scalar(x); }));
  const int ai = a.id();
  return a.tape().record(std::move(out), {ai}, [ai](Tape& t, int self) {
    const ArrayXd& x = t.value(ai).flat();
    ArrayXd s = x.unaryExpr([](double v) { return sigmoid_scalar(v); });
    t.grad(ai) += t.grad(self) * s * (1.0 + x * (1.0 - s));
  });
}

Var rsqrt(Var a) {
  Tensor out(a.value().shape(), a.value().flat().rsqrt());
  const int ai = a.id();
  return a.tape().record(std::move(out), {ai}, [ai](Tape& t, int self) {
    const ArrayXd& x = t.value(ai).flat();
    t.grad(ai) += t.grad(self) * (-0.5) * x.pow(-1.5);
  });
}

Var softmax(Var a) {
  const Tensor& av = a.value();
  if (av.rank() < 1 || av.rank() > 2) {
    throw DimensionError("softmax: expected rank 1 or 2, got " + shape_str(av.shape()));
  }
  const Index rows = av.rows(), cols = av.cols();
  Tensor out(av.shape());
  for (Index i = 0; i < rows; ++i) {
    double mx = av(i * cols);
    for (Index j = 1; j < cols; ++j) mx = std::max(mx, av(i * cols + j));
    double sum = 0.0;
    for (Index j = 0; j < cols; ++j) {
      const double e = std::exp(av(i * cols + j) - mx);
      out(i * cols + j) = e;
      sum += e;
    }
    for (Index j = 0; j < cols; ++j) out(i * cols + j) /= sum;
  }
  const int ai = a.id();
  return a.tape().record(std::move(out), {ai}, [ai, rows, cols](Tape& t, int self) {
    const ArrayXd& y = t.value(self).flat();
    const ArrayXd& dy = t.grad(self);
    ArrayXd& dx = t.grad(ai);
    for (Index i = 0; i < rows; ++i) {
      double dot = 0.0;
      for (Index j = 0; j < cols; ++j) dot += dy(i * cols + j) * y(i * cols + j);
      for (Index j = 0; j < cols; ++j) {
        dx(i * cols + j) += y(i * cols + j) * (dy(i * cols + j) - dot);
      }
    }
  });
}

Var row_mean(Var a) {
  const Tensor& av = a.value();
  if (av.rank() != 2) throw DimensionError("row_mean: expected rank 2, got " + shape_str(av.shape()));
  const Index rows = av.rows(), cols = av.cols();
  Tensor out({rows, 1});
  for (Index i = 0; i < rows; ++i) {
    double s = 0.0;
    for (Index j = 0; j < cols; ++j) s += av(i, j);
    out(i) = s / static_cast<double>(cols);
  }
  const int ai = a.id();
  return a.tape().record(std::move(out), {ai}, [ai, rows, cols](Tape& t, int self) {
    const ArrayXd& dy = t.grad(self);
    ArrayXd& dx = t.grad(ai);
    for (Index i = 0; i < rows; ++i) {
      const double g = dy(i) / static_cast<double>(cols);
      for (Index j = 0; j < cols; ++j) dx(i * cols + j) += g;
    }
  });
}

Var row_var(Var a) {
  const Tensor& av = a.value();
  if (av.rank() != 2) throw DimensionError("row_var: expected rank 2, got " + shape_str(av.shape()));
  const Index rows = av.rows(), cols = av.cols();
  Tensor out({rows, 1});
  for (Index i = 0; i < rows; ++i) {
    double m = 0.0;
    for (Index j = 0; j < cols; ++j) m += av(i, j);
    m /= static_cast<double>(cols);
    double v = 0.0;
    for (Index j = 0; j < cols; ++j) {
      const double d = av(i, j) - m;
      v += d * d;
    }
    out(i) = v / static_cast<double>(cols);
  }
  const int ai = a.id();
  return a.tape().record(std::move(out), {ai}, [ai, rows, cols](Tape& t, int self) {
    const Tensor& x = t.value(ai);
    const ArrayXd& dy = t.grad(self);
    ArrayXd& dx = t.grad(ai);
    for (Index i = 0; i < rows; ++i) {
      double m = 0.0;
      for (Index j = 0; j < cols; ++j) m += x(i, j);
      m /= static_cast<double>(cols);
      const double g = 2.0 * dy(i) / static_cast<double>(cols);
      for (Index j = 0; j < cols; ++j) dx(i * cols + j) += g * (x(i, j) - m);
    }
  });
}

Var transpose(Var a) {
  const Tensor& av = a.value();
  if (av.rank() != 2) throw DimensionError("transpose: expected rank 2, got " + shape_str(av.shape()));
  Tensor out({av.cols(), av.rows()});
  out.mat() = av.mat().transpose();
  const int ai = a.id();
  return a.tape().record(std::move(out), {ai}, [ai](Tape& t, int self) {
    grad_mat(t, ai) += grad_mat(t, self).transpose();
  });
}

Var reshape(Var a, std::vector<Index> shape) {
  const Tensor& av = a.value();
  if (shape_size(shape) != av.size()) {
    throw DimensionError("reshape: " + shape_str(av.shape()) + " to " + shape_str(shape) +
                         " changes element count");
  }
  Tensor out(std::move(shape), av.flat());
  const int ai = a.id();
  return a.tape().record(std::move(out), {ai}, [ai](Tape& t, int self) {
    t.grad(ai) += t.grad(self);
  });
}

Var concat_cols(const std::vector<Var>& parts) {
  if (parts.empty()) throw DimensionError("concat_cols: no inputs");
  const Index rows = parts[0].value().rows();
  Index total = 0;
  for (const Var& p : parts) {
    check_same_tape(parts[0], p);
    const Tensor& pv = p.value();
    if (pv.rank() != 2 || pv.rows() != rows) {
      throw DimensionError("concat_cols: shapes " + shape_str(parts[0].value().shape()) + " and " +
                           shape_str(pv.shape()) + " do not align");
    }
    total += pv.cols();
  }
  Tensor out({rows, total});
  std::vector<int> ids;
  std::vector<Index> widths;
  Index at = 0;
  for (const Var& p : parts) {
    const Tensor& pv = p.value();
    out.mat().middleCols(at, pv.cols()) = pv.mat();
    at += pv.cols();
    ids.push_back(p.id());
    widths.push_back(pv.cols());
  }
  return parts[0].tape().record(std::move(out), ids, [ids, widths](Tape& t, int self) {
    auto dy = grad_mat(t, self);
    Index at = 0;
    for (std::size_t k = 0; k < ids.size(); ++k) {
      grad_mat(t, ids[k]) += dy.middleCols(at, widths[k]);
      at += widths[k];
    }
  });
}

Var slice_cols(Var a, Index begin, Index end) {
  const Tensor& av = a.value();
  if (av.rank() != 2 || begin < 0 || end > av.cols() || begin >= end) {
    throw DimensionError("slice_cols: range [" + std::to_string(begin) + ", " + std::to_string(end) +
                         ") invalid for " + shape_str(av.shape()));
  }
  Tensor out({av.rows(), end - begin});
  out.mat() = av.mat().middleCols(begin, end - begin);
  const int ai = a.id();
  return a.tape().record(std::move(out), {ai}, [ai, begin, end](Tape& t, int self) {
    grad_mat(t, ai).middleCols(begin, end - begin) += grad_mat(t, self);
  });
}

Var add_rowwise(Var x, Var v) {
  check_same_tape(x, v);
  const Tensor& xv = x.value();
  const Tensor& vv = v.value();
  if (xv.rank() != 2 || vv.rank() != 1 || vv.cols() != xv.cols()) {
    throw DimensionError("add_rowwise: shapes " + shape_str(xv.shape()) + " and " +
                         shape_str(vv.shape()) + " do not broadcast");
  }
  Tensor out(xv.shape());
  out.mat() = xv.mat().rowwise() + vv.mat().row(0);
  const int xi = x.id(), vi = v.id();
  return x.tape().record(std::move(out), {xi, vi}, [xi, vi](Tape& t, int self) {
    auto dy = grad_mat(t, self);
    grad_mat(t, xi) += dy;
    grad_mat(t, vi) += dy.colwise().sum();
  });
}

Var mul_rowwise(Var x, Var v) {
  check_same_tape(x, v);
  const Tensor& xv = x.value();
  const Tensor& vv = v.value();
  if (xv.rank() != 2 || vv.rank() != 1 || vv.cols() != xv.cols()) {
    throw DimensionError("mul_rowwise: shapes " + shape_str(xv.shape()) + " and " +
                         shape_str(vv.shape()) + " do not broadcast");
  }
  Tensor out(xv.shape());
  out.mat() = xv.mat().array().rowwise() * vv.mat().row(0).array();
  const int xi = x.id(), vi = v.id();
  return x.tape().record(std::move(out), {xi, vi}, [xi, vi](Tape& t, int self) {
    auto dy = grad_mat(t, self);
    grad_mat(t, xi) += (dy.array().rowwise() * t.value(vi).mat().row(0).array()).matrix();
    grad_mat(t, vi) += (dy.array() * t.value(xi).mat().array()).colwise().sum().matrix();
  });
}

Var sub_colwise(Var x, Var c) {
  check_same_tape(x, c);
  const Tensor& xv = x.value();
  const Tensor& cv = c.value();
  if (xv.rank() != 2 || cv.rank() != 2 || cv.cols() != 1 || cv.rows() != xv.rows()) {
    throw DimensionError("sub_colwise: shapes " + shape_str(xv.shape()) + " and " +
                         shape_str(cv.shape()) + " do not broadcast");
  }
  Tensor out(xv.shape());
  out.mat() = xv.mat().colwise() - cv.mat().col(0);
  const int xi = x.id(), ci = c.id();
  return x.tape().record(std::move(out), {xi, ci}, [xi, ci](Tape& t, int self) {
    auto dy = grad_mat(t, self);
    grad_mat(t, xi) += dy;
    grad_mat(t, ci) -= dy.rowwise().sum();
  });
}

Var mul_colwise(Var x, Var c) {
  check_same_tape(x, c);
  const Tensor& xv = x.value();
  const Tensor& cv = c.value();
  if (xv.rank() != 2 || cv.rank() != 2 || cv.cols() != 1 || cv.rows() != xv.rows()) {
    throw DimensionError("mul_colwise: shapes " + shape_str(xv.shape()) + " and " +
                         shape_str(cv.shape()) + " do not broadcast");
  }
  Tensor out(xv.shape());
  out.mat() = xv.mat().array().colwise() * cv.mat().col(0).array();
  const int xi = x.id(), ci = c.id();
  return x.tape().record(std::move(out), {xi, ci}, [xi, ci](Tape& t, int self) {
    auto dy = grad_mat(t, self);
    grad_mat(t, xi) += (dy.array().colwise() * t.value(ci).mat().col(0).array()).matrix();
    grad_mat(t, ci) += (dy.array() * t.value(xi).mat().array()).rowwise().sum().matrix();
  });
}

Var sum_all(Var a) {
  const Tensor& av = a.value();
  double s = 0.0;
  for (Index i = 0; i < av.size(); ++i) s += av(i);
  const int ai = a.id();
  return a.tape().record(Tensor::scalar(s), {ai}, [ai](Tape& t, int self) {
    t.grad(ai) += t.grad(self)(0);
  });
}

Var mean_all(Var a) {
  const Tensor& av = a.value();
  if (av.size() == 0) throw DimensionError("mean_all: empty tensor");
  double s = 0.0;
  for (Index i = 0; i < av.size(); ++i) s += av(i);
  const double inv = 1.0 / static_cast<double>(av.size());
  const int ai = a.id();
  return a.tape().record(Tensor::scalar(s * inv), {ai}, [ai, inv](Tape& t, int self) {
    t.grad(ai) += t.grad(self)(0) * inv;
  });
}

Var depthwise_conv1d(Var x, Var kernel) {
  check_same_tape(x, kernel);
  const Tensor& xv = x.value();
  const Tensor& kv = kernel.value();
  if (xv.rank() != 2 || kv.rank() != 2 || kv.cols() != xv.cols()) {
    throw DimensionError("depthwise_conv1d: shapes " + shape_str(xv.shape()) + " and " +
                         shape_str(kv.shape()) + " are incompatible");
  }
  const Index T = xv.rows(), d = xv.cols(), k = kv.rows();
  if (k % 2 == 0) throw ConfigError("depthwise_conv1d: kernel size " + std::to_string(k) + " must be odd");
  const Index half = k / 2;
  Tensor out({T, d});
  for (Index ti = 0; ti < T; ++ti) {
    for (Index c = 0; c < d; ++c) {
      double s = 0.0;
      for (Index j = 0; j < k; ++j) {
        const Index src = ti + j - half;
        if (src < 0 || src >= T) continue;  // zero padding
        s += kv(j, c) * xv(src, c);
      }
      out(ti, c) = s;
    }
  }
  const int xi = x.id(), ki = kernel.id();
  return x.tape().record(std::move(out), {xi, ki}, [xi, ki, T, d, k, half](Tape& t, int self) {
    const Tensor& xval = t.value(xi);
    const Tensor& kval = t.value(ki);
    const ArrayXd& dy = t.grad(self);
    ArrayXd& dx = t.grad(xi);
    ArrayXd& dk = t.grad(ki);
    for (Index ti = 0; ti < T; ++ti) {
      for (Index c = 0; c < d; ++c) {
        const double g = dy(ti * d + c);
        for (Index j = 0; j < k; ++j) {
          const Index src = ti + j - half;
          if (src < 0 || src >= T) continue;
          dx(src * d + c) += g * kval(j, c);
          dk(j * d + c) += g * xval(src, c);
        }
      }
    }
  });
}

Var cross_entropy_mean(Var logits, const std::vector<int>& labels) {
  const Tensor& zv = logits.value();
  if (zv.rank() != 2) {
    throw DimensionError("cross_entropy_mean: expected rank-2 logits, got " + shape_str(zv.shape()));
  }
  const Index T = zv.rows(), C = zv.cols();
  if (static_cast<Index>(labels.size()) != T) {
    throw DimensionError("cross_entropy_mean: " + std::to_string(labels.size()) + " labels for " +
                         std::to_string(T) + " rows");
  }
  for (int l : labels) {
    if (l < 0 || l >= C) throw IntegrityError("cross_entropy_mean: label " + std::to_string(l) + " out of range");
  }
  double total = 0.0;
  for (Index i = 0; i < T; ++i) {
    double mx = zv(i, 0);
    for (Index j = 1; j < C; ++j) mx = std::max(mx, zv(i, j));
    double sum = 0.0;
    for (Index j = 0; j < C; ++j) sum += std::exp(zv(i, j) - mx);
    total += mx + std::log(sum) - zv(i, labels[static_cast<std::size_t>(i)]);
  }
  const double inv_t = 1.0 / static_cast<double>(T);
  const int zi = logits.id();
  return logits.tape().record(Tensor::scalar(total * inv_t), {zi},
                              [zi, labels, T, C, inv_t](Tape& t, int self) {
    const Tensor& z = t.value(zi);
    const double up = t.grad(self)(0) * inv_t;
    ArrayXd& dz = t.grad(zi);
    for (Index i = 0; i < T; ++i) {
      double mx = z(i, 0);
      for (Index j = 1; j < C; ++j) mx = std::max(mx, z(i, j));
      double sum = 0.0;
      for (Index j = 0; j < C; ++j) sum += std::exp(z(i, j) - mx);
      for (Index j = 0; j < C; ++j) {
        const double p = std::exp(z(i, j) - mx) / sum;
        dz(i * C + j) += up * (p - (j == labels[static_cast<std::size_t>(i)] ? 1.0 : 0.0));
      }
    }
  });
}

std::vector<int> argmax_rows(const Tensor& t) {
  const Index rows = t.rows(), cols = t.cols();
  std::vector<int> out(static_cast<std::size_t>(rows));
  for (Index i = 0; i < rows; ++i) {
    Index best = 0;
    for (Index j = 1; j < cols; ++j) {
      if (t(i * cols + j) > t(i * cols + best)) best = j;
    }
    out[static_cast<std::size_t>(i)] = static_cast<int>(best);
  }
  return out;
}

}  // namespace tpa
