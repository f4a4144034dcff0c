// Copyright 2026 The tocomm Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "tocomm/tensor.hpp"

#include <cmath>
#include <unordered_set>

#include "tocomm/errors.hpp"

namespace tocomm::nn {

namespace detail {

struct Node {
  Matrix value;
  Matrix grad;
  bool requires_grad = false;
  bool grad_ready = false;
  std::vector<std::shared_ptr<Node>> inputs;
  std::function<void(const Matrix&)> grad_fn;

  void add_grad(const Matrix& g) {
    if (!grad_ready) {
      grad = g;
      grad_ready = true;
    } else {
      grad += g;
    }
  }
};

}  // namespace detail

namespace {

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw ShapeError(std::string(op) + ": shape mismatch " +
                     std::to_string(a.rows()) + "x" + std::to_string(a.cols()) +
                     " vs " + std::to_string(b.rows()) + "x" +
                     std::to_string(b.cols()));
  }
}

}  // namespace

Tensor Tensor::constant(Matrix value) {
  auto n = std::make_shared<detail::Node>();
  n->value = std::move(value);
  return Tensor(std::move(n));
}

Tensor Tensor::parameter(Matrix value) {
  auto n = std::make_shared<detail::Node>();
  n->value = std::move(value);
  n->requires_grad = true;
  return Tensor(std::move(n));
}

const Matrix& Tensor::value() const { return node_->value; }
Matrix& Tensor::mutable_value() { return node_->value; }

const Matrix& Tensor::grad() const {
  if (!node_->grad_ready) {
    node_->grad = Matrix::Zero(node_->value.rows(), node_->value.cols());
    node_->grad_ready = true;
  }
  return node_->grad;
}

bool Tensor::requires_grad() const { return node_ && node_->requires_grad; }

double Tensor::item() const {
  if (rows() != 1 || cols() != 1) throw ShapeError("item() on non-scalar tensor");
  return value()(0, 0);
}

void Tensor::zero_grad() {
  node_->grad.resize(0, 0);
  node_->grad_ready = false;
}

void Tensor::backward() const {
  if (rows() != 1 || cols() != 1) throw ShapeError("backward() on non-scalar tensor");
  backward(Matrix::Ones(1, 1));
}

void Tensor::backward(const Matrix& seed) const {
  if (seed.rows() != rows() || seed.cols() != cols()) {
    throw ShapeError("backward seed shape mismatch");
  }
  if (!node_->requires_grad) return;

  // Iterative post-order DFS gives a topological order of the subgraph.
  std::vector<detail::Node*> order;
  std::unordered_set<detail::Node*> visited;
  std::vector<std::pair<detail::Node*, std::size_t>> stack;
  stack.emplace_back(node_.get(), 0);
  visited.insert(node_.get());
  while (!stack.empty()) {
    auto& [n, next] = stack.back();
    if (next < n->inputs.size()) {
      detail::Node* child = n->inputs[next++].get();
      if (child->requires_grad && visited.insert(child).second) {
        stack.emplace_back(child, 0);
      }
    } else {
      order.push_back(n);
      stack.pop_back();
    }
  }

  node_->add_grad(seed);
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    detail::Node* n = *it;
    if (n->grad_fn && n->grad_ready) n->grad_fn(n->grad);
  }
  // Interior nodes drop their gradients so a graph can be re-entered by a
  // second backward() (split-graph training seeds twice through one encoder).
  for (detail::Node* n : order) {
    if (n->grad_fn) {
      n->grad.resize(0, 0);
      n->grad_ready = false;
    }
  }
}

Tensor make_result(Matrix value, std::initializer_list<Tensor> inputs,
                   std::function<void(const Matrix&)> grad_fn) {
  auto n = std::make_shared<detail::Node>();
  n->value = std::move(value);
  for (const Tensor& t : inputs) {
    if (t.requires_grad()) {
      n->requires_grad = true;
      break;
    }
  }
  if (n->requires_grad) {
    for (const Tensor& t : inputs) n->inputs.push_back(t.node_);
    n->grad_fn = std::move(grad_fn);
  }
  return Tensor(std::move(n));
}

void accumulate_grad(const Tensor& t, const Matrix& g) {
  if (t.requires_grad()) t.node_->add_grad(g);
}

Tensor detach(const Tensor& a) { return Tensor::constant(a.value()); }

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "add");
  return make_result(a.value() + b.value(), {a, b}, [a, b](const Matrix& g) {
    accumulate_grad(a, g);
    accumulate_grad(b, g);
  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "sub");
  return make_result(a.value() - b.value(), {a, b}, [a, b](const Matrix& g) {
    accumulate_grad(a, g);
    accumulate_grad(b, -g);
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "mul");
  return make_result(a.value().cwiseProduct(b.value()), {a, b},
                     [a, b](const Matrix& g) {
                       accumulate_grad(a, g.cwiseProduct(b.value()));
                       accumulate_grad(b, g.cwiseProduct(a.value()));
                     });
}

Tensor scale(const Tensor& a, double s) {
  return make_result(a.value() * s, {a},
                     [a, s](const Matrix& g) { accumulate_grad(a, g * s); });
}

Tensor add_scalar(const Tensor& a, double s) {
  return make_result(a.value().array() + s, {a},
                     [a](const Matrix& g) { accumulate_grad(a, g); });
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.cols() != b.rows()) {
    throw ShapeError("matmul: inner dimension mismatch " + std::to_string(a.cols()) +
                     " vs " + std::to_string(b.rows()));
  }
  Matrix out = a.value() * b.value();
  return make_result(std::move(out), {a, b}, [a, b](const Matrix& g) {
    if (a.requires_grad()) accumulate_grad(a, g * b.value().transpose());
    if (b.requires_grad()) accumulate_grad(b, a.value().transpose() * g);
  });
}

Tensor transpose(const Tensor& a) {
  return make_result(a.value().transpose(), {a},
                     [a](const Matrix& g) { accumulate_grad(a, g.transpose()); });
}

Tensor add_row(const Tensor& a, const Tensor& row) {
  if (row.rows() != 1 || row.cols() != a.cols()) throw ShapeError("add_row: bad row shape");
  Matrix out = a.value().rowwise() + row.value().row(0);
  return make_result(std::move(out), {a, row}, [a, row](const Matrix& g) {
    accumulate_grad(a, g);
    if (row.requires_grad()) accumulate_grad(row, g.colwise().sum());
  });
}

Tensor mul_row(const Tensor& a, const Tensor& row) {
  if (row.rows() != 1 || row.cols() != a.cols()) throw ShapeError("mul_row: bad row shape");
  Matrix out = a.value().array().rowwise() * row.value().row(0).array();
  return make_result(std::move(out), {a, row}, [a, row](const Matrix& g) {
    if (a.requires_grad()) {
      accumulate_grad(a, (g.array().rowwise() * row.value().row(0).array()).matrix());
    }
    if (row.requires_grad()) {
      accumulate_grad(row, g.cwiseProduct(a.value()).colwise().sum());
    }
  });
}

Tensor mul_col(const Tensor& a, const Tensor& col) {
  if (col.cols() != 1 || col.rows() != a.rows()) throw ShapeError("mul_col: bad column shape");
  Matrix out = a.value().array().colwise() * col.value().col(0).array();
  return make_result(std::move(out), {a, col}, [a, col](const Matrix& g) {
    if (a.requires_grad()) {
      accumulate_grad(a, (g.array().colwise() * col.value().col(0).array()).matrix());
    }
    if (col.requires_grad()) {
      accumulate_grad(col, g.cwiseProduct(a.value()).rowwise().sum());
    }
  });
}

Tensor relu(const Tensor& a) {
  Matrix out = a.value().cwiseMax(0.0);
  return make_result(std::move(out), {a}, [a](const Matrix& g) {
    accumulate_grad(a, (a.value().array() > 0.0).select(g, 0.0));
  });
}

Tensor tanh(const Tensor& a) {
  Matrix out = a.value().array().tanh();
  Matrix saved = out;
  return make_result(std::move(out), {a}, [a, saved](const Matrix& g) {
    accumulate_grad(a, (g.array() * (1.0 - saved.array().square())).matrix());
  });
}

Tensor exp(const Tensor& a) {
  Matrix out = a.value().array().exp();
  Matrix saved = out;
  return make_result(std::move(out), {a}, [a, saved](const Matrix& g) {
    accumulate_grad(a, g.cwiseProduct(saved));
  });
}

Tensor log(const Tensor& a) {
  Matrix out = a.value().array().log();
  return make_result(std::move(out), {a}, [a](const Matrix& g) {
    accumulate_grad(a, g.cwiseQuotient(a.value()));
  });
}

Tensor square(const Tensor& a) {
  return make_result(a.value().array().square(), {a}, [a](const Matrix& g) {
    accumulate_grad(a, 2.0 * g.cwiseProduct(a.value()));
  });
}

Tensor clamp(const Tensor& a, double lo, double hi) {
  Matrix out = a.value().cwiseMax(lo).cwiseMin(hi);
  return make_result(std::move(out), {a}, [a, lo, hi](const Matrix& g) {
    auto inside = (a.value().array() >= lo) && (a.value().array() <= hi);
    accumulate_grad(a, inside.select(g, 0.0));
  });
}

Tensor sum(const Tensor& a) {
  Matrix out(1, 1);
  out(0, 0) = a.value().sum();
  return make_result(std::move(out), {a}, [a](const Matrix& g) {
    accumulate_grad(a, Matrix::Constant(a.rows(), a.cols(), g(0, 0)));
  });
}

Tensor mean(const Tensor& a) {
  const double n = static_cast<double>(a.value().size());
  Matrix out(1, 1);
  out(0, 0) = a.value().sum() / n;
  return make_result(std::move(out), {a}, [a, n](const Matrix& g) {
    accumulate_grad(a, Matrix::Constant(a.rows(), a.cols(), g(0, 0) / n));
  });
}

Tensor row_sums(const Tensor& a) {
  return make_result(a.value().rowwise().sum(), {a}, [a](const Matrix& g) {
    accumulate_grad(a, g.col(0).replicate(1, a.cols()));
  });
}

Tensor col_means(const Tensor& a) {
  const double n = static_cast<double>(a.rows());
  return make_result(a.value().colwise().mean(), {a}, [a, n](const Matrix& g) {
    accumulate_grad(a, (g.row(0) / n).replicate(a.rows(), 1));
  });
}

Tensor concat_cols(const Tensor& a, const Tensor& b) {
  if (a.rows() != b.rows()) throw ShapeError("concat_cols: row count mismatch");
  Matrix out(a.rows(), a.cols() + b.cols());
  out << a.value(), b.value();
  const Eigen::Index ac = a.cols();
  const Eigen::Index bc = b.cols();
  return make_result(std::move(out), {a, b}, [a, b, ac, bc](const Matrix& g) {
    accumulate_grad(a, g.leftCols(ac));
    accumulate_grad(b, g.rightCols(bc));
  });
}

Tensor slice_cols(const Tensor& a, Eigen::Index start, Eigen::Index count) {
  if (start < 0 || count < 0 || start + count > a.cols()) throw ShapeError("slice_cols: out of range");
  Matrix out = a.value().middleCols(start, count);
  return make_result(std::move(out), {a}, [a, start, count](const Matrix& g) {
    Matrix full = Matrix::Zero(a.rows(), a.cols());
    full.middleCols(start, count) = g;
    accumulate_grad(a, full);
  });
}

Tensor slice_rows(const Tensor& a, Eigen::Index start, Eigen::Index count) {
  if (start < 0 || count < 0 || start + count > a.rows()) throw ShapeError("slice_rows: out of range");
  Matrix out = a.value().middleRows(start, count);
  return make_result(std::move(out), {a}, [a, start, count](const Matrix& g) {
    Matrix full = Matrix::Zero(a.rows(), a.cols());
    full.middleRows(start, count) = g;
    accumulate_grad(a, full);
  });
}

namespace {

Matrix reshape_rm(const Matrix& m, Eigen::Index rows, Eigen::Index cols) {
  using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  RowMajor src = m;
  return Eigen::Map<const RowMajor>(src.data(), rows, cols);
}

}  // namespace

Tensor reshape_rowmajor(const Tensor& a, Eigen::Index rows, Eigen::Index cols) {
  if (rows * cols != a.value().size()) throw ShapeError("reshape_rowmajor: size mismatch");
  const Eigen::Index r0 = a.rows();
  const Eigen::Index c0 = a.cols();
  return make_result(reshape_rm(a.value(), rows, cols), {a}, [a, r0, c0](const Matrix& g) {
    accumulate_grad(a, reshape_rm(g, r0, c0));
  });
}

namespace {

Matrix softmax_value(const Matrix& a) {
  Matrix shifted = a.colwise() - a.rowwise().maxCoeff();
  Matrix e = shifted.array().exp();
  Vector denom = e.rowwise().sum();
  return e.array().colwise() / denom.array();
}

}  // namespace

Tensor softmax_rows(const Tensor& a) {
  Matrix p = softmax_value(a.value());
  Matrix saved = p;
  return make_result(std::move(p), {a}, [a, saved](const Matrix& g) {
    Vector dot = g.cwiseProduct(saved).rowwise().sum();
    accumulate_grad(a, saved.cwiseProduct((g.colwise() - dot)));
  });
}

Tensor log_softmax_rows(const Tensor& a) {
  Vector maxes = a.value().rowwise().maxCoeff();
  Matrix shifted = a.value().colwise() - maxes;
  Vector lse = shifted.array().exp().rowwise().sum().log();
  Matrix out = shifted.colwise() - lse;
  Matrix p = out.array().exp();
  return make_result(std::move(out), {a}, [a, p](const Matrix& g) {
    Vector gs = g.rowwise().sum();
    accumulate_grad(a, g - (p.array().colwise() * gs.array()).matrix());
  });
}

Tensor cross_entropy(const Tensor& scores, const std::vector<int>& labels) {
  const Eigen::Index n = scores.rows();
  if (static_cast<Eigen::Index>(labels.size()) != n) throw ShapeError("cross_entropy: label count mismatch");
  if (n == 0) throw ShapeError("cross_entropy: empty batch");
  Matrix p = softmax_value(scores.value());
  Vector maxes = scores.value().rowwise().maxCoeff();
  double total = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const int y = labels[static_cast<std::size_t>(i)];
    if (y < 0 || y >= scores.cols()) throw ShapeError("cross_entropy: label out of range");
    const double lse =
        maxes(i) + std::log((scores.value().row(i).array() - maxes(i)).exp().sum());
    total += lse - scores.value()(i, y);
  }
  Matrix out(1, 1);
  out(0, 0) = total / static_cast<double>(n);
  return make_result(std::move(out), {scores}, [scores, labels, p, n](const Matrix& g) {
    Matrix grad = p;
    for (Eigen::Index i = 0; i < n; ++i) grad(i, labels[static_cast<std::size_t>(i)]) -= 1.0;
    accumulate_grad(scores, grad * (g(0, 0) / static_cast<double>(n)));
  });
}

Tensor normalize_rows(const Tensor& a, double eps) {
  Vector norms = a.value().rowwise().norm();
  Vector inv = norms.unaryExpr([eps](double v) { return v < eps ? 1.0 : 1.0 / v; });
  Matrix out = a.value().array().colwise() * inv.array();
  Matrix saved = out;
  return make_result(std::move(out), {a}, [a, saved, inv](const Matrix& g) {
    // d(x/|x|) = (g - y (y.g)) / |x|
    Vector dot = g.cwiseProduct(saved).rowwise().sum();
    Matrix grad = g - (saved.array().colwise() * dot.array()).matrix();
    accumulate_grad(a, (grad.array().colwise() * inv.array()).matrix());
  });
}

Tensor straight_through(const Matrix& hard, const Tensor& soft) {
  if (hard.rows() != soft.rows() || hard.cols() != soft.cols()) {
    throw ShapeError("straight_through: shape mismatch");
  }
  return make_result(hard, {soft}, [soft](const Matrix& g) { accumulate_grad(soft, g); });
}

namespace {

// Patch matrix: (batch * out_h * out_w) x (in_c * k * k).
Matrix im2col(const Matrix& x, const ConvGeometry& geo) {
  const int oh = geo.out_height();
  const int ow = geo.out_width();
  const int positions = oh * ow;
  Matrix cols = Matrix::Zero(x.rows() * positions, geo.patch_size());
  for (Eigen::Index b = 0; b < x.rows(); ++b) {
    for (int oy = 0; oy < oh; ++oy) {
      for (int ox = 0; ox < ow; ++ox) {
        const Eigen::Index r = b * positions + oy * ow + ox;
        int col = 0;
        for (int c = 0; c < geo.in_channels; ++c) {
          for (int ky = 0; ky < geo.kernel; ++ky) {
            for (int kx = 0; kx < geo.kernel; ++kx, ++col) {
              const int iy = oy * geo.stride + ky - geo.padding;
              const int ix = ox * geo.stride + kx - geo.padding;
              if (iy < 0 || ix < 0 || iy >= geo.in_height || ix >= geo.in_width) continue;
              cols(r, col) = x(b, (c * geo.in_height + iy) * geo.in_width + ix);
            }
          }
        }
      }
    }
  }
  return cols;
}

Matrix col2im(const Matrix& cols, Eigen::Index batch, const ConvGeometry& geo) {
  const int oh = geo.out_height();
  const int ow = geo.out_width();
  const int positions = oh * ow;
  Matrix x = Matrix::Zero(batch, geo.in_size());
  for (Eigen::Index b = 0; b < batch; ++b) {
    for (int oy = 0; oy < oh; ++oy) {
      for (int ox = 0; ox < ow; ++ox) {
        const Eigen::Index r = b * positions + oy * ow + ox;
        int col = 0;
        for (int c = 0; c < geo.in_channels; ++c) {
          for (int ky = 0; ky < geo.kernel; ++ky) {
            for (int kx = 0; kx < geo.kernel; ++kx, ++col) {
              const int iy = oy * geo.stride + ky - geo.padding;
              const int ix = ox * geo.stride + kx - geo.padding;
              if (iy < 0 || ix < 0 || iy >= geo.in_height || ix >= geo.in_width) continue;
              x(b, (c * geo.in_height + iy) * geo.in_width + ix) += cols(r, col);
            }
          }
        }
      }
    }
  }
  return x;
}

}  // namespace

Tensor conv2d(const Tensor& x, const Tensor& weight, const Tensor& bias,
              const ConvGeometry& geo) {
  if (x.cols() != geo.in_size()) throw ShapeError("conv2d: input size does not match geometry");
  if (weight.rows() != geo.patch_size() || weight.cols() != geo.out_channels) {
    throw ShapeError("conv2d: weight shape does not match geometry");
  }
  if (bias.rows() != 1 || bias.cols() != geo.out_channels) throw ShapeError("conv2d: bias shape");
  const Eigen::Index batch = x.rows();
  const int positions = geo.out_height() * geo.out_width();
  Matrix patches = im2col(x.value(), geo);
  Matrix y = patches * weight.value();
  y.rowwise() += bias.value().row(0);
  // (batch*positions) x out_c  ->  batch x (out_c * positions), channel-major.
  Matrix out(batch, geo.out_size());
  for (Eigen::Index b = 0; b < batch; ++b) {
    for (int c = 0; c < geo.out_channels; ++c) {
      out.block(b, static_cast<Eigen::Index>(c) * positions, 1, positions) =
          y.block(b * positions, c, positions, 1).transpose();
    }
  }
  return make_result(std::move(out), {x, weight, bias},
                     [x, weight, bias, geo, patches, batch, positions](const Matrix& g) {
                       Matrix gy(batch * positions, geo.out_channels);
                       for (Eigen::Index b = 0; b < batch; ++b) {
                         for (int c = 0; c < geo.out_channels; ++c) {
                           gy.block(b * positions, c, positions, 1) =
                               g.block(b, static_cast<Eigen::Index>(c) * positions, 1, positions)
                                   .transpose();
                         }
                       }
                       if (weight.requires_grad()) accumulate_grad(weight, patches.transpose() * gy);
                       if (bias.requires_grad()) accumulate_grad(bias, gy.colwise().sum());
                       if (x.requires_grad()) {
                         accumulate_grad(x, col2im(gy * weight.value().transpose(), batch, geo));
                       }
                     });
}

}  // namespace tocomm::nn
