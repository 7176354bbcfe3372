#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

#include "kgrl/param_store.hpp"
#include "kgrl/tensor.hpp"

namespace kgrl::nn {

enum class OpKind {
  Const,
  Input,
  Param,
  MatMul,
  MatMulNT,
  Add,
  AddRow,
  Relu,
  Tanh,
  Sigmoid,
  SoftmaxRows,
  Scale,
  GatherRows,
  ConcatCols,
  MeanRows,
};

struct TapeNode {
  OpKind kind;
  Tensor2 value;
  Tensor2 grad;
  std::vector<int> args;
  int param_id = -1;
  double factor = 1.0;
  std::vector<int> row_index;
};

// Eager tape: nodes are appended in evaluation order, so operands always have
// smaller ids than results and a reverse index sweep is a valid backward pass.
class Tape {
 public:
  explicit Tape(ParamStore* store = nullptr) : store_(store) {}

  int constant(Tensor2 v) { return push(OpKind::Const, std::move(v), {}); }

  // Like constant, but the gradient w.r.t. the value stays retrievable.
  int input(Tensor2 v) { return push(OpKind::Input, std::move(v), {}); }

  int param(int param_id) {
    if (!store_) throw std::logic_error("Tape: param node without a ParamStore");
    int id = push(OpKind::Param, store_->at(param_id).value, {});
    nodes_[id].param_id = param_id;
    return id;
  }
  int param(const std::string& name) { return param(store_->id_of(name)); }

  int matmul(int a, int b) { return push(OpKind::MatMul, nn::matmul(val(a), val(b)), {a, b}); }
  int matmul_nt(int a, int b) {
    return push(OpKind::MatMulNT, nn::matmul_nt(val(a), val(b)), {a, b});
  }
  int add(int a, int b) { return push(OpKind::Add, nn::add(val(a), val(b)), {a, b}); }

  // Broadcasts a 1 x C bias row over every row of a.
  int add_row(int a, int b) {
    const Tensor2& x = val(a);
    const Tensor2& row = val(b);
    if (row.rows != 1 || row.cols != x.cols)
      throw std::invalid_argument("Tape::add_row: bias must be 1 x cols");
    Tensor2 out = x;
    for (int r = 0; r < out.rows; ++r)
      for (int c = 0; c < out.cols; ++c) out.at(r, c) += row.at(0, c);
    return push(OpKind::AddRow, std::move(out), {a, b});
  }

  int relu(int a) {
    Tensor2 out = val(a);
    for (double& d : out.data) d = d > 0.0 ? d : 0.0;
    return push(OpKind::Relu, std::move(out), {a});
  }

  int tanh(int a) {
    Tensor2 out = val(a);
    for (double& d : out.data) d = std::tanh(d);
    return push(OpKind::Tanh, std::move(out), {a});
  }

  int sigmoid(int a) {
    Tensor2 out = val(a);
    for (double& d : out.data) d = 1.0 / (1.0 + std::exp(-d));
    return push(OpKind::Sigmoid, std::move(out), {a});
  }

  int softmax_rows(int a) {
    Tensor2 out = val(a);
    softmax_rows_inplace(out);
    return push(OpKind::SoftmaxRows, std::move(out), {a});
  }

  int scale(int a, double s) {
    Tensor2 out = val(a);
    for (double& d : out.data) d *= s;
    int id = push(OpKind::Scale, std::move(out), {a});
    nodes_[id].factor = s;
    return id;
  }

  // Selects rows of a in the given order; indices may repeat.
  int gather_rows(int a, std::vector<int> rows) {
    const Tensor2& x = val(a);
    Tensor2 out(static_cast<int>(rows.size()), x.cols);
    for (size_t k = 0; k < rows.size(); ++k) {
      int r = rows[k];
      if (r < 0 || r >= x.rows) throw std::invalid_argument("Tape::gather_rows: index out of range");
      for (int c = 0; c < x.cols; ++c) out.at(static_cast<int>(k), c) = x.at(r, c);
    }
    int id = push(OpKind::GatherRows, std::move(out), {a});
    nodes_[id].row_index = std::move(rows);
    return id;
  }

  int concat_cols(const std::vector<int>& parts) {
    if (parts.empty()) throw std::invalid_argument("Tape::concat_cols: no operands");
    int rows = val(parts[0]).rows;
    int cols = 0;
    for (int p : parts) {
      if (val(p).rows != rows) throw std::invalid_argument("Tape::concat_cols: row mismatch");
      cols += val(p).cols;
    }
    Tensor2 out(rows, cols);
    int base = 0;
    for (int p : parts) {
      const Tensor2& x = val(p);
      for (int r = 0; r < rows; ++r)
        for (int c = 0; c < x.cols; ++c) out.at(r, base + c) = x.at(r, c);
      base += x.cols;
    }
    return push(OpKind::ConcatCols, std::move(out), parts);
  }

  int mean_rows(int a) {
    const Tensor2& x = val(a);
    if (x.rows == 0) throw std::invalid_argument("Tape::mean_rows: empty input");
    Tensor2 out(1, x.cols);
    for (int r = 0; r < x.rows; ++r)
      for (int c = 0; c < x.cols; ++c) out.at(0, c) += x.at(r, c);
    for (double& d : out.data) d /= x.rows;
    return push(OpKind::MeanRows, std::move(out), {a});
  }

  const Tensor2& value(int id) const { return nodes_.at(id).value; }
  const Tensor2& grad(int id) const { return nodes_.at(id).grad; }
  size_t size() const { return nodes_.size(); }

  // Accumulates parameter gradients into the store; node grads are reset each
  // call so repeated backward passes from different outputs stay independent.
  void backward(int out, const Tensor2& seed) {
    if (!seed.same_shape(nodes_.at(out).value))
      throw std::invalid_argument("Tape::backward: seed shape mismatch");
    for (auto& n : nodes_) n.grad.fill(0.0);
    nodes_[out].grad = seed;

    for (int id = out; id >= 0; --id) {
      TapeNode& n = nodes_[id];
      const Tensor2& g = n.grad;
      switch (n.kind) {
        case OpKind::Const:
        case OpKind::Input:
          break;
        case OpKind::Param:
          if (n.param_id >= 0) {
            Tensor2& pg = store_->at(n.param_id).grad;
            for (size_t i = 0; i < pg.data.size(); ++i) pg.data[i] += g.data[i];
          }
          break;
        case OpKind::MatMul: {
          accumulate(n.args[0], nn::matmul_nt(g, val(n.args[1])));
          accumulate(n.args[1], nn::matmul_tn(val(n.args[0]), g));
          break;
        }
        case OpKind::MatMulNT: {
          accumulate(n.args[0], nn::matmul(g, val(n.args[1])));
          accumulate(n.args[1], nn::matmul_tn(g, val(n.args[0])));
          break;
        }
        case OpKind::Add:
          accumulate(n.args[0], g);
          accumulate(n.args[1], g);
          break;
        case OpKind::AddRow: {
          accumulate(n.args[0], g);
          Tensor2 rowg(1, g.cols);
          for (int r = 0; r < g.rows; ++r)
            for (int c = 0; c < g.cols; ++c) rowg.at(0, c) += g.at(r, c);
          accumulate(n.args[1], rowg);
          break;
        }
        case OpKind::Relu: {
          const Tensor2& x = val(n.args[0]);
          Tensor2 gx = g;
          for (size_t i = 0; i < gx.data.size(); ++i)
            if (x.data[i] <= 0.0) gx.data[i] = 0.0;
          accumulate(n.args[0], gx);
          break;
        }
        case OpKind::Tanh: {
          Tensor2 gx = g;
          for (size_t i = 0; i < gx.data.size(); ++i)
            gx.data[i] *= 1.0 - n.value.data[i] * n.value.data[i];
          accumulate(n.args[0], gx);
          break;
        }
        case OpKind::Sigmoid: {
          Tensor2 gx = g;
          for (size_t i = 0; i < gx.data.size(); ++i)
            gx.data[i] *= n.value.data[i] * (1.0 - n.value.data[i]);
          accumulate(n.args[0], gx);
          break;
        }
        case OpKind::SoftmaxRows: {
          Tensor2 gx(g.rows, g.cols);
          for (int r = 0; r < g.rows; ++r) {
            double dot = 0.0;
            for (int c = 0; c < g.cols; ++c) dot += g.at(r, c) * n.value.at(r, c);
            for (int c = 0; c < g.cols; ++c)
              gx.at(r, c) = n.value.at(r, c) * (g.at(r, c) - dot);
          }
          accumulate(n.args[0], gx);
          break;
        }
        case OpKind::Scale: {
          Tensor2 gx = g;
          for (double& d : gx.data) d *= n.factor;
          accumulate(n.args[0], gx);
          break;
        }
        case OpKind::GatherRows: {
          const Tensor2& x = val(n.args[0]);
          Tensor2 gx(x.rows, x.cols);
          for (size_t k = 0; k < n.row_index.size(); ++k)
            for (int c = 0; c < x.cols; ++c)
              gx.at(n.row_index[k], c) += g.at(static_cast<int>(k), c);
          accumulate(n.args[0], gx);
          break;
        }
        case OpKind::ConcatCols: {
          int base = 0;
          for (int p : n.args) {
            const Tensor2& x = val(p);
            Tensor2 gx(x.rows, x.cols);
            for (int r = 0; r < x.rows; ++r)
              for (int c = 0; c < x.cols; ++c) gx.at(r, c) = g.at(r, base + c);
            accumulate(p, gx);
            base += x.cols;
          }
          break;
        }
        case OpKind::MeanRows: {
          const Tensor2& x = val(n.args[0]);
          Tensor2 gx(x.rows, x.cols);
          for (int r = 0; r < x.rows; ++r)
            for (int c = 0; c < x.cols; ++c) gx.at(r, c) = g.at(0, c) / x.rows;
          accumulate(n.args[0], gx);
          break;
        }
      }
    }
  }

 private:
  const Tensor2& val(int id) const { return nodes_.at(id).value; }

  void accumulate(int id, const Tensor2& g) {
    Tensor2& dst = nodes_.at(id).grad;
    if (!dst.same_shape(g)) throw std::logic_error("Tape: gradient shape mismatch");
    for (size_t i = 0; i < dst.data.size(); ++i) dst.data[i] += g.data[i];
  }

  int push(OpKind kind, Tensor2 value, std::vector<int> args) {
    TapeNode n;
    n.kind = kind;
    n.grad = Tensor2(value.rows, value.cols);
    n.value = std::move(value);
    n.args = std::move(args);
    nodes_.push_back(std::move(n));
    return static_cast<int>(nodes_.size()) - 1;
  }

  ParamStore* store_;
  std::vector<TapeNode> nodes_;
};

}  // namespace kgrl::nn
