#include "latgen/autodiff.hpp"

#include <algorithm>
#include <cmath>

namespace latgen {

const Tensor& Var::value() const { return tape_->value(id_); }

double Var::scalar() const {
  const Tensor& v = value();
  if (v.size() != 1) throw DimensionError("scalar() on non-scalar node " + shape_string(v));
  return v(0, 0);
}

bool Var::requires_grad() const { return tape_->requires_grad(id_); }

Var Tape::constant(Tensor value) {
  Node n;
  n.owned = std::move(value);
  nodes_.push_back(std::move(n));
  return {this, static_cast<int>(nodes_.size() - 1)};
}

Var Tape::input(Tensor value) {
  Node n;
  n.owned = std::move(value);
  n.requires_grad = true;
  nodes_.push_back(std::move(n));
  return {this, static_cast<int>(nodes_.size() - 1)};
}

Var Tape::param(Parameter& p) {
  Node n;
  n.external = &p.value;
  if (record_ && p.trainable) {
    n.requires_grad = true;
    n.external_grad = &p.grad;
  }
  nodes_.push_back(std::move(n));
  return {this, static_cast<int>(nodes_.size() - 1)};
}

Var Tape::param(const Parameter& p) {
  Node n;
  n.external = &p.value;
  nodes_.push_back(std::move(n));
  return {this, static_cast<int>(nodes_.size() - 1)};
}

Var Tape::push(Tensor value, std::span<const Var> inputs, BackwardFn fn) {
  Node n;
  n.owned = std::move(value);
  if (record_) {
    for (const Var& v : inputs) {
      if (v.tape() != this) throw std::logic_error("Tape::push: input from a different tape");
      if (nodes_[static_cast<std::size_t>(v.id())].requires_grad) n.requires_grad = true;
    }
    if (n.requires_grad) n.backward = std::move(fn);
  }
  nodes_.push_back(std::move(n));
  return {this, static_cast<int>(nodes_.size() - 1)};
}

Tensor& Tape::grad_buffer(Node& n) {
  if (n.external_grad) return *n.external_grad;
  if (n.grad.size() == 0) n.grad = Tensor::Zero(n.value().rows(), n.value().cols());
  return n.grad;
}

std::size_t Tape::backward(Var root, double seed) {
  if (root.tape() != this) throw std::logic_error("Tape::backward: root from a different tape");
  Node& r = nodes_[static_cast<std::size_t>(root.id())];
  if (!r.requires_grad) return 0;
  if (r.value().size() != 1)
    throw DimensionError("backward: root must be 1x1, got " + shape_string(r.value()));
  grad_buffer(r)(0, 0) += seed;
  std::size_t visited = 0;
  for (int id = root.id(); id >= 0; --id) {
    Node& n = nodes_[static_cast<std::size_t>(id)];
    if (!n.backward || n.grad.size() == 0) continue;
    n.backward(n.grad, n.value(), *this);
    ++visited;
  }
  return visited;
}

const Tensor& Tape::grad(Var v) const {
  const Node& n = nodes_[static_cast<std::size_t>(v.id())];
  return n.external_grad ? *n.external_grad : n.grad;
}

const Tensor& Tape::value(int id) const { return nodes_[static_cast<std::size_t>(id)].value(); }

namespace {

void check_same(const char* op, const Tensor& a, const Tensor& b) {
  require_shape(a.rows() == b.rows() && a.cols() == b.cols(), op, a.rows(), a.cols(), b.rows(), b.cols());
}

double sigmoid_scalar(double x) { return 1.0 / (1.0 + std::exp(-x)); }

template <std::size_t N>
Var push_op(Tensor out, const Var (&inputs)[N], Tape::BackwardFn fn) {
  return inputs[0].tape()->push(std::move(out), std::span<const Var>(inputs, N), std::move(fn));
}

}  // namespace

Var add(Var a, Var b) {
  check_same("add", a.value(), b.value());
  const int ia = a.id(), ib = b.id();
  return push_op(a.value() + b.value(), {a, b}, [ia, ib](const Tensor& g, const Tensor&, Tape& t) {
    t.accumulate(ia, g);
    t.accumulate(ib, g);
  });
}

Var sub(Var a, Var b) {
  check_same("sub", a.value(), b.value());
  const int ia = a.id(), ib = b.id();
  return push_op(a.value() - b.value(), {a, b}, [ia, ib](const Tensor& g, const Tensor&, Tape& t) {
    t.accumulate(ia, g);
    t.accumulate(ib, -g);
  });
}

Var mul(Var a, Var b) {
  check_same("mul", a.value(), b.value());
  const int ia = a.id(), ib = b.id();
  return push_op(a.value().cwiseProduct(b.value()), {a, b}, [ia, ib](const Tensor& g, const Tensor&, Tape& t) {
    if (t.requires_grad(ia)) t.accumulate(ia, g.cwiseProduct(t.value(ib)));
    if (t.requires_grad(ib)) t.accumulate(ib, g.cwiseProduct(t.value(ia)));
  });
}

Var scale(Var a, double s) {
  const int ia = a.id();
  return push_op(a.value() * s, {a}, [ia, s](const Tensor& g, const Tensor&, Tape& t) { t.accumulate(ia, g * s); });
}

Var matmul(Var a, Var b) {
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  require_shape(av.cols() == bv.rows(), "matmul", av.rows(), av.cols(), bv.rows(), bv.cols());
  const int ia = a.id(), ib = b.id();
  return push_op(av * bv, {a, b}, [ia, ib](const Tensor& g, const Tensor&, Tape& t) {
    if (t.requires_grad(ia)) t.accumulate(ia, g * t.value(ib).transpose());
    if (t.requires_grad(ib)) t.accumulate(ib, t.value(ia).transpose() * g);
  });
}

Var add_row(Var a, Var row) {
  const Tensor& av = a.value();
  const Tensor& rv = row.value();
  require_shape(rv.rows() == 1 && rv.cols() == av.cols(), "add_row", av.rows(), av.cols(), rv.rows(), rv.cols());
  Tensor out = av.rowwise() + rv.row(0);
  const int ia = a.id(), ir = row.id();
  return push_op(std::move(out), {a, row}, [ia, ir](const Tensor& g, const Tensor&, Tape& t) {
    t.accumulate(ia, g);
    if (t.requires_grad(ir)) t.accumulate(ir, g.colwise().sum());
  });
}

Var affine(Var x, Var w, Var b) {
  const Tensor& xv = x.value();
  const Tensor& wv = w.value();
  const Tensor& bv = b.value();
  require_shape(xv.cols() == wv.rows(), "affine", xv.rows(), xv.cols(), wv.rows(), wv.cols());
  require_shape(bv.rows() == 1 && bv.cols() == wv.cols(), "affine(bias)", wv.rows(), wv.cols(), bv.rows(),
                bv.cols());
  Tensor out = xv * wv;
  out.rowwise() += bv.row(0);
  const int ix = x.id(), iw = w.id(), ib = b.id();
  return push_op(std::move(out), {x, w, b}, [ix, iw, ib](const Tensor& g, const Tensor&, Tape& t) {
    if (t.requires_grad(ix)) t.accumulate(ix, g * t.value(iw).transpose());
    if (t.requires_grad(iw)) t.accumulate(iw, t.value(ix).transpose() * g);
    if (t.requires_grad(ib)) t.accumulate(ib, g.colwise().sum());
  });
}

Var sigmoid(Var a) {
  const int ia = a.id();
  Tensor out = a.value().unaryExpr([](double v) { return sigmoid_scalar(v); });
  return push_op(std::move(out), {a}, [ia](const Tensor& g, const Tensor& s, Tape& t) {
    t.accumulate(ia, (g.array() * s.array() * (1.0 - s.array())).matrix());
  });
}

Var tanh(Var a) {
  const int ia = a.id();
  Tensor out = a.value().array().tanh().matrix();
  return push_op(std::move(out), {a}, [ia](const Tensor& g, const Tensor& y, Tape& t) {
    t.accumulate(ia, (g.array() * (1.0 - y.array().square())).matrix());
  });
}

Var sum(Var a) {
  Tensor out(1, 1);
  out(0, 0) = a.value().sum();
  const int ia = a.id();
  const Index r = a.rows(), c = a.cols();
  return push_op(std::move(out), {a}, [ia, r, c](const Tensor& g, const Tensor&, Tape& t) {
    t.accumulate(ia, Tensor::Constant(r, c, g(0, 0)));
  });
}

Var mean_rows(Var a) {
  const Tensor& av = a.value();
  if (av.rows() == 0) throw ContractError("mean_rows: no rows");
  const int ia = a.id();
  const Index r = av.rows();
  return push_op(av.colwise().mean(), {a}, [ia, r](const Tensor& g, const Tensor&, Tape& t) {
    t.accumulate(ia, g.replicate(r, 1) / static_cast<double>(r));
  });
}

Var concat_cols(std::span<const Var> parts) {
  if (parts.empty()) throw ContractError("concat_cols: no inputs");
  const Index rows = parts[0].rows();
  Index cols = 0;
  for (const Var& p : parts) {
    require_shape(p.rows() == rows, "concat_cols", rows, parts[0].cols(), p.rows(), p.cols());
    cols += p.cols();
  }
  Tensor out(rows, cols);
  std::vector<std::pair<int, Index>> layout;
  Index offset = 0;
  for (const Var& p : parts) {
    out.middleCols(offset, p.cols()) = p.value();
    layout.emplace_back(p.id(), p.cols());
    offset += p.cols();
  }
  return parts[0].tape()->push(std::move(out), parts, [layout](const Tensor& g, const Tensor&, Tape& t) {
    Index off = 0;
    for (const auto& [id, width] : layout) {
      if (t.requires_grad(id)) t.accumulate(id, g.middleCols(off, width));
      off += width;
    }
  });
}

Var concat_cols(std::initializer_list<Var> parts) {
  return concat_cols(std::span<const Var>(parts.begin(), parts.size()));
}

Var slice_cols(Var a, Index begin, Index count) {
  const Tensor& av = a.value();
  if (begin < 0 || count < 0 || begin + count > av.cols())
    throw DimensionError("slice_cols: columns [" + std::to_string(begin) + ", " + std::to_string(begin + count) +
                         ") out of " + shape_string(av));
  const int ia = a.id();
  const Index r = av.rows(), c = av.cols();
  Tensor out = av.middleCols(begin, count);
  return push_op(std::move(out), {a}, [ia, r, c, begin, count](const Tensor& g, const Tensor&, Tape& t) {
    Tensor d = Tensor::Zero(r, c);
    d.middleCols(begin, count) = g;
    t.accumulate(ia, d);
  });
}

Var transpose(Var a) {
  const int ia = a.id();
  return push_op(a.value().transpose(), {a}, [ia](const Tensor& g, const Tensor&, Tape& t) {
    t.accumulate(ia, g.transpose());
  });
}

Var gather_rows(Var table, std::span<const int> ids) {
  const Tensor& tv = table.value();
  Tensor out(static_cast<Index>(ids.size()), tv.cols());
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] < 0 || ids[i] >= tv.rows())
      throw DimensionError("gather_rows: id " + std::to_string(ids[i]) + " outside table " + shape_string(tv));
    out.row(static_cast<Index>(i)) = tv.row(ids[i]);
  }
  const int it = table.id();
  std::vector<int> idx(ids.begin(), ids.end());
  return push_op(std::move(out), {table}, [it, idx = std::move(idx)](const Tensor& g, const Tensor&, Tape& t) {
    // Scatter straight into the table's buffer; no dense |V| x d temporary.
    Tensor& buf = t.grad_buffer_for(it);
    for (std::size_t i = 0; i < idx.size(); ++i) buf.row(idx[i]) += g.row(static_cast<Index>(i));
  });
}

Var pick(Var a, std::span<const int> cols) {
  const Tensor& av = a.value();
  require_shape(static_cast<Index>(cols.size()) == av.rows(), "pick", av.rows(), av.cols(),
                static_cast<Index>(cols.size()), 1);
  Tensor out(av.rows(), 1);
  for (Index i = 0; i < av.rows(); ++i) {
    const int c = cols[static_cast<std::size_t>(i)];
    if (c < 0 || c >= av.cols())
      throw DimensionError("pick: column " + std::to_string(c) + " outside " + shape_string(av));
    out(i, 0) = av(i, c);
  }
  const int ia = a.id();
  std::vector<int> idx(cols.begin(), cols.end());
  return push_op(std::move(out), {a}, [ia, idx = std::move(idx)](const Tensor& g, const Tensor&, Tape& t) {
    Tensor& buf = t.grad_buffer_for(ia);
    for (std::size_t i = 0; i < idx.size(); ++i) buf(static_cast<Index>(i), idx[i]) += g(static_cast<Index>(i), 0);
  });
}

Var log_softmax_rows(Var a) {
  const int ia = a.id();
  return push_op(latgen::log_softmax_rows(a.value()), {a}, [ia](const Tensor& g, const Tensor& y, Tape& t) {
    // d/dx_j = g_j - softmax_j * sum_k g_k, row by row.
    t.accumulate(ia, (g.array() - y.array().exp().colwise() * g.rowwise().sum().array()).matrix());
  });
}

Var log_sum_exp(Var a) {
  Tensor out(1, 1);
  out(0, 0) = latgen::log_sum_exp(a.value());
  const int ia = a.id();
  return push_op(std::move(out), {a}, [ia](const Tensor& g, const Tensor& y, Tape& t) {
    t.accumulate(ia, ((t.value(ia).array() - y(0, 0)).exp() * g(0, 0)).matrix());
  });
}

Var row_dot(Var a, Var b) {
  check_same("row_dot", a.value(), b.value());
  Tensor out = a.value().cwiseProduct(b.value()).rowwise().sum().transpose();
  const int ia = a.id(), ib = b.id();
  return push_op(std::move(out), {a, b}, [ia, ib](const Tensor& g, const Tensor&, Tape& t) {
    const Eigen::ArrayXd gc = g.row(0).transpose().array();
    if (t.requires_grad(ia)) t.accumulate(ia, (t.value(ib).array().colwise() * gc).matrix());
    if (t.requires_grad(ib)) t.accumulate(ib, (t.value(ia).array().colwise() * gc).matrix());
  });
}

Var dot_const(Var a, const Tensor& weights) {
  check_same("dot_const", a.value(), weights);
  Tensor out(1, 1);
  out(0, 0) = a.value().cwiseProduct(weights).sum();
  const int ia = a.id();
  return push_op(std::move(out), {a}, [ia, weights](const Tensor& g, const Tensor&, Tape& t) {
    t.accumulate(ia, weights * g(0, 0));
  });
}

LstmStep lstm_cell(Var x, Var h_prev, Var c_prev, const LstmWeights& w) {
  const Index hidden = w.hidden_weight.rows();
  require_shape(h_prev.cols() == hidden && c_prev.cols() == hidden, "lstm_cell(state)", h_prev.rows(),
                h_prev.cols(), c_prev.rows(), c_prev.cols());
  require_shape(w.hidden_weight.cols() == 4 * hidden, "lstm_cell(hidden_weight)", w.hidden_weight.rows(),
                w.hidden_weight.cols(), hidden, 4 * hidden);
  Var z = add(affine(x, w.input_weight, w.bias), matmul(h_prev, w.hidden_weight));
  Var i = sigmoid(slice_cols(z, 0, hidden));
  Var f = sigmoid(slice_cols(z, hidden, hidden));
  Var g = tanh(slice_cols(z, 2 * hidden, hidden));
  Var o = sigmoid(slice_cols(z, 3 * hidden, hidden));
  Var c = add(mul(f, c_prev), mul(i, g));
  Var h = mul(o, tanh(c));
  return {h, c};
}

Var lstm_sequence(Var x, const LstmWeights& w) {
  const Tensor& xv = x.value();
  const Tensor& wx = w.input_weight.value();
  const Tensor& wh = w.hidden_weight.value();
  const Tensor& bv = w.bias.value();
  const Index hidden = wh.rows();
  require_shape(xv.cols() == wx.rows(), "lstm_sequence(input)", xv.rows(), xv.cols(), wx.rows(), wx.cols());
  require_shape(wx.cols() == 4 * hidden && wh.cols() == 4 * hidden, "lstm_sequence(weights)", wx.rows(),
                wx.cols(), wh.rows(), wh.cols());
  require_shape(bv.rows() == 1 && bv.cols() == 4 * hidden, "lstm_sequence(bias)", bv.rows(), bv.cols(), 1,
                4 * hidden);
  const Index steps = xv.rows();

  // gates keeps the post-activation [i, f, g, o] per step, cells keeps c_t.
  Tensor gates = xv * wx;
  gates.rowwise() += bv.row(0);
  Tensor cells(steps, hidden);
  Tensor hiddens(steps, hidden);
  RowVector h = RowVector::Zero(hidden);
  RowVector c = RowVector::Zero(hidden);
  for (Index s = 0; s < steps; ++s) {
    auto z = gates.row(s);
    z.noalias() += h * wh;
    z.head(2 * hidden) = z.head(2 * hidden).unaryExpr([](double v) { return sigmoid_scalar(v); });
    z.segment(2 * hidden, hidden) = z.segment(2 * hidden, hidden).array().tanh().matrix();
    z.tail(hidden) = z.tail(hidden).unaryExpr([](double v) { return sigmoid_scalar(v); });
    c = z.segment(hidden, hidden).cwiseProduct(c) + z.head(hidden).cwiseProduct(z.segment(2 * hidden, hidden));
    h = z.tail(hidden).cwiseProduct(c.array().tanh().matrix());
    cells.row(s) = c;
    hiddens.row(s) = h;
  }

  const int ix = x.id(), iwx = w.input_weight.id(), iwh = w.hidden_weight.id(), ib = w.bias.id();
  return push_op(
      std::move(hiddens), {x, w.input_weight, w.hidden_weight, w.bias},
      [=, gates = std::move(gates), cells = std::move(cells)](const Tensor& g, const Tensor& hs, Tape& t) {
        const Tensor& whv = t.value(iwh);
        Tensor dz(steps, 4 * hidden);
        Eigen::ArrayXXd dh_next = Eigen::ArrayXXd::Zero(1, hidden);
        Eigen::ArrayXXd dc_next = Eigen::ArrayXXd::Zero(1, hidden);
        for (Index s = steps - 1; s >= 0; --s) {
          const Eigen::ArrayXXd gi = gates.row(s).head(hidden).array();
          const Eigen::ArrayXXd gf = gates.row(s).segment(hidden, hidden).array();
          const Eigen::ArrayXXd gg = gates.row(s).segment(2 * hidden, hidden).array();
          const Eigen::ArrayXXd go = gates.row(s).tail(hidden).array();
          const Eigen::ArrayXXd tc = cells.row(s).array().tanh();
          const Eigen::ArrayXXd c_prev =
              s > 0 ? Eigen::ArrayXXd(cells.row(s - 1).array()) : Eigen::ArrayXXd::Zero(1, hidden);
          const Eigen::ArrayXXd dh = g.row(s).array() + dh_next;
          const Eigen::ArrayXXd dc = dh * go * (1.0 - tc.square()) + dc_next;
          dz.row(s).head(hidden) = (dc * gg * gi * (1.0 - gi)).matrix();
          dz.row(s).segment(hidden, hidden) = (dc * c_prev * gf * (1.0 - gf)).matrix();
          dz.row(s).segment(2 * hidden, hidden) = (dc * gi * (1.0 - gg.square())).matrix();
          dz.row(s).tail(hidden) = (dh * tc * go * (1.0 - go)).matrix();
          dc_next = dc * gf;
          dh_next = (dz.row(s) * whv.transpose()).array();
        }
        if (t.requires_grad(ix)) t.accumulate(ix, dz * t.value(iwx).transpose());
        if (t.requires_grad(iwx)) t.accumulate(iwx, t.value(ix).transpose() * dz);
        if (t.requires_grad(iwh) && steps > 1)
          t.accumulate(iwh, hs.topRows(steps - 1).transpose() * dz.bottomRows(steps - 1));
        if (t.requires_grad(ib)) t.accumulate(ib, dz.colwise().sum());
      });
}

}  // namespace latgen
