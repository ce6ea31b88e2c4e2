#include "godin/tensor.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <numeric>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "godin/kernels.hpp"

namespace godin {

std::size_t numel(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string to_string(const Shape& shape) {
  std::ostringstream out;
  out << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) out << (i ? "," : "") << shape[i];
  out << ']';
  return out.str();
}

// --- Tensor ---------------------------------------------------------------

Tensor::Tensor() : impl_(std::make_shared<TensorImpl>()) { impl_->shape = {0}; }

Tensor::Tensor(Shape shape, std::vector<double> data, bool requires_grad)
    : impl_(std::make_shared<TensorImpl>()) {
  if (numel(shape) != data.size()) {
    throw ShapeError("tensor: shape " + to_string(shape) + " does not match " +
                     std::to_string(data.size()) + " values");
  }
  impl_->shape = std::move(shape);
  impl_->data = std::move(data);
  impl_->requires_grad = requires_grad;
}

Tensor Tensor::zeros(Shape shape) { return full(std::move(shape), 0.0); }

Tensor Tensor::full(Shape shape, double value) {
  const std::size_t n = numel(shape);
  return Tensor(std::move(shape), std::vector<double>(n, value));
}

Tensor Tensor::scalar(double value) { return Tensor(Shape{}, {value}); }

Tensor Tensor::matrix(std::size_t rows, std::size_t cols, std::vector<double> data) {
  return Tensor(Shape{rows, cols}, std::move(data));
}

std::size_t Tensor::dim(std::size_t axis) const {
  if (axis >= rank()) throw ShapeError("tensor: axis out of range for " + to_string(shape()));
  return impl_->shape[axis];
}

double Tensor::item() const {
  if (size() != 1) throw ShapeError("item: tensor has " + std::to_string(size()) + " elements");
  return impl_->data[0];
}

double Tensor::operator()(std::size_t i, std::size_t j) const {
  return impl_->data[i * impl_->shape.at(1) + j];
}

bool Tensor::requires_grad() const { return impl_->requires_grad; }

Tensor& Tensor::set_requires_grad(bool flag) {
  impl_->requires_grad = flag;
  return *this;
}

Tensor Tensor::clone() const { return Tensor(impl_->shape, impl_->data, impl_->requires_grad); }

// --- Tape -----------------------------------------------------------------

namespace {
std::atomic<std::uint64_t> next_tape_id{1};
thread_local Tape* current_tape = nullptr;
}  // namespace

Tape::Tape() : id_(next_tape_id.fetch_add(1)) {}

std::size_t Tape::record(TapeNode node) {
  nodes_.push_back(std::move(node));
  return nodes_.size() - 1;
}

GradTape::GradTape() : previous_(current_tape) { current_tape = &tape_; }

GradTape::~GradTape() { current_tape = previous_; }

Tape* active_tape() { return current_tape; }

namespace {

void check_finite(std::string_view op, std::span<const double> data) {
  for (double v : data) {
    if (!std::isfinite(v)) throw NumericError(std::string(op) + ": non-finite result");
  }
}

bool is_tracked(const TensorImpl& t, const Tape* tape) {
  return tape != nullptr && (t.requires_grad || t.tape_id == tape->id());
}

}  // namespace

Tensor make_op(std::string_view op, Shape shape, std::vector<double> data,
               const std::vector<Tensor>& inputs, BackwardFn backward) {
  check_finite(op, data);
  Tensor out(std::move(shape), std::move(data));
  Tape* tape = active_tape();
  const bool tracked = std::any_of(inputs.begin(), inputs.end(),
                                   [&](const Tensor& t) { return is_tracked(*t.impl(), tape); });
  if (tracked) {
    TapeNode node;
    node.op = op;
    node.inputs.reserve(inputs.size());
    for (const auto& t : inputs) node.inputs.push_back(t.impl());
    node.output = out.impl();
    node.backward = std::move(backward);
    out.impl()->tape_id = tape->id();
    out.impl()->node = tape->record(std::move(node));
  }
  return out;
}

std::vector<Tensor> grad(const Tensor& scalar, const std::vector<Tensor>& wrt) {
  Tape* tape = active_tape();
  if (tape == nullptr) throw std::logic_error("grad: no active gradient tape");
  if (scalar.size() != 1) {
    throw ShapeError("grad: output must have one element, got " + to_string(scalar.shape()));
  }

  std::unordered_set<const TensorImpl*> targets;
  for (const auto& w : wrt) targets.insert(w.id());

  const auto& nodes = tape->nodes();
  std::vector<char> needed(nodes.size(), 0);
  auto depends = [&](const TensorImpl* t) {
    return targets.count(t) > 0 || (t->tape_id == tape->id() && needed[t->node]);
  };
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    for (const auto& in : nodes[i].inputs) {
      if (depends(in.get())) {
        needed[i] = 1;
        break;
      }
    }
  }

  std::unordered_map<const TensorImpl*, std::vector<double>> grads;
  grads[scalar.id()] = {1.0};

  std::vector<std::vector<double>*> grad_in;
  for (std::size_t i = nodes.size(); i-- > 0;) {
    if (!needed[i]) continue;
    const TapeNode& node = nodes[i];
    auto it = grads.find(node.output.get());
    if (it == grads.end()) continue;

    grad_in.assign(node.inputs.size(), nullptr);
    for (std::size_t j = 0; j < node.inputs.size(); ++j) {
      const TensorImpl* in = node.inputs[j].get();
      if (!depends(in)) continue;
      auto& buf = grads[in];
      if (buf.empty()) buf.assign(in->data.size(), 0.0);
      grad_in[j] = &buf;
    }
    node.backward(node, it->second, grad_in);
    if (targets.count(node.output.get()) == 0) grads.erase(node.output.get());
  }

  std::vector<Tensor> out;
  out.reserve(wrt.size());
  for (const auto& w : wrt) {
    auto it = grads.find(w.id());
    if (it == grads.end()) {
      out.push_back(Tensor::zeros(w.shape()));
      continue;
    }
    check_finite("grad", it->second);
    out.emplace_back(w.shape(), it->second);
  }
  return out;
}

// --- elementwise helpers --------------------------------------------------

namespace {

struct View2 {
  std::size_t rows;
  std::size_t cols;
};

View2 view2(const Shape& s, std::string_view op) {
  switch (s.size()) {
    case 0: return {1, 1};
    case 1: return {1, s[0]};
    case 2: return {s[0], s[1]};
    default:
      throw ShapeError(std::string(op) + ": broadcasting needs rank <= 2, got " + to_string(s));
  }
}

std::size_t broadcast_extent(std::size_t a, std::size_t b, std::string_view op, const Shape& sa,
                             const Shape& sb) {
  if (a == b || b == 1) return a;
  if (a == 1) return b;
  throw ShapeError(std::string(op) + ": incompatible shapes " + to_string(sa) + " and " +
                   to_string(sb));
}

struct Layout {
  bool same = false;
  std::size_t rows = 0, cols = 0;
  View2 a{}, b{};

  std::size_t ia(std::size_t i, std::size_t j) const {
    return (a.rows == 1 ? 0 : i) * a.cols + (a.cols == 1 ? 0 : j);
  }
  std::size_t ib(std::size_t i, std::size_t j) const {
    return (b.rows == 1 ? 0 : i) * b.cols + (b.cols == 1 ? 0 : j);
  }
};

// f(a, b) -> out; da(a, b, out) and db(a, b, out) are partial derivatives.
template <class F, class Da, class Db>
Tensor binary(std::string_view op, const Tensor& a, const Tensor& b, F f, Da da, Db db) {
  Layout L;
  Shape out_shape;
  if (a.shape() == b.shape()) {
    L.same = true;
    out_shape = a.shape();
  } else {
    L.a = view2(a.shape(), op);
    L.b = view2(b.shape(), op);
    L.rows = broadcast_extent(L.a.rows, L.b.rows, op, a.shape(), b.shape());
    L.cols = broadcast_extent(L.a.cols, L.b.cols, op, a.shape(), b.shape());
    out_shape = {L.rows, L.cols};
  }

  const auto& av = a.values();
  const auto& bv = b.values();
  std::vector<double> out(numel(out_shape));
  if (L.same) {
    for (std::size_t k = 0; k < out.size(); ++k) out[k] = f(av[k], bv[k]);
  } else {
    for (std::size_t i = 0; i < L.rows; ++i)
      for (std::size_t j = 0; j < L.cols; ++j) out[i * L.cols + j] = f(av[L.ia(i, j)], bv[L.ib(i, j)]);
  }

  return make_op(op, std::move(out_shape), std::move(out), {a, b},
                 [L, da, db](const TapeNode& node, std::span<const double> g,
                             std::span<std::vector<double>* const> gin) {
                   const auto& x = node.inputs[0]->data;
                   const auto& y = node.inputs[1]->data;
                   const auto& o = node.output->data;
                   if (L.same) {
                     for (std::size_t k = 0; k < g.size(); ++k) {
                       if (gin[0]) (*gin[0])[k] += g[k] * da(x[k], y[k], o[k]);
                       if (gin[1]) (*gin[1])[k] += g[k] * db(x[k], y[k], o[k]);
                     }
                     return;
                   }
                   for (std::size_t i = 0; i < L.rows; ++i) {
                     for (std::size_t j = 0; j < L.cols; ++j) {
                       const std::size_t k = i * L.cols + j;
                       const std::size_t ka = L.ia(i, j), kb = L.ib(i, j);
                       if (gin[0]) (*gin[0])[ka] += g[k] * da(x[ka], y[kb], o[k]);
                       if (gin[1]) (*gin[1])[kb] += g[k] * db(x[ka], y[kb], o[k]);
                     }
                   }
                 });
}

// f(x) -> y; d(x, y) is dy/dx.
template <class F, class D>
Tensor unary(std::string_view op, const Tensor& a, F f, D d) {
  const auto& av = a.values();
  std::vector<double> out(av.size());
  for (std::size_t k = 0; k < av.size(); ++k) out[k] = f(av[k]);
  return make_op(op, a.shape(), std::move(out), {a},
                 [d](const TapeNode& node, std::span<const double> g,
                     std::span<std::vector<double>* const> gin) {
                   const auto& x = node.inputs[0]->data;
                   const auto& y = node.output->data;
                   auto& ga = *gin[0];
                   for (std::size_t k = 0; k < g.size(); ++k) ga[k] += g[k] * d(x[k], y[k]);
                 });
}

View2 require_matrix(const Tensor& t, std::string_view op) {
  if (t.rank() != 2) {
    throw ShapeError(std::string(op) + ": expected a 2-D tensor, got " + to_string(t.shape()));
  }
  return {t.shape()[0], t.shape()[1]};
}

double stable_sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  return binary(
      "add", a, b, [](double x, double y) { return x + y; },
      [](double, double, double) { return 1.0; }, [](double, double, double) { return 1.0; });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  return binary(
      "sub", a, b, [](double x, double y) { return x - y; },
      [](double, double, double) { return 1.0; }, [](double, double, double) { return -1.0; });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  return binary(
      "mul", a, b, [](double x, double y) { return x * y; },
      [](double, double y, double) { return y; }, [](double x, double, double) { return x; });
}

Tensor div(const Tensor& a, const Tensor& b) {
  for (double v : b.values()) {
    if (v == 0.0) throw NumericError("div: zero denominator");
  }
  return binary(
      "div", a, b, [](double x, double y) { return x / y; },
      [](double, double y, double) { return 1.0 / y; },
      [](double, double y, double o) { return -o / y; });
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  const View2 va = require_matrix(a, "matmul");
  const View2 vb = require_matrix(b, "matmul");
  if (va.cols != vb.rows) {
    throw ShapeError("matmul: inner dimensions differ, " + to_string(a.shape()) + " x " +
                     to_string(b.shape()));
  }
  const std::size_t n = va.rows, k = va.cols, m = vb.cols;
  std::vector<double> out(n * m);
  kernels::parallel::matmul(a.data(), b.data(), out, n, k, m);
  return make_op("matmul", {n, m}, std::move(out), {a, b},
                 [n, k, m](const TapeNode& node, std::span<const double> g,
                           std::span<std::vector<double>* const> gin) {
                   const auto& x = node.inputs[0]->data;
                   const auto& w = node.inputs[1]->data;
                   if (gin[0]) {
                     std::vector<double> tmp(n * k);
                     kernels::parallel::matmul_nt(g, w, tmp, n, m, k);
                     for (std::size_t i = 0; i < tmp.size(); ++i) (*gin[0])[i] += tmp[i];
                   }
                   if (gin[1]) {
                     std::vector<double> tmp(k * m);
                     kernels::parallel::matmul_tn(x, g, tmp, n, k, m);
                     for (std::size_t i = 0; i < tmp.size(); ++i) (*gin[1])[i] += tmp[i];
                   }
                 });
}

Tensor scale(const Tensor& a, double factor) {
  return unary(
      "scale", a, [factor](double x) { return x * factor; },
      [factor](double, double) { return factor; });
}

Tensor neg(const Tensor& a) { return scale(a, -1.0); }

Tensor exp(const Tensor& a) {
  return unary(
      "exp", a, [](double x) { return std::exp(x); }, [](double, double y) { return y; });
}

Tensor log(const Tensor& a) {
  return unary(
      "log", a, [](double x) { return std::log(x); }, [](double x, double) { return 1.0 / x; });
}

Tensor relu(const Tensor& a) {
  return unary(
      "relu", a, [](double x) { return x > 0.0 ? x : 0.0; },
      [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

Tensor sigmoid(const Tensor& a) {
  return unary(
      "sigmoid", a, [](double x) { return stable_sigmoid(x); },
      [](double, double y) { return y * (1.0 - y); });
}

Tensor square(const Tensor& a) {
  return unary(
      "square", a, [](double x) { return x * x; }, [](double x, double) { return 2.0 * x; });
}

Tensor sqrt(const Tensor& a) {
  return unary(
      "sqrt", a, [](double x) { return std::sqrt(x); },
      [](double, double y) { return 0.5 / y; });
}

Tensor clamp_min(const Tensor& a, double floor) {
  return unary(
      "clamp_min", a, [floor](double x) { return x > floor ? x : floor; },
      [floor](double x, double) { return x > floor ? 1.0 : 0.0; });
}

Tensor clamp(const Tensor& a, double lo, double hi) {
  return unary(
      "clamp", a, [lo, hi](double x) { return std::clamp(x, lo, hi); },
      [lo, hi](double x, double) { return (x >= lo && x <= hi) ? 1.0 : 0.0; });
}

Tensor sum(const Tensor& a) {
  double s = 0.0;
  for (double v : a.values()) s += v;
  return make_op("sum", {}, {s}, {a},
                 [](const TapeNode&, std::span<const double> g,
                    std::span<std::vector<double>* const> gin) {
                   for (double& v : *gin[0]) v += g[0];
                 });
}

Tensor mean(const Tensor& a) {
  if (a.size() == 0) throw ShapeError("mean: empty tensor");
  const double n = static_cast<double>(a.size());
  double s = 0.0;
  for (double v : a.values()) s += v;
  return make_op("mean", {}, {s / n}, {a},
                 [n](const TapeNode&, std::span<const double> g,
                     std::span<std::vector<double>* const> gin) {
                   for (double& v : *gin[0]) v += g[0] / n;
                 });
}

Tensor sum_along_axis(const Tensor& a, std::size_t axis) {
  const View2 v = require_matrix(a, "sum_along_axis");
  if (axis > 1) throw ShapeError("sum_along_axis: axis must be 0 or 1");
  const auto& x = a.values();
  Shape shape = axis == 0 ? Shape{1, v.cols} : Shape{v.rows, 1};
  std::vector<double> out(numel(shape), 0.0);
  for (std::size_t i = 0; i < v.rows; ++i)
    for (std::size_t j = 0; j < v.cols; ++j) out[axis == 0 ? j : i] += x[i * v.cols + j];
  return make_op("sum_along_axis", std::move(shape), std::move(out), {a},
                 [v, axis](const TapeNode&, std::span<const double> g,
                           std::span<std::vector<double>* const> gin) {
                   auto& ga = *gin[0];
                   for (std::size_t i = 0; i < v.rows; ++i)
                     for (std::size_t j = 0; j < v.cols; ++j)
                       ga[i * v.cols + j] += g[axis == 0 ? j : i];
                 });
}

Tensor max_along_axis(const Tensor& a, std::size_t axis) {
  const View2 v = require_matrix(a, "max_along_axis");
  if (axis > 1) throw ShapeError("max_along_axis: axis must be 0 or 1");
  const std::size_t outer = axis == 0 ? v.cols : v.rows;
  const std::size_t inner = axis == 0 ? v.rows : v.cols;
  if (inner == 0) throw ShapeError("max_along_axis: empty reduction axis");
  const auto& x = a.values();
  auto at = [&](std::size_t o, std::size_t r) {
    return axis == 0 ? r * v.cols + o : o * v.cols + r;
  };
  std::vector<std::size_t> where(outer);
  std::vector<double> out(outer);
  for (std::size_t o = 0; o < outer; ++o) {
    std::size_t best = at(o, 0);
    for (std::size_t r = 1; r < inner; ++r) {
      if (x[at(o, r)] > x[best]) best = at(o, r);
    }
    where[o] = best;
    out[o] = x[best];
  }
  Shape shape = axis == 0 ? Shape{1, v.cols} : Shape{v.rows, 1};
  return make_op("max_along_axis", std::move(shape), std::move(out), {a},
                 [where = std::move(where)](const TapeNode&, std::span<const double> g,
                                            std::span<std::vector<double>* const> gin) {
                   for (std::size_t o = 0; o < where.size(); ++o) (*gin[0])[where[o]] += g[o];
                 });
}

Tensor softmax(const Tensor& logits) {
  const View2 v = require_matrix(logits, "softmax");
  if (v.cols == 0) throw ShapeError("softmax: empty class axis");
  const auto& z = logits.values();
  std::vector<double> out(z.size());
  for (std::size_t i = 0; i < v.rows; ++i) {
    const double* row = z.data() + i * v.cols;
    double* o = out.data() + i * v.cols;
    const double m = *std::max_element(row, row + v.cols);
    double s = 0.0;
    for (std::size_t j = 0; j < v.cols; ++j) s += (o[j] = std::exp(row[j] - m));
    for (std::size_t j = 0; j < v.cols; ++j) o[j] /= s;
  }
  return make_op("softmax", logits.shape(), std::move(out), {logits},
                 [v](const TapeNode& node, std::span<const double> g,
                     std::span<std::vector<double>* const> gin) {
                   const auto& y = node.output->data;
                   auto& ga = *gin[0];
                   for (std::size_t i = 0; i < v.rows; ++i) {
                     const std::size_t base = i * v.cols;
                     double dot = 0.0;
                     for (std::size_t j = 0; j < v.cols; ++j) dot += g[base + j] * y[base + j];
                     for (std::size_t j = 0; j < v.cols; ++j)
                       ga[base + j] += y[base + j] * (g[base + j] - dot);
                   }
                 });
}

Tensor log_softmax(const Tensor& logits) {
  const View2 v = require_matrix(logits, "log_softmax");
  if (v.cols == 0) throw ShapeError("log_softmax: empty class axis");
  const auto& z = logits.values();
  std::vector<double> out(z.size());
  for (std::size_t i = 0; i < v.rows; ++i) {
    const double* row = z.data() + i * v.cols;
    const double m = *std::max_element(row, row + v.cols);
    double s = 0.0;
    for (std::size_t j = 0; j < v.cols; ++j) s += std::exp(row[j] - m);
    const double lse = m + std::log(s);
    for (std::size_t j = 0; j < v.cols; ++j) out[i * v.cols + j] = row[j] - lse;
  }
  return make_op("log_softmax", logits.shape(), std::move(out), {logits},
                 [v](const TapeNode& node, std::span<const double> g,
                     std::span<std::vector<double>* const> gin) {
                   const auto& y = node.output->data;
                   auto& ga = *gin[0];
                   for (std::size_t i = 0; i < v.rows; ++i) {
                     const std::size_t base = i * v.cols;
                     double gs = 0.0;
                     for (std::size_t j = 0; j < v.cols; ++j) gs += g[base + j];
                     for (std::size_t j = 0; j < v.cols; ++j)
                       ga[base + j] += g[base + j] - std::exp(y[base + j]) * gs;
                   }
                 });
}

Tensor pick(const Tensor& a, std::span<const int> index) {
  const View2 v = require_matrix(a, "pick");
  if (index.size() != v.rows) {
    throw ShapeError("pick: " + std::to_string(index.size()) + " indices for " +
                     std::to_string(v.rows) + " rows");
  }
  std::vector<std::size_t> flat(v.rows);
  std::vector<double> out(v.rows);
  for (std::size_t i = 0; i < v.rows; ++i) {
    if (index[i] < 0 || static_cast<std::size_t>(index[i]) >= v.cols) {
      throw std::out_of_range("pick: index " + std::to_string(index[i]) + " outside [0, " +
                              std::to_string(v.cols) + ")");
    }
    flat[i] = i * v.cols + static_cast<std::size_t>(index[i]);
    out[i] = a.values()[flat[i]];
  }
  return make_op("pick", {v.rows, 1}, std::move(out), {a},
                 [flat = std::move(flat)](const TapeNode&, std::span<const double> g,
                                          std::span<std::vector<double>* const> gin) {
                   for (std::size_t i = 0; i < flat.size(); ++i) (*gin[0])[flat[i]] += g[i];
                 });
}

Tensor concat_cols(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw ShapeError("concat_cols: nothing to concatenate");
  const std::size_t rows = require_matrix(parts[0], "concat_cols").rows;
  std::vector<std::size_t> widths;
  std::size_t total = 0;
  for (const auto& p : parts) {
    const View2 v = require_matrix(p, "concat_cols");
    if (v.rows != rows) throw ShapeError("concat_cols: row counts differ");
    widths.push_back(v.cols);
    total += v.cols;
  }
  std::vector<double> out(rows * total);
  for (std::size_t i = 0; i < rows; ++i) {
    std::size_t offset = 0;
    for (std::size_t p = 0; p < parts.size(); ++p) {
      const auto& x = parts[p].values();
      std::copy_n(x.begin() + static_cast<std::ptrdiff_t>(i * widths[p]), widths[p],
                  out.begin() + static_cast<std::ptrdiff_t>(i * total + offset));
      offset += widths[p];
    }
  }
  return make_op("concat_cols", {rows, total}, std::move(out), parts,
                 [rows, total, widths](const TapeNode&, std::span<const double> g,
                                       std::span<std::vector<double>* const> gin) {
                   for (std::size_t i = 0; i < rows; ++i) {
                     std::size_t offset = 0;
                     for (std::size_t p = 0; p < widths.size(); ++p) {
                       if (gin[p]) {
                         for (std::size_t j = 0; j < widths[p]; ++j)
                           (*gin[p])[i * widths[p] + j] += g[i * total + offset + j];
                       }
                       offset += widths[p];
                     }
                   }
                 });
}

Tensor pairwise_sq_dist(const Tensor& a, const Tensor& w) {
  const View2 va = require_matrix(a, "pairwise_sq_dist");
  const View2 vw = require_matrix(w, "pairwise_sq_dist");
  if (va.cols != vw.rows) {
    throw ShapeError("pairwise_sq_dist: feature dims differ, " + to_string(a.shape()) + " vs " +
                     to_string(w.shape()));
  }
  const std::size_t n = va.rows, d = va.cols, m = vw.cols;
  std::vector<double> out(n * m);
  kernels::parallel::pairwise_sq_dist(a.data(), w.data(), out, n, d, m);
  return make_op("pairwise_sq_dist", {n, m}, std::move(out), {a, w},
                 [n, d, m](const TapeNode& node, std::span<const double> g,
                           std::span<std::vector<double>* const> gin) {
                   const auto& x = node.inputs[0]->data;
                   const auto& c = node.inputs[1]->data;
                   for (std::size_t i = 0; i < n; ++i) {
                     for (std::size_t t = 0; t < d; ++t) {
                       for (std::size_t j = 0; j < m; ++j) {
                         const double diff = 2.0 * g[i * m + j] * (x[i * d + t] - c[t * m + j]);
                         if (gin[0]) (*gin[0])[i * d + t] += diff;
                         if (gin[1]) (*gin[1])[t * m + j] -= diff;
                       }
                     }
                   }
                 });
}

Tensor slice_rows(const Tensor& a, std::size_t begin, std::size_t end) {
  const View2 v = require_matrix(a, "slice_rows");
  if (begin > end || end > v.rows) throw ShapeError("slice_rows: bad row range");
  const auto first = a.values().begin() + static_cast<std::ptrdiff_t>(begin * v.cols);
  const auto last = a.values().begin() + static_cast<std::ptrdiff_t>(end * v.cols);
  return Tensor({end - begin, v.cols}, std::vector<double>(first, last));
}

Tensor gather_rows(const Tensor& a, std::span<const std::size_t> rows) {
  const View2 v = require_matrix(a, "gather_rows");
  std::vector<double> out;
  out.reserve(rows.size() * v.cols);
  for (std::size_t r : rows) {
    if (r >= v.rows) throw ShapeError("gather_rows: row index out of range");
    const auto first = a.values().begin() + static_cast<std::ptrdiff_t>(r * v.cols);
    out.insert(out.end(), first, first + static_cast<std::ptrdiff_t>(v.cols));
  }
  return Tensor({rows.size(), v.cols}, std::move(out));
}

std::vector<std::size_t> argmax_rows(const Tensor& a) {
  const View2 v = require_matrix(a, "argmax_rows");
  std::vector<std::size_t> out(v.rows, 0);
  const auto& x = a.values();
  for (std::size_t i = 0; i < v.rows; ++i) {
    for (std::size_t j = 1; j < v.cols; ++j) {
      if (x[i * v.cols + j] > x[i * v.cols + out[i]]) out[i] = j;
    }
  }
  return out;
}

}  // namespace godin
