#pragma once

// Dense 64-bit tensors with define-by-run reverse-mode differentiation.
//
// A GradTape activated on the current thread records every op whose operands
// are tracked (a leaf with requires_grad, or a value already recorded on that
// tape). grad() replays the recording backwards. Without an active tape the
// ops are plain forward computations.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace godin {

using Shape = std::vector<std::size_t>;

std::size_t numel(const Shape& shape);
std::string to_string(const Shape& shape);

class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Raised when an op produces NaN/Inf or is evaluated outside its domain.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct TensorImpl {
  Shape shape;
  std::vector<double> data;
  bool requires_grad = false;
  std::uint64_t tape_id = 0;  // 0: not recorded on any tape
  std::size_t node = 0;
};

class Tensor {
 public:
  Tensor();
  Tensor(Shape shape, std::vector<double> data, bool requires_grad = false);

  static Tensor zeros(Shape shape);
  static Tensor full(Shape shape, double value);
  static Tensor scalar(double value);
  // Row-major [rows, cols].
  static Tensor matrix(std::size_t rows, std::size_t cols, std::vector<double> data);

  const Shape& shape() const { return impl_->shape; }
  std::size_t rank() const { return impl_->shape.size(); }
  std::size_t dim(std::size_t axis) const;
  std::size_t size() const { return impl_->data.size(); }

  std::span<const double> data() const { return impl_->data; }
  // Direct write access, for optimizers and initializers. Never used on a
  // value that is live on a tape.
  std::span<double> mutable_data() { return impl_->data; }
  const std::vector<double>& values() const { return impl_->data; }

  double item() const;
  double operator()(std::size_t i, std::size_t j) const;

  bool requires_grad() const;
  Tensor& set_requires_grad(bool flag);

  // Deep copy with no tape history.
  Tensor clone() const;
  Tensor detach() const { return clone(); }

  const TensorImpl* id() const { return impl_.get(); }
  const std::shared_ptr<TensorImpl>& impl() const { return impl_; }

 private:
  std::shared_ptr<TensorImpl> impl_;
};

// One recorded primitive. The backward closure adds the vector-Jacobian
// product into every non-null entry of grad_in.
struct TapeNode;
using BackwardFn = std::function<void(const TapeNode& node, std::span<const double> grad_out,
                                      std::span<std::vector<double>* const> grad_in)>;

struct TapeNode {
  std::string_view op;
  std::vector<std::shared_ptr<const TensorImpl>> inputs;
  std::shared_ptr<const TensorImpl> output;
  BackwardFn backward;
};

class Tape {
 public:
  Tape();
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  std::uint64_t id() const { return id_; }
  std::size_t size() const { return nodes_.size(); }
  const std::vector<TapeNode>& nodes() const { return nodes_; }
  std::size_t record(TapeNode node);

 private:
  std::uint64_t id_;
  std::vector<TapeNode> nodes_;
};

// RAII scope activating a fresh tape on the calling thread. Scopes nest; the
// previous tape is restored on exit.
class GradTape {
 public:
  GradTape();
  ~GradTape();
  GradTape(const GradTape&) = delete;
  GradTape& operator=(const GradTape&) = delete;

  Tape& tape() { return tape_; }

 private:
  Tape tape_;
  Tape* previous_;
};

Tape* active_tape();

// Gradients of a single-element tensor with respect to each tensor in wrt.
// Tensors the scalar does not depend on receive zeros.
std::vector<Tensor> grad(const Tensor& scalar, const std::vector<Tensor>& wrt);

// Builds the result of a primitive: checks finiteness (naming the op on
// failure) and records a tape node when any input is tracked.
Tensor make_op(std::string_view op, Shape shape, std::vector<double> data,
               const std::vector<Tensor>& inputs, BackwardFn backward);

// --- primitives -----------------------------------------------------------

// Binary elementwise ops broadcast over 2-D views: a rank-0 tensor acts as
// [1,1], a rank-1 tensor [n] as a row [1,n]. Along each axis the extents must
// match or one of them must be 1.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor div(const Tensor& a, const Tensor& b);

Tensor matmul(const Tensor& a, const Tensor& b);

Tensor scale(const Tensor& a, double factor);
Tensor neg(const Tensor& a);
Tensor exp(const Tensor& a);
Tensor log(const Tensor& a);
Tensor relu(const Tensor& a);
Tensor sigmoid(const Tensor& a);
Tensor square(const Tensor& a);
Tensor sqrt(const Tensor& a);
Tensor clamp_min(const Tensor& a, double floor);
// Gradient passes where lo <= a <= hi.
Tensor clamp(const Tensor& a, double lo, double hi);

Tensor sum(const Tensor& a);
Tensor mean(const Tensor& a);
// axis 0 -> [1,cols]; axis 1 -> [rows,1].
Tensor sum_along_axis(const Tensor& a, std::size_t axis);
// Ties route the gradient to the first maximal entry.
Tensor max_along_axis(const Tensor& a, std::size_t axis);

Tensor softmax(const Tensor& logits);
Tensor log_softmax(const Tensor& logits);

// [B,C] -> [B,1] with entry b equal to a(b, index[b]).
Tensor pick(const Tensor& a, std::span<const int> index);
Tensor concat_cols(const std::vector<Tensor>& parts);

// [B,d] x [d,C] -> [B,C], entry (b,c) = ||a_b - w_c||^2 with w_c the c-th column.
Tensor pairwise_sq_dist(const Tensor& a, const Tensor& w);

inline Tensor operator+(const Tensor& a, const Tensor& b) { return add(a, b); }
inline Tensor operator-(const Tensor& a, const Tensor& b) { return sub(a, b); }
inline Tensor operator*(const Tensor& a, const Tensor& b) { return mul(a, b); }
inline Tensor operator/(const Tensor& a, const Tensor& b) { return div(a, b); }
inline Tensor operator-(const Tensor& a) { return neg(a); }

// Untracked row copies of a 2-D tensor (batching helpers).
Tensor slice_rows(const Tensor& a, std::size_t begin, std::size_t end);
Tensor gather_rows(const Tensor& a, std::span<const std::size_t> rows);

// Row indices of the maximum in each row of a 2-D tensor (first on ties).
std::vector<std::size_t> argmax_rows(const Tensor& a);

}  // namespace godin
