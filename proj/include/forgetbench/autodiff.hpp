#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

// Minimal reverse-mode automatic differentiation over dense row-major
// matrices of doubles. A scalar is a 1x1 matrix and a vector is n x 1.
//
// Every operation allocates a node holding its value and, when any input
// requires a gradient, a closure that pushes the node's gradient into its
// inputs. backward() visits each reachable node once in reverse topological
// order. Leaf gradients accumulate across backward() calls until
// zero_grad(); interior gradients are reset at the start of every pass.

namespace forgetbench::ad {

struct Node {
  std::size_t rows = 1;
  std::size_t cols = 1;
  std::vector<double> value;
  std::vector<double> grad;  // empty until a backward pass reaches the node
  std::vector<std::shared_ptr<Node>> inputs;
  std::function<void(Node&)> push_grad;
  bool requires_grad = false;

  std::size_t size() const noexcept { return value.size(); }
  bool is_leaf() const noexcept { return !push_grad; }
  /// Gradient buffer, zero-initialised on first use.
  std::vector<double>& grad_buffer() {
    if (grad.size() != value.size()) grad.assign(value.size(), 0.0);
    return grad;
  }
};

class Value {
 public:
  Value() = default;
  /// Scalar constant.
  Value(double scalar);  // NOLINT(google-explicit-constructor)

  static Value constant(std::size_t rows, std::size_t cols, std::vector<double> data);
  static Value leaf(std::size_t rows, std::size_t cols, std::vector<double> data, bool requires_grad = true);
  static Value from_node(std::shared_ptr<Node> node) { return Value(std::move(node)); }

  std::size_t rows() const { return node_->rows; }
  std::size_t cols() const { return node_->cols; }
  std::size_t size() const { return node_->size(); }
  bool is_scalar() const { return node_->rows == 1 && node_->cols == 1; }
  bool requires_grad() const { return node_->requires_grad; }
  bool defined() const noexcept { return static_cast<bool>(node_); }

  std::span<const double> data() const { return node_->value; }
  double operator()(std::size_t r, std::size_t c) const { return node_->value[r * node_->cols + c]; }
  /// The value of a scalar.
  double item() const;
  /// Gradient (zeros if backward never reached this node).
  std::vector<double> grad() const;
  void zero_grad();

  const std::shared_ptr<Node>& node() const noexcept { return node_; }

 private:
  explicit Value(std::shared_ptr<Node> node) : node_(std::move(node)) {}
  std::shared_ptr<Node> node_;
};

/// Seeds d(root)/d(root) = 1 and propagates. Root must be scalar.
void backward(const Value& root);

// Element-wise arithmetic with 2-D broadcasting: each dimension of an input
// must equal the output's or be 1.
Value add(const Value& a, const Value& b);
Value sub(const Value& a, const Value& b);
Value mul(const Value& a, const Value& b);
Value div(const Value& a, const Value& b);
/// Element-wise maximum; ties send the gradient to `a`.
Value max(const Value& a, const Value& b);

Value neg(const Value& a);
Value exp(const Value& a);
/// Throws DomainError on any non-positive entry.
Value log(const Value& a);
Value tanh(const Value& a);
/// Subgradient 0 at the kink.
Value relu(const Value& a);
Value square(const Value& a);

Value matmul(const Value& a, const Value& b);
/// Inner product of two equally shaped arrays, as a scalar.
Value dot(const Value& a, const Value& b);
Value sum(const Value& a);
Value mean(const Value& a);
/// m x n -> m x 1.
Value sum_rows(const Value& a);
/// Row-wise cosine similarities: (m x d, n x d) -> m x n.
Value cosine_similarity_matrix(const Value& a, const Value& b);
/// out.row(i) = a.row(indices[i]).
Value select_rows(const Value& a, std::span<const std::size_t> indices);
/// Stacks inputs with equal column count vertically.
Value concat_rows(std::span<const Value> parts);
/// Numerically stable softmax over all entries.
Value softmax(const Value& a);

inline Value operator+(const Value& a, const Value& b) { return add(a, b); }
inline Value operator-(const Value& a, const Value& b) { return sub(a, b); }
inline Value operator*(const Value& a, const Value& b) { return mul(a, b); }
inline Value operator/(const Value& a, const Value& b) { return div(a, b); }
inline Value operator-(const Value& a) { return neg(a); }

// ---------------------------------------------------------------------------
// Parameters

struct ParamSlot {
  std::string name;
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::size_t offset = 0;

  std::size_t size() const noexcept { return rows * cols; }
  bool operator==(const ParamSlot&) const = default;
};

/// All trainable arrays of a model laid out in one flat buffer. Arrays are
/// flattened row-major in insertion order; that order is the coordinate
/// order used by optimizers, Fisher diagonals and EWC anchors.
class ParamVector {
 public:
  void add(std::string name, std::size_t rows, std::size_t cols, std::vector<double> values = {});

  std::size_t total_dim() const noexcept { return values_.size(); }
  std::span<double> values() noexcept { return values_; }
  std::span<const double> values() const noexcept { return values_; }

  bool contains(std::string_view name) const;
  const ParamSlot& slot(std::string_view name) const;
  const std::vector<ParamSlot>& slots() const noexcept { return slots_; }
  std::span<double> array(std::string_view name);
  std::span<const double> array(std::string_view name) const;

  bool same_layout(const ParamVector& other) const { return slots_ == other.slots_; }
  bool operator==(const ParamVector& other) const { return slots_ == other.slots_ && values_ == other.values_; }

 private:
  std::vector<ParamSlot> slots_;
  std::vector<double> values_;
};

/// Exposes a ParamVector to one computation graph as leaf Values and
/// scatters their gradients back into flat coordinates.
class ParamBinder {
 public:
  /// With track = false every bound array is a constant (evaluation mode).
  explicit ParamBinder(const ParamVector& params, bool track = true);

  const ParamVector& params() const noexcept { return *params_; }
  bool tracking() const noexcept { return track_; }

  /// Whole array as a leaf (cached: repeated calls return the same leaf).
  Value array(std::string_view name);
  /// Selected rows of an array as a fresh leaf.
  Value rows(std::string_view name, std::span<const std::size_t> rows);
  /// The full flat vector as a total_dim x 1 leaf (cached).
  Value flat();

  /// Dense gradient in flat coordinates, after backward().
  std::vector<double> gradient() const;
  void add_gradient_to(std::span<double> out) const;

 private:
  struct Binding {
    Value leaf;
    const ParamSlot* slot;             // null for flat()
    std::vector<std::size_t> row_ids;  // empty means the whole array
  };
  const ParamVector* params_;
  bool track_;
  std::vector<Binding> bindings_;
  Value flat_;
};

using GraphFn = std::function<Value(ParamBinder&)>;

struct FiniteDiffReport {
  double max_rel_error = 0.0;
  std::size_t worst_coordinate = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  std::size_t checked = 0;
  bool passed = true;
};

/// Compares backward() gradients with central differences
/// (f(p + h e) - f(p - h e)) / 2h. The relative error of a coordinate is
/// |analytic - numeric| / max(|analytic|, |numeric|, floor) with
/// floor = max(1e-7, 1e-3 * largest |analytic| among checked coordinates).
/// Only the given coordinates are checked when `coordinates` is non-empty.
FiniteDiffReport finite_diff_check(const GraphFn& f, const ParamVector& params, double h, double tol,
                                   std::span<const std::size_t> coordinates = {});

}  // namespace forgetbench::ad
