#include "forgetbench/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_set>

#include "forgetbench/error.hpp"

namespace forgetbench::ad {

namespace {

std::string shape_str(const Node& n) { return std::to_string(n.rows) + "x" + std::to_string(n.cols); }

/// Creates an op node. The gradient closure is dropped when no input needs it.
Value make_node(std::size_t rows, std::size_t cols, std::vector<double> value,
                std::vector<std::shared_ptr<Node>> inputs, std::function<void(Node&)> push_grad) {
  auto node = std::make_shared<Node>();
  node->rows = rows;
  node->cols = cols;
  node->value = std::move(value);
  node->requires_grad =
      std::any_of(inputs.begin(), inputs.end(), [](const auto& in) { return in->requires_grad; });
  if (node->requires_grad) {
    node->inputs = std::move(inputs);
    node->push_grad = std::move(push_grad);
  }
  return Value::from_node(std::move(node));
}

struct Broadcast {
  std::size_t rows, cols;
  bool a_row1, a_col1, b_row1, b_col1;

  std::size_t ia(std::size_t r, std::size_t c, std::size_t a_cols) const {
    return (a_row1 ? 0 : r) * a_cols + (a_col1 ? 0 : c);
  }
  std::size_t ib(std::size_t r, std::size_t c, std::size_t b_cols) const {
    return (b_row1 ? 0 : r) * b_cols + (b_col1 ? 0 : c);
  }
};

Broadcast broadcast(const Node& a, const Node& b, const char* op) {
  auto dim = [&](std::size_t x, std::size_t y) {
    if (x == y || y == 1) return x;
    if (x == 1) return y;
    throw ShapeError(std::string(op) + ": cannot broadcast " + shape_str(a) + " with " + shape_str(b));
  };
  Broadcast bc{};
  bc.rows = dim(a.rows, b.rows);
  bc.cols = dim(a.cols, b.cols);
  bc.a_row1 = a.rows == 1 && bc.rows != 1;
  bc.a_col1 = a.cols == 1 && bc.cols != 1;
  bc.b_row1 = b.rows == 1 && bc.rows != 1;
  bc.b_col1 = b.cols == 1 && bc.cols != 1;
  return bc;
}

// f(x, y) with df/dx and df/dy given as functions of (x, y, out).
template <typename F, typename Dx, typename Dy>
Value binary(const Value& a, const Value& b, const char* name, F f, Dx dx, Dy dy) {
  const Node& na = *a.node();
  const Node& nb = *b.node();
  const Broadcast bc = broadcast(na, nb, name);
  std::vector<double> out(bc.rows * bc.cols);
  for (std::size_t r = 0; r < bc.rows; ++r) {
    for (std::size_t c = 0; c < bc.cols; ++c) {
      out[r * bc.cols + c] = f(na.value[bc.ia(r, c, na.cols)], nb.value[bc.ib(r, c, nb.cols)]);
    }
  }
  return make_node(bc.rows, bc.cols, std::move(out), {a.node(), b.node()}, [bc, dx, dy](Node& self) {
    Node& x = *self.inputs[0];
    Node& y = *self.inputs[1];
    for (std::size_t r = 0; r < bc.rows; ++r) {
      for (std::size_t c = 0; c < bc.cols; ++c) {
        const std::size_t o = r * bc.cols + c;
        const std::size_t i = bc.ia(r, c, x.cols);
        const std::size_t j = bc.ib(r, c, y.cols);
        const double g = self.grad[o];
        if (x.requires_grad) x.grad_buffer()[i] += g * dx(x.value[i], y.value[j], self.value[o]);
        if (y.requires_grad) y.grad_buffer()[j] += g * dy(x.value[i], y.value[j], self.value[o]);
      }
    }
  });
}

// f(x) with df/dx given as a function of (x, out).
template <typename F, typename D>
Value unary(const Value& a, F f, D d) {
  const Node& na = *a.node();
  std::vector<double> out(na.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = f(na.value[i]);
  return make_node(na.rows, na.cols, std::move(out), {a.node()}, [d](Node& self) {
    Node& x = *self.inputs[0];
    auto& g = x.grad_buffer();
    for (std::size_t i = 0; i < self.value.size(); ++i) g[i] += self.grad[i] * d(x.value[i], self.value[i]);
  });
}

}  // namespace

// ---------------------------------------------------------------------------
// Value

Value::Value(double scalar) : node_(std::make_shared<Node>()) { node_->value = {scalar}; }

Value Value::constant(std::size_t rows, std::size_t cols, std::vector<double> data) {
  return leaf(rows, cols, std::move(data), false);
}

Value Value::leaf(std::size_t rows, std::size_t cols, std::vector<double> data, bool requires_grad) {
  if (data.size() != rows * cols) {
    throw ShapeError("leaf data has " + std::to_string(data.size()) + " entries for shape " +
                     std::to_string(rows) + "x" + std::to_string(cols));
  }
  auto node = std::make_shared<Node>();
  node->rows = rows;
  node->cols = cols;
  node->value = std::move(data);
  node->requires_grad = requires_grad;
  return Value(std::move(node));
}

double Value::item() const {
  if (!is_scalar()) throw ContractError("item() on a " + shape_str(*node_) + " value");
  return node_->value[0];
}

std::vector<double> Value::grad() const {
  if (node_->grad.size() == node_->value.size()) return node_->grad;
  return std::vector<double>(node_->value.size(), 0.0);
}

void Value::zero_grad() { node_->grad.assign(node_->value.size(), 0.0); }

void backward(const Value& root) {
  if (!root.defined() || !root.is_scalar()) throw ContractError("backward() requires a scalar root");
  if (!root.requires_grad()) return;

  // Iterative post-order DFS; `order` ends up topologically sorted.
  std::vector<Node*> order;
  std::unordered_set<Node*> seen;
  std::vector<std::pair<Node*, std::size_t>> stack;
  stack.emplace_back(root.node().get(), 0);
  seen.insert(root.node().get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->inputs.size()) {
      Node* child = node->inputs[next++].get();
      if (child->requires_grad && seen.insert(child).second) stack.emplace_back(child, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }
  for (Node* n : order) {
    if (!n->is_leaf()) n->grad.assign(n->value.size(), 0.0);
  }
  root.node()->grad_buffer()[0] += 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    if (!(*it)->is_leaf()) (*it)->push_grad(**it);
  }
}

// ---------------------------------------------------------------------------
// Element-wise

Value add(const Value& a, const Value& b) {
  return binary(
      a, b, "add", [](double x, double y) { return x + y; }, [](double, double, double) { return 1.0; },
      [](double, double, double) { return 1.0; });
}

Value sub(const Value& a, const Value& b) {
  return binary(
      a, b, "sub", [](double x, double y) { return x - y; }, [](double, double, double) { return 1.0; },
      [](double, double, double) { return -1.0; });
}

Value mul(const Value& a, const Value& b) {
  return binary(
      a, b, "mul", [](double x, double y) { return x * y; }, [](double, double y, double) { return y; },
      [](double x, double, double) { return x; });
}

Value div(const Value& a, const Value& b) {
  return binary(
      a, b, "div", [](double x, double y) { return x / y; }, [](double, double y, double) { return 1.0 / y; },
      [](double, double y, double out) { return -out / y; });
}

Value max(const Value& a, const Value& b) {
  return binary(
      a, b, "max", [](double x, double y) { return x >= y ? x : y; },
      [](double x, double y, double) { return x >= y ? 1.0 : 0.0; },
      [](double x, double y, double) { return x >= y ? 0.0 : 1.0; });
}

Value neg(const Value& a) {
  return unary(a, [](double x) { return -x; }, [](double, double) { return -1.0; });
}

Value exp(const Value& a) {
  return unary(a, [](double x) { return std::exp(x); }, [](double, double out) { return out; });
}

Value log(const Value& a) {
  for (double x : a.data()) {
    if (!(x > 0.0)) throw DomainError("log of non-positive value " + std::to_string(x));
  }
  return unary(a, [](double x) { return std::log(x); }, [](double x, double) { return 1.0 / x; });
}

Value tanh(const Value& a) {
  return unary(a, [](double x) { return std::tanh(x); }, [](double, double out) { return 1.0 - out * out; });
}

Value relu(const Value& a) {
  return unary(a, [](double x) { return x > 0.0 ? x : 0.0; }, [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

Value square(const Value& a) {
  return unary(a, [](double x) { return x * x; }, [](double x, double) { return 2.0 * x; });
}

// ---------------------------------------------------------------------------
// Reductions and linear algebra

Value matmul(const Value& a, const Value& b) {
  const Node& x = *a.node();
  const Node& y = *b.node();
  if (x.cols != y.rows) throw ShapeError("matmul: " + shape_str(x) + " times " + shape_str(y));
  const std::size_t m = x.rows, k = x.cols, n = y.cols;
  std::vector<double> out(m * n, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t p = 0; p < k; ++p) {
      const double xv = x.value[i * k + p];
      for (std::size_t j = 0; j < n; ++j) out[i * n + j] += xv * y.value[p * n + j];
    }
  }
  return make_node(m, n, std::move(out), {a.node(), b.node()}, [m, k, n](Node& self) {
    Node& x = *self.inputs[0];
    Node& y = *self.inputs[1];
    if (x.requires_grad) {
      auto& gx = x.grad_buffer();
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t p = 0; p < k; ++p) {
          double acc = 0.0;
          for (std::size_t j = 0; j < n; ++j) acc += self.grad[i * n + j] * y.value[p * n + j];
          gx[i * k + p] += acc;
        }
    }
    if (y.requires_grad) {
      auto& gy = y.grad_buffer();
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t p = 0; p < k; ++p) {
          const double xv = x.value[i * k + p];
          for (std::size_t j = 0; j < n; ++j) gy[p * n + j] += xv * self.grad[i * n + j];
        }
    }
  });
}

Value dot(const Value& a, const Value& b) {
  const Node& x = *a.node();
  const Node& y = *b.node();
  if (x.size() != y.size()) throw ShapeError("dot: " + shape_str(x) + " with " + shape_str(y));
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) s += x.value[i] * y.value[i];
  return make_node(1, 1, {s}, {a.node(), b.node()}, [](Node& self) {
    Node& x = *self.inputs[0];
    Node& y = *self.inputs[1];
    const double g = self.grad[0];
    if (x.requires_grad) {
      auto& gx = x.grad_buffer();
      for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += g * y.value[i];
    }
    if (y.requires_grad) {
      auto& gy = y.grad_buffer();
      for (std::size_t i = 0; i < gy.size(); ++i) gy[i] += g * x.value[i];
    }
  });
}

Value sum(const Value& a) {
  double s = 0.0;
  for (double v : a.data()) s += v;
  return make_node(1, 1, {s}, {a.node()}, [](Node& self) {
    auto& g = self.inputs[0]->grad_buffer();
    for (double& v : g) v += self.grad[0];
  });
}

Value mean(const Value& a) {
  const double n = static_cast<double>(a.size());
  double s = 0.0;
  for (double v : a.data()) s += v;
  return make_node(1, 1, {s / n}, {a.node()}, [n](Node& self) {
    auto& g = self.inputs[0]->grad_buffer();
    for (double& v : g) v += self.grad[0] / n;
  });
}

Value sum_rows(const Value& a) {
  const std::size_t m = a.rows(), n = a.cols();
  std::vector<double> out(m, 0.0);
  const auto data = a.data();
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out[i] += data[i * n + j];
  return make_node(m, 1, std::move(out), {a.node()}, [m, n](Node& self) {
    auto& g = self.inputs[0]->grad_buffer();
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < n; ++j) g[i * n + j] += self.grad[i];
  });
}

Value cosine_similarity_matrix(const Value& a, const Value& b) {
  const Node& x = *a.node();
  const Node& y = *b.node();
  if (x.cols != y.cols) throw ShapeError("cosine_similarity_matrix: " + shape_str(x) + " vs " + shape_str(y));
  const std::size_t m = x.rows, n = y.rows, d = x.cols;
  auto norms = [d](const Node& z) {
    std::vector<double> out(z.rows);
    for (std::size_t i = 0; i < z.rows; ++i) {
      double s = 0.0;
      for (std::size_t c = 0; c < d; ++c) s += z.value[i * d + c] * z.value[i * d + c];
      out[i] = std::sqrt(s);
      if (out[i] == 0.0) throw DomainError("cosine similarity of a zero vector");
    }
    return out;
  };
  auto nx = norms(x);
  auto ny = norms(y);
  std::vector<double> out(m * n);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      double s = 0.0;
      for (std::size_t c = 0; c < d; ++c) s += x.value[i * d + c] * y.value[j * d + c];
      out[i * n + j] = s / (nx[i] * ny[j]);
    }
  // d cos(x, y) / dx = y / (|x||y|) - cos * x / |x|^2
  return make_node(m, n, std::move(out), {a.node(), b.node()},
                   [m, n, d, nx = std::move(nx), ny = std::move(ny)](Node& self) {
                     Node& x = *self.inputs[0];
                     Node& y = *self.inputs[1];
                     for (std::size_t i = 0; i < m; ++i)
                       for (std::size_t j = 0; j < n; ++j) {
                         const double g = self.grad[i * n + j];
                         if (g == 0.0) continue;
                         const double cs = self.value[i * n + j];
                         const double inv = 1.0 / (nx[i] * ny[j]);
                         if (x.requires_grad) {
                           auto& gx = x.grad_buffer();
                           const double cx = cs / (nx[i] * nx[i]);
                           for (std::size_t c = 0; c < d; ++c)
                             gx[i * d + c] += g * (y.value[j * d + c] * inv - cx * x.value[i * d + c]);
                         }
                         if (y.requires_grad) {
                           auto& gy = y.grad_buffer();
                           const double cy = cs / (ny[j] * ny[j]);
                           for (std::size_t c = 0; c < d; ++c)
                             gy[j * d + c] += g * (x.value[i * d + c] * inv - cy * y.value[j * d + c]);
                         }
                       }
                   });
}

Value select_rows(const Value& a, std::span<const std::size_t> indices) {
  const std::size_t d = a.cols();
  const auto data = a.data();
  std::vector<double> out;
  out.reserve(indices.size() * d);
  for (std::size_t r : indices) {
    if (r >= a.rows()) throw ShapeError("select_rows: row " + std::to_string(r) + " out of range");
    out.insert(out.end(), data.begin() + static_cast<std::ptrdiff_t>(r * d),
               data.begin() + static_cast<std::ptrdiff_t>((r + 1) * d));
  }
  std::vector<std::size_t> idx(indices.begin(), indices.end());
  const std::size_t n = idx.size();
  return make_node(n, d, std::move(out), {a.node()}, [d, idx = std::move(idx)](Node& self) {
    auto& g = self.inputs[0]->grad_buffer();
    for (std::size_t i = 0; i < idx.size(); ++i)
      for (std::size_t c = 0; c < d; ++c) g[idx[i] * d + c] += self.grad[i * d + c];
  });
}

Value concat_rows(std::span<const Value> parts) {
  if (parts.empty()) throw ShapeError("concat_rows of nothing");
  const std::size_t d = parts.front().cols();
  std::vector<double> out;
  std::vector<std::shared_ptr<Node>> inputs;
  std::size_t rows = 0;
  for (const auto& p : parts) {
    if (p.cols() != d) throw ShapeError("concat_rows: column counts differ");
    out.insert(out.end(), p.data().begin(), p.data().end());
    inputs.push_back(p.node());
    rows += p.rows();
  }
  return make_node(rows, d, std::move(out), std::move(inputs), [](Node& self) {
    std::size_t offset = 0;
    for (auto& in : self.inputs) {
      if (in->requires_grad) {
        auto& g = in->grad_buffer();
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[offset + i];
      }
      offset += in->size();
    }
  });
}

Value softmax(const Value& a) {
  double top = -INFINITY;
  for (double v : a.data()) top = std::max(top, v);
  const Value e = exp(sub(a, Value(top)));
  return div(e, sum(e));
}

// ---------------------------------------------------------------------------
// ParamVector

void ParamVector::add(std::string name, std::size_t rows, std::size_t cols, std::vector<double> values) {
  if (contains(name)) throw ContractError("parameter '" + name + "' already exists");
  if (values.empty()) values.assign(rows * cols, 0.0);
  if (values.size() != rows * cols) throw ShapeError("parameter '" + name + "' has the wrong element count");
  slots_.push_back({std::move(name), rows, cols, values_.size()});
  values_.insert(values_.end(), values.begin(), values.end());
}

bool ParamVector::contains(std::string_view name) const {
  return std::any_of(slots_.begin(), slots_.end(), [&](const ParamSlot& s) { return s.name == name; });
}

const ParamSlot& ParamVector::slot(std::string_view name) const {
  for (const auto& s : slots_) {
    if (s.name == name) return s;
  }
  throw LookupError("no parameter named '" + std::string(name) + "'");
}

std::span<double> ParamVector::array(std::string_view name) {
  const auto& s = slot(name);
  return std::span<double>(values_).subspan(s.offset, s.size());
}

std::span<const double> ParamVector::array(std::string_view name) const {
  const auto& s = slot(name);
  return std::span<const double>(values_).subspan(s.offset, s.size());
}

// ---------------------------------------------------------------------------
// ParamBinder

ParamBinder::ParamBinder(const ParamVector& params, bool track) : params_(&params), track_(track) {}

Value ParamBinder::array(std::string_view name) {
  for (const auto& b : bindings_) {
    if (b.slot && b.slot->name == name && b.row_ids.empty()) return b.leaf;
  }
  const ParamSlot& s = params_->slot(name);
  auto data = params_->array(name);
  Value leaf = Value::leaf(s.rows, s.cols, std::vector<double>(data.begin(), data.end()), track_);
  bindings_.push_back({leaf, &s, {}});
  return leaf;
}

Value ParamBinder::rows(std::string_view name, std::span<const std::size_t> rows) {
  const ParamSlot& s = params_->slot(name);
  auto data = params_->array(name);
  std::vector<double> out;
  out.reserve(rows.size() * s.cols);
  for (std::size_t r : rows) {
    if (r >= s.rows) throw ShapeError("row " + std::to_string(r) + " out of range for '" + s.name + "'");
    out.insert(out.end(), data.begin() + static_cast<std::ptrdiff_t>(r * s.cols),
               data.begin() + static_cast<std::ptrdiff_t>((r + 1) * s.cols));
  }
  Value leaf = Value::leaf(rows.size(), s.cols, std::move(out), track_);
  if (track_ && !rows.empty()) bindings_.push_back({leaf, &s, std::vector<std::size_t>(rows.begin(), rows.end())});
  return leaf;
}

Value ParamBinder::flat() {
  if (!flat_.defined()) {
    auto v = params_->values();
    flat_ = Value::leaf(v.size(), 1, std::vector<double>(v.begin(), v.end()), track_);
  }
  return flat_;
}

void ParamBinder::add_gradient_to(std::span<double> out) const {
  if (out.size() != params_->total_dim()) throw ShapeError("gradient buffer has the wrong dimension");
  for (const auto& b : bindings_) {
    const auto& g = b.leaf.node()->grad;
    if (g.empty()) continue;
    if (b.row_ids.empty()) {
      for (std::size_t i = 0; i < g.size(); ++i) out[b.slot->offset + i] += g[i];
    } else {
      const std::size_t d = b.slot->cols;
      for (std::size_t i = 0; i < b.row_ids.size(); ++i)
        for (std::size_t c = 0; c < d; ++c) out[b.slot->offset + b.row_ids[i] * d + c] += g[i * d + c];
    }
  }
  if (flat_.defined()) {
    const auto& g = flat_.node()->grad;
    for (std::size_t i = 0; i < g.size(); ++i) out[i] += g[i];
  }
}

std::vector<double> ParamBinder::gradient() const {
  std::vector<double> out(params_->total_dim(), 0.0);
  add_gradient_to(out);
  return out;
}

// ---------------------------------------------------------------------------

FiniteDiffReport finite_diff_check(const GraphFn& f, const ParamVector& params, double h, double tol,
                                   std::span<const std::size_t> coordinates) {
  if (!(h > 0.0)) throw ContractError("finite difference step must be positive");
  ParamBinder binder(params, true);
  const Value root = f(binder);
  backward(root);
  const auto analytic = binder.gradient();

  std::vector<std::size_t> coords(coordinates.begin(), coordinates.end());
  if (coords.empty()) {
    coords.resize(params.total_dim());
    for (std::size_t i = 0; i < coords.size(); ++i) coords[i] = i;
  }
  auto eval = [&f](const ParamVector& p) {
    ParamBinder b(p, false);
    return f(b).item();
  };

  // Coordinates far below the gradient's scale are judged against that scale,
  // so O(h^2) truncation on a near-zero entry does not count as a mismatch.
  double scale = 0.0;
  for (std::size_t i : coords) scale = std::max(scale, std::fabs(analytic[i]));
  const double floor = std::max(1e-7, 1e-3 * scale);

  FiniteDiffReport report;
  ParamVector probe = params;
  for (std::size_t i : coords) {
    const double original = probe.values()[i];
    probe.values()[i] = original + h;
    const double up = eval(probe);
    probe.values()[i] = original - h;
    const double down = eval(probe);
    probe.values()[i] = original;
    const double numeric = (up - down) / (2.0 * h);
    const double a = analytic[i];
    const double rel = std::fabs(a - numeric) / std::max({std::fabs(a), std::fabs(numeric), floor});
    if (rel > report.max_rel_error || report.checked == 0) {
      report.max_rel_error = rel;
      report.worst_coordinate = i;
      report.worst_analytic = a;
      report.worst_numeric = numeric;
    }
    ++report.checked;
  }
  report.passed = report.max_rel_error <= tol;
  return report;
}

}  // namespace forgetbench::ad
