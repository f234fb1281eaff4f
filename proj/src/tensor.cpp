#include "sgsr/tensor.hpp"

#include <algorithm>
#include <sstream>
#include <unordered_set>

#include "sgsr/error.hpp"

namespace sgsr {

namespace {
thread_local bool grad_mode_enabled = true;
}

bool GradMode::enabled() { return grad_mode_enabled; }
void GradMode::set_enabled(bool on) { grad_mode_enabled = on; }

std::size_t shape_numel(const Shape& shape) {
  std::size_t n = 1;
  for (auto e : shape) n *= e;
  return n;
}

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

static void validate_shape(const Shape& shape) {
  for (auto e : shape) {
    if (e == 0) throw ShapeError("tensor extents must be positive, got " + shape_str(shape));
  }
}

Tensor::Tensor(Shape shape, double fill) {
  validate_shape(shape);
  node_ = std::make_shared<detail::Node>();
  node_->value.assign(shape_numel(shape), fill);
  node_->shape = std::move(shape);
}

Tensor::Tensor(Shape shape, std::vector<double> values) {
  validate_shape(shape);
  if (shape_numel(shape) != values.size()) {
    throw ShapeError("tensor shape " + shape_str(shape) + " holds " +
                     std::to_string(shape_numel(shape)) + " values, got " +
                     std::to_string(values.size()));
  }
  node_ = std::make_shared<detail::Node>();
  node_->value = std::move(values);
  node_->shape = std::move(shape);
}

Tensor Tensor::scalar(double value) { return Tensor(Shape{1}, value); }

const Shape& Tensor::shape() const { return node_->shape; }

std::size_t Tensor::dim(std::size_t axis) const {
  if (axis >= rank()) throw ShapeError("axis out of range for " + shape_str(shape()));
  return node_->shape[axis];
}

std::size_t Tensor::numel() const { return node_->value.size(); }

std::span<const double> Tensor::data() const { return node_->value; }
std::span<double> Tensor::data() { return node_->value; }

double Tensor::item() const {
  if (numel() != 1) throw ShapeError("item() on non-scalar " + shape_str(shape()));
  return node_->value[0];
}

bool Tensor::requires_grad() const { return node_ && node_->requires_grad; }

Tensor& Tensor::set_requires_grad(bool on) {
  node_->requires_grad = on;
  return *this;
}

bool Tensor::has_grad() const { return node_ && !node_->grad.empty(); }

std::span<const double> Tensor::grad() const { return node_->grad; }

void Tensor::zero_grad() {
  if (node_) node_->grad.clear();
}

void Tensor::backward() const {
  if (numel() != 1) throw ShapeError("backward() requires a scalar, got " + shape_str(shape()));
  if (!node_->requires_grad) return;

  // Iterative post-order DFS gives a topological order of the recorded graph.
  std::vector<detail::Node*> order;
  std::unordered_set<detail::Node*> seen;
  std::vector<std::pair<detail::Node*, std::size_t>> stack{{node_.get(), 0}};
  seen.insert(node_.get());
  while (!stack.empty()) {
    auto& [n, next] = stack.back();
    if (next < n->parents.size()) {
      detail::Node* p = n->parents[next++].get();
      if (p->requires_grad && !seen.count(p)) {
        seen.insert(p);
        stack.emplace_back(p, 0);
      }
    } else {
      order.push_back(n);
      stack.pop_back();
    }
  }

  node_->grad_buffer()[0] += 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    detail::Node* n = *it;
    if (n->backward && !n->grad.empty()) n->backward(*n);
  }
}

Tensor Tensor::detach() const { return Tensor(node_->shape, node_->value); }

static Tensor build_result(Shape shape, std::vector<double> value,
                           std::vector<std::shared_ptr<detail::Node>> parents,
                           std::function<void(detail::Node&)> backward) {
  Tensor out(std::move(shape), std::move(value));
  if (!GradMode::enabled()) return out;
  bool any = std::any_of(parents.begin(), parents.end(),
                         [](const auto& p) { return p && p->requires_grad; });
  if (!any) return out;
  detail::Node* n = out.node();
  n->requires_grad = true;
  n->parents = std::move(parents);
  n->backward = std::move(backward);
  return out;
}

Tensor make_result(Shape shape, std::vector<double> value,
                   std::initializer_list<Tensor> parents,
                   std::function<void(detail::Node&)> backward) {
  std::vector<std::shared_ptr<detail::Node>> ps;
  for (const auto& p : parents) ps.push_back(p.node_);
  return build_result(std::move(shape), std::move(value), std::move(ps), std::move(backward));
}

Tensor make_result(Shape shape, std::vector<double> value, const std::vector<Tensor>& parents,
                   std::function<void(detail::Node&)> backward) {
  std::vector<std::shared_ptr<detail::Node>> ps;
  for (const auto& p : parents) ps.push_back(p.node_);
  return build_result(std::move(shape), std::move(value), std::move(ps), std::move(backward));
}

void check_pair(const ComplexPair& pair) {
  if (!pair.real.defined() || !pair.imag.defined() || pair.real.shape() != pair.imag.shape()) {
    throw ShapeError("complex pair real/imag shapes differ: " +
                     (pair.real.defined() ? shape_str(pair.real.shape()) : "<undef>") + " vs " +
                     (pair.imag.defined() ? shape_str(pair.imag.shape()) : "<undef>"));
  }
}

}  // namespace sgsr
