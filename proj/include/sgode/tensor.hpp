#pragma once

#include <cstdint>
#include <functional>
#include <initializer_list>
#include <map>
#include <memory>
#include <string>
#include <vector>

namespace sgode {

class Tape;

namespace detail {
struct TensorImpl {
  int rows = 0;
  int cols = 0;
  std::vector<double> value;
  std::vector<double> grad;  // sized rows*cols iff requires_grad
  bool requires_grad = false;
  Tape* tape = nullptr;
  std::uint64_t gen = 0;  // tape generation this impl was recorded under
};
}  // namespace detail

// Dense 2-D tensor of 64-bit reals with optional participation in
// reverse-mode differentiation. Copies are shallow handles to shared
// storage; ops below produce fresh tensors.
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(int rows, int cols);
  static Tensor full(int rows, int cols, double v);
  static Tensor from_data(int rows, int cols, std::vector<double> data);
  static Tensor from_rows(std::initializer_list<std::initializer_list<double>> rows);
  // Trainable leaf registered on a tape; gradient buffer allocated up front.
  static Tensor param(int rows, int cols, std::vector<double> data, Tape& tape);

  bool defined() const { return impl_ != nullptr; }
  int rows() const { return impl_->rows; }
  int cols() const { return impl_->cols; }
  int size() const { return impl_->rows * impl_->cols; }
  bool requires_grad() const { return impl_ && impl_->requires_grad; }

  double at(int r, int c) const;
  double& at(int r, int c);
  std::vector<double>& data() { return impl_->value; }
  const std::vector<double>& data() const { return impl_->value; }
  std::vector<double>& grad();
  const std::vector<double>& grad() const;
  void zero_grad();

  // Scalar (1x1) value accessor; contract error otherwise.
  double item() const;

  detail::TensorImpl* impl() const { return impl_.get(); }
  std::shared_ptr<detail::TensorImpl> share() const { return impl_; }

 private:
  std::shared_ptr<detail::TensorImpl> impl_;
  friend class Tape;
};

// Records primitive operations in execution order; backward() replays them
// in reverse exactly once and then clears the record, so reusing a stale
// loss is rejected. Single-threaded by contract: one tape per training run.
class Tape {
 public:
  bool recording() const { return recording_; }
  void set_recording(bool on) { recording_ = on; }
  std::size_t size() const { return nodes_.size(); }
  std::uint64_t generation() const { return gen_; }

  // Seeds d(loss)/d(loss)=1 and accumulates gradients into every
  // requires_grad tensor reachable from the loss. Clears the tape.
  void backward(const Tensor& loss);

  // internal: used by ops
  void push(std::function<void()> node) { nodes_.push_back(std::move(node)); }
  std::uint64_t stamp() const { return gen_; }

 private:
  std::vector<std::function<void()>> nodes_;
  std::uint64_t gen_ = 1;
  bool recording_ = true;
};

// ---- differentiable primitives -------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b);
// a * b^T without materializing the transpose.
Tensor matmul_nt(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& x);

Tensor relu(const Tensor& x);
Tensor tanh_op(const Tensor& x);
Tensor sigmoid(const Tensor& x);

// Binary elementwise; b may share a's shape or be a 1x1 scalar or a
// 1 x cols row vector (broadcast over rows).
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& x, double s);

// sum_i coeff_i * term_i over identically shaped tensors; single tape node.
Tensor lincomb(const std::vector<std::pair<Tensor, double>>& terms);

// Forward: round(hardsigmoid(alpha*x)), exactly {0,1}-valued with
// hardsigmoid(z) = clamp(z/6 + 1/2, 0, 1) and 0.5 rounding away from zero.
// Backward: straight-through, d/dx = alpha * hardsigmoid'(alpha*x).
Tensor hardsigmoid_ste(const Tensor& x, double alpha);

// Softmax across each row.
Tensor row_softmax(const Tensor& x);

// diag(b) * x with b an n x 1 column of per-row scales.
Tensor row_scale(const Tensor& x, const Tensor& b);

// out[i,:] = h[i,:] * W_i where W_i is w's row i reshaped to (h.cols x
// h.cols). Realizes per-node weights produced from a shared weight pool.
Tensor per_node_linear(const Tensor& h, const Tensor& w);

Tensor concat_cols(const Tensor& a, const Tensor& b);

Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);
// mean |a-b|; subgradient sign(0)=0.
Tensor l1_mean_abs_diff(const Tensor& a, const Tensor& b);
// mean |a-b| over entries where mask!=0 (mask is a constant tensor).
Tensor masked_l1(const Tensor& a, const Tensor& b, const Tensor& mask);

// ---- optimizer -------------------------------------------------------------

// Ordered (by name) collection of trainable leaves.
class ParamStore {
 public:
  Tensor& add(const std::string& name, Tensor t);
  Tensor& get(const std::string& name);
  const Tensor& get(const std::string& name) const;
  bool contains(const std::string& name) const;
  std::map<std::string, Tensor>& items() { return items_; }
  const std::map<std::string, Tensor>& items() const { return items_; }
  void zero_grad();

 private:
  std::map<std::string, Tensor> items_;
};

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.0;  // L2 term added to the gradient
};

class Adam {
 public:
  explicit Adam(AdamConfig cfg) : cfg_(cfg) {}
  // One update over every parameter; throws on non-finite gradients,
  // naming the offending parameter.
  void step(ParamStore& params);
  const AdamConfig& config() const { return cfg_; }
  void set_lr(double lr) { cfg_.lr = lr; }

 private:
  struct Slot {
    std::vector<double> m, v;
  };
  AdamConfig cfg_;
  std::map<std::string, Slot> slots_;
  std::int64_t t_ = 0;
};

}  // namespace sgode
