#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "cgt/rng.hpp"

namespace cgt {

struct TensorImpl;

// Dense row-major tensor of 64-bit floats with reverse-mode differentiation.
// A Tensor is a cheap shared handle; ops record a backward closure on their
// output so that backward() on a scalar loss fills every reachable
// requires-grad tensor's grad buffer. Gradients accumulate additively and are
// zeroed explicitly (adam_step does this after each update), which is what
// makes weight tying (one tensor used in several places) work unmodified.
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(std::vector<int> shape, bool requires_grad = false);
  static Tensor full(std::vector<int> shape, double value, bool requires_grad = false);
  static Tensor from(std::vector<int> shape, std::vector<double> values, bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);
  static Tensor randn(std::vector<int> shape, double stddev, Rng& rng, bool requires_grad = false);

  bool defined() const { return impl_ != nullptr; }

  const std::vector<int>& shape() const;
  int dim(int i) const;
  int ndim() const;
  std::size_t size() const;

  double* data();
  const double* data() const;
  std::vector<double>& values();
  const std::vector<double>& values() const;

  // 2-D accessors (row-major).
  double& at(int r, int c);
  double at(int r, int c) const;
  int rows() const { return dim(0); }
  int cols() const { return dim(1); }

  double item() const;  // scalar tensors only

  bool requires_grad() const;
  bool has_grad() const;
  std::vector<double>& grad();
  const std::vector<double>& grad() const;
  void zero_grad();

  // Reverse-mode sweep from a scalar loss. Accumulates into grad buffers.
  void backward();

  bool all_finite() const;
  Tensor clone() const;  // deep copy of values, detached from any graph

  std::string shape_str() const;

  TensorImpl* impl() const { return impl_.get(); }

 private:
  explicit Tensor(std::shared_ptr<TensorImpl> impl) : impl_(std::move(impl)) {}
  std::shared_ptr<TensorImpl> impl_;

  friend Tensor make_op_output(std::vector<int> shape, std::vector<Tensor> parents,
                               std::function<void(TensorImpl&)> backward_fn);
};

struct TensorImpl {
  std::vector<int> shape;
  std::vector<double> data;
  bool requires_grad = false;
  std::vector<double> grad;  // allocated iff requires_grad

  // Graph edges (empty for leaves and no-grad outputs).
  std::vector<Tensor> parents;
  std::function<void(TensorImpl&)> backward_fn;
};

// Thread-local switch for gradient recording; inference and finite-difference
// probes run inside a NoGradGuard to skip graph construction.
bool grad_enabled();
struct NoGradGuard {
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

// ---- Operations -----------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);
Tensor add(const Tensor& a, const Tensor& b);
Tensor mul_scalar(const Tensor& a, double s);
Tensor add_row_bias(const Tensor& x, const Tensor& bias);
Tensor gelu(const Tensor& x);
Tensor tanh_op(const Tensor& x);
Tensor slice_rows(const Tensor& x, int start, int count);
Tensor slice_cols(const Tensor& x, int start, int count);
Tensor concat_cols(const std::vector<Tensor>& parts);
Tensor embedding_rows(const Tensor& table, const std::vector<int>& ids);
Tensor sum(const Tensor& x);
Tensor mean_scalars(const std::vector<Tensor>& xs);
Tensor dropout(const Tensor& x, double rate, Rng& rng);

// Row-wise softmax of (logits + mask). Mask entries must be exactly 0 or
// -inf; masked positions come out exactly 0 and every row must keep at least
// one unmasked entry. Stabilized by the row max over unmasked entries.
Tensor masked_softmax(const Tensor& logits, const Tensor& mask);

Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps);

// Mean negative log-softmax of the target class over rows whose target is not
// ignore_id. Ignored rows contribute nothing to value or gradient.
Tensor cross_entropy_from_logits(const Tensor& logits, const std::vector<int>& targets, int ignore_id);

}  // namespace cgt
