#include "cgt/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <unordered_set>

#include "cgt/errors.hpp"

namespace cgt {

namespace {

thread_local bool g_grad_enabled = true;

std::size_t numel(const std::vector<int>& shape) {
  std::size_t n = 1;
  for (int d : shape) {
    if (d < 0) throw ShapeError("negative dimension in shape");
    n *= static_cast<std::size_t>(d);
  }
  return n;
}

std::string shape_to_string(const std::vector<int>& shape) {
  std::ostringstream os;
  os << "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << "x";
    os << shape[i];
  }
  os << "]";
  return os.str();
}

void require_2d(const Tensor& t, const char* op) {
  if (t.ndim() != 2) {
    throw ShapeError(std::string(op) + ": expected 2-D tensor, got " + t.shape_str());
  }
}

bool any_requires_grad(const std::vector<Tensor>& ts) {
  for (const Tensor& t : ts) {
    if (t.requires_grad()) return true;
  }
  return false;
}

}  // namespace

bool grad_enabled() { return g_grad_enabled; }

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

Tensor make_op_output(std::vector<int> shape, std::vector<Tensor> parents,
                      std::function<void(TensorImpl&)> backward_fn) {
  auto impl = std::make_shared<TensorImpl>();
  impl->shape = std::move(shape);
  impl->data.assign(numel(impl->shape), 0.0);
  if (g_grad_enabled && any_requires_grad(parents)) {
    impl->requires_grad = true;
    impl->grad.assign(impl->data.size(), 0.0);
    impl->parents = std::move(parents);
    impl->backward_fn = std::move(backward_fn);
  }
  return Tensor(std::move(impl));
}

Tensor Tensor::zeros(std::vector<int> shape, bool requires_grad) {
  return full(std::move(shape), 0.0, requires_grad);
}

Tensor Tensor::full(std::vector<int> shape, double value, bool requires_grad) {
  auto impl = std::make_shared<TensorImpl>();
  impl->shape = std::move(shape);
  impl->data.assign(numel(impl->shape), value);
  impl->requires_grad = requires_grad;
  if (requires_grad) impl->grad.assign(impl->data.size(), 0.0);
  return Tensor(std::move(impl));
}

Tensor Tensor::from(std::vector<int> shape, std::vector<double> values, bool requires_grad) {
  if (numel(shape) != values.size()) {
    throw ShapeError("from: " + shape_to_string(shape) + " does not hold " +
                     std::to_string(values.size()) + " values");
  }
  auto impl = std::make_shared<TensorImpl>();
  impl->shape = std::move(shape);
  impl->data = std::move(values);
  impl->requires_grad = requires_grad;
  if (requires_grad) impl->grad.assign(impl->data.size(), 0.0);
  return Tensor(std::move(impl));
}

Tensor Tensor::scalar(double value, bool requires_grad) {
  return from({}, {value}, requires_grad);
}

Tensor Tensor::randn(std::vector<int> shape, double stddev, Rng& rng, bool requires_grad) {
  Tensor t = zeros(std::move(shape), requires_grad);
  for (double& v : t.values()) v = stddev * normal_sample(rng);
  return t;
}

const std::vector<int>& Tensor::shape() const { return impl_->shape; }

int Tensor::dim(int i) const {
  if (i < 0 || i >= static_cast<int>(impl_->shape.size())) {
    throw ShapeError("dim index " + std::to_string(i) + " out of range for " + shape_str());
  }
  return impl_->shape[static_cast<std::size_t>(i)];
}

int Tensor::ndim() const { return static_cast<int>(impl_->shape.size()); }

std::size_t Tensor::size() const { return impl_->data.size(); }

double* Tensor::data() { return impl_->data.data(); }
const double* Tensor::data() const { return impl_->data.data(); }
std::vector<double>& Tensor::values() { return impl_->data; }
const std::vector<double>& Tensor::values() const { return impl_->data; }

double& Tensor::at(int r, int c) {
  return impl_->data[static_cast<std::size_t>(r) * static_cast<std::size_t>(dim(1)) +
                     static_cast<std::size_t>(c)];
}

double Tensor::at(int r, int c) const {
  return impl_->data[static_cast<std::size_t>(r) * static_cast<std::size_t>(dim(1)) +
                     static_cast<std::size_t>(c)];
}

double Tensor::item() const {
  if (size() != 1) throw ShapeError("item: tensor " + shape_str() + " is not a scalar");
  return impl_->data[0];
}

bool Tensor::requires_grad() const { return impl_ && impl_->requires_grad; }
bool Tensor::has_grad() const { return impl_ && !impl_->grad.empty(); }

std::vector<double>& Tensor::grad() {
  if (!has_grad()) throw IncompleteGradientError("grad buffer absent on tensor " + shape_str());
  return impl_->grad;
}

const std::vector<double>& Tensor::grad() const {
  if (!has_grad()) throw IncompleteGradientError("grad buffer absent on tensor " + shape_str());
  return impl_->grad;
}

void Tensor::zero_grad() {
  if (has_grad()) std::fill(impl_->grad.begin(), impl_->grad.end(), 0.0);
}

void Tensor::backward() {
  if (size() != 1) {
    throw ShapeError("backward: loss must be scalar, got " + shape_str());
  }
  if (!impl_->requires_grad) return;

  // Iterative DFS post-order over the graph.
  std::vector<TensorImpl*> topo;
  std::unordered_set<TensorImpl*> visited;
  std::vector<std::pair<TensorImpl*, std::size_t>> stack;
  stack.emplace_back(impl_.get(), 0);
  visited.insert(impl_.get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      TensorImpl* parent = node->parents[next].impl();
      ++next;
      if (parent->requires_grad && !visited.count(parent)) {
        visited.insert(parent);
        stack.emplace_back(parent, 0);
      }
    } else {
      topo.push_back(node);
      stack.pop_back();
    }
  }

  impl_->grad[0] += 1.0;
  for (auto it = topo.rbegin(); it != topo.rend(); ++it) {
    if ((*it)->backward_fn) (*it)->backward_fn(**it);
  }
}

bool Tensor::all_finite() const {
  for (double v : impl_->data) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

Tensor Tensor::clone() const {
  return Tensor::from(impl_->shape, impl_->data, impl_->requires_grad);
}

std::string Tensor::shape_str() const { return shape_to_string(impl_->shape); }

// ---- Operations -----------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_2d(a, "matmul");
  require_2d(b, "matmul");
  const int m = a.dim(0), k = a.dim(1), k2 = b.dim(0), n = b.dim(1);
  if (k != k2) {
    throw ShapeError("matmul: inner dimensions disagree, " + a.shape_str() + " vs " + b.shape_str());
  }

  Tensor out = make_op_output(
      {m, n}, {a, b}, [a, b, m, k, n](TensorImpl& self) {
        const double* g = self.grad.data();
        if (a.requires_grad()) {
          // grad_a += g . b^T
          double* ga = a.impl()->grad.data();
          const double* bd = b.data();
          for (int i = 0; i < m; ++i) {
            for (int kk = 0; kk < k; ++kk) {
              double acc = 0.0;
              const double* grow = g + static_cast<std::size_t>(i) * n;
              const double* brow = bd + static_cast<std::size_t>(kk) * n;
              for (int j = 0; j < n; ++j) acc += grow[j] * brow[j];
              ga[static_cast<std::size_t>(i) * k + kk] += acc;
            }
          }
        }
        if (b.requires_grad()) {
          // grad_b += a^T . g
          double* gb = b.impl()->grad.data();
          const double* ad = a.data();
          for (int i = 0; i < m; ++i) {
            const double* grow = g + static_cast<std::size_t>(i) * n;
            for (int kk = 0; kk < k; ++kk) {
              const double av = ad[static_cast<std::size_t>(i) * k + kk];
              if (av == 0.0) continue;
              double* gbrow = gb + static_cast<std::size_t>(kk) * n;
              for (int j = 0; j < n; ++j) gbrow[j] += av * grow[j];
            }
          }
        }
      });

  double* od = out.data();
  const double* ad = a.data();
  const double* bd = b.data();
  for (int i = 0; i < m; ++i) {
    double* orow = od + static_cast<std::size_t>(i) * n;
    for (int kk = 0; kk < k; ++kk) {
      const double av = ad[static_cast<std::size_t>(i) * k + kk];
      if (av == 0.0) continue;
      const double* brow = bd + static_cast<std::size_t>(kk) * n;
      for (int j = 0; j < n; ++j) orow[j] += av * brow[j];
    }
  }
  return out;
}

Tensor transpose(const Tensor& a) {
  require_2d(a, "transpose");
  const int m = a.dim(0), n = a.dim(1);
  Tensor out = make_op_output({n, m}, {a}, [a, m, n](TensorImpl& self) {
    if (!a.requires_grad()) return;
    double* ga = a.impl()->grad.data();
    const double* g = self.grad.data();
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < m; ++j) {
        ga[static_cast<std::size_t>(j) * n + i] += g[static_cast<std::size_t>(i) * m + j];
      }
    }
  });
  double* od = out.data();
  const double* ad = a.data();
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < n; ++j) {
      od[static_cast<std::size_t>(j) * m + i] = ad[static_cast<std::size_t>(i) * n + j];
    }
  }
  return out;
}

Tensor add(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) {
    throw ShapeError("add: shape mismatch " + a.shape_str() + " vs " + b.shape_str());
  }
  Tensor out = make_op_output(a.shape(), {a, b}, [a, b](TensorImpl& self) {
    const std::size_t n = self.data.size();
    if (a.requires_grad()) {
      double* ga = a.impl()->grad.data();
      for (std::size_t i = 0; i < n; ++i) ga[i] += self.grad[i];
    }
    if (b.requires_grad()) {
      double* gb = b.impl()->grad.data();
      for (std::size_t i = 0; i < n; ++i) gb[i] += self.grad[i];
    }
  });
  const std::size_t n = out.size();
  for (std::size_t i = 0; i < n; ++i) out.data()[i] = a.data()[i] + b.data()[i];
  return out;
}

Tensor mul_scalar(const Tensor& a, double s) {
  Tensor out = make_op_output(a.shape(), {a}, [a, s](TensorImpl& self) {
    if (!a.requires_grad()) return;
    double* ga = a.impl()->grad.data();
    for (std::size_t i = 0; i < self.data.size(); ++i) ga[i] += s * self.grad[i];
  });
  for (std::size_t i = 0; i < out.size(); ++i) out.data()[i] = s * a.data()[i];
  return out;
}

Tensor add_row_bias(const Tensor& x, const Tensor& bias) {
  require_2d(x, "add_row_bias");
  if (bias.ndim() != 1 || bias.dim(0) != x.dim(1)) {
    throw ShapeError("add_row_bias: bias " + bias.shape_str() + " does not match " + x.shape_str());
  }
  const int m = x.dim(0), n = x.dim(1);
  Tensor out = make_op_output({m, n}, {x, bias}, [x, bias, m, n](TensorImpl& self) {
    if (x.requires_grad()) {
      double* gx = x.impl()->grad.data();
      for (std::size_t i = 0; i < self.data.size(); ++i) gx[i] += self.grad[i];
    }
    if (bias.requires_grad()) {
      double* gb = bias.impl()->grad.data();
      for (int i = 0; i < m; ++i) {
        const double* grow = self.grad.data() + static_cast<std::size_t>(i) * n;
        for (int j = 0; j < n; ++j) gb[j] += grow[j];
      }
    }
  });
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < n; ++j) {
      out.at(i, j) = x.at(i, j) + bias.data()[j];
    }
  }
  return out;
}

Tensor gelu(const Tensor& x) {
  Tensor out = make_op_output(x.shape(), {x}, [x](TensorImpl& self) {
    if (!x.requires_grad()) return;
    double* gx = x.impl()->grad.data();
    const double* xd = x.data();
    constexpr double inv_sqrt2 = 0.7071067811865475244;
    constexpr double inv_sqrt2pi = 0.3989422804014326779;
    for (std::size_t i = 0; i < self.data.size(); ++i) {
      const double v = xd[i];
      const double cdf = 0.5 * (1.0 + std::erf(v * inv_sqrt2));
      const double pdf = inv_sqrt2pi * std::exp(-0.5 * v * v);
      gx[i] += self.grad[i] * (cdf + v * pdf);
    }
  });
  constexpr double inv_sqrt2 = 0.7071067811865475244;
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double v = x.data()[i];
    out.data()[i] = 0.5 * v * (1.0 + std::erf(v * inv_sqrt2));
  }
  return out;
}

Tensor tanh_op(const Tensor& x) {
  Tensor out = make_op_output(x.shape(), {x}, [x](TensorImpl& self) {
    if (!x.requires_grad()) return;
    double* gx = x.impl()->grad.data();
    for (std::size_t i = 0; i < self.data.size(); ++i) {
      const double y = self.data[i];
      gx[i] += self.grad[i] * (1.0 - y * y);
    }
  });
  for (std::size_t i = 0; i < out.size(); ++i) out.data()[i] = std::tanh(x.data()[i]);
  return out;
}

Tensor slice_rows(const Tensor& x, int start, int count) {
  require_2d(x, "slice_rows");
  const int m = x.dim(0), n = x.dim(1);
  if (start < 0 || count < 0 || start + count > m) {
    throw ShapeError("slice_rows: [" + std::to_string(start) + ", " +
                     std::to_string(start + count) + ") out of range for " + x.shape_str());
  }
  Tensor out = make_op_output({count, n}, {x}, [x, start, n](TensorImpl& self) {
    if (!x.requires_grad()) return;
    double* gx = x.impl()->grad.data() + static_cast<std::size_t>(start) * n;
    for (std::size_t i = 0; i < self.data.size(); ++i) gx[i] += self.grad[i];
  });
  const double* src = x.data() + static_cast<std::size_t>(start) * n;
  std::copy(src, src + out.size(), out.data());
  return out;
}

Tensor slice_cols(const Tensor& x, int start, int count) {
  require_2d(x, "slice_cols");
  const int m = x.dim(0), n = x.dim(1);
  if (start < 0 || count < 0 || start + count > n) {
    throw ShapeError("slice_cols: [" + std::to_string(start) + ", " +
                     std::to_string(start + count) + ") out of range for " + x.shape_str());
  }
  Tensor out = make_op_output({m, count}, {x}, [x, start, count, m, n](TensorImpl& self) {
    if (!x.requires_grad()) return;
    double* gx = x.impl()->grad.data();
    for (int i = 0; i < m; ++i) {
      const double* grow = self.grad.data() + static_cast<std::size_t>(i) * count;
      double* gxrow = gx + static_cast<std::size_t>(i) * n + start;
      for (int j = 0; j < count; ++j) gxrow[j] += grow[j];
    }
  });
  for (int i = 0; i < m; ++i) {
    const double* src = x.data() + static_cast<std::size_t>(i) * n + start;
    std::copy(src, src + count, out.data() + static_cast<std::size_t>(i) * count);
  }
  return out;
}

Tensor concat_cols(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw ShapeError("concat_cols: no parts");
  const int m = parts[0].dim(0);
  int total = 0;
  for (const Tensor& p : parts) {
    require_2d(p, "concat_cols");
    if (p.dim(0) != m) {
      throw ShapeError("concat_cols: row mismatch " + parts[0].shape_str() + " vs " + p.shape_str());
    }
    total += p.dim(1);
  }
  Tensor out = make_op_output({m, total}, parts, [parts, m, total](TensorImpl& self) {
    int offset = 0;
    for (const Tensor& p : parts) {
      const int w = p.dim(1);
      if (p.requires_grad()) {
        double* gp = p.impl()->grad.data();
        for (int i = 0; i < m; ++i) {
          const double* grow = self.grad.data() + static_cast<std::size_t>(i) * total + offset;
          double* gprow = gp + static_cast<std::size_t>(i) * w;
          for (int j = 0; j < w; ++j) gprow[j] += grow[j];
        }
      }
      offset += w;
    }
  });
  int offset = 0;
  for (const Tensor& p : parts) {
    const int w = p.dim(1);
    for (int i = 0; i < m; ++i) {
      const double* src = p.data() + static_cast<std::size_t>(i) * w;
      std::copy(src, src + w, out.data() + static_cast<std::size_t>(i) * total + offset);
    }
    offset += w;
  }
  return out;
}

Tensor embedding_rows(const Tensor& table, const std::vector<int>& ids) {
  require_2d(table, "embedding_rows");
  const int v = table.dim(0), d = table.dim(1);
  for (int id : ids) {
    if (id < 0 || id >= v) {
      throw VocabularyError("embedding_rows: id " + std::to_string(id) +
                            " outside table of " + std::to_string(v) + " rows");
    }
  }
  const int m = static_cast<int>(ids.size());
  Tensor out = make_op_output({m, d}, {table}, [table, ids, d](TensorImpl& self) {
    if (!table.requires_grad()) return;
    double* gt = table.impl()->grad.data();
    for (std::size_t i = 0; i < ids.size(); ++i) {
      const double* grow = self.grad.data() + i * d;
      double* trow = gt + static_cast<std::size_t>(ids[i]) * d;
      for (int j = 0; j < d; ++j) trow[j] += grow[j];
    }
  });
  for (std::size_t i = 0; i < ids.size(); ++i) {
    const double* src = table.data() + static_cast<std::size_t>(ids[i]) * d;
    std::copy(src, src + d, out.data() + i * d);
  }
  return out;
}

Tensor sum(const Tensor& x) {
  Tensor out = make_op_output({}, {x}, [x](TensorImpl& self) {
    if (!x.requires_grad()) return;
    double* gx = x.impl()->grad.data();
    const double g = self.grad[0];
    for (std::size_t i = 0; i < x.size(); ++i) gx[i] += g;
  });
  double acc = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) acc += x.data()[i];
  out.data()[0] = acc;
  return out;
}

Tensor mean_scalars(const std::vector<Tensor>& xs) {
  if (xs.empty()) throw EmptyLossError("mean_scalars: empty list");
  for (const Tensor& x : xs) {
    if (x.size() != 1) throw ShapeError("mean_scalars: non-scalar element " + x.shape_str());
  }
  const double inv = 1.0 / static_cast<double>(xs.size());
  Tensor out = make_op_output({}, xs, [xs, inv](TensorImpl& self) {
    const double g = self.grad[0] * inv;
    for (const Tensor& x : xs) {
      if (x.requires_grad()) x.impl()->grad[0] += g;
    }
  });
  double acc = 0.0;
  for (const Tensor& x : xs) acc += x.data()[0];
  out.data()[0] = acc * inv;
  return out;
}

Tensor dropout(const Tensor& x, double rate, Rng& rng) {
  if (rate < 0.0 || rate >= 1.0) throw ConfigError("dropout: rate must be in [0, 1)");
  if (rate == 0.0) return mul_scalar(x, 1.0);
  const double scale = 1.0 / (1.0 - rate);
  auto mask = std::make_shared<std::vector<double>>(x.size());
  for (double& m : *mask) m = bernoulli(rng, rate) ? 0.0 : scale;
  Tensor out = make_op_output(x.shape(), {x}, [x, mask](TensorImpl& self) {
    if (!x.requires_grad()) return;
    double* gx = x.impl()->grad.data();
    for (std::size_t i = 0; i < self.data.size(); ++i) gx[i] += self.grad[i] * (*mask)[i];
  });
  for (std::size_t i = 0; i < out.size(); ++i) out.data()[i] = x.data()[i] * (*mask)[i];
  return out;
}

Tensor masked_softmax(const Tensor& logits, const Tensor& mask) {
  require_2d(logits, "masked_softmax");
  if (logits.shape() != mask.shape()) {
    throw ShapeError("masked_softmax: logits " + logits.shape_str() + " vs mask " + mask.shape_str());
  }
  const int m = logits.dim(0), n = logits.dim(1);
  constexpr double neg_inf = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < mask.size(); ++i) {
    const double v = mask.data()[i];
    if (v != 0.0 && v != neg_inf) {
      throw DegenerateMaskError("masked_softmax: mask entry must be 0 or -inf, got " +
                                std::to_string(v));
    }
  }

  // mask captured by value: a plain data tensor, not part of the graph.
  Tensor out = make_op_output({m, n}, {logits}, [logits, mask, m, n](TensorImpl& self) {
    if (!logits.requires_grad()) return;
    double* gl = logits.impl()->grad.data();
    for (int i = 0; i < m; ++i) {
      const std::size_t base = static_cast<std::size_t>(i) * n;
      const double* p = self.data.data() + base;
      const double* g = self.grad.data() + base;
      double dot = 0.0;
      for (int j = 0; j < n; ++j) {
        if (mask.data()[base + j] == 0.0) dot += g[j] * p[j];
      }
      for (int j = 0; j < n; ++j) {
        if (mask.data()[base + j] == 0.0) gl[base + j] += p[j] * (g[j] - dot);
      }
    }
  });

  for (int i = 0; i < m; ++i) {
    const std::size_t base = static_cast<std::size_t>(i) * n;
    double row_max = neg_inf;
    for (int j = 0; j < n; ++j) {
      if (mask.data()[base + j] == 0.0) row_max = std::max(row_max, logits.data()[base + j]);
    }
    if (row_max == neg_inf) {
      throw DegenerateMaskError("masked_softmax: row " + std::to_string(i) + " fully masked");
    }
    double denom = 0.0;
    for (int j = 0; j < n; ++j) {
      if (mask.data()[base + j] == 0.0) {
        const double e = std::exp(logits.data()[base + j] - row_max);
        out.data()[base + j] = e;
        denom += e;
      }
    }
    for (int j = 0; j < n; ++j) {
      if (mask.data()[base + j] == 0.0) out.data()[base + j] /= denom;
    }
  }
  return out;
}

Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps) {
  require_2d(x, "layer_norm");
  const int m = x.dim(0), n = x.dim(1);
  if (gain.ndim() != 1 || gain.dim(0) != n || bias.ndim() != 1 || bias.dim(0) != n) {
    throw ShapeError("layer_norm: gain " + gain.shape_str() + " / bias " + bias.shape_str() +
                     " do not match " + x.shape_str());
  }
  if (!(eps > 0.0)) throw NumericError("layer_norm: eps must be positive");

  // x_hat rows are needed by backward; stash them outside the graph.
  auto x_hat = std::make_shared<std::vector<double>>(x.size());
  auto inv_std = std::make_shared<std::vector<double>>(static_cast<std::size_t>(m));

  Tensor out = make_op_output({m, n}, {x, gain, bias}, [x, gain, bias, x_hat, inv_std, m, n](TensorImpl& self) {
    for (int i = 0; i < m; ++i) {
      const std::size_t base = static_cast<std::size_t>(i) * n;
      const double* g = self.grad.data() + base;
      const double* xh = x_hat->data() + base;
      if (gain.requires_grad()) {
        double* gg = gain.impl()->grad.data();
        for (int j = 0; j < n; ++j) gg[j] += g[j] * xh[j];
      }
      if (bias.requires_grad()) {
        double* gb = bias.impl()->grad.data();
        for (int j = 0; j < n; ++j) gb[j] += g[j];
      }
      if (x.requires_grad()) {
        double* gx = x.impl()->grad.data() + base;
        double mean_dxhat = 0.0, mean_dxhat_xhat = 0.0;
        for (int j = 0; j < n; ++j) {
          const double dxh = g[j] * gain.data()[j];
          mean_dxhat += dxh;
          mean_dxhat_xhat += dxh * xh[j];
        }
        mean_dxhat /= n;
        mean_dxhat_xhat /= n;
        const double istd = (*inv_std)[static_cast<std::size_t>(i)];
        for (int j = 0; j < n; ++j) {
          const double dxh = g[j] * gain.data()[j];
          gx[j] += istd * (dxh - mean_dxhat - xh[j] * mean_dxhat_xhat);
        }
      }
    }
  });

  for (int i = 0; i < m; ++i) {
    const std::size_t base = static_cast<std::size_t>(i) * n;
    double mean = 0.0;
    for (int j = 0; j < n; ++j) mean += x.data()[base + j];
    mean /= n;
    double var = 0.0;
    for (int j = 0; j < n; ++j) {
      const double d = x.data()[base + j] - mean;
      var += d * d;
    }
    var /= n;
    const double istd = 1.0 / std::sqrt(var + eps);
    (*inv_std)[static_cast<std::size_t>(i)] = istd;
    for (int j = 0; j < n; ++j) {
      const double xh = (x.data()[base + j] - mean) * istd;
      (*x_hat)[base + j] = xh;
      out.data()[base + j] = xh * gain.data()[j] + bias.data()[j];
    }
  }
  return out;
}

Tensor cross_entropy_from_logits(const Tensor& logits, const std::vector<int>& targets, int ignore_id) {
  require_2d(logits, "cross_entropy_from_logits");
  const int m = logits.dim(0), v = logits.dim(1);
  if (static_cast<int>(targets.size()) != m) {
    throw ShapeError("cross_entropy_from_logits: " + std::to_string(targets.size()) +
                     " targets for " + std::to_string(m) + " rows");
  }
  int valid = 0;
  for (int t : targets) {
    if (t == ignore_id) continue;
    if (t < 0 || t >= v) {
      throw VocabularyError("cross_entropy_from_logits: target " + std::to_string(t) +
                            " outside [0, " + std::to_string(v) + ")");
    }
    ++valid;
  }
  if (valid == 0) {
    throw EmptyLossError("cross_entropy_from_logits: every position ignored");
  }
  const double inv_valid = 1.0 / static_cast<double>(valid);

  // Softmax rows for the valid positions, reused by backward.
  auto probs = std::make_shared<std::vector<double>>(logits.size(), 0.0);

  Tensor out = make_op_output({}, {logits}, [logits, targets, ignore_id, probs, inv_valid, m, v](TensorImpl& self) {
    if (!logits.requires_grad()) return;
    double* gl = logits.impl()->grad.data();
    const double g = self.grad[0] * inv_valid;
    for (int i = 0; i < m; ++i) {
      if (targets[static_cast<std::size_t>(i)] == ignore_id) continue;
      const std::size_t base = static_cast<std::size_t>(i) * v;
      for (int j = 0; j < v; ++j) {
        double d = (*probs)[base + j];
        if (j == targets[static_cast<std::size_t>(i)]) d -= 1.0;
        gl[base + j] += g * d;
      }
    }
  });

  double loss = 0.0;
  for (int i = 0; i < m; ++i) {
    if (targets[static_cast<std::size_t>(i)] == ignore_id) continue;
    const std::size_t base = static_cast<std::size_t>(i) * v;
    double row_max = logits.data()[base];
    for (int j = 1; j < v; ++j) row_max = std::max(row_max, logits.data()[base + j]);
    double denom = 0.0;
    for (int j = 0; j < v; ++j) denom += std::exp(logits.data()[base + j] - row_max);
    const double log_denom = std::log(denom);
    for (int j = 0; j < v; ++j) {
      (*probs)[base + j] = std::exp(logits.data()[base + j] - row_max) / denom;
    }
    const int t = targets[static_cast<std::size_t>(i)];
    loss -= (logits.data()[base + t] - row_max - log_denom);
  }
  out.data()[0] = loss * inv_valid;
  return out;
}

}  // namespace cgt
