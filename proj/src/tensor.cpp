#include "sgode/tensor.hpp"

#include <cmath>
#include <cstring>
#include <stdexcept>

#include "sgode/kernels.hpp"

namespace sgode {

namespace {

using detail::TensorImpl;

std::string shape_str(const Tensor& t) {
  return std::to_string(t.rows()) + "x" + std::to_string(t.cols());
}

void require(bool ok, const std::string& msg) {
  if (!ok) throw std::invalid_argument(msg);
}

Tape* common_tape(std::initializer_list<const Tensor*> ts) {
  Tape* tape = nullptr;
  for (const Tensor* t : ts) {
    Tape* tt = t->impl()->tape;
    if (!tt) continue;
    if (tape && tape != tt)
      throw std::logic_error("operands recorded on different tapes");
    tape = tt;
  }
  return tape;
}

bool any_requires_grad(std::initializer_list<const Tensor*> ts) {
  for (const Tensor* t : ts)
    if (t->requires_grad()) return true;
  return false;
}

struct OpCtx {
  Tape* tape = nullptr;
  bool record = false;
};

OpCtx op_context(std::initializer_list<const Tensor*> inputs) {
  OpCtx ctx;
  ctx.tape = common_tape(inputs);
  ctx.record = ctx.tape && ctx.tape->recording() && any_requires_grad(inputs);
  return ctx;
}

Tensor make_output(int rows, int cols, const OpCtx& ctx) {
  Tensor out = Tensor::zeros(rows, cols);
  if (ctx.record) {
    TensorImpl* im = out.impl();
    im->requires_grad = true;
    im->grad.assign(static_cast<std::size_t>(rows) * cols, 0.0);
    im->tape = ctx.tape;
    im->gen = ctx.tape->stamp();
  }
  return out;
}

// Broadcast classes for binary elementwise ops.
enum class Bcast { same, scalar, row };

Bcast bcast_kind(const Tensor& a, const Tensor& b, const char* op) {
  if (a.rows() == b.rows() && a.cols() == b.cols()) return Bcast::same;
  if (b.rows() == 1 && b.cols() == 1) return Bcast::scalar;
  if (b.rows() == 1 && b.cols() == a.cols()) return Bcast::row;
  throw std::invalid_argument(std::string(op) + ": shapes " + shape_str(a) +
                              " and " + shape_str(b) +
                              " are not broadcast-compatible");
}

double bval(const std::vector<double>& b, Bcast k, int cols, std::size_t i) {
  switch (k) {
    case Bcast::same:
      return b[i];
    case Bcast::scalar:
      return b[0];
    case Bcast::row:
      return b[i % cols];
  }
  return 0.0;  // unreachable
}

// Accumulate g into the broadcast operand's gradient.
void bcast_accumulate(std::vector<double>& db, Bcast k, int cols,
                      const std::vector<double>& g, double sign) {
  switch (k) {
    case Bcast::same:
      for (std::size_t i = 0; i < g.size(); ++i) db[i] += sign * g[i];
      break;
    case Bcast::scalar: {
      double s = 0.0;
      for (double v : g) s += v;
      db[0] += sign * s;
      break;
    }
    case Bcast::row:
      for (std::size_t i = 0; i < g.size(); ++i) db[i % cols] += sign * g[i];
      break;
  }
}

}  // namespace

// ---- Tensor ---------------------------------------------------------------

Tensor Tensor::zeros(int rows, int cols) {
  require(rows > 0 && cols > 0, "tensor dimensions must be positive");
  Tensor t;
  t.impl_ = std::make_shared<TensorImpl>();
  t.impl_->rows = rows;
  t.impl_->cols = cols;
  t.impl_->value.assign(static_cast<std::size_t>(rows) * cols, 0.0);
  return t;
}

Tensor Tensor::full(int rows, int cols, double v) {
  Tensor t = zeros(rows, cols);
  for (auto& x : t.impl_->value) x = v;
  return t;
}

Tensor Tensor::from_data(int rows, int cols, std::vector<double> data) {
  require(data.size() == static_cast<std::size_t>(rows) * cols,
          "from_data: data length does not match shape");
  Tensor t = zeros(rows, cols);
  t.impl_->value = std::move(data);
  return t;
}

Tensor Tensor::from_rows(
    std::initializer_list<std::initializer_list<double>> rows) {
  int r = static_cast<int>(rows.size());
  require(r > 0, "from_rows: empty");
  int c = static_cast<int>(rows.begin()->size());
  std::vector<double> data;
  data.reserve(static_cast<std::size_t>(r) * c);
  for (const auto& row : rows) {
    require(static_cast<int>(row.size()) == c, "from_rows: ragged rows");
    data.insert(data.end(), row.begin(), row.end());
  }
  return from_data(r, c, std::move(data));
}

Tensor Tensor::param(int rows, int cols, std::vector<double> data, Tape& tape) {
  Tensor t = from_data(rows, cols, std::move(data));
  t.impl_->requires_grad = true;
  t.impl_->grad.assign(static_cast<std::size_t>(rows) * cols, 0.0);
  t.impl_->tape = &tape;
  t.impl_->gen = tape.stamp();
  return t;
}

double Tensor::at(int r, int c) const {
  return impl_->value[static_cast<std::size_t>(r) * impl_->cols + c];
}

double& Tensor::at(int r, int c) {
  return impl_->value[static_cast<std::size_t>(r) * impl_->cols + c];
}

std::vector<double>& Tensor::grad() {
  if (!impl_ || impl_->grad.empty())
    throw std::logic_error("tensor has no gradient buffer");
  return impl_->grad;
}

const std::vector<double>& Tensor::grad() const {
  if (!impl_ || impl_->grad.empty())
    throw std::logic_error("tensor has no gradient buffer");
  return impl_->grad;
}

void Tensor::zero_grad() {
  if (impl_ && !impl_->grad.empty())
    std::fill(impl_->grad.begin(), impl_->grad.end(), 0.0);
}

double Tensor::item() const {
  if (!impl_ || impl_->rows != 1 || impl_->cols != 1)
    throw std::logic_error("item(): tensor is not scalar");
  return impl_->value[0];
}

// ---- Tape -------------------------------------------------------------------

void Tape::backward(const Tensor& loss) {
  if (!loss.defined() || loss.rows() != 1 || loss.cols() != 1)
    throw std::logic_error("backward: loss must be a 1x1 scalar");
  TensorImpl* im = loss.impl();
  if (im->tape != this || !im->requires_grad)
    throw std::logic_error("backward: loss was not produced on this tape");
  if (nodes_.empty() || im->gen != gen_)
    throw std::logic_error(
        "backward: tape already consumed; rerun the forward pass");
  im->grad[0] = 1.0;
  for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) (*it)();
  nodes_.clear();
  ++gen_;
}

// ---- ops --------------------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b) {
  require(a.cols() == b.rows(), "matmul: inner dimensions disagree, " +
                                    shape_str(a) + " * " + shape_str(b));
  OpCtx ctx = op_context({&a, &b});
  Tensor out = make_output(a.rows(), b.cols(), ctx);
  kern::matmul(a.data().data(), a.rows(), a.cols(), b.data().data(), b.cols(),
               out.data().data());
  if (ctx.record) {
    auto ai = a.share(), bi = b.share(), oi = out.share();
    ctx.tape->push([ai, bi, oi] {
      const int m = ai->rows, k = ai->cols, n = bi->cols;
      if (ai->requires_grad)
        kern::matmul_nt(oi->grad.data(), m, n, bi->value.data(), k,
                        ai->grad.data(), true);
      if (bi->requires_grad)
        kern::matmul_tn(ai->value.data(), m, k, oi->grad.data(), n,
                        bi->grad.data(), true);
    });
  }
  return out;
}

Tensor matmul_nt(const Tensor& a, const Tensor& b) {
  require(a.cols() == b.cols(), "matmul_nt: inner dimensions disagree, " +
                                    shape_str(a) + " * " + shape_str(b) + "^T");
  OpCtx ctx = op_context({&a, &b});
  Tensor out = make_output(a.rows(), b.rows(), ctx);
  kern::matmul_nt(a.data().data(), a.rows(), a.cols(), b.data().data(),
                  b.rows(), out.data().data());
  if (ctx.record) {
    auto ai = a.share(), bi = b.share(), oi = out.share();
    ctx.tape->push([ai, bi, oi] {
      const int m = ai->rows, k = ai->cols, n = bi->rows;
      if (ai->requires_grad)
        kern::matmul(oi->grad.data(), m, n, bi->value.data(), k,
                     ai->grad.data(), true);
      if (bi->requires_grad)
        kern::matmul_tn(oi->grad.data(), m, n, ai->value.data(), k,
                        bi->grad.data(), true);
    });
  }
  return out;
}

Tensor transpose(const Tensor& x) {
  OpCtx ctx = op_context({&x});
  Tensor out = make_output(x.cols(), x.rows(), ctx);
  const int r = x.rows(), c = x.cols();
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < c; ++j) out.at(j, i) = x.at(i, j);
  if (ctx.record) {
    auto xi = x.share();
    auto oi = out.share();
    ctx.tape->push([xi, oi] {
      if (!xi->requires_grad) return;
      const int r = xi->rows, c = xi->cols;
      for (int i = 0; i < r; ++i)
        for (int j = 0; j < c; ++j)
          xi->grad[static_cast<std::size_t>(i) * c + j] +=
              oi->grad[static_cast<std::size_t>(j) * r + i];
    });
  }
  return out;
}

namespace {

template <typename Fwd, typename Bwd>
Tensor unary_elementwise(const Tensor& x, Fwd fwd, Bwd bwd_factor) {
  OpCtx ctx = op_context({&x});
  Tensor out = make_output(x.rows(), x.cols(), ctx);
  const auto& xv = x.data();
  auto& ov = out.data();
  for (std::size_t i = 0; i < xv.size(); ++i) ov[i] = fwd(xv[i]);
  if (ctx.record) {
    auto xi = x.share();
    auto oi = out.share();
    ctx.tape->push([xi, oi, bwd_factor] {
      if (!xi->requires_grad) return;
      for (std::size_t i = 0; i < xi->value.size(); ++i)
        xi->grad[i] += oi->grad[i] * bwd_factor(xi->value[i], oi->value[i]);
    });
  }
  return out;
}

}  // namespace

Tensor relu(const Tensor& x) {
  return unary_elementwise(
      x, [](double v) { return v > 0.0 ? v : 0.0; },
      [](double v, double) { return v > 0.0 ? 1.0 : 0.0; });
}

Tensor tanh_op(const Tensor& x) {
  return unary_elementwise(
      x, [](double v) { return std::tanh(v); },
      [](double, double y) { return 1.0 - y * y; });
}

Tensor sigmoid(const Tensor& x) {
  return unary_elementwise(
      x, [](double v) { return 1.0 / (1.0 + std::exp(-v)); },
      [](double, double y) { return y * (1.0 - y); });
}

namespace {

Tensor binary_elementwise(const Tensor& a, const Tensor& b, const char* name,
                          bool subtract, bool multiply) {
  Bcast k = bcast_kind(a, b, name);
  OpCtx ctx = op_context({&a, &b});
  Tensor out = make_output(a.rows(), a.cols(), ctx);
  const auto& av = a.data();
  const auto& bv = b.data();
  auto& ov = out.data();
  const int cols = a.cols();
  for (std::size_t i = 0; i < av.size(); ++i) {
    double bi = bval(bv, k, cols, i);
    ov[i] = multiply ? av[i] * bi : (subtract ? av[i] - bi : av[i] + bi);
  }
  if (ctx.record) {
    auto ai = a.share(), bi = b.share(), oi = out.share();
    ctx.tape->push([ai, bi, oi, k, cols, subtract, multiply] {
      const auto& g = oi->grad;
      if (multiply) {
        if (ai->requires_grad)
          for (std::size_t i = 0; i < g.size(); ++i)
            ai->grad[i] += g[i] * bval(bi->value, k, cols, i);
        if (bi->requires_grad) {
          std::vector<double> gb(g.size());
          for (std::size_t i = 0; i < g.size(); ++i) gb[i] = g[i] * ai->value[i];
          bcast_accumulate(bi->grad, k, cols, gb, 1.0);
        }
      } else {
        if (ai->requires_grad)
          for (std::size_t i = 0; i < g.size(); ++i) ai->grad[i] += g[i];
        if (bi->requires_grad)
          bcast_accumulate(bi->grad, k, cols, g, subtract ? -1.0 : 1.0);
      }
    });
  }
  return out;
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  return binary_elementwise(a, b, "add", false, false);
}

Tensor sub(const Tensor& a, const Tensor& b) {
  return binary_elementwise(a, b, "sub", true, false);
}

Tensor mul(const Tensor& a, const Tensor& b) {
  return binary_elementwise(a, b, "mul", false, true);
}

Tensor scale(const Tensor& x, double s) {
  OpCtx ctx = op_context({&x});
  Tensor out = make_output(x.rows(), x.cols(), ctx);
  const auto& xv = x.data();
  auto& ov = out.data();
  for (std::size_t i = 0; i < xv.size(); ++i) ov[i] = s * xv[i];
  if (ctx.record) {
    auto xi = x.share();
    auto oi = out.share();
    ctx.tape->push([xi, oi, s] {
      if (!xi->requires_grad) return;
      kern::axpy(s, oi->grad.data(), xi->grad.data(), xi->grad.size());
    });
  }
  return out;
}

Tensor lincomb(const std::vector<std::pair<Tensor, double>>& terms) {
  require(!terms.empty(), "lincomb: no terms");
  const Tensor& t0 = terms.front().first;
  std::vector<const Tensor*> ptrs;
  Tape* tape = nullptr;
  bool any_grad = false;
  for (const auto& [t, c] : terms) {
    (void)c;
    require(t.rows() == t0.rows() && t.cols() == t0.cols(),
            "lincomb: mismatched term shapes");
    Tape* tt = t.impl()->tape;
    if (tt) {
      if (tape && tape != tt)
        throw std::logic_error("lincomb: operands on different tapes");
      tape = tt;
    }
    any_grad = any_grad || t.requires_grad();
  }
  OpCtx ctx;
  ctx.tape = tape;
  ctx.record = tape && tape->recording() && any_grad;
  Tensor out = make_output(t0.rows(), t0.cols(), ctx);
  auto& ov = out.data();
  for (const auto& [t, c] : terms)
    kern::axpy(c, t.data().data(), ov.data(), ov.size());
  if (ctx.record) {
    std::vector<std::pair<std::shared_ptr<detail::TensorImpl>, double>> ins;
    ins.reserve(terms.size());
    for (const auto& [t, c] : terms) ins.emplace_back(t.share(), c);
    auto oi = out.share();
    ctx.tape->push([ins, oi] {
      for (const auto& [ti, c] : ins)
        if (ti->requires_grad)
          kern::axpy(c, oi->grad.data(), ti->grad.data(), ti->grad.size());
    });
  }
  return out;
}

Tensor hardsigmoid_ste(const Tensor& x, double alpha) {
  if (!(alpha >= 1.0))
    throw std::invalid_argument("hardsigmoid_ste: alpha must be >= 1.0, got " +
                                std::to_string(alpha));
  OpCtx ctx = op_context({&x});
  Tensor out = make_output(x.rows(), x.cols(), ctx);
  const auto& xv = x.data();
  auto& ov = out.data();
  for (std::size_t i = 0; i < xv.size(); ++i) {
    double h = xv[i] * alpha / 6.0 + 0.5;
    h = h < 0.0 ? 0.0 : (h > 1.0 ? 1.0 : h);
    ov[i] = std::round(h);  // 0.5 rounds away from zero, i.e. to 1
  }
  if (ctx.record) {
    auto xi = x.share();
    auto oi = out.share();
    ctx.tape->push([xi, oi, alpha] {
      if (!xi->requires_grad) return;
      for (std::size_t i = 0; i < xi->value.size(); ++i) {
        double z = alpha * xi->value[i];
        double d = (z > -3.0 && z < 3.0) ? alpha / 6.0 : 0.0;
        xi->grad[i] += oi->grad[i] * d;
      }
    });
  }
  return out;
}

Tensor row_softmax(const Tensor& x) {
  OpCtx ctx = op_context({&x});
  Tensor out = make_output(x.rows(), x.cols(), ctx);
  const int r = x.rows(), c = x.cols();
  for (int i = 0; i < r; ++i) {
    double mx = x.at(i, 0);
    for (int j = 1; j < c; ++j) mx = std::max(mx, x.at(i, j));
    double z = 0.0;
    for (int j = 0; j < c; ++j) {
      double e = std::exp(x.at(i, j) - mx);
      out.at(i, j) = e;
      z += e;
    }
    for (int j = 0; j < c; ++j) out.at(i, j) /= z;
  }
  if (ctx.record) {
    auto xi = x.share();
    auto oi = out.share();
    ctx.tape->push([xi, oi] {
      if (!xi->requires_grad) return;
      const int r = xi->rows, c = xi->cols;
      for (int i = 0; i < r; ++i) {
        const double* s = oi->value.data() + static_cast<std::size_t>(i) * c;
        const double* g = oi->grad.data() + static_cast<std::size_t>(i) * c;
        double dot = 0.0;
        for (int j = 0; j < c; ++j) dot += s[j] * g[j];
        double* dx = xi->grad.data() + static_cast<std::size_t>(i) * c;
        for (int j = 0; j < c; ++j) dx[j] += s[j] * (g[j] - dot);
      }
    });
  }
  return out;
}

Tensor row_scale(const Tensor& x, const Tensor& b) {
  require(b.rows() == x.rows() && b.cols() == 1,
          "row_scale: b must be " + std::to_string(x.rows()) + "x1, got " +
              shape_str(b));
  OpCtx ctx = op_context({&x, &b});
  Tensor out = make_output(x.rows(), x.cols(), ctx);
  const int r = x.rows(), c = x.cols();
  for (int i = 0; i < r; ++i) {
    const double bi = b.data()[i];
    for (int j = 0; j < c; ++j) out.at(i, j) = bi * x.at(i, j);
  }
  if (ctx.record) {
    auto xi = x.share(), bi = b.share(), oi = out.share();
    ctx.tape->push([xi, bi, oi] {
      const int r = xi->rows, c = xi->cols;
      for (int i = 0; i < r; ++i) {
        const double* g = oi->grad.data() + static_cast<std::size_t>(i) * c;
        if (xi->requires_grad) {
          double* dx = xi->grad.data() + static_cast<std::size_t>(i) * c;
          for (int j = 0; j < c; ++j) dx[j] += bi->value[i] * g[j];
        }
        if (bi->requires_grad) {
          const double* xv = xi->value.data() + static_cast<std::size_t>(i) * c;
          double s = 0.0;
          for (int j = 0; j < c; ++j) s += g[j] * xv[j];
          bi->grad[i] += s;
        }
      }
    });
  }
  return out;
}

Tensor per_node_linear(const Tensor& h, const Tensor& w) {
  const int n = h.rows(), hd = h.cols();
  require(w.rows() == n && w.cols() == hd * hd,
          "per_node_linear: w must be " + std::to_string(n) + "x" +
              std::to_string(hd * hd) + ", got " + shape_str(w));
  OpCtx ctx = op_context({&h, &w});
  Tensor out = make_output(n, hd, ctx);
  for (int i = 0; i < n; ++i) {
    const double* hi = h.data().data() + static_cast<std::size_t>(i) * hd;
    const double* wi = w.data().data() + static_cast<std::size_t>(i) * hd * hd;
    double* oi = out.data().data() + static_cast<std::size_t>(i) * hd;
    kern::serial::matmul(hi, 1, hd, wi, hd, oi);
  }
  if (ctx.record) {
    auto hi = h.share(), wi = w.share(), oi = out.share();
    ctx.tape->push([hi, wi, oi] {
      const int n = hi->rows, hd = hi->cols;
      for (int i = 0; i < n; ++i) {
        const std::size_t ho = static_cast<std::size_t>(i) * hd;
        const std::size_t wo = static_cast<std::size_t>(i) * hd * hd;
        const double* g = oi->grad.data() + ho;
        if (hi->requires_grad)
          kern::serial::matmul_nt(g, 1, hd, wi->value.data() + wo, hd,
                                  hi->grad.data() + ho, true);
        if (wi->requires_grad)
          kern::serial::matmul_tn(hi->value.data() + ho, 1, hd, g, hd,
                                  wi->grad.data() + wo, true);
      }
    });
  }
  return out;
}

Tensor concat_cols(const Tensor& a, const Tensor& b) {
  require(a.rows() == b.rows(), "concat_cols: row counts differ, " +
                                    shape_str(a) + " vs " + shape_str(b));
  OpCtx ctx = op_context({&a, &b});
  const int r = a.rows(), ca = a.cols(), cb = b.cols();
  Tensor out = make_output(r, ca + cb, ctx);
  for (int i = 0; i < r; ++i) {
    std::memcpy(out.data().data() + static_cast<std::size_t>(i) * (ca + cb),
                a.data().data() + static_cast<std::size_t>(i) * ca,
                sizeof(double) * ca);
    std::memcpy(out.data().data() + static_cast<std::size_t>(i) * (ca + cb) + ca,
                b.data().data() + static_cast<std::size_t>(i) * cb,
                sizeof(double) * cb);
  }
  if (ctx.record) {
    auto ai = a.share(), bi = b.share(), oi = out.share();
    ctx.tape->push([ai, bi, oi] {
      const int r = ai->rows, ca = ai->cols, cb = bi->cols;
      for (int i = 0; i < r; ++i) {
        const double* g = oi->grad.data() + static_cast<std::size_t>(i) * (ca + cb);
        if (ai->requires_grad) {
          double* da = ai->grad.data() + static_cast<std::size_t>(i) * ca;
          for (int j = 0; j < ca; ++j) da[j] += g[j];
        }
        if (bi->requires_grad) {
          double* db = bi->grad.data() + static_cast<std::size_t>(i) * cb;
          for (int j = 0; j < cb; ++j) db[j] += g[ca + j];
        }
      }
    });
  }
  return out;
}

namespace {

void require_nonempty(const Tensor& x, const char* op) {
  if (!x.defined() || x.size() == 0)
    throw std::domain_error(std::string(op) + ": empty tensor");
}

}  // namespace

Tensor sum(const Tensor& x) {
  require_nonempty(x, "sum");
  OpCtx ctx = op_context({&x});
  Tensor out = make_output(1, 1, ctx);
  double s = 0.0;
  for (double v : x.data()) s += v;
  out.data()[0] = s;
  if (ctx.record) {
    auto xi = x.share();
    auto oi = out.share();
    ctx.tape->push([xi, oi] {
      if (!xi->requires_grad) return;
      const double g = oi->grad[0];
      for (auto& d : xi->grad) d += g;
    });
  }
  return out;
}

Tensor mean(const Tensor& x) {
  require_nonempty(x, "mean");
  OpCtx ctx = op_context({&x});
  Tensor out = make_output(1, 1, ctx);
  double s = 0.0;
  for (double v : x.data()) s += v;
  const double inv = 1.0 / static_cast<double>(x.size());
  out.data()[0] = s * inv;
  if (ctx.record) {
    auto xi = x.share();
    auto oi = out.share();
    ctx.tape->push([xi, oi, inv] {
      if (!xi->requires_grad) return;
      const double g = oi->grad[0] * inv;
      for (auto& d : xi->grad) d += g;
    });
  }
  return out;
}

Tensor l1_mean_abs_diff(const Tensor& a, const Tensor& b) {
  require_nonempty(a, "l1_mean_abs_diff");
  require(a.rows() == b.rows() && a.cols() == b.cols(),
          "l1_mean_abs_diff: shapes differ, " + shape_str(a) + " vs " +
              shape_str(b));
  OpCtx ctx = op_context({&a, &b});
  Tensor out = make_output(1, 1, ctx);
  double s = 0.0;
  for (std::size_t i = 0; i < a.data().size(); ++i)
    s += std::abs(a.data()[i] - b.data()[i]);
  const double inv = 1.0 / static_cast<double>(a.size());
  out.data()[0] = s * inv;
  if (ctx.record) {
    auto ai = a.share(), bi = b.share(), oi = out.share();
    ctx.tape->push([ai, bi, oi, inv] {
      const double g = oi->grad[0] * inv;
      for (std::size_t i = 0; i < ai->value.size(); ++i) {
        const double d = ai->value[i] - bi->value[i];
        const double sg = d > 0.0 ? 1.0 : (d < 0.0 ? -1.0 : 0.0);
        if (ai->requires_grad) ai->grad[i] += g * sg;
        if (bi->requires_grad) bi->grad[i] -= g * sg;
      }
    });
  }
  return out;
}

Tensor masked_l1(const Tensor& a, const Tensor& b, const Tensor& mask) {
  require_nonempty(a, "masked_l1");
  require(a.rows() == b.rows() && a.cols() == b.cols() &&
              a.rows() == mask.rows() && a.cols() == mask.cols(),
          "masked_l1: shapes differ");
  double count = 0.0;
  for (double m : mask.data())
    if (m != 0.0) count += 1.0;
  if (count == 0.0) throw std::domain_error("masked_l1: mask is empty");
  OpCtx ctx = op_context({&a, &b});
  Tensor out = make_output(1, 1, ctx);
  double s = 0.0;
  for (std::size_t i = 0; i < a.data().size(); ++i)
    if (mask.data()[i] != 0.0) s += std::abs(a.data()[i] - b.data()[i]);
  const double inv = 1.0 / count;
  out.data()[0] = s * inv;
  if (ctx.record) {
    auto ai = a.share(), bi = b.share(), mi = mask.share(), oi = out.share();
    ctx.tape->push([ai, bi, mi, oi, inv] {
      const double g = oi->grad[0] * inv;
      for (std::size_t i = 0; i < ai->value.size(); ++i) {
        if (mi->value[i] == 0.0) continue;
        const double d = ai->value[i] - bi->value[i];
        const double sg = d > 0.0 ? 1.0 : (d < 0.0 ? -1.0 : 0.0);
        if (ai->requires_grad) ai->grad[i] += g * sg;
        if (bi->requires_grad) bi->grad[i] -= g * sg;
      }
    });
  }
  return out;
}

// ---- ParamStore / Adam -------------------------------------------------------

Tensor& ParamStore::add(const std::string& name, Tensor t) {
  if (items_.count(name))
    throw std::logic_error("ParamStore: duplicate parameter '" + name + "'");
  if (!t.requires_grad())
    throw std::logic_error("ParamStore: '" + name + "' is not trainable");
  auto [it, ok] = items_.emplace(name, std::move(t));
  (void)ok;
  return it->second;
}

Tensor& ParamStore::get(const std::string& name) {
  auto it = items_.find(name);
  if (it == items_.end())
    throw std::out_of_range("ParamStore: no parameter '" + name + "'");
  return it->second;
}

const Tensor& ParamStore::get(const std::string& name) const {
  auto it = items_.find(name);
  if (it == items_.end())
    throw std::out_of_range("ParamStore: no parameter '" + name + "'");
  return it->second;
}

bool ParamStore::contains(const std::string& name) const {
  return items_.count(name) != 0;
}

void ParamStore::zero_grad() {
  for (auto& [name, t] : items_) t.zero_grad();
}

void Adam::step(ParamStore& params) {
  ++t_;
  const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  for (auto& [name, p] : params.items()) {
    auto& slot = slots_[name];
    auto& value = p.data();
    const auto& grad = p.grad();
    if (slot.m.empty()) {
      slot.m.assign(value.size(), 0.0);
      slot.v.assign(value.size(), 0.0);
    }
    for (std::size_t i = 0; i < value.size(); ++i) {
      double g = grad[i];
      if (!std::isfinite(g))
        throw std::runtime_error("adam: non-finite gradient in parameter '" +
                                 name + "'");
      g += cfg_.weight_decay * value[i];
      slot.m[i] = cfg_.beta1 * slot.m[i] + (1.0 - cfg_.beta1) * g;
      slot.v[i] = cfg_.beta2 * slot.v[i] + (1.0 - cfg_.beta2) * g * g;
      const double mhat = slot.m[i] / bc1;
      const double vhat = slot.v[i] / bc2;
      value[i] -= cfg_.lr * mhat / (std::sqrt(vhat) + cfg_.eps);
    }
  }
}

}  // namespace sgode
