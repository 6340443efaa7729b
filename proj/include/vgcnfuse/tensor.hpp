#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "vgcnfuse/errors.hpp"
#include "vgcnfuse/rng.hpp"

// Dense row-major tensors with reverse-mode autodiff on a linear tape.
// The element type is a template parameter: float for training and
// inference, double for finite-difference gradient checks.

namespace vgcnfuse {

using Shape = std::vector<long>;

inline long numel_of(const Shape& s) {
  long n = 1;
  for (long d : s) n *= d;
  return n;
}

inline std::string shape_str(const Shape& s) {
  std::ostringstream os;
  os << "[";
  for (size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
  os << "]";
  return os.str();
}

template <typename S>
struct TensorImpl {
  Shape shape;
  std::vector<S> data;
  bool requires_grad = false;
  std::vector<S> grad;

  void ensure_grad() {
    if (grad.size() != data.size()) grad.assign(data.size(), S(0));
  }
};

template <typename S>
class Tape;

template <typename S>
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false) {
    Tensor t;
    t.impl_ = std::make_shared<TensorImpl<S>>();
    t.impl_->shape = std::move(shape);
    t.impl_->data.assign(numel_of(t.impl_->shape), S(0));
    t.impl_->requires_grad = requires_grad;
    return t;
  }

  static Tensor from(Shape shape, std::vector<S> data, bool requires_grad = false) {
    if (numel_of(shape) != static_cast<long>(data.size()))
      throw ShapeMismatch("from(): " + shape_str(shape) + " vs " +
                          std::to_string(data.size()) + " values");
    Tensor t;
    t.impl_ = std::make_shared<TensorImpl<S>>();
    t.impl_->shape = std::move(shape);
    t.impl_->data = std::move(data);
    t.impl_->requires_grad = requires_grad;
    return t;
  }

  static Tensor full(Shape shape, S value) {
    Tensor t = zeros(std::move(shape));
    std::fill(t.data().begin(), t.data().end(), value);
    return t;
  }

  static Tensor scalar(S value) { return from({}, {value}); }

  // symmetric uniform with scale 1/sqrt(fan_in)
  static Tensor uniform_init(Shape shape, long fan_in, Rng& rng) {
    Tensor t = zeros(std::move(shape), true);
    double bound = 1.0 / std::sqrt(static_cast<double>(std::max<long>(fan_in, 1)));
    for (auto& v : t.data()) v = static_cast<S>(rng.uniform(-bound, bound));
    return t;
  }

  bool defined() const { return impl_ != nullptr; }
  const Shape& shape() const { return impl_->shape; }
  long ndim() const { return static_cast<long>(impl_->shape.size()); }
  long numel() const { return static_cast<long>(impl_->data.size()); }
  long dim(long i) const { return impl_->shape[i]; }

  std::vector<S>& data() { return impl_->data; }
  const std::vector<S>& data() const { return impl_->data; }
  std::vector<S>& grad() {
    impl_->ensure_grad();
    return impl_->grad;
  }
  void zero_grad() {
    impl_->ensure_grad();
    std::fill(impl_->grad.begin(), impl_->grad.end(), S(0));
  }

  bool requires_grad() const { return impl_->requires_grad; }
  void set_requires_grad(bool rg) { impl_->requires_grad = rg; }

  S item() const {
    if (numel() != 1) throw ShapeMismatch("item() on tensor " + shape_str(shape()));
    return impl_->data[0];
  }

  S at(std::initializer_list<long> idx) const {
    long off = 0, stride = 1;
    std::vector<long> v(idx);
    for (long i = ndim() - 1; i >= 0; --i) {
      off += v[i] * stride;
      stride *= impl_->shape[i];
    }
    return impl_->data[off];
  }

  std::shared_ptr<TensorImpl<S>> impl() const { return impl_; }

 private:
  std::shared_ptr<TensorImpl<S>> impl_;
};

// Linear record of backward closures. Ops are appended in execution
// order, so running the closures in reverse visits every node after all
// of its consumers: reverse topological order, each exactly once.
template <typename S>
class Tape {
 public:
  void record(std::function<void()> backfn) { records_.push_back(std::move(backfn)); }

  void run_backward() {
    for (auto it = records_.rbegin(); it != records_.rend(); ++it) (*it)();
  }

  void clear() { records_.clear(); }
  size_t size() const { return records_.size(); }

  static Tape*& active() {
    thread_local Tape* a = nullptr;
    return a;
  }

 private:
  std::vector<std::function<void()>> records_;
};

template <typename S>
class TapeScope {
 public:
  explicit TapeScope(Tape<S>& t) : prev_(Tape<S>::active()) { Tape<S>::active() = &t; }
  ~TapeScope() { Tape<S>::active() = prev_; }
  TapeScope(const TapeScope&) = delete;
  TapeScope& operator=(const TapeScope&) = delete;

 private:
  Tape<S>* prev_;
};

namespace detail {

template <typename S>
bool tracked(std::initializer_list<const Tensor<S>*> inputs) {
  if (!Tape<S>::active()) return false;
  for (const Tensor<S>* t : inputs)
    if (t->requires_grad()) return true;
  return false;
}

template <typename S>
void mark_and_record(Tensor<S>& out, bool track, std::function<void()> backfn) {
  if (track) {
    out.set_requires_grad(true);
    Tape<S>::active()->record(std::move(backfn));
  }
}

inline Shape broadcast_shape(const Shape& a, const Shape& b) {
  long nd = std::max(a.size(), b.size());
  Shape out(nd);
  for (long k = 0; k < nd; ++k) {
    long ad = k < static_cast<long>(nd - a.size()) ? 1 : a[k - (nd - a.size())];
    long bd = k < static_cast<long>(nd - b.size()) ? 1 : b[k - (nd - b.size())];
    if (ad != bd && ad != 1 && bd != 1)
      throw ShapeMismatch("cannot broadcast " + shape_str(a) + " with " + shape_str(b));
    out[k] = std::max(ad, bd);
  }
  return out;
}

// strides of `shape` viewed through `out` (0 on broadcast axes)
inline std::vector<long> broadcast_strides(const Shape& shape, const Shape& out) {
  std::vector<long> real(shape.size());
  long s = 1;
  for (long i = static_cast<long>(shape.size()) - 1; i >= 0; --i) {
    real[i] = s;
    s *= shape[i];
  }
  std::vector<long> st(out.size(), 0);
  long off = static_cast<long>(out.size() - shape.size());
  for (size_t i = 0; i < shape.size(); ++i)
    st[off + i] = (shape[i] == 1 && out[off + i] != 1) ? 0 : real[i];
  return st;
}

// Walks the output index space once, handing (out, a, b) linear offsets
// to fn. The odometer keeps the inner loop allocation-free.
template <typename Fn>
void broadcast_iterate(const Shape& out, const std::vector<long>& as,
                       const std::vector<long>& bs, Fn&& fn) {
  long n = numel_of(out);
  long nd = static_cast<long>(out.size());
  std::vector<long> idx(nd, 0);
  long ao = 0, bo = 0;
  for (long i = 0; i < n; ++i) {
    fn(i, ao, bo);
    for (long ax = nd - 1; ax >= 0; --ax) {
      ++idx[ax];
      ao += as[ax];
      bo += bs[ax];
      if (idx[ax] < out[ax]) break;
      ao -= as[ax] * out[ax];
      bo -= bs[ax] * out[ax];
      idx[ax] = 0;
    }
  }
}

}  // namespace detail

// ---------------------------------------------------------------------------
// elementwise / broadcast ops

template <typename S>
Tensor<S> add(const Tensor<S>& a, const Tensor<S>& b) {
  Shape os = detail::broadcast_shape(a.shape(), b.shape());
  Tensor<S> out = Tensor<S>::zeros(os);
  auto as = detail::broadcast_strides(a.shape(), os);
  auto bs = detail::broadcast_strides(b.shape(), os);
  {
    const auto& ad = a.data();
    const auto& bd = b.data();
    auto& od = out.data();
    detail::broadcast_iterate(os, as, bs,
                              [&](long o, long ai, long bi) { od[o] = ad[ai] + bd[bi]; });
  }
  bool track = detail::tracked<S>({&a, &b});
  detail::mark_and_record(out, track, [ai = a.impl(), bi = b.impl(), oi = out.impl(), os, as, bs]() {
    oi->ensure_grad();
    if (ai->requires_grad) ai->ensure_grad();
    if (bi->requires_grad) bi->ensure_grad();
    detail::broadcast_iterate(os, as, bs, [&](long o, long aj, long bj) {
      if (ai->requires_grad) ai->grad[aj] += oi->grad[o];
      if (bi->requires_grad) bi->grad[bj] += oi->grad[o];
    });
  });
  return out;
}

template <typename S>
Tensor<S> mul(const Tensor<S>& a, const Tensor<S>& b) {
  Shape os = detail::broadcast_shape(a.shape(), b.shape());
  Tensor<S> out = Tensor<S>::zeros(os);
  auto as = detail::broadcast_strides(a.shape(), os);
  auto bs = detail::broadcast_strides(b.shape(), os);
  {
    const auto& ad = a.data();
    const auto& bd = b.data();
    auto& od = out.data();
    detail::broadcast_iterate(os, as, bs,
                              [&](long o, long ai, long bi) { od[o] = ad[ai] * bd[bi]; });
  }
  bool track = detail::tracked<S>({&a, &b});
  detail::mark_and_record(out, track, [ai = a.impl(), bi = b.impl(), oi = out.impl(), os, as, bs]() {
    oi->ensure_grad();
    if (ai->requires_grad) ai->ensure_grad();
    if (bi->requires_grad) bi->ensure_grad();
    detail::broadcast_iterate(os, as, bs, [&](long o, long aj, long bj) {
      if (ai->requires_grad) ai->grad[aj] += oi->grad[o] * bi->data[bj];
      if (bi->requires_grad) bi->grad[bj] += oi->grad[o] * ai->data[aj];
    });
  });
  return out;
}

template <typename S>
Tensor<S> scale(const Tensor<S>& x, double c) {
  Tensor<S> out = Tensor<S>::zeros(x.shape());
  const auto& xd = x.data();
  auto& od = out.data();
  for (size_t i = 0; i < xd.size(); ++i) od[i] = static_cast<S>(c) * xd[i];
  bool track = detail::tracked<S>({&x});
  detail::mark_and_record(out, track, [xi = x.impl(), oi = out.impl(), c]() {
    oi->ensure_grad();
    if (!xi->requires_grad) return;
    xi->ensure_grad();
    for (size_t i = 0; i < xi->grad.size(); ++i)
      xi->grad[i] += static_cast<S>(c) * oi->grad[i];
  });
  return out;
}

template <typename S>
Tensor<S> neg(const Tensor<S>& x) {
  return scale(x, -1.0);
}

template <typename S>
Tensor<S> sub(const Tensor<S>& a, const Tensor<S>& b) {
  return add(a, neg(b));
}

template <typename S>
Tensor<S> relu(const Tensor<S>& x) {
  Tensor<S> out = Tensor<S>::zeros(x.shape());
  const auto& xd = x.data();
  auto& od = out.data();
  for (size_t i = 0; i < xd.size(); ++i) od[i] = xd[i] > S(0) ? xd[i] : S(0);
  bool track = detail::tracked<S>({&x});
  detail::mark_and_record(out, track, [xi = x.impl(), oi = out.impl()]() {
    oi->ensure_grad();
    if (!xi->requires_grad) return;
    xi->ensure_grad();
    for (size_t i = 0; i < xi->grad.size(); ++i)
      if (xi->data[i] > S(0)) xi->grad[i] += oi->grad[i];
  });
  return out;
}

template <typename S>
Tensor<S> gelu(const Tensor<S>& x) {
  Tensor<S> out = Tensor<S>::zeros(x.shape());
  const auto& xd = x.data();
  auto& od = out.data();
  for (size_t i = 0; i < xd.size(); ++i) {
    double v = static_cast<double>(xd[i]);
    od[i] = static_cast<S>(0.5 * v * (1.0 + std::erf(v * 0.7071067811865476)));
  }
  bool track = detail::tracked<S>({&x});
  detail::mark_and_record(out, track, [xi = x.impl(), oi = out.impl()]() {
    oi->ensure_grad();
    if (!xi->requires_grad) return;
    xi->ensure_grad();
    for (size_t i = 0; i < xi->grad.size(); ++i) {
      double v = static_cast<double>(xi->data[i]);
      double cdf = 0.5 * (1.0 + std::erf(v * 0.7071067811865476));
      double pdf = 0.3989422804014327 * std::exp(-0.5 * v * v);
      xi->grad[i] += static_cast<S>(cdf + v * pdf) * oi->grad[i];
    }
  });
  return out;
}

// ---------------------------------------------------------------------------
// matmul: a is [..., M, K]; b is [K, N] (shared) or [..., K, N] with the
// same leading dims as a.

template <typename S>
Tensor<S> matmul(const Tensor<S>& a, const Tensor<S>& b) {
  if (a.ndim() < 2 || b.ndim() < 2)
    throw ShapeMismatch("matmul needs >= 2-d operands, got " + shape_str(a.shape()) +
                        " and " + shape_str(b.shape()));
  const bool shared_b = b.ndim() == 2;
  long M = a.dim(a.ndim() - 2), K = a.dim(a.ndim() - 1);
  long Kb = b.dim(b.ndim() - 2), N = b.dim(b.ndim() - 1);
  if (K != Kb)
    throw ShapeMismatch("matmul inner dims: " + shape_str(a.shape()) + " x " +
                        shape_str(b.shape()));
  if (!shared_b) {
    if (b.ndim() != a.ndim())
      throw ShapeMismatch("batched matmul rank: " + shape_str(a.shape()) + " x " +
                          shape_str(b.shape()));
    for (long i = 0; i < a.ndim() - 2; ++i)
      if (a.dim(i) != b.dim(i))
        throw ShapeMismatch("batched matmul leading dims: " + shape_str(a.shape()) +
                            " x " + shape_str(b.shape()));
  }
  Shape os(a.shape().begin(), a.shape().end() - 1);
  os.push_back(N);
  Tensor<S> out = Tensor<S>::zeros(os);

  long B = 1;
  for (long i = 0; i < a.ndim() - 2; ++i) B *= a.dim(i);

  const S* ad = a.data().data();
  const S* bd = b.data().data();
  S* od = out.data().data();
  for (long batch = 0; batch < B; ++batch) {
    const S* A = ad + batch * M * K;
    const S* Bm = shared_b ? bd : bd + batch * K * N;
    S* C = od + batch * M * N;
    for (long i = 0; i < M; ++i)
      for (long k = 0; k < K; ++k) {
        S av = A[i * K + k];
        if (av == S(0)) continue;
        const S* brow = Bm + k * N;
        S* crow = C + i * N;
        for (long j = 0; j < N; ++j) crow[j] += av * brow[j];
      }
  }

  bool track = detail::tracked<S>({&a, &b});
  detail::mark_and_record(out, track,
                          [ai = a.impl(), bi = b.impl(), oi = out.impl(), B, M, K, N, shared_b]() {
    oi->ensure_grad();
    const S* go = oi->grad.data();
    if (ai->requires_grad) {
      ai->ensure_grad();
      S* ga = ai->grad.data();
      const S* bd = bi->data.data();
      for (long batch = 0; batch < B; ++batch) {
        const S* G = go + batch * M * N;
        const S* Bm = shared_b ? bd : bd + batch * K * N;
        S* GA = ga + batch * M * K;
        // dA = dC * B^T
        for (long i = 0; i < M; ++i)
          for (long k = 0; k < K; ++k) {
            S acc = S(0);
            const S* grow = G + i * N;
            const S* brow = Bm + k * N;
            for (long j = 0; j < N; ++j) acc += grow[j] * brow[j];
            GA[i * K + k] += acc;
          }
      }
    }
    if (bi->requires_grad) {
      bi->ensure_grad();
      S* gb = bi->grad.data();
      const S* ad = ai->data.data();
      for (long batch = 0; batch < B; ++batch) {
        const S* G = go + batch * M * N;
        const S* A = ad + batch * M * K;
        S* GB = shared_b ? gb : gb + batch * K * N;
        // dB (+)= A^T * dC
        for (long i = 0; i < M; ++i)
          for (long k = 0; k < K; ++k) {
            S av = A[i * K + k];
            if (av == S(0)) continue;
            const S* grow = G + i * N;
            S* gbrow = GB + k * N;
            for (long j = 0; j < N; ++j) gbrow[j] += av * grow[j];
          }
      }
    }
  });
  return out;
}

// ---------------------------------------------------------------------------
// shape ops

template <typename S>
Tensor<S> reshape(const Tensor<S>& x, Shape shape) {
  if (numel_of(shape) != x.numel())
    throw ShapeMismatch("reshape " + shape_str(x.shape()) + " -> " + shape_str(shape));
  Tensor<S> out = Tensor<S>::from(std::move(shape), x.data());
  bool track = detail::tracked<S>({&x});
  detail::mark_and_record(out, track, [xi = x.impl(), oi = out.impl()]() {
    oi->ensure_grad();
    if (!xi->requires_grad) return;
    xi->ensure_grad();
    for (size_t i = 0; i < xi->grad.size(); ++i) xi->grad[i] += oi->grad[i];
  });
  return out;
}

template <typename S>
Tensor<S> transpose(const Tensor<S>& x, std::vector<int> perm) {
  if (static_cast<long>(perm.size()) != x.ndim())
    throw ShapeMismatch("transpose perm size vs " + shape_str(x.shape()));
  long nd = x.ndim();
  Shape os(nd);
  for (long i = 0; i < nd; ++i) os[i] = x.dim(perm[i]);
  std::vector<long> xstrides(nd), ostrides_in_x(nd);
  long s = 1;
  for (long i = nd - 1; i >= 0; --i) {
    xstrides[i] = s;
    s *= x.dim(i);
  }
  for (long i = 0; i < nd; ++i) ostrides_in_x[i] = xstrides[perm[i]];

  Tensor<S> out = Tensor<S>::zeros(os);
  const auto& xd = x.data();
  auto& od = out.data();
  std::vector<long> idx(nd, 0);
  long xo = 0;
  long n = out.numel();
  for (long i = 0; i < n; ++i) {
    od[i] = xd[xo];
    for (long ax = nd - 1; ax >= 0; --ax) {
      ++idx[ax];
      xo += ostrides_in_x[ax];
      if (idx[ax] < os[ax]) break;
      xo -= ostrides_in_x[ax] * os[ax];
      idx[ax] = 0;
    }
  }
  bool track = detail::tracked<S>({&x});
  detail::mark_and_record(out, track, [xi = x.impl(), oi = out.impl(), os, ostrides_in_x, nd]() {
    oi->ensure_grad();
    if (!xi->requires_grad) return;
    xi->ensure_grad();
    std::vector<long> idx(nd, 0);
    long xo = 0;
    long n = static_cast<long>(oi->grad.size());
    for (long i = 0; i < n; ++i) {
      xi->grad[xo] += oi->grad[i];
      for (long ax = nd - 1; ax >= 0; --ax) {
        ++idx[ax];
        xo += ostrides_in_x[ax];
        if (idx[ax] < os[ax]) break;
        xo -= ostrides_in_x[ax] * os[ax];
        idx[ax] = 0;
      }
    }
  });
  return out;
}

// swap the last two axes
template <typename S>
Tensor<S> transpose_last(const Tensor<S>& x) {
  std::vector<int> perm(x.ndim());
  std::iota(perm.begin(), perm.end(), 0);
  std::swap(perm[x.ndim() - 2], perm[x.ndim() - 1]);
  return transpose(x, perm);
}

template <typename S>
Tensor<S> concat(const std::vector<Tensor<S>>& parts, long axis) {
  if (parts.empty()) throw ShapeMismatch("concat of nothing");
  long nd = parts[0].ndim();
  Shape os = parts[0].shape();
  long cat = 0;
  for (const auto& p : parts) {
    if (p.ndim() != nd) throw ShapeMismatch("concat rank mismatch");
    for (long i = 0; i < nd; ++i)
      if (i != axis && p.dim(i) != os[i]) throw ShapeMismatch("concat dim mismatch");
    cat += p.dim(axis);
  }
  os[axis] = cat;
  Tensor<S> out = Tensor<S>::zeros(os);

  long outer = 1, inner = 1;
  for (long i = 0; i < axis; ++i) outer *= os[i];
  for (long i = axis + 1; i < nd; ++i) inner *= os[i];

  long off = 0;
  bool track = false;
  for (const auto& p : parts)
    if (detail::tracked<S>({&p})) track = true;

  std::vector<long> offsets;
  for (const auto& p : parts) {
    long pa = p.dim(axis);
    const auto& pd = p.data();
    auto& od = out.data();
    for (long o = 0; o < outer; ++o)
      std::copy(pd.begin() + o * pa * inner, pd.begin() + (o + 1) * pa * inner,
                od.begin() + (o * cat + off) * inner);
    offsets.push_back(off);
    off += pa;
  }

  if (track) {
    std::vector<std::shared_ptr<TensorImpl<S>>> impls;
    for (const auto& p : parts) impls.push_back(p.impl());
    detail::mark_and_record(out, true, [impls, oi = out.impl(), offsets, outer, inner, cat, axis]() {
      oi->ensure_grad();
      for (size_t pi = 0; pi < impls.size(); ++pi) {
        auto& xi = impls[pi];
        if (!xi->requires_grad) continue;
        xi->ensure_grad();
        long pa = xi->shape[axis];
        long off = offsets[pi];
        for (long o = 0; o < outer; ++o)
          for (long r = 0; r < pa * inner; ++r)
            xi->grad[o * pa * inner + r] += oi->grad[(o * cat + off) * inner + r];
      }
    });
  }
  return out;
}

// out[..., :] = x[..., index, :] removing `axis`
template <typename S>
Tensor<S> select_index(const Tensor<S>& x, long axis, long index) {
  long nd = x.ndim();
  if (axis < 0 || axis >= nd || index < 0 || index >= x.dim(axis))
    throw ShapeMismatch("select_index axis/index out of range for " + shape_str(x.shape()));
  Shape os;
  for (long i = 0; i < nd; ++i)
    if (i != axis) os.push_back(x.dim(i));
  long outer = 1, inner = 1;
  for (long i = 0; i < axis; ++i) outer *= x.dim(i);
  for (long i = axis + 1; i < nd; ++i) inner *= x.dim(i);
  long ax = x.dim(axis);

  Tensor<S> out = Tensor<S>::zeros(os);
  const auto& xd = x.data();
  auto& od = out.data();
  for (long o = 0; o < outer; ++o)
    std::copy(xd.begin() + (o * ax + index) * inner, xd.begin() + (o * ax + index + 1) * inner,
              od.begin() + o * inner);
  bool track = detail::tracked<S>({&x});
  detail::mark_and_record(out, track, [xi = x.impl(), oi = out.impl(), outer, inner, ax, index]() {
    oi->ensure_grad();
    if (!xi->requires_grad) return;
    xi->ensure_grad();
    for (long o = 0; o < outer; ++o)
      for (long r = 0; r < inner; ++r)
        xi->grad[(o * ax + index) * inner + r] += oi->grad[o * inner + r];
  });
  return out;
}

// ---------------------------------------------------------------------------
// reductions

template <typename S>
Tensor<S> sum_all(const Tensor<S>& x) {
  S acc = S(0);
  for (S v : x.data()) acc += v;
  Tensor<S> out = Tensor<S>::scalar(acc);
  bool track = detail::tracked<S>({&x});
  detail::mark_and_record(out, track, [xi = x.impl(), oi = out.impl()]() {
    oi->ensure_grad();
    if (!xi->requires_grad) return;
    xi->ensure_grad();
    for (auto& g : xi->grad) g += oi->grad[0];
  });
  return out;
}

template <typename S>
Tensor<S> sum_axis(const Tensor<S>& x, long axis) {
  long nd = x.ndim();
  if (axis < 0 || axis >= nd) throw ShapeMismatch("sum_axis axis out of range");
  Shape os;
  for (long i = 0; i < nd; ++i)
    if (i != axis) os.push_back(x.dim(i));
  long outer = 1, inner = 1;
  for (long i = 0; i < axis; ++i) outer *= x.dim(i);
  for (long i = axis + 1; i < nd; ++i) inner *= x.dim(i);
  long ax = x.dim(axis);

  Tensor<S> out = Tensor<S>::zeros(os);
  const auto& xd = x.data();
  auto& od = out.data();
  for (long o = 0; o < outer; ++o)
    for (long a = 0; a < ax; ++a)
      for (long r = 0; r < inner; ++r) od[o * inner + r] += xd[(o * ax + a) * inner + r];
  bool track = detail::tracked<S>({&x});
  detail::mark_and_record(out, track, [xi = x.impl(), oi = out.impl(), outer, inner, ax]() {
    oi->ensure_grad();
    if (!xi->requires_grad) return;
    xi->ensure_grad();
    for (long o = 0; o < outer; ++o)
      for (long a = 0; a < ax; ++a)
        for (long r = 0; r < inner; ++r)
          xi->grad[(o * ax + a) * inner + r] += oi->grad[o * inner + r];
  });
  return out;
}

template <typename S>
Tensor<S> mean_axis(const Tensor<S>& x, long axis) {
  return scale(sum_axis(x, axis), 1.0 / static_cast<double>(x.dim(axis)));
}

// ---------------------------------------------------------------------------
// softmax family (along `axis`)

namespace detail {
template <typename S, typename Fn>
void along_axis(const Shape& shape, long axis, Fn&& fn) {
  long nd = static_cast<long>(shape.size());
  long outer = 1, inner = 1;
  for (long i = 0; i < axis; ++i) outer *= shape[i];
  for (long i = axis + 1; i < nd; ++i) inner *= shape[i];
  long ax = shape[axis];
  for (long o = 0; o < outer; ++o)
    for (long r = 0; r < inner; ++r) fn(o * ax * inner + r, inner, ax);
}
}  // namespace detail

template <typename S>
Tensor<S> softmax(const Tensor<S>& x, long axis) {
  Tensor<S> out = Tensor<S>::zeros(x.shape());
  const auto& xd = x.data();
  auto& od = out.data();
  detail::along_axis<S>(x.shape(), axis, [&](long base, long stride, long ax) {
    S mx = xd[base];
    for (long a = 1; a < ax; ++a) mx = std::max(mx, xd[base + a * stride]);
    S denom = S(0);
    for (long a = 0; a < ax; ++a) {
      S e = std::exp(xd[base + a * stride] - mx);
      od[base + a * stride] = e;
      denom += e;
    }
    for (long a = 0; a < ax; ++a) od[base + a * stride] /= denom;
  });
  bool track = detail::tracked<S>({&x});
  detail::mark_and_record(out, track, [xi = x.impl(), oi = out.impl(), axis]() {
    oi->ensure_grad();
    if (!xi->requires_grad) return;
    xi->ensure_grad();
    detail::along_axis<S>(oi->shape, axis, [&](long base, long stride, long ax) {
      S dot = S(0);
      for (long a = 0; a < ax; ++a)
        dot += oi->grad[base + a * stride] * oi->data[base + a * stride];
      for (long a = 0; a < ax; ++a)
        xi->grad[base + a * stride] +=
            oi->data[base + a * stride] * (oi->grad[base + a * stride] - dot);
    });
  });
  return out;
}

template <typename S>
Tensor<S> log_softmax(const Tensor<S>& x, long axis) {
  Tensor<S> out = Tensor<S>::zeros(x.shape());
  const auto& xd = x.data();
  auto& od = out.data();
  detail::along_axis<S>(x.shape(), axis, [&](long base, long stride, long ax) {
    S mx = xd[base];
    for (long a = 1; a < ax; ++a) mx = std::max(mx, xd[base + a * stride]);
    S denom = S(0);
    for (long a = 0; a < ax; ++a) denom += std::exp(xd[base + a * stride] - mx);
    S lse = mx + std::log(denom);
    for (long a = 0; a < ax; ++a) od[base + a * stride] = xd[base + a * stride] - lse;
  });
  bool track = detail::tracked<S>({&x});
  detail::mark_and_record(out, track, [xi = x.impl(), oi = out.impl(), axis]() {
    oi->ensure_grad();
    if (!xi->requires_grad) return;
    xi->ensure_grad();
    detail::along_axis<S>(oi->shape, axis, [&](long base, long stride, long ax) {
      S gsum = S(0);
      for (long a = 0; a < ax; ++a) gsum += oi->grad[base + a * stride];
      for (long a = 0; a < ax; ++a)
        xi->grad[base + a * stride] +=
            oi->grad[base + a * stride] - std::exp(oi->data[base + a * stride]) * gsum;
    });
  });
  return out;
}

// normalizes `axis` to zero mean / unit variance; learned scale and
// shift are applied by the caller with mul/add
template <typename S>
Tensor<S> layer_norm(const Tensor<S>& x, long axis, double eps) {
  if (axis < 0 || axis >= x.ndim()) throw ShapeMismatch("layer_norm axis out of range");
  Tensor<S> out = Tensor<S>::zeros(x.shape());
  const auto& xd = x.data();
  auto& od = out.data();
  detail::along_axis<S>(x.shape(), axis, [&](long base, long stride, long ax) {
    S mean = S(0);
    for (long a = 0; a < ax; ++a) mean += xd[base + a * stride];
    mean /= static_cast<S>(ax);
    S var = S(0);
    for (long a = 0; a < ax; ++a) {
      S d = xd[base + a * stride] - mean;
      var += d * d;
    }
    var /= static_cast<S>(ax);
    S inv = S(1) / std::sqrt(var + static_cast<S>(eps));
    for (long a = 0; a < ax; ++a) od[base + a * stride] = (xd[base + a * stride] - mean) * inv;
  });
  bool track = detail::tracked<S>({&x});
  detail::mark_and_record(out, track, [xi = x.impl(), oi = out.impl(), axis, eps]() {
    oi->ensure_grad();
    if (!xi->requires_grad) return;
    xi->ensure_grad();
    detail::along_axis<S>(oi->shape, axis, [&](long base, long stride, long ax) {
      // recompute inv sigma from the inputs
      S mean = S(0);
      for (long a = 0; a < ax; ++a) mean += xi->data[base + a * stride];
      mean /= static_cast<S>(ax);
      S var = S(0);
      for (long a = 0; a < ax; ++a) {
        S d = xi->data[base + a * stride] - mean;
        var += d * d;
      }
      var /= static_cast<S>(ax);
      S inv = S(1) / std::sqrt(var + static_cast<S>(eps));
      S gmean = S(0), gydot = S(0);
      for (long a = 0; a < ax; ++a) {
        gmean += oi->grad[base + a * stride];
        gydot += oi->grad[base + a * stride] * oi->data[base + a * stride];
      }
      gmean /= static_cast<S>(ax);
      gydot /= static_cast<S>(ax);
      for (long a = 0; a < ax; ++a) {
        S y = oi->data[base + a * stride];
        xi->grad[base + a * stride] += inv * (oi->grad[base + a * stride] - gmean - y * gydot);
      }
    });
  });
  return out;
}

template <typename S>
Tensor<S> layer_norm(const Tensor<S>& x, double eps) {
  return layer_norm(x, x.ndim() - 1, eps);
}

// ---------------------------------------------------------------------------
// dropout (inverted scaling), embedding lookup

template <typename S>
Tensor<S> dropout(const Tensor<S>& x, double p, bool train, Rng& rng) {
  if (!train || p <= 0.0) return x;
  if (p >= 1.0) throw ShapeMismatch("dropout p must be < 1");
  Tensor<S> out = Tensor<S>::zeros(x.shape());
  std::vector<S> mask(x.numel());
  S keep_scale = static_cast<S>(1.0 / (1.0 - p));
  const auto& xd = x.data();
  auto& od = out.data();
  for (long i = 0; i < x.numel(); ++i) {
    mask[i] = rng.uniform() >= p ? keep_scale : S(0);
    od[i] = xd[i] * mask[i];
  }
  bool track = detail::tracked<S>({&x});
  detail::mark_and_record(out, track, [xi = x.impl(), oi = out.impl(), mask = std::move(mask)]() {
    oi->ensure_grad();
    if (!xi->requires_grad) return;
    xi->ensure_grad();
    for (size_t i = 0; i < xi->grad.size(); ++i) xi->grad[i] += mask[i] * oi->grad[i];
  });
  return out;
}

// table: [V, e]; ids laid out in ids_shape; out: ids_shape + [e]
template <typename S>
Tensor<S> embedding_lookup(const Tensor<S>& table, const std::vector<int32_t>& ids,
                           Shape ids_shape) {
  if (table.ndim() != 2) throw ShapeMismatch("embedding table must be 2-d");
  if (numel_of(ids_shape) != static_cast<long>(ids.size()))
    throw ShapeMismatch("embedding ids vs shape");
  long V = table.dim(0), e = table.dim(1);
  Shape os = ids_shape;
  os.push_back(e);
  Tensor<S> out = Tensor<S>::zeros(os);
  const auto& td = table.data();
  auto& od = out.data();
  for (size_t i = 0; i < ids.size(); ++i) {
    long id = ids[i];
    if (id < 0 || id >= V) throw ShapeMismatch("embedding id out of range");
    std::copy(td.begin() + id * e, td.begin() + (id + 1) * e, od.begin() + i * e);
  }
  bool track = detail::tracked<S>({&table});
  detail::mark_and_record(out, track, [ti = table.impl(), oi = out.impl(), ids, e]() {
    oi->ensure_grad();
    if (!ti->requires_grad) return;
    ti->ensure_grad();
    for (size_t i = 0; i < ids.size(); ++i)
      for (long k = 0; k < e; ++k) ti->grad[ids[i] * e + k] += oi->grad[i * e + k];
  });
  return out;
}

// negative log likelihood over log-probabilities, gathered by label and
// weighted per class; mean over the batch
template <typename S>
Tensor<S> nll_gather(const Tensor<S>& log_probs, const std::vector<int32_t>& labels,
                     const std::vector<double>& class_weights) {
  if (log_probs.ndim() != 2) throw ShapeMismatch("nll_gather expects [m, C] log-probs");
  long m = log_probs.dim(0), C = log_probs.dim(1);
  if (static_cast<long>(labels.size()) != m) throw ShapeMismatch("nll_gather labels vs batch");
  std::vector<S> w(m);
  for (long i = 0; i < m; ++i) {
    if (labels[i] < 0 || labels[i] >= C) throw ShapeMismatch("nll_gather label out of range");
    w[i] = static_cast<S>(class_weights.empty() ? 1.0 : class_weights[labels[i]]);
  }
  S acc = S(0);
  const auto& lp = log_probs.data();
  for (long i = 0; i < m; ++i) acc -= w[i] * lp[i * C + labels[i]];
  Tensor<S> out = Tensor<S>::scalar(acc / static_cast<S>(m));
  bool track = detail::tracked<S>({&log_probs});
  detail::mark_and_record(out, track,
                          [li = log_probs.impl(), oi = out.impl(), labels, w, m, C]() {
    oi->ensure_grad();
    if (!li->requires_grad) return;
    li->ensure_grad();
    for (long i = 0; i < m; ++i)
      li->grad[i * C + labels[i]] -= w[i] * oi->grad[0] / static_cast<S>(m);
  });
  return out;
}

// ---------------------------------------------------------------------------

template <typename S>
void backward(Tensor<S>& loss) {
  Tape<S>* tape = Tape<S>::active();
  if (!tape) throw NoTape();
  if (loss.numel() != 1) throw ShapeMismatch("backward() needs a scalar loss");
  loss.impl()->ensure_grad();
  loss.grad()[0] = S(1);
  tape->run_backward();
}

using TensorF = Tensor<float>;
using TensorD = Tensor<double>;

}  // namespace vgcnfuse
