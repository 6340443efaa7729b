#pragma once

#include <algorithm>
#include <memory>
#include <tuple>
#include <vector>

#include "vgcnfuse/tensor.hpp"

namespace vgcnfuse {

// CSR with double values. Graph weights stay in double end to end; the
// taped multiply casts per element into the model's scalar type.
struct CsrMatrix {
  long rows = 0;
  long cols = 0;
  std::vector<long> indptr;
  std::vector<long> indices;
  std::vector<double> values;

  static CsrMatrix from_triplets(long rows, long cols,
                                 std::vector<std::tuple<long, long, double>> trip) {
    std::sort(trip.begin(), trip.end(), [](const auto& a, const auto& b) {
      return std::tie(std::get<0>(a), std::get<1>(a)) < std::tie(std::get<0>(b), std::get<1>(b));
    });
    CsrMatrix m;
    m.rows = rows;
    m.cols = cols;
    m.indptr.assign(rows + 1, 0);
    m.indices.reserve(trip.size());
    m.values.reserve(trip.size());
    for (const auto& [i, j, w] : trip) {
      m.indptr[i + 1]++;
      m.indices.push_back(j);
      m.values.push_back(w);
    }
    for (long i = 0; i < rows; ++i) m.indptr[i + 1] += m.indptr[i];
    return m;
  }

  long nnz() const { return static_cast<long>(values.size()); }

  double at(long i, long j) const {
    for (long k = indptr[i]; k < indptr[i + 1]; ++k)
      if (indices[k] == j) return values[k];
    return 0.0;
  }

  std::vector<std::vector<double>> to_dense() const {
    std::vector<std::vector<double>> d(rows, std::vector<double>(cols, 0.0));
    for (long i = 0; i < rows; ++i)
      for (long k = indptr[i]; k < indptr[i + 1]; ++k) d[i][indices[k]] = values[k];
    return d;
  }
};

// y = x * A over the last axis of x. A is a constant: no adjoint flows
// into it, and dx = dy * A^T computed directly from the CSR rows.
template <typename S>
Tensor<S> matmul_sparse(const Tensor<S>& x, std::shared_ptr<const CsrMatrix> A) {
  if (x.dim(x.ndim() - 1) != A->rows)
    throw ShapeMismatch("matmul_sparse: " + shape_str(x.shape()) + " x sparse[" +
                        std::to_string(A->rows) + "," + std::to_string(A->cols) + "]");
  Shape os = x.shape();
  os.back() = A->cols;
  Tensor<S> out = Tensor<S>::zeros(os);
  long batch = x.numel() / A->rows;
  long v = A->rows, n = A->cols;
  const S* xd = x.data().data();
  S* od = out.data().data();
  for (long b = 0; b < batch; ++b) {
    const S* xr = xd + b * v;
    S* yr = od + b * n;
    for (long j = 0; j < v; ++j) {
      S xv = xr[j];
      if (xv == S(0)) continue;
      for (long k = A->indptr[j]; k < A->indptr[j + 1]; ++k)
        yr[A->indices[k]] += xv * static_cast<S>(A->values[k]);
    }
  }
  bool track = detail::tracked<S>({&x});
  detail::mark_and_record(out, track, [xi = x.impl(), oi = out.impl(), A, batch, v, n]() {
    oi->ensure_grad();
    if (!xi->requires_grad) return;
    xi->ensure_grad();
    const S* gy = oi->grad.data();
    S* gx = xi->grad.data();
    for (long b = 0; b < batch; ++b) {
      const S* gyr = gy + b * n;
      S* gxr = gx + b * v;
      for (long j = 0; j < v; ++j) {
        S acc = S(0);
        for (long k = A->indptr[j]; k < A->indptr[j + 1]; ++k)
          acc += gyr[A->indices[k]] * static_cast<S>(A->values[k]);
        gxr[j] += acc;
      }
    }
  });
  return out;
}

}  // namespace vgcnfuse
