#include "hazegan/conv_kernels.hpp"

#include <cblas.h>

#include <cstring>

#include "hazegan/errors.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

// OpenBLAS is pinned to one thread per call; parallelism happens here by
// splitting work into disjoint output ranges, which keeps every float
// bitwise reproducible regardless of scheduling.
extern "C" void openblas_set_num_threads(int);

namespace hazegan::kernels {

namespace {

struct BlasSetup {
  BlasSetup() { openblas_set_num_threads(1); }
};
const BlasSetup blas_setup;

int worker_count() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

// Scratch buffers reused across calls; conv kernels do not nest, so one set
// per thread is enough. Avoids re-faulting tens of MB of pages per call.
std::vector<float>& scratch(int which) {
  thread_local std::vector<float> bufs[3];
  return bufs[which];
}

// C (M x N) = op(A) * op(B), row-major, split over column blocks of C.
void sgemm_split(CBLAS_TRANSPOSE trans_a, CBLAS_TRANSPOSE trans_b, int m, int n, int k,
                 const float* a, int lda, const float* b, int ldb, float* c, int ldc) {
  const int workers = worker_count();
  const int64_t min_block = 4096;
  int blocks = workers;
  if (int64_t(n) * m * k < min_block * 64 || n < 2 * workers) blocks = 1;
  if (blocks == 1) {
    cblas_sgemm(CblasRowMajor, trans_a, trans_b, m, n, k, 1.f, a, lda, b, ldb, 0.f, c, ldc);
    return;
  }
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
  for (int blk = 0; blk < blocks; ++blk) {
    const int lo = int(int64_t(n) * blk / blocks);
    const int hi = int(int64_t(n) * (blk + 1) / blocks);
    if (lo >= hi) continue;
    // column block: for row-major B the block starts at column offset lo
    const float* b_blk = trans_b == CblasNoTrans ? b + lo : b + int64_t(lo) * ldb;
    cblas_sgemm(CblasRowMajor, trans_a, trans_b, m, hi - lo, k, 1.f, a, lda, b_blk, ldb, 0.f,
                c + lo, ldc);
  }
}

// For a fixed kernel offset kj, output columns with an in-bounds source pixel
// form one contiguous span [lo, hi]; everything outside reads padding.
inline void col_span(int ow, int w, int stride, int pad, int kj, int& lo, int& hi) {
  // need 0 <= ox*stride - pad + kj <= w-1
  const int a = pad - kj;
  lo = a <= 0 ? 0 : (a + stride - 1) / stride;
  hi = (w - 1 + pad - kj) / stride;
  if (hi > ow - 1) hi = ow - 1;
}

// cols is (C*KH*KW) x (N*OH*OW), row-major.
void im2col(const Tensor& x, int kh, int kw, int stride, int pad, int oh, int ow,
            std::vector<float>& cols) {
  const Shape s = x.shape();
  const int64_t ohow = int64_t(oh) * ow;
  const int64_t ncols = int64_t(s.n) * ohow;
  cols.resize(size_t(int64_t(s.c) * kh * kw * ncols));
  const float* xd = x.data();
#ifdef _OPENMP
#pragma omp parallel for collapse(2) schedule(static) if (s.n * s.c > 1)
#endif
  for (int n = 0; n < s.n; ++n) {
    for (int c = 0; c < s.c; ++c) {
      const float* xp = xd + (int64_t(n) * s.c + c) * s.h * s.w;
      for (int ki = 0; ki < kh; ++ki) {
        for (int kj = 0; kj < kw; ++kj) {
          float* col = cols.data() + ((int64_t(c) * kh + ki) * kw + kj) * ncols + int64_t(n) * ohow;
          int lo, hi;
          col_span(ow, s.w, stride, pad, kj, lo, hi);
          for (int oy = 0; oy < oh; ++oy) {
            const int iy = oy * stride - pad + ki;
            float* dst = col + int64_t(oy) * ow;
            if (iy < 0 || iy >= s.h || lo > hi) {
              std::memset(dst, 0, size_t(ow) * sizeof(float));
              continue;
            }
            if (lo > 0) std::memset(dst, 0, size_t(lo) * sizeof(float));
            if (hi < ow - 1) std::memset(dst + hi + 1, 0, size_t(ow - 1 - hi) * sizeof(float));
            const float* row = xp + int64_t(iy) * s.w + (int64_t(lo) * stride - pad + kj);
            if (stride == 1) {
              std::memcpy(dst + lo, row, size_t(hi - lo + 1) * sizeof(float));
            } else {
              for (int ox = lo; ox <= hi; ++ox) dst[ox] = row[int64_t(ox - lo) * stride];
            }
          }
        }
      }
    }
  }
}

void col2im(const std::vector<float>& cols, int kh, int kw, int stride, int pad, int oh,
            int ow, Tensor& x) {
  const Shape s = x.shape();
  const int64_t ohow = int64_t(oh) * ow;
  const int64_t ncols = int64_t(s.n) * ohow;
  float* xd = x.data();
#ifdef _OPENMP
#pragma omp parallel for collapse(2) schedule(static) if (s.n * s.c > 1)
#endif
  for (int n = 0; n < s.n; ++n) {
    for (int c = 0; c < s.c; ++c) {
      float* xp = xd + (int64_t(n) * s.c + c) * s.h * s.w;
      for (int ki = 0; ki < kh; ++ki) {
        for (int kj = 0; kj < kw; ++kj) {
          const float* col =
              cols.data() + ((int64_t(c) * kh + ki) * kw + kj) * ncols + int64_t(n) * ohow;
          int lo, hi;
          col_span(ow, s.w, stride, pad, kj, lo, hi);
          if (lo > hi) continue;
          for (int oy = 0; oy < oh; ++oy) {
            const int iy = oy * stride - pad + ki;
            if (iy < 0 || iy >= s.h) continue;
            float* row = xp + int64_t(iy) * s.w + (int64_t(lo) * stride - pad + kj);
            const float* src = col + int64_t(oy) * ow;
            if (stride == 1) {
              for (int ox = lo; ox <= hi; ++ox) row[ox - lo] += src[ox];
            } else {
              for (int ox = lo; ox <= hi; ++ox) row[int64_t(ox - lo) * stride] += src[ox];
            }
          }
        }
      }
    }
  }
}

// (N,OC,P) -> (OC,N*P)
void batch_transpose(const float* g, int n, int oc, int64_t p, std::vector<float>& out) {
  out.resize(size_t(int64_t(n) * oc * p));
#ifdef _OPENMP
#pragma omp parallel for collapse(2) schedule(static) if (n * oc > 1)
#endif
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < oc; ++j) {
      std::memcpy(out.data() + (int64_t(j) * n + i) * p, g + (int64_t(i) * oc + j) * p,
                  size_t(p) * sizeof(float));
    }
  }
}

}  // namespace

Tensor conv2d(const Tensor& x, const Tensor& w, int stride, int pad) {
  const Shape xs = x.shape(), ws = w.shape();
  if (xs.c != ws.c) {
    throw ShapeError("conv2d channel mismatch: input " + xs.str() + " weight " + ws.str());
  }
  const int oh = conv_out_size(xs.h, ws.h, stride, pad);
  const int ow = conv_out_size(xs.w, ws.w, stride, pad);
  if (oh < 1 || ow < 1) throw ShapeError("conv2d output would be empty for " + xs.str());

  std::vector<float>& cols = scratch(0);
  im2col(x, ws.h, ws.w, stride, pad, oh, ow, cols);

  const int ckk = ws.c * ws.h * ws.w;
  const int64_t ncols = int64_t(xs.n) * oh * ow;
  std::vector<float>& tmp = scratch(1);
  tmp.resize(size_t(int64_t(ws.n) * ncols));
  sgemm_split(CblasNoTrans, CblasNoTrans, ws.n, int(ncols), ckk, w.data(), ckk, cols.data(),
              int(ncols), tmp.data(), int(ncols));

  Tensor y = Tensor::uninitialized(Shape(xs.n, ws.n, oh, ow));
  const int64_t p = int64_t(oh) * ow;
  float* yd = y.data();
  for (int n = 0; n < xs.n; ++n) {
    for (int oc = 0; oc < ws.n; ++oc) {
      std::memcpy(yd + (int64_t(n) * ws.n + oc) * p, tmp.data() + (int64_t(oc) * xs.n + n) * p,
                  size_t(p) * sizeof(float));
    }
  }
  return y;
}

Tensor conv2d_dx(const Tensor& g, const Tensor& w, const ad::ConvArgs& a) {
  const Shape gs = g.shape(), ws = w.shape();
  if (gs.c != ws.n) {
    throw ShapeError("conv2d_dx channel mismatch: grad " + gs.str() + " weight " + ws.str());
  }
  const int64_t p = int64_t(gs.h) * gs.w;
  std::vector<float>& gt = scratch(2);
  batch_transpose(g.data(), gs.n, gs.c, p, gt);

  const int ckk = ws.c * ws.h * ws.w;
  const int64_t ncols = int64_t(gs.n) * p;
  std::vector<float>& cols = scratch(0);
  cols.resize(size_t(int64_t(ckk) * ncols));
  sgemm_split(CblasTrans, CblasNoTrans, ckk, int(ncols), ws.n, w.data(), ckk, gt.data(),
              int(ncols), cols.data(), int(ncols));

  Tensor dx(Shape(gs.n, a.xc, a.xh, a.xw));
  col2im(cols, a.kh, a.kw, a.stride, a.pad, gs.h, gs.w, dx);
  return dx;
}

Tensor conv2d_dw(const Tensor& g, const Tensor& x, const ad::ConvArgs& a) {
  const Shape gs = g.shape(), xs = x.shape();
  const int64_t p = int64_t(gs.h) * gs.w;
  std::vector<float>& gt = scratch(2);
  batch_transpose(g.data(), gs.n, gs.c, p, gt);

  std::vector<float>& cols = scratch(0);
  im2col(x, a.kh, a.kw, a.stride, a.pad, gs.h, gs.w, cols);

  const int ckk = xs.c * a.kh * a.kw;
  const int64_t ncols = int64_t(gs.n) * p;
  Tensor dw = Tensor::uninitialized(Shape(gs.c, xs.c, a.kh, a.kw));
  // Column blocks of dw are rows of cols: split over the CKK dimension.
  sgemm_split(CblasNoTrans, CblasTrans, gs.c, ckk, int(ncols), gt.data(), int(ncols),
              cols.data(), int(ncols), dw.data(), ckk);
  return dw;
}

Tensor maxpool2_fwd(const Tensor& x, std::vector<int>& idx) {
  const Shape s = x.shape();
  const int oh = s.h / 2, ow = s.w / 2;
  if (oh < 1 || ow < 1) throw ShapeError("maxpool2 input too small: " + s.str());
  Tensor y = Tensor::uninitialized(Shape(s.n, s.c, oh, ow));
  idx.resize(size_t(y.numel()));
  const float* xd = x.data();
  float* yd = y.data();
#ifdef _OPENMP
#pragma omp parallel for collapse(2) schedule(static) if (s.n * s.c > 1)
#endif
  for (int n = 0; n < s.n; ++n) {
    for (int c = 0; c < s.c; ++c) {
      const int64_t base = (int64_t(n) * s.c + c) * s.h * s.w;
      int64_t o = (int64_t(n) * s.c + c) * oh * ow;
      for (int oy = 0; oy < oh; ++oy) {
        for (int ox = 0; ox < ow; ++ox, ++o) {
          int best = int(base + int64_t(2 * oy) * s.w + 2 * ox);
          float bv = xd[best];
          const int cand[3] = {best + 1, best + s.w, best + s.w + 1};
          for (int k : cand) {
            if (xd[k] > bv) {
              bv = xd[k];
              best = k;
            }
          }
          yd[o] = bv;
          idx[size_t(o)] = best;
        }
      }
    }
  }
  return y;
}

Tensor maxpool2_scatter(const Tensor& g, const std::vector<int>& idx, Shape x_shape) {
  Tensor dx(x_shape);
  float* dd = dx.data();
  const float* gd = g.data();
  for (int64_t i = 0; i < g.numel(); ++i) dd[idx[size_t(i)]] += gd[i];
  return dx;
}

Tensor maxpool2_gather(const Tensor& gx, const std::vector<int>& idx, Shape y_shape) {
  Tensor out = Tensor::uninitialized(y_shape);
  float* od = out.data();
  const float* gd = gx.data();
  for (int64_t i = 0; i < out.numel(); ++i) od[i] = gd[idx[size_t(i)]];
  return out;
}

}  // namespace hazegan::kernels
