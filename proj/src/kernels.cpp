#include "spheremap/kernels.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <vector>

#include "spheremap/parallel.hpp"

namespace spheremap::kernels {
namespace {

// Output pixels per GEMM work item.
constexpr int kColumnBlock = 4096;

template <typename T>
using RowMatrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using ConstMap = Eigen::Map<const RowMatrix<T>>;
template <typename T>
using MutMap = Eigen::Map<RowMatrix<T>>;

inline int wrap(int v, int n) {
  v %= n;
  return v < 0 ? v + n : v;
}

// Source column for kernel tap, or -1 when it falls in zero padding.
inline int source_col(const ConvGeometry& g, int ox, int kx) {
  const int ix = ox * g.stride - g.padding + kx * g.dilation;
  if (g.circular_width) return wrap(ix, g.in_width);
  return (ix >= 0 && ix < g.in_width) ? ix : -1;
}

inline int source_row(const ConvGeometry& g, int oy, int ky) {
  const int iy = oy * g.stride - g.padding + ky * g.dilation;
  return (iy >= 0 && iy < g.in_height) ? iy : -1;
}

// cols[K, count] for output pixels [begin, begin + count) of one sample.
template <typename T>
void im2col(const ConvGeometry& g, const T* x, int begin, int count, T* cols) {
  const int kk = g.kernel_h * g.kernel_w;
  for (int c = 0; c < g.in_channels; ++c) {
    const T* xc = x + static_cast<std::size_t>(c) * g.in_height * g.in_width;
    for (int k = 0; k < kk; ++k) {
      const int ky = k / g.kernel_w, kx = k % g.kernel_w;
      T* row = cols + (static_cast<std::size_t>(c) * kk + k) * count;
      int oy = begin / g.out_width, ox = begin % g.out_width;
      int iy = source_row(g, oy, ky);
      for (int j = 0; j < count; ++j) {
        const int ix = source_col(g, ox, kx);
        row[j] = (iy >= 0 && ix >= 0) ? xc[static_cast<std::size_t>(iy) * g.in_width + ix] : T(0);
        if (++ox == g.out_width) {
          ox = 0;
          iy = source_row(g, ++oy, ky);
        }
      }
    }
  }
}

template <typename T>
void col2im(const ConvGeometry& g, const T* cols, int begin, int count, T* dx) {
  const int kk = g.kernel_h * g.kernel_w;
  for (int c = 0; c < g.in_channels; ++c) {
    T* dxc = dx + static_cast<std::size_t>(c) * g.in_height * g.in_width;
    for (int k = 0; k < kk; ++k) {
      const int ky = k / g.kernel_w, kx = k % g.kernel_w;
      const T* row = cols + (static_cast<std::size_t>(c) * kk + k) * count;
      int oy = begin / g.out_width, ox = begin % g.out_width;
      int iy = source_row(g, oy, ky);
      for (int j = 0; j < count; ++j) {
        const int ix = source_col(g, ox, kx);
        if (iy >= 0 && ix >= 0) dxc[static_cast<std::size_t>(iy) * g.in_width + ix] += row[j];
        if (++ox == g.out_width) {
          ox = 0;
          iy = source_row(g, ++oy, ky);
        }
      }
    }
  }
}

struct WorkItem {
  int sample;
  int begin;
  int count;
};

std::vector<WorkItem> work_items(const ConvGeometry& g) {
  std::vector<WorkItem> items;
  const int pixels = g.out_height * g.out_width;
  for (int n = 0; n < g.batch; ++n) {
    for (int b = 0; b < pixels; b += kColumnBlock) {
      items.push_back({n, b, std::min(kColumnBlock, pixels - b)});
    }
  }
  return items;
}

}  // namespace

template <typename T>
void conv2d_forward(const ConvGeometry& g, std::span<const T> x, std::span<const T> w,
                    std::span<const T> bias, std::span<T> y) {
  const int K = g.patch_size();
  const int pixels = g.out_height * g.out_width;
  const std::size_t x_stride = static_cast<std::size_t>(g.in_channels) * g.in_height * g.in_width;
  const std::size_t y_stride = static_cast<std::size_t>(g.out_channels) * pixels;
  const auto items = work_items(g);
  const ConstMap<T> W(w.data(), g.out_channels, K);

#pragma omp parallel num_threads(thread_count())
  {
    std::vector<T> cols;
#pragma omp for schedule(static)
    for (int i = 0; i < static_cast<int>(items.size()); ++i) {
      const WorkItem& it = items[i];
      cols.resize(static_cast<std::size_t>(K) * it.count);
      im2col(g, x.data() + it.sample * x_stride, it.begin, it.count, cols.data());
      const ConstMap<T> C(cols.data(), K, it.count);
      RowMatrix<T> out = W * C;
      T* yn = y.data() + it.sample * y_stride;
      for (int co = 0; co < g.out_channels; ++co) {
        const T b = bias.empty() ? T(0) : bias[co];
        T* dst = yn + static_cast<std::size_t>(co) * pixels + it.begin;
        for (int j = 0; j < it.count; ++j) dst[j] = out(co, j) + b;
      }
    }
  }
}

template <typename T>
void conv2d_backward_input(const ConvGeometry& g, std::span<const T> dy, std::span<const T> w,
                           std::span<T> dx) {
  const int K = g.patch_size();
  const int pixels = g.out_height * g.out_width;
  const std::size_t x_stride = static_cast<std::size_t>(g.in_channels) * g.in_height * g.in_width;
  const std::size_t y_stride = static_cast<std::size_t>(g.out_channels) * pixels;
  const ConstMap<T> W(w.data(), g.out_channels, K);

  // Column blocks of one sample scatter into overlapping input pixels, so a
  // sample is the unit of parallel work here.
#pragma omp parallel num_threads(thread_count())
  {
    RowMatrix<T> cols;
    RowMatrix<T> dyb;
#pragma omp for schedule(static)
    for (int n = 0; n < g.batch; ++n) {
      const T* dyn = dy.data() + n * y_stride;
      for (int b = 0; b < pixels; b += kColumnBlock) {
        const int count = std::min(kColumnBlock, pixels - b);
        dyb.resize(g.out_channels, count);
        for (int co = 0; co < g.out_channels; ++co) {
          const T* src = dyn + static_cast<std::size_t>(co) * pixels + b;
          std::copy(src, src + count, dyb.row(co).data());
        }
        cols.noalias() = W.transpose() * dyb;
        col2im(g, cols.data(), b, count, dx.data() + n * x_stride);
      }
    }
  }
}

template <typename T>
void conv2d_backward_weight(const ConvGeometry& g, std::span<const T> x, std::span<const T> dy,
                            std::span<T> dw, std::span<T> db) {
  const int K = g.patch_size();
  const int pixels = g.out_height * g.out_width;
  const std::size_t x_stride = static_cast<std::size_t>(g.in_channels) * g.in_height * g.in_width;
  const std::size_t y_stride = static_cast<std::size_t>(g.out_channels) * pixels;
  const auto items = work_items(g);
  const std::size_t wsize = static_cast<std::size_t>(g.out_channels) * K;
  std::vector<T> partial(items.size() * wsize);

#pragma omp parallel num_threads(thread_count())
  {
    std::vector<T> cols;
    RowMatrix<T> dyb;
#pragma omp for schedule(static)
    for (int i = 0; i < static_cast<int>(items.size()); ++i) {
      const WorkItem& it = items[i];
      cols.resize(static_cast<std::size_t>(K) * it.count);
      im2col(g, x.data() + it.sample * x_stride, it.begin, it.count, cols.data());
      dyb.resize(g.out_channels, it.count);
      const T* dyn = dy.data() + it.sample * y_stride;
      for (int co = 0; co < g.out_channels; ++co) {
        const T* src = dyn + static_cast<std::size_t>(co) * pixels + it.begin;
        std::copy(src, src + it.count, dyb.row(co).data());
      }
      const ConstMap<T> C(cols.data(), K, it.count);
      MutMap<T> P(partial.data() + i * wsize, g.out_channels, K);
      P.noalias() = dyb * C.transpose();
    }
  }
  // Fixed-order reduction over work items.
  for (std::size_t i = 0; i < items.size(); ++i) {
    const T* p = partial.data() + i * wsize;
    for (std::size_t k = 0; k < wsize; ++k) dw[k] += p[k];
  }
  if (!db.empty()) {
    for (int n = 0; n < g.batch; ++n) {
      for (int co = 0; co < g.out_channels; ++co) {
        const T* src = dy.data() + n * y_stride + static_cast<std::size_t>(co) * pixels;
        T s = T(0);
        for (int j = 0; j < pixels; ++j) s += src[j];
        db[co] += s;
      }
    }
  }
}

namespace reference {

template <typename T>
void conv2d_forward(const ConvGeometry& g, std::span<const T> x, std::span<const T> w,
                    std::span<const T> bias, std::span<T> y) {
  for (int n = 0; n < g.batch; ++n)
    for (int co = 0; co < g.out_channels; ++co)
      for (int oy = 0; oy < g.out_height; ++oy)
        for (int ox = 0; ox < g.out_width; ++ox) {
          T acc = bias.empty() ? T(0) : bias[co];
          for (int ci = 0; ci < g.in_channels; ++ci)
            for (int ky = 0; ky < g.kernel_h; ++ky) {
              const int iy = source_row(g, oy, ky);
              if (iy < 0) continue;
              for (int kx = 0; kx < g.kernel_w; ++kx) {
                const int ix = source_col(g, ox, kx);
                if (ix < 0) continue;
                acc += w[((static_cast<std::size_t>(co) * g.in_channels + ci) * g.kernel_h + ky) *
                             g.kernel_w + kx] *
                       x[((static_cast<std::size_t>(n) * g.in_channels + ci) * g.in_height + iy) *
                             g.in_width + ix];
              }
            }
          y[((static_cast<std::size_t>(n) * g.out_channels + co) * g.out_height + oy) *
                g.out_width + ox] = acc;
        }
}

template <typename T>
void conv2d_backward_input(const ConvGeometry& g, std::span<const T> dy, std::span<const T> w,
                           std::span<T> dx) {
  for (int n = 0; n < g.batch; ++n)
    for (int co = 0; co < g.out_channels; ++co)
      for (int oy = 0; oy < g.out_height; ++oy)
        for (int ox = 0; ox < g.out_width; ++ox) {
          const T d = dy[((static_cast<std::size_t>(n) * g.out_channels + co) * g.out_height + oy) *
                             g.out_width + ox];
          for (int ci = 0; ci < g.in_channels; ++ci)
            for (int ky = 0; ky < g.kernel_h; ++ky) {
              const int iy = source_row(g, oy, ky);
              if (iy < 0) continue;
              for (int kx = 0; kx < g.kernel_w; ++kx) {
                const int ix = source_col(g, ox, kx);
                if (ix < 0) continue;
                dx[((static_cast<std::size_t>(n) * g.in_channels + ci) * g.in_height + iy) *
                       g.in_width + ix] +=
                    d * w[((static_cast<std::size_t>(co) * g.in_channels + ci) * g.kernel_h + ky) *
                              g.kernel_w + kx];
              }
            }
        }
}

template <typename T>
void conv2d_backward_weight(const ConvGeometry& g, std::span<const T> x, std::span<const T> dy,
                            std::span<T> dw, std::span<T> db) {
  for (int n = 0; n < g.batch; ++n)
    for (int co = 0; co < g.out_channels; ++co)
      for (int oy = 0; oy < g.out_height; ++oy)
        for (int ox = 0; ox < g.out_width; ++ox) {
          const T d = dy[((static_cast<std::size_t>(n) * g.out_channels + co) * g.out_height + oy) *
                             g.out_width + ox];
          if (!db.empty()) db[co] += d;
          for (int ci = 0; ci < g.in_channels; ++ci)
            for (int ky = 0; ky < g.kernel_h; ++ky) {
              const int iy = source_row(g, oy, ky);
              if (iy < 0) continue;
              for (int kx = 0; kx < g.kernel_w; ++kx) {
                const int ix = source_col(g, ox, kx);
                if (ix < 0) continue;
                dw[((static_cast<std::size_t>(co) * g.in_channels + ci) * g.kernel_h + ky) *
                       g.kernel_w + kx] +=
                    d * x[((static_cast<std::size_t>(n) * g.in_channels + ci) * g.in_height + iy) *
                              g.in_width + ix];
              }
            }
        }
}

}  // namespace reference

#define SPHEREMAP_INSTANTIATE_KERNELS(T)                                                        \
  template void conv2d_forward<T>(const ConvGeometry&, std::span<const T>, std::span<const T>,  \
                                  std::span<const T>, std::span<T>);                           \
  template void conv2d_backward_input<T>(const ConvGeometry&, std::span<const T>,               \
                                         std::span<const T>, std::span<T>);                    \
  template void conv2d_backward_weight<T>(const ConvGeometry&, std::span<const T>,              \
                                          std::span<const T>, std::span<T>, std::span<T>);     \
  template void reference::conv2d_forward<T>(const ConvGeometry&, std::span<const T>,           \
                                             std::span<const T>, std::span<const T>,           \
                                             std::span<T>);                                    \
  template void reference::conv2d_backward_input<T>(const ConvGeometry&, std::span<const T>,    \
                                                    std::span<const T>, std::span<T>);         \
  template void reference::conv2d_backward_weight<T>(const ConvGeometry&, std::span<const T>,   \
                                                     std::span<const T>, std::span<T>,         \
                                                     std::span<T>);

SPHEREMAP_INSTANTIATE_KERNELS(float)
SPHEREMAP_INSTANTIATE_KERNELS(double)

#undef SPHEREMAP_INSTANTIATE_KERNELS

}  // namespace spheremap::kernels
