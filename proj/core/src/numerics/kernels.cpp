#include "kernels.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <string>

#include "ocda/error.hpp"

namespace ocda::numerics::detail {
namespace {

template <class T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <class T>
using ConstMap = Eigen::Map<const RowMat<T>>;
template <class T>
using MutMap = Eigen::Map<RowMat<T>>;

[[noreturn]] void shape_fail(Op op, const std::string& what) {
  throw ShapeError(std::string(op_name(op)) + ": " + what);
}

std::size_t normalize_axis(Op op, int axis, std::size_t rank) {
  const int r = static_cast<int>(rank);
  const int a = axis < 0 ? axis + r : axis;
  if (a < 0 || a >= r) {
    shape_fail(op, "axis " + std::to_string(axis) + " out of range for rank " +
                       std::to_string(rank));
  }
  return static_cast<std::size_t>(a);
}

// Splits a shape around one axis into (outer, axis extent, inner).
struct AxisSplit {
  std::size_t outer = 1, extent = 1, inner = 1;
};

AxisSplit split_at(const Shape& s, std::size_t axis) {
  AxisSplit r;
  for (std::size_t i = 0; i < axis; ++i) r.outer *= s[i];
  r.extent = s[axis];
  for (std::size_t i = axis + 1; i < s.size(); ++i) r.inner *= s[i];
  return r;
}

std::size_t last_dim(const Shape& s) { return s.empty() ? 1 : s.back(); }

// ---------------------------------------------------------------------------
// Broadcasting

struct Broadcast {
  Shape out;
  std::vector<std::size_t> stride_a, stride_b;
  bool same = false;
};

std::vector<std::size_t> broadcast_strides(const Shape& in, const Shape& out) {
  const std::size_t r = out.size();
  const std::size_t offset = r - in.size();
  std::vector<std::size_t> strides(r, 0);
  std::size_t running = 1;
  for (std::size_t d = r; d-- > 0;) {
    if (d < offset) continue;
    const std::size_t extent = in[d - offset];
    strides[d] = extent == 1 ? 0 : running;
    running *= extent;
  }
  return strides;
}

Broadcast plan_broadcast(Op op, const Shape& a, const Shape& b) {
  Broadcast p;
  if (a == b) {
    p.out = a;
    p.same = true;
    return p;
  }
  const std::size_t r = std::max(a.size(), b.size());
  p.out.assign(r, 1);
  for (std::size_t d = 0; d < r; ++d) {
    const std::size_t ia = d + a.size() >= r ? a[d + a.size() - r] : 1;
    const std::size_t ib = d + b.size() >= r ? b[d + b.size() - r] : 1;
    if (ia != ib && ia != 1 && ib != 1) {
      shape_fail(op, "cannot broadcast " + to_string(a) + " with " + to_string(b));
    }
    p.out[d] = ia == 1 ? ib : ia;
  }
  p.stride_a = broadcast_strides(a, p.out);
  p.stride_b = broadcast_strides(b, p.out);
  return p;
}

// Calls f(out_index, a_index, b_index) for every output element.
template <class F>
void for_each_broadcast(const Broadcast& p, F&& f) {
  const std::size_t total = numel(p.out);
  if (p.same) {
    for (std::size_t i = 0; i < total; ++i) f(i, i, i);
    return;
  }
  const std::size_t r = p.out.size();
  if (r == 0) {
    f(0, 0, 0);
    return;
  }
  const std::size_t inner = p.out[r - 1];
  if (inner == 0 || total == 0) return;
  const std::size_t sa = p.stride_a[r - 1], sb = p.stride_b[r - 1];
  std::vector<std::size_t> idx(r - 1, 0);
  std::size_t base_a = 0, base_b = 0, o = 0;
  const std::size_t outer = total / inner;
  for (std::size_t n = 0; n < outer; ++n) {
    std::size_t ia = base_a, ib = base_b;
    for (std::size_t j = 0; j < inner; ++j, ++o, ia += sa, ib += sb) f(o, ia, ib);
    for (std::size_t d = r - 1; d-- > 0;) {
      ++idx[d];
      base_a += p.stride_a[d];
      base_b += p.stride_b[d];
      if (idx[d] < p.out[d]) break;
      base_a -= p.stride_a[d] * p.out[d];
      base_b -= p.stride_b[d] * p.out[d];
      idx[d] = 0;
    }
  }
}

// ---------------------------------------------------------------------------
// Convolution helpers (NHWC input, (k, k, C, O) weights)

struct ConvGeom {
  std::size_t n, h, w, c, k, o, stride, pad, ho, wo;
  std::size_t rows() const { return n * ho * wo; }
  std::size_t patch() const { return k * k * c; }
};

ConvGeom conv_geom(const Shape& x, const Shape& w, const OpAttrs& attrs,
                   const Shape& out) {
  return ConvGeom{x[0], x[1], x[2], x[3], w[0], w[3],
                  static_cast<std::size_t>(attrs.stride),
                  static_cast<std::size_t>(attrs.pad), out[1], out[2]};
}

template <class T>
void im2col(const ConvGeom& g, const T* x, T* cols) {
  const std::size_t patch = g.patch();
  for (std::size_t n = 0; n < g.n; ++n) {
    for (std::size_t oy = 0; oy < g.ho; ++oy) {
      for (std::size_t ox = 0; ox < g.wo; ++ox) {
        T* dst = cols + ((n * g.ho + oy) * g.wo + ox) * patch;
        for (std::size_t ky = 0; ky < g.k; ++ky) {
          const long iy = static_cast<long>(oy * g.stride + ky) - static_cast<long>(g.pad);
          for (std::size_t kx = 0; kx < g.k; ++kx, dst += g.c) {
            const long ix = static_cast<long>(ox * g.stride + kx) - static_cast<long>(g.pad);
            if (iy < 0 || ix < 0 || iy >= static_cast<long>(g.h) ||
                ix >= static_cast<long>(g.w)) {
              std::fill(dst, dst + g.c, T(0));
            } else {
              const T* src = x + ((n * g.h + static_cast<std::size_t>(iy)) * g.w +
                                  static_cast<std::size_t>(ix)) * g.c;
              std::copy(src, src + g.c, dst);
            }
          }
        }
      }
    }
  }
}

void col2im_add(const ConvGeom& g, const float* cols, float* gx) {
  const std::size_t patch = g.patch();
  for (std::size_t n = 0; n < g.n; ++n) {
    for (std::size_t oy = 0; oy < g.ho; ++oy) {
      for (std::size_t ox = 0; ox < g.wo; ++ox) {
        const float* src = cols + ((n * g.ho + oy) * g.wo + ox) * patch;
        for (std::size_t ky = 0; ky < g.k; ++ky) {
          const long iy = static_cast<long>(oy * g.stride + ky) - static_cast<long>(g.pad);
          for (std::size_t kx = 0; kx < g.k; ++kx, src += g.c) {
            const long ix = static_cast<long>(ox * g.stride + kx) - static_cast<long>(g.pad);
            if (iy < 0 || ix < 0 || iy >= static_cast<long>(g.h) ||
                ix >= static_cast<long>(g.w)) {
              continue;
            }
            float* dst = gx + ((n * g.h + static_cast<std::size_t>(iy)) * g.w +
                               static_cast<std::size_t>(ix)) * g.c;
            for (std::size_t c = 0; c < g.c; ++c) dst[c] += src[c];
          }
        }
      }
    }
  }
}

}  // namespace

// ---------------------------------------------------------------------------

Shape infer_shape(Op op, const OpAttrs& attrs,
                  std::span<const Shape* const> in) {
  auto need = [&](std::size_t count) {
    if (in.size() != count) {
      shape_fail(op, "expected " + std::to_string(count) + " inputs, got " +
                         std::to_string(in.size()));
    }
  };
  switch (op) {
    case Op::leaf:
      shape_fail(op, "leaves are created with Graph::leaf");
    case Op::add:
    case Op::sub:
    case Op::mul:
      need(2);
      return plan_broadcast(op, *in[0], *in[1]).out;
    case Op::matmul: {
      need(2);
      const Shape& a = *in[0];
      const Shape& b = *in[1];
      if (a.size() != 2 || b.size() != 2) {
        shape_fail(op, "expects rank-2 operands, got " + to_string(a) + " x " +
                           to_string(b));
      }
      const std::size_t kb = attrs.transpose_b ? b[1] : b[0];
      const std::size_t nb = attrs.transpose_b ? b[0] : b[1];
      if (a[1] != kb) {
        shape_fail(op, "inner dimensions differ: " + to_string(a) + " x " +
                           to_string(b) + (attrs.transpose_b ? "^T" : ""));
      }
      return {a[0], nb};
    }
    case Op::conv2d: {
      need(2);
      const Shape& x = *in[0];
      const Shape& w = *in[1];
      if (x.size() != 4 || w.size() != 4) {
        shape_fail(op, "expects NHWC input and (k, k, C, O) weights, got " +
                           to_string(x) + " and " + to_string(w));
      }
      if (w[0] != w[1] || w[0] % 2 == 0) {
        shape_fail(op, "kernel must be odd and square, got " + to_string(w));
      }
      if (w[2] != x[3]) {
        shape_fail(op, "channel mismatch: input " + to_string(x) + ", weights " +
                           to_string(w));
      }
      if (attrs.stride != 1 && attrs.stride != 2) {
        shape_fail(op, "stride must be 1 or 2, got " + std::to_string(attrs.stride));
      }
      if (attrs.pad < 0) shape_fail(op, "negative padding");
      const std::size_t k = w[0];
      const std::size_t p = static_cast<std::size_t>(attrs.pad);
      if (x[1] + 2 * p < k || x[2] + 2 * p < k) {
        shape_fail(op, "spatial dims of " + to_string(x) + " smaller than kernel " +
                           to_string(w));
      }
      const std::size_t s = static_cast<std::size_t>(attrs.stride);
      return {x[0], (x[1] + 2 * p - k) / s + 1, (x[2] + 2 * p - k) / s + 1, w[3]};
    }
    case Op::max_pool2d: {
      need(1);
      const Shape& x = *in[0];
      if (x.size() != 4) shape_fail(op, "expects NHWC input, got " + to_string(x));
      if (attrs.window < 1) shape_fail(op, "window must be positive");
      const std::size_t win = static_cast<std::size_t>(attrs.window);
      if (x[1] < win || x[2] < win) {
        shape_fail(op, "input " + to_string(x) + " smaller than window");
      }
      return {x[0], x[1] / win, x[2] / win, x[3]};
    }
    case Op::relu:
    case Op::tanh:
    case Op::log:
      need(1);
      return *in[0];
    case Op::softmax:
    case Op::l2_normalize:
      need(1);
      if (in[0]->empty() || in[0]->back() == 0) {
        shape_fail(op, "needs a non-empty last axis, got " + to_string(*in[0]));
      }
      return *in[0];
    case Op::mean:
    case Op::sum: {
      need(1);
      if (attrs.axis == kAllAxes) {
        if (op == Op::mean && numel(*in[0]) == 0) shape_fail(op, "mean of empty tensor");
        return {};
      }
      const std::size_t axis = normalize_axis(op, attrs.axis, in[0]->size());
      Shape out = *in[0];
      if (op == Op::mean && out[axis] == 0) shape_fail(op, "mean over empty axis");
      out.erase(out.begin() + static_cast<long>(axis));
      return out;
    }
    case Op::l2_norm: {
      need(1);
      if (in[0]->empty()) shape_fail(op, "needs rank >= 1");
      Shape out = *in[0];
      out.pop_back();
      return out;
    }
    case Op::concat: {
      if (in.empty()) shape_fail(op, "needs at least one input");
      const Shape& first = *in[0];
      const std::size_t axis = normalize_axis(op, attrs.axis, first.size());
      Shape out = first;
      out[axis] = 0;
      for (const Shape* s : in) {
        bool ok = s->size() == first.size();
        for (std::size_t d = 0; ok && d < first.size(); ++d) {
          if (d != axis && (*s)[d] != first[d]) ok = false;
        }
        if (!ok) {
          shape_fail(op, "incompatible parts " + to_string(first) + " and " +
                             to_string(*s) + " along axis " + std::to_string(axis));
        }
        out[axis] += (*s)[axis];
      }
      return out;
    }
    case Op::reshape:
      need(1);
      if (numel(attrs.shape) != numel(*in[0])) {
        shape_fail(op, "cannot view " + to_string(*in[0]) + " as " +
                           to_string(attrs.shape));
      }
      return attrs.shape;
    case Op::cross_entropy: {
      need(2);
      if (*in[0] != *in[1]) {
        shape_fail(op, "logits " + to_string(*in[0]) + " and targets " +
                           to_string(*in[1]) + " differ");
      }
      if (in[0]->empty() || in[0]->back() == 0) {
        shape_fail(op, "needs a non-empty class axis, got " + to_string(*in[0]));
      }
      Shape out = *in[0];
      out.pop_back();
      return out;
    }
  }
  shape_fail(op, "unknown primitive");
}

template <class T>
void forward(Op op, const OpAttrs& attrs, std::span<const View<T>> in,
             const Shape& out_shape, T* out, std::vector<std::uint32_t>* saved,
             std::size_t* degenerate) {
  const std::size_t total = numel(out_shape);
  switch (op) {
    case Op::leaf:
      break;
    case Op::add:
    case Op::sub:
    case Op::mul: {
      const Broadcast p = plan_broadcast(op, *in[0].shape, *in[1].shape);
      const T* a = in[0].data;
      const T* b = in[1].data;
      if (op == Op::add) {
        for_each_broadcast(p, [&](std::size_t o, std::size_t i, std::size_t j) { out[o] = a[i] + b[j]; });
      } else if (op == Op::sub) {
        for_each_broadcast(p, [&](std::size_t o, std::size_t i, std::size_t j) { out[o] = a[i] - b[j]; });
      } else {
        for_each_broadcast(p, [&](std::size_t o, std::size_t i, std::size_t j) { out[o] = a[i] * b[j]; });
      }
      break;
    }
    case Op::matmul: {
      const Shape& sa = *in[0].shape;
      const Shape& sb = *in[1].shape;
      ConstMap<T> a(in[0].data, static_cast<Eigen::Index>(sa[0]), static_cast<Eigen::Index>(sa[1]));
      ConstMap<T> b(in[1].data, static_cast<Eigen::Index>(sb[0]), static_cast<Eigen::Index>(sb[1]));
      MutMap<T> c(out, static_cast<Eigen::Index>(out_shape[0]), static_cast<Eigen::Index>(out_shape[1]));
      if (attrs.transpose_b) {
        c.noalias() = a * b.transpose();
      } else {
        c.noalias() = a * b;
      }
      break;
    }
    case Op::conv2d: {
      const ConvGeom g = conv_geom(*in[0].shape, *in[1].shape, attrs, out_shape);
      std::vector<T> cols(g.rows() * g.patch());
      im2col(g, in[0].data, cols.data());
      ConstMap<T> cm(cols.data(), static_cast<Eigen::Index>(g.rows()), static_cast<Eigen::Index>(g.patch()));
      ConstMap<T> wm(in[1].data, static_cast<Eigen::Index>(g.patch()), static_cast<Eigen::Index>(g.o));
      MutMap<T> om(out, static_cast<Eigen::Index>(g.rows()), static_cast<Eigen::Index>(g.o));
      om.noalias() = cm * wm;
      break;
    }
    case Op::max_pool2d: {
      const Shape& s = *in[0].shape;
      const std::size_t win = static_cast<std::size_t>(attrs.window);
      const std::size_t h = s[1], w = s[2], c = s[3];
      const std::size_t ho = out_shape[1], wo = out_shape[2];
      if (saved) saved->assign(total, 0);
      const T* x = in[0].data;
      for (std::size_t n = 0; n < s[0]; ++n) {
        for (std::size_t oy = 0; oy < ho; ++oy) {
          for (std::size_t ox = 0; ox < wo; ++ox) {
            for (std::size_t ch = 0; ch < c; ++ch) {
              std::size_t best = ((n * h + oy * win) * w + ox * win) * c + ch;
              for (std::size_t ky = 0; ky < win; ++ky) {
                for (std::size_t kx = 0; kx < win; ++kx) {
                  const std::size_t idx = ((n * h + oy * win + ky) * w + ox * win + kx) * c + ch;
                  if (x[idx] > x[best]) best = idx;
                }
              }
              const std::size_t o = ((n * ho + oy) * wo + ox) * c + ch;
              out[o] = x[best];
              if (saved) (*saved)[o] = static_cast<std::uint32_t>(best);
            }
          }
        }
      }
      break;
    }
    case Op::relu:
      for (std::size_t i = 0; i < total; ++i) out[i] = in[0].data[i] > T(0) ? in[0].data[i] : T(0);
      break;
    case Op::tanh:
      for (std::size_t i = 0; i < total; ++i) out[i] = std::tanh(in[0].data[i]);
      break;
    case Op::log:
      for (std::size_t i = 0; i < total; ++i) out[i] = std::log(in[0].data[i]);
      break;
    case Op::softmax: {
      const std::size_t cols = last_dim(out_shape);
      const std::size_t rows = total / cols;
      for (std::size_t r = 0; r < rows; ++r) {
        const T* x = in[0].data + r * cols;
        T* y = out + r * cols;
        const T m = *std::max_element(x, x + cols);
        T z = 0;
        for (std::size_t j = 0; j < cols; ++j) {
          y[j] = std::exp(x[j] - m);
          z += y[j];
        }
        for (std::size_t j = 0; j < cols; ++j) y[j] /= z;
      }
      break;
    }
    case Op::mean:
    case Op::sum: {
      const Shape& s = *in[0].shape;
      const T* x = in[0].data;
      if (attrs.axis == kAllAxes) {
        const std::size_t n = numel(s);
        T acc = 0;
        for (std::size_t i = 0; i < n; ++i) acc += x[i];
        out[0] = op == Op::mean ? acc / static_cast<T>(n) : acc;
        break;
      }
      const AxisSplit sp = split_at(s, normalize_axis(op, attrs.axis, s.size()));
      for (std::size_t o = 0; o < sp.outer; ++o) {
        for (std::size_t i = 0; i < sp.inner; ++i) {
          T acc = 0;
          for (std::size_t a = 0; a < sp.extent; ++a) acc += x[(o * sp.extent + a) * sp.inner + i];
          out[o * sp.inner + i] = op == Op::mean ? acc / static_cast<T>(sp.extent) : acc;
        }
      }
      break;
    }
    case Op::l2_norm: {
      const std::size_t cols = last_dim(*in[0].shape);
      for (std::size_t r = 0; r < total; ++r) {
        const T* x = in[0].data + r * cols;
        T acc = 0;
        for (std::size_t j = 0; j < cols; ++j) acc += x[j] * x[j];
        out[r] = std::sqrt(acc);
      }
      break;
    }
    case Op::l2_normalize: {
      const std::size_t cols = last_dim(out_shape);
      const std::size_t rows = total / cols;
      for (std::size_t r = 0; r < rows; ++r) {
        const T* x = in[0].data + r * cols;
        T* y = out + r * cols;
        T acc = 0;
        for (std::size_t j = 0; j < cols; ++j) acc += x[j] * x[j];
        const T norm = std::sqrt(acc);
        if (norm < T(kNormalizeEpsilon)) {
          std::fill(y, y + cols, T(0));
          if (degenerate) ++*degenerate;
        } else {
          for (std::size_t j = 0; j < cols; ++j) y[j] = x[j] / norm;
        }
      }
      break;
    }
    case Op::concat: {
      const std::size_t axis = normalize_axis(op, attrs.axis, out_shape.size());
      const AxisSplit so = split_at(out_shape, axis);
      const std::size_t out_row = so.extent * so.inner;
      std::size_t offset = 0;
      for (const View<T>& part : in) {
        const std::size_t chunk = (*part.shape)[axis] * so.inner;
        for (std::size_t o = 0; o < so.outer; ++o) {
          std::copy(part.data + o * chunk, part.data + (o + 1) * chunk,
                    out + o * out_row + offset);
        }
        offset += chunk;
      }
      break;
    }
    case Op::reshape:
      std::copy(in[0].data, in[0].data + total, out);
      break;
    case Op::cross_entropy: {
      const std::size_t cols = last_dim(*in[0].shape);
      for (std::size_t r = 0; r < total; ++r) {
        const T* z = in[0].data + r * cols;
        const T* t = in[1].data + r * cols;
        const T m = *std::max_element(z, z + cols);
        T acc = 0;
        for (std::size_t j = 0; j < cols; ++j) acc += std::exp(z[j] - m);
        const T lse = m + std::log(acc);
        T loss = 0;
        for (std::size_t j = 0; j < cols; ++j) loss += t[j] * (lse - z[j]);
        out[r] = loss;
      }
      break;
    }
  }
}

template void forward<float>(Op, const OpAttrs&, std::span<const View<float>>,
                             const Shape&, float*, std::vector<std::uint32_t>*,
                             std::size_t*);
template void forward<double>(Op, const OpAttrs&, std::span<const View<double>>,
                              const Shape&, double*, std::vector<std::uint32_t>*,
                              std::size_t*);

void backward(Op op, const OpAttrs& attrs, std::span<const View<float>> in,
              const Tensor& output, const float* g, std::span<float* const> gin,
              const std::vector<std::uint32_t>& saved) {
  const Shape& out_shape = output.shape();
  const float* y = output.data().data();
  const std::size_t total = output.numel();
  switch (op) {
    case Op::leaf:
      break;
    case Op::add:
    case Op::sub:
    case Op::mul: {
      const Broadcast p = plan_broadcast(op, *in[0].shape, *in[1].shape);
      const float* a = in[0].data;
      const float* b = in[1].data;
      float* ga = gin[0];
      float* gb = gin[1];
      if (op == Op::mul) {
        for_each_broadcast(p, [&](std::size_t o, std::size_t i, std::size_t j) {
          if (ga) ga[i] += g[o] * b[j];
          if (gb) gb[j] += g[o] * a[i];
        });
      } else {
        const float sign = op == Op::sub ? -1.0f : 1.0f;
        for_each_broadcast(p, [&](std::size_t o, std::size_t i, std::size_t j) {
          if (ga) ga[i] += g[o];
          if (gb) gb[j] += sign * g[o];
        });
      }
      break;
    }
    case Op::matmul: {
      const Shape& sa = *in[0].shape;
      const Shape& sb = *in[1].shape;
      const auto m = static_cast<Eigen::Index>(out_shape[0]);
      const auto n = static_cast<Eigen::Index>(out_shape[1]);
      ConstMap<float> gm(g, m, n);
      ConstMap<float> a(in[0].data, static_cast<Eigen::Index>(sa[0]), static_cast<Eigen::Index>(sa[1]));
      ConstMap<float> b(in[1].data, static_cast<Eigen::Index>(sb[0]), static_cast<Eigen::Index>(sb[1]));
      if (gin[0]) {
        MutMap<float> ga(gin[0], a.rows(), a.cols());
        if (attrs.transpose_b) {
          ga.noalias() += gm * b;
        } else {
          ga.noalias() += gm * b.transpose();
        }
      }
      if (gin[1]) {
        MutMap<float> gb(gin[1], b.rows(), b.cols());
        if (attrs.transpose_b) {
          gb.noalias() += gm.transpose() * a;
        } else {
          gb.noalias() += a.transpose() * gm;
        }
      }
      break;
    }
    case Op::conv2d: {
      const ConvGeom geo = conv_geom(*in[0].shape, *in[1].shape, attrs, out_shape);
      const auto rows = static_cast<Eigen::Index>(geo.rows());
      const auto patch = static_cast<Eigen::Index>(geo.patch());
      const auto outc = static_cast<Eigen::Index>(geo.o);
      ConstMap<float> gm(g, rows, outc);
      if (gin[1]) {
        std::vector<float> cols(geo.rows() * geo.patch());
        im2col(geo, in[0].data, cols.data());
        ConstMap<float> cm(cols.data(), rows, patch);
        MutMap<float> gw(gin[1], patch, outc);
        gw.noalias() += cm.transpose() * gm;
      }
      if (gin[0]) {
        ConstMap<float> wm(in[1].data, patch, outc);
        std::vector<float> gcols(geo.rows() * geo.patch());
        MutMap<float> gc(gcols.data(), rows, patch);
        gc.noalias() = gm * wm.transpose();
        col2im_add(geo, gcols.data(), gin[0]);
      }
      break;
    }
    case Op::max_pool2d:
      if (gin[0]) {
        for (std::size_t o = 0; o < total; ++o) gin[0][saved[o]] += g[o];
      }
      break;
    case Op::relu:
      if (gin[0]) {
        for (std::size_t i = 0; i < total; ++i) {
          if (in[0].data[i] > 0.0f) gin[0][i] += g[i];
        }
      }
      break;
    case Op::tanh:
      if (gin[0]) {
        for (std::size_t i = 0; i < total; ++i) gin[0][i] += g[i] * (1.0f - y[i] * y[i]);
      }
      break;
    case Op::log:
      if (gin[0]) {
        for (std::size_t i = 0; i < total; ++i) gin[0][i] += g[i] / in[0].data[i];
      }
      break;
    case Op::softmax:
      if (gin[0]) {
        const std::size_t cols = last_dim(out_shape);
        const std::size_t rows = total / cols;
        for (std::size_t r = 0; r < rows; ++r) {
          const float* yr = y + r * cols;
          const float* gr = g + r * cols;
          float dot = 0.0f;
          for (std::size_t j = 0; j < cols; ++j) dot += gr[j] * yr[j];
          for (std::size_t j = 0; j < cols; ++j) gin[0][r * cols + j] += yr[j] * (gr[j] - dot);
        }
      }
      break;
    case Op::mean:
    case Op::sum:
      if (gin[0]) {
        const Shape& s = *in[0].shape;
        if (attrs.axis == kAllAxes) {
          const std::size_t n = numel(s);
          const float v = op == Op::mean ? g[0] / static_cast<float>(n) : g[0];
          for (std::size_t i = 0; i < n; ++i) gin[0][i] += v;
          break;
        }
        const AxisSplit sp = split_at(s, normalize_axis(op, attrs.axis, s.size()));
        const float inv = op == Op::mean ? 1.0f / static_cast<float>(sp.extent) : 1.0f;
        for (std::size_t o = 0; o < sp.outer; ++o) {
          for (std::size_t a = 0; a < sp.extent; ++a) {
            for (std::size_t i = 0; i < sp.inner; ++i) {
              gin[0][(o * sp.extent + a) * sp.inner + i] += g[o * sp.inner + i] * inv;
            }
          }
        }
      }
      break;
    case Op::l2_norm:
      if (gin[0]) {
        const std::size_t cols = last_dim(*in[0].shape);
        for (std::size_t r = 0; r < total; ++r) {
          if (y[r] <= 0.0f) continue;
          const float scale = g[r] / y[r];
          for (std::size_t j = 0; j < cols; ++j) gin[0][r * cols + j] += scale * in[0].data[r * cols + j];
        }
      }
      break;
    case Op::l2_normalize:
      if (gin[0]) {
        const std::size_t cols = last_dim(out_shape);
        const std::size_t rows = total / cols;
        for (std::size_t r = 0; r < rows; ++r) {
          const float* x = in[0].data + r * cols;
          const float* yr = y + r * cols;
          const float* gr = g + r * cols;
          float acc = 0.0f;
          for (std::size_t j = 0; j < cols; ++j) acc += x[j] * x[j];
          const float norm = std::sqrt(acc);
          if (norm < kNormalizeEpsilon) continue;
          float dot = 0.0f;
          for (std::size_t j = 0; j < cols; ++j) dot += yr[j] * gr[j];
          for (std::size_t j = 0; j < cols; ++j) {
            gin[0][r * cols + j] += (gr[j] - yr[j] * dot) / norm;
          }
        }
      }
      break;
    case Op::concat: {
      const std::size_t axis = normalize_axis(op, attrs.axis, out_shape.size());
      const AxisSplit so = split_at(out_shape, axis);
      const std::size_t out_row = so.extent * so.inner;
      std::size_t offset = 0;
      for (std::size_t p = 0; p < in.size(); ++p) {
        const std::size_t chunk = (*in[p].shape)[axis] * so.inner;
        if (gin[p]) {
          for (std::size_t o = 0; o < so.outer; ++o) {
            const float* src = g + o * out_row + offset;
            float* dst = gin[p] + o * chunk;
            for (std::size_t j = 0; j < chunk; ++j) dst[j] += src[j];
          }
        }
        offset += chunk;
      }
      break;
    }
    case Op::reshape:
      if (gin[0]) {
        for (std::size_t i = 0; i < total; ++i) gin[0][i] += g[i];
      }
      break;
    case Op::cross_entropy: {
      const std::size_t cols = last_dim(*in[0].shape);
      std::vector<float> prob(cols);
      for (std::size_t r = 0; r < total; ++r) {
        const float* z = in[0].data + r * cols;
        const float* t = in[1].data + r * cols;
        const float m = *std::max_element(z, z + cols);
        float acc = 0.0f;
        for (std::size_t j = 0; j < cols; ++j) {
          prob[j] = std::exp(z[j] - m);
          acc += prob[j];
        }
        const float lse = m + std::log(acc);
        float mass = 0.0f;
        for (std::size_t j = 0; j < cols; ++j) {
          prob[j] /= acc;
          mass += t[j];
        }
        if (gin[0]) {
          for (std::size_t j = 0; j < cols; ++j) gin[0][r * cols + j] += g[r] * (mass * prob[j] - t[j]);
        }
        if (gin[1]) {
          for (std::size_t j = 0; j < cols; ++j) gin[1][r * cols + j] += g[r] * (lse - z[j]);
        }
      }
      break;
    }
  }
}

}  // namespace ocda::numerics::detail
