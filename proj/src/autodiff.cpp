// SPDX-License-Identifier: Apache-2.0
#include "genpath/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <unordered_set>

#include "genpath/errors.hpp"
#include "genpath/simd/kernels.hpp"

namespace genpath::ad {

void Node::accumulate(const Tensor& g) {
  Tensor& buf = grad_buffer();
  if (buf.size() != g.size()) {
    throw ShapeError("gradient of shape " + to_string(g.shape()) + " for value " + to_string(value.shape()));
  }
  simd::kernels().axpy(1.0, g.data(), buf.data(), g.size());
}

Tensor& Node::grad_buffer() {
  if (grad.empty() && !value.empty()) grad = Tensor::zeros(value.shape());
  return grad;
}

Var constant(Tensor value) {
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  return Var(std::move(node));
}

Var parameter(Tensor value) {
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  node->requires_grad = true;
  return Var(std::move(node));
}

void backward(const Var& root, const Tensor& seed) {
  require_same_shape(root.value(), seed, "backward seed");
  if (!root.requires_grad()) return;

  // Iterative post-order DFS; reversed it is a topological order.
  std::vector<Node*> order;
  std::unordered_set<Node*> visited;
  std::vector<std::pair<Node*, std::size_t>> stack{{root.node().get(), 0}};
  visited.insert(root.node().get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      Node* parent = node->parents[next++].get();
      if (parent->requires_grad && visited.insert(parent).second) stack.emplace_back(parent, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  root.node()->accumulate(seed);
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* node = *it;
    if (node->backward && !node->grad.empty()) node->backward(*node);
  }
}

void backward(const Var& root) {
  if (root.value().size() != 1) throw ShapeError("scalar backward on shape " + to_string(root.shape()));
  backward(root, Tensor::ones(root.shape()));
}

namespace {

bool any_requires_grad(std::initializer_list<const Var*> vars) {
  for (const Var* v : vars) {
    if (v && *v && v->requires_grad()) return true;
  }
  return false;
}

// Creates the result node; attaches parents and the closure only when some
// input needs a gradient.
Var make_result(Tensor value, std::initializer_list<const Var*> inputs, std::function<void(Node&)> fn) {
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  if (any_requires_grad(inputs)) {
    node->requires_grad = true;
    for (const Var* v : inputs) {
      if (v && *v) node->parents.push_back(v->node());
    }
    node->backward = std::move(fn);
  }
  return Var(std::move(node));
}

void require_rank(const Var& v, std::size_t rank, const char* what) {
  if (v.value().rank() != rank) {
    throw ShapeError(std::string(what) + " expects rank " + std::to_string(rank) + ", got " + to_string(v.shape()));
  }
}

// Geometry of a strided, zero-padded sliding window over an image of
// (channels, height, width).
struct Window {
  std::size_t channels, height, width;
  std::size_t kh, kw, stride, pad;
  std::size_t out_h, out_w;

  std::size_t patch() const { return channels * kh * kw; }
  std::size_t positions() const { return out_h * out_w; }
};

Window make_window(std::size_t c, std::size_t h, std::size_t w, std::size_t kh, std::size_t kw,
                   Conv2dOptions opt) {
  if (opt.stride == 0) throw ShapeError("convolution stride must be positive");
  if (h + 2 * opt.pad < kh || w + 2 * opt.pad < kw) {
    throw ShapeError("kernel " + std::to_string(kh) + "x" + std::to_string(kw) + " larger than padded input " +
                     std::to_string(h) + "x" + std::to_string(w));
  }
  return Window{c, h, w, kh, kw, opt.stride, opt.pad,
                (h + 2 * opt.pad - kh) / opt.stride + 1, (w + 2 * opt.pad - kw) / opt.stride + 1};
}

// cols[(oy * out_w + ox) * patch + (c * kh + ky) * kw + kx] = img[c][oy*s-p+ky][ox*s-p+kx]
void im2col(const double* img, const Window& g, double* cols) {
  const std::size_t patch = g.patch();
  for (std::size_t oy = 0; oy < g.out_h; ++oy) {
    for (std::size_t ox = 0; ox < g.out_w; ++ox) {
      double* row = cols + (oy * g.out_w + ox) * patch;
      for (std::size_t c = 0; c < g.channels; ++c) {
        for (std::size_t ky = 0; ky < g.kh; ++ky) {
          const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy * g.stride + ky) - static_cast<std::ptrdiff_t>(g.pad);
          for (std::size_t kx = 0; kx < g.kw; ++kx) {
            const std::ptrdiff_t ix =
                static_cast<std::ptrdiff_t>(ox * g.stride + kx) - static_cast<std::ptrdiff_t>(g.pad);
            const bool inside = iy >= 0 && ix >= 0 && iy < static_cast<std::ptrdiff_t>(g.height) &&
                                ix < static_cast<std::ptrdiff_t>(g.width);
            *row++ = inside ? img[(c * g.height + static_cast<std::size_t>(iy)) * g.width + static_cast<std::size_t>(ix)]
                            : 0.0;
          }
        }
      }
    }
  }
}

// Adjoint of im2col: scatters-and-adds columns back into the image.
void col2im_add(const double* cols, const Window& g, double* img) {
  const std::size_t patch = g.patch();
  for (std::size_t oy = 0; oy < g.out_h; ++oy) {
    for (std::size_t ox = 0; ox < g.out_w; ++ox) {
      const double* row = cols + (oy * g.out_w + ox) * patch;
      for (std::size_t c = 0; c < g.channels; ++c) {
        for (std::size_t ky = 0; ky < g.kh; ++ky) {
          const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy * g.stride + ky) - static_cast<std::ptrdiff_t>(g.pad);
          for (std::size_t kx = 0; kx < g.kw; ++kx, ++row) {
            const std::ptrdiff_t ix =
                static_cast<std::ptrdiff_t>(ox * g.stride + kx) - static_cast<std::ptrdiff_t>(g.pad);
            if (iy >= 0 && ix >= 0 && iy < static_cast<std::ptrdiff_t>(g.height) &&
                ix < static_cast<std::ptrdiff_t>(g.width)) {
              img[(c * g.height + static_cast<std::size_t>(iy)) * g.width + static_cast<std::size_t>(ix)] += *row;
            }
          }
        }
      }
    }
  }
}

}  // namespace

Var conv2d(const Var& x, const Var& weight, const Var& bias, Conv2dOptions options) {
  require_rank(x, 4, "conv2d input");
  require_rank(weight, 4, "conv2d weight");
  const Shape& xs = x.shape();
  const Shape& ws = weight.shape();
  if (ws[1] != xs[1]) {
    throw ShapeError("conv2d: weight " + to_string(ws) + " does not match input channels of " + to_string(xs));
  }
  if (bias && bias.value().size() != ws[0]) throw ShapeError("conv2d: bias size mismatch");

  const Window g = make_window(xs[1], xs[2], xs[3], ws[2], ws[3], options);
  const std::size_t n = xs[0], co = ws[0], patch = g.patch(), pos = g.positions();
  const auto& k = simd::kernels();

  Tensor out({n, co, g.out_h, g.out_w});
  std::vector<double> cols(pos * patch);
  for (std::size_t b = 0; b < n; ++b) {
    im2col(x.value().data() + b * xs[1] * xs[2] * xs[3], g, cols.data());
    for (std::size_t o = 0; o < co; ++o) {
      const double* wrow = weight.value().data() + o * patch;
      double* dst = out.data() + (b * co + o) * pos;
      const double shift = bias ? bias.value()[o] : 0.0;
      for (std::size_t p = 0; p < pos; ++p) dst[p] = k.dot(wrow, cols.data() + p * patch, patch) + shift;
    }
  }

  return make_result(std::move(out), {&x, &weight, &bias}, [x, weight, bias, g, n, co, patch, pos](Node& self) {
    const auto& k = simd::kernels();
    const Shape& xs = x.shape();
    const std::size_t img_size = xs[1] * xs[2] * xs[3];
    std::vector<double> cols(pos * patch);
    std::vector<double> dcols(pos * patch);
    Tensor* dw = weight.requires_grad() ? &weight.node()->grad_buffer() : nullptr;
    Tensor* dx = x.requires_grad() ? &x.node()->grad_buffer() : nullptr;
    Tensor* db = bias && bias.requires_grad() ? &bias.node()->grad_buffer() : nullptr;
    for (std::size_t b = 0; b < n; ++b) {
      const double* gout = self.grad.data() + b * co * pos;
      if (dw) im2col(x.value().data() + b * img_size, g, cols.data());
      if (dx) std::fill(dcols.begin(), dcols.end(), 0.0);
      for (std::size_t o = 0; o < co; ++o) {
        const double* wrow = weight.value().data() + o * patch;
        const double* go = gout + o * pos;
        for (std::size_t p = 0; p < pos; ++p) {
          if (go[p] == 0.0) continue;
          if (dw) k.axpy(go[p], cols.data() + p * patch, dw->data() + o * patch, patch);
          if (dx) k.axpy(go[p], wrow, dcols.data() + p * patch, patch);
        }
        if (db) {
          double s = 0.0;
          for (std::size_t p = 0; p < pos; ++p) s += go[p];
          (*db)[o] += s;
        }
      }
      if (dx) col2im_add(dcols.data(), g, dx->data() + b * img_size);
    }
  });
}

Var conv_transpose2d(const Var& x, const Var& weight, const Var& bias, Conv2dOptions options) {
  require_rank(x, 4, "conv_transpose2d input");
  require_rank(weight, 4, "conv_transpose2d weight");
  const Shape& xs = x.shape();
  const Shape& ws = weight.shape();
  if (ws[0] != xs[1]) {
    throw ShapeError("conv_transpose2d: weight " + to_string(ws) + " does not match input " + to_string(xs));
  }
  if (options.stride == 0) throw ShapeError("convolution stride must be positive");
  const std::size_t ci = ws[0], co = ws[1], kh = ws[2], kw = ws[3];
  if (bias && bias.value().size() != co) throw ShapeError("conv_transpose2d: bias size mismatch");
  const std::ptrdiff_t oh_signed = static_cast<std::ptrdiff_t>((xs[2] - 1) * options.stride + kh) -
                                   static_cast<std::ptrdiff_t>(2 * options.pad);
  const std::ptrdiff_t ow_signed = static_cast<std::ptrdiff_t>((xs[3] - 1) * options.stride + kw) -
                                   static_cast<std::ptrdiff_t>(2 * options.pad);
  if (oh_signed <= 0 || ow_signed <= 0) throw ShapeError("conv_transpose2d: padding leaves empty output");
  const std::size_t oh = static_cast<std::size_t>(oh_signed), ow = static_cast<std::size_t>(ow_signed);

  // The output image is the "input" side of the adjoint convolution window.
  const Window g = make_window(co, oh, ow, kh, kw, options);
  if (g.out_h != xs[2] || g.out_w != xs[3]) throw ShapeError("conv_transpose2d: inconsistent geometry");
  const std::size_t n = xs[0], patch = g.patch(), pos = g.positions(), out_size = co * oh * ow;
  const auto& k = simd::kernels();

  Tensor out({n, co, oh, ow});
  std::vector<double> cols(pos * patch);
  for (std::size_t b = 0; b < n; ++b) {
    std::fill(cols.begin(), cols.end(), 0.0);
    const double* xin = x.value().data() + b * ci * pos;
    for (std::size_t c = 0; c < ci; ++c) {
      const double* wrow = weight.value().data() + c * patch;
      for (std::size_t p = 0; p < pos; ++p) {
        if (xin[c * pos + p] != 0.0) k.axpy(xin[c * pos + p], wrow, cols.data() + p * patch, patch);
      }
    }
    double* dst = out.data() + b * out_size;
    col2im_add(cols.data(), g, dst);
    if (bias) {
      for (std::size_t o = 0; o < co; ++o) {
        for (std::size_t i = 0; i < oh * ow; ++i) dst[o * oh * ow + i] += bias.value()[o];
      }
    }
  }

  return make_result(std::move(out), {&x, &weight, &bias},
                     [x, weight, bias, g, n, ci, co, patch, pos, out_size](Node& self) {
                       const auto& k = simd::kernels();
                       std::vector<double> gcols(pos * patch);
                       Tensor* dw = weight.requires_grad() ? &weight.node()->grad_buffer() : nullptr;
                       Tensor* dx = x.requires_grad() ? &x.node()->grad_buffer() : nullptr;
                       Tensor* db = bias && bias.requires_grad() ? &bias.node()->grad_buffer() : nullptr;
                       const std::size_t plane = g.height * g.width;
                       for (std::size_t b = 0; b < n; ++b) {
                         const double* gout = self.grad.data() + b * out_size;
                         im2col(gout, g, gcols.data());
                         const double* xin = x.value().data() + b * ci * pos;
                         for (std::size_t c = 0; c < ci; ++c) {
                           const double* wrow = weight.value().data() + c * patch;
                           for (std::size_t p = 0; p < pos; ++p) {
                             const double* gc = gcols.data() + p * patch;
                             if (dx) dx->data()[(b * ci + c) * pos + p] += k.dot(wrow, gc, patch);
                             if (dw && xin[c * pos + p] != 0.0) k.axpy(xin[c * pos + p], gc, dw->data() + c * patch, patch);
                           }
                         }
                         if (db) {
                           for (std::size_t o = 0; o < co; ++o) {
                             double s = 0.0;
                             for (std::size_t i = 0; i < plane; ++i) s += gout[o * plane + i];
                             (*db)[o] += s;
                           }
                         }
                       }
                     });
}

Var max_pool2d(const Var& x, std::size_t kernel, std::size_t stride) {
  require_rank(x, 4, "max_pool2d input");
  const Shape& xs = x.shape();
  if (kernel == 0 || stride == 0 || xs[2] < kernel || xs[3] < kernel) {
    throw ShapeError("max_pool2d: kernel " + std::to_string(kernel) + " on " + to_string(xs));
  }
  const std::size_t oh = (xs[2] - kernel) / stride + 1, ow = (xs[3] - kernel) / stride + 1;
  const std::size_t planes = xs[0] * xs[1];
  Tensor out({xs[0], xs[1], oh, ow});
  std::vector<std::size_t> argmax(out.size());
  for (std::size_t p = 0; p < planes; ++p) {
    const double* src = x.value().data() + p * xs[2] * xs[3];
    for (std::size_t oy = 0; oy < oh; ++oy) {
      for (std::size_t ox = 0; ox < ow; ++ox) {
        std::size_t best = (oy * stride) * xs[3] + ox * stride;
        for (std::size_t ky = 0; ky < kernel; ++ky) {
          for (std::size_t kx = 0; kx < kernel; ++kx) {
            const std::size_t idx = (oy * stride + ky) * xs[3] + ox * stride + kx;
            if (src[idx] > src[best]) best = idx;
          }
        }
        const std::size_t o = (p * oh + oy) * ow + ox;
        out[o] = src[best];
        argmax[o] = p * xs[2] * xs[3] + best;
      }
    }
  }
  return make_result(std::move(out), {&x}, [x, argmax = std::move(argmax)](Node& self) {
    Tensor& dx = x.node()->grad_buffer();
    for (std::size_t o = 0; o < argmax.size(); ++o) dx[argmax[o]] += self.grad[o];
  });
}

Var relu(const Var& x) {
  Tensor out(x.shape());
  simd::kernels().relu(x.value().data(), out.data(), out.size());
  return make_result(std::move(out), {&x}, [x](Node& self) {
    Tensor g(self.grad.shape());
    simd::kernels().relu_backward(x.value().data(), self.grad.data(), g.data(), g.size());
    x.node()->accumulate(g);
  });
}

Var mul(const Var& x, const Var& y) {
  require_same_shape(x.value(), y.value(), "mul");
  Tensor out(x.shape());
  simd::kernels().mul(x.value().data(), y.value().data(), out.data(), out.size());
  return make_result(std::move(out), {&x, &y}, [x, y](Node& self) {
    const auto& k = simd::kernels();
    if (x.requires_grad()) k.mul_acc(self.grad.data(), y.value().data(), x.node()->grad_buffer().data(), self.grad.size());
    if (y.requires_grad()) k.mul_acc(self.grad.data(), x.value().data(), y.node()->grad_buffer().data(), self.grad.size());
  });
}

Var add(const Var& x, const Var& y) {
  require_same_shape(x.value(), y.value(), "add");
  Tensor out = x.value();
  simd::kernels().axpy(1.0, y.value().data(), out.data(), out.size());
  return make_result(std::move(out), {&x, &y}, [x, y](Node& self) {
    if (x.requires_grad()) x.node()->accumulate(self.grad);
    if (y.requires_grad()) y.node()->accumulate(self.grad);
  });
}

Var scale(const Var& x, double factor) {
  Tensor out = x.value();
  for (double& v : out.values()) v *= factor;
  return make_result(std::move(out), {&x}, [x, factor](Node& self) {
    simd::kernels().axpy(factor, self.grad.data(), x.node()->grad_buffer().data(), self.grad.size());
  });
}

Var reshape(const Var& x, Shape shape) {
  Tensor out = x.value().reshaped(std::move(shape));
  return make_result(std::move(out), {&x}, [x](Node& self) {
    simd::kernels().axpy(1.0, self.grad.data(), x.node()->grad_buffer().data(), self.grad.size());
  });
}

Var concat_features(const std::vector<Var>& parts) {
  if (parts.empty()) throw ShapeError("concat_features of nothing");
  const std::size_t n = parts[0].shape().at(0);
  std::vector<std::size_t> widths;
  std::size_t total = 0;
  for (const Var& p : parts) {
    require_rank(p, 2, "concat_features part");
    if (p.shape()[0] != n) throw ShapeError("concat_features: batch sizes differ");
    widths.push_back(p.shape()[1]);
    total += p.shape()[1];
  }
  Tensor out({n, total});
  for (std::size_t b = 0; b < n; ++b) {
    std::size_t off = 0;
    for (std::size_t i = 0; i < parts.size(); ++i) {
      const double* src = parts[i].value().data() + b * widths[i];
      std::copy(src, src + widths[i], out.data() + b * total + off);
      off += widths[i];
    }
  }
  auto node = std::make_shared<Node>();
  node->value = std::move(out);
  bool needs = false;
  for (const Var& p : parts) needs = needs || p.requires_grad();
  if (needs) {
    node->requires_grad = true;
    for (const Var& p : parts) node->parents.push_back(p.node());
    node->backward = [parts, widths, n, total](Node& self) {
      std::size_t off = 0;
      for (std::size_t i = 0; i < parts.size(); ++i) {
        if (parts[i].requires_grad()) {
          Tensor& g = parts[i].node()->grad_buffer();
          for (std::size_t b = 0; b < n; ++b) {
            for (std::size_t j = 0; j < widths[i]; ++j) g[b * widths[i] + j] += self.grad[b * total + off + j];
          }
        }
        off += widths[i];
      }
    };
  }
  return Var(std::move(node));
}

Var slice_features(const Var& x, std::size_t offset, std::size_t count) {
  require_rank(x, 2, "slice_features input");
  const std::size_t n = x.shape()[0], width = x.shape()[1];
  if (offset + count > width) throw ShapeError("slice_features: range exceeds " + to_string(x.shape()));
  Tensor out({n, count});
  for (std::size_t b = 0; b < n; ++b) {
    const double* src = x.value().data() + b * width + offset;
    std::copy(src, src + count, out.data() + b * count);
  }
  return make_result(std::move(out), {&x}, [x, n, width, offset, count](Node& self) {
    Tensor& g = x.node()->grad_buffer();
    for (std::size_t b = 0; b < n; ++b) {
      for (std::size_t j = 0; j < count; ++j) g[b * width + offset + j] += self.grad[b * count + j];
    }
  });
}

Var linear(const Var& x, const Var& weight, const Var& bias) {
  require_rank(x, 2, "linear input");
  require_rank(weight, 2, "linear weight");
  const std::size_t n = x.shape()[0], in = x.shape()[1], outf = weight.shape()[0];
  if (weight.shape()[1] != in) {
    throw ShapeError("linear: weight " + to_string(weight.shape()) + " vs input " + to_string(x.shape()));
  }
  if (bias && bias.value().size() != outf) throw ShapeError("linear: bias size mismatch");
  const auto& k = simd::kernels();
  Tensor out({n, outf});
  for (std::size_t b = 0; b < n; ++b) {
    const double* xin = x.value().data() + b * in;
    for (std::size_t o = 0; o < outf; ++o) {
      out[b * outf + o] = k.dot(weight.value().data() + o * in, xin, in) + (bias ? bias.value()[o] : 0.0);
    }
  }
  return make_result(std::move(out), {&x, &weight, &bias}, [x, weight, bias, n, in, outf](Node& self) {
    const auto& k = simd::kernels();
    Tensor* dx = x.requires_grad() ? &x.node()->grad_buffer() : nullptr;
    Tensor* dw = weight.requires_grad() ? &weight.node()->grad_buffer() : nullptr;
    Tensor* db = bias && bias.requires_grad() ? &bias.node()->grad_buffer() : nullptr;
    for (std::size_t b = 0; b < n; ++b) {
      const double* xin = x.value().data() + b * in;
      for (std::size_t o = 0; o < outf; ++o) {
        const double go = self.grad[b * outf + o];
        if (go == 0.0) continue;
        if (dx) k.axpy(go, weight.value().data() + o * in, dx->data() + b * in, in);
        if (dw) k.axpy(go, xin, dw->data() + o * in, in);
        if (db) (*db)[o] += go;
      }
    }
  });
}

Var channel_affine(const Var& x, const Var& scale_v, const Var& shift_v) {
  require_rank(x, 4, "channel_affine input");
  const Shape& xs = x.shape();
  if (scale_v.value().size() != xs[1] || shift_v.value().size() != xs[1]) {
    throw ShapeError("channel_affine: per-channel parameters do not match " + to_string(xs));
  }
  const std::size_t plane = xs[2] * xs[3];
  Tensor out(xs);
  for (std::size_t b = 0; b < xs[0]; ++b) {
    for (std::size_t c = 0; c < xs[1]; ++c) {
      const double s = scale_v.value()[c], t = shift_v.value()[c];
      const double* src = x.value().data() + (b * xs[1] + c) * plane;
      double* dst = out.data() + (b * xs[1] + c) * plane;
      for (std::size_t i = 0; i < plane; ++i) dst[i] = src[i] * s + t;
    }
  }
  return make_result(std::move(out), {&x, &scale_v, &shift_v}, [x, scale_v, shift_v, plane](Node& self) {
    const Shape& xs = x.shape();
    Tensor* dx = x.requires_grad() ? &x.node()->grad_buffer() : nullptr;
    Tensor* ds = scale_v.requires_grad() ? &scale_v.node()->grad_buffer() : nullptr;
    Tensor* dt = shift_v.requires_grad() ? &shift_v.node()->grad_buffer() : nullptr;
    const auto& k = simd::kernels();
    for (std::size_t b = 0; b < xs[0]; ++b) {
      for (std::size_t c = 0; c < xs[1]; ++c) {
        const std::size_t off = (b * xs[1] + c) * plane;
        const double* g = self.grad.data() + off;
        if (dx) k.axpy(scale_v.value()[c], g, dx->data() + off, plane);
        if (ds) (*ds)[c] += k.dot(g, x.value().data() + off, plane);
        if (dt) {
          double s = 0.0;
          for (std::size_t i = 0; i < plane; ++i) s += g[i];
          (*dt)[c] += s;
        }
      }
    }
  });
}

Var batch_norm(const Var& x, const Var& gamma, const Var& beta, double eps, BatchStats* stats) {
  require_rank(x, 4, "batch_norm input");
  const Shape& xs = x.shape();
  const std::size_t n = xs[0], c = xs[1], plane = xs[2] * xs[3], count = n * plane;
  if (gamma.value().size() != c || beta.value().size() != c) {
    throw ShapeError("batch_norm: per-channel parameters do not match " + to_string(xs));
  }
  Tensor mean({c}), var({c}), inv_std({c});
  Tensor xhat(xs);
  for (std::size_t ch = 0; ch < c; ++ch) {
    double s = 0.0;
    for (std::size_t b = 0; b < n; ++b) {
      const double* src = x.value().data() + (b * c + ch) * plane;
      for (std::size_t i = 0; i < plane; ++i) s += src[i];
    }
    const double m = s / static_cast<double>(count);
    double v = 0.0;
    for (std::size_t b = 0; b < n; ++b) {
      const double* src = x.value().data() + (b * c + ch) * plane;
      for (std::size_t i = 0; i < plane; ++i) v += (src[i] - m) * (src[i] - m);
    }
    v /= static_cast<double>(count);
    mean[ch] = m;
    var[ch] = v;
    inv_std[ch] = 1.0 / std::sqrt(v + eps);
    for (std::size_t b = 0; b < n; ++b) {
      const double* src = x.value().data() + (b * c + ch) * plane;
      double* dst = xhat.data() + (b * c + ch) * plane;
      for (std::size_t i = 0; i < plane; ++i) dst[i] = (src[i] - m) * inv_std[ch];
    }
  }
  if (stats) *stats = BatchStats{mean, var};

  Tensor out(xs);
  for (std::size_t b = 0; b < n; ++b) {
    for (std::size_t ch = 0; ch < c; ++ch) {
      const double* src = xhat.data() + (b * c + ch) * plane;
      double* dst = out.data() + (b * c + ch) * plane;
      for (std::size_t i = 0; i < plane; ++i) dst[i] = src[i] * gamma.value()[ch] + beta.value()[ch];
    }
  }

  return make_result(std::move(out), {&x, &gamma, &beta},
                     [x, gamma, beta, xhat = std::move(xhat), inv_std, n, c, plane, count](Node& self) {
                       Tensor* dx = x.requires_grad() ? &x.node()->grad_buffer() : nullptr;
                       Tensor* dg = gamma.requires_grad() ? &gamma.node()->grad_buffer() : nullptr;
                       Tensor* dbeta = beta.requires_grad() ? &beta.node()->grad_buffer() : nullptr;
                       const double m = static_cast<double>(count);
                       for (std::size_t ch = 0; ch < c; ++ch) {
                         double sum_g = 0.0, sum_gx = 0.0;
                         for (std::size_t b = 0; b < n; ++b) {
                           const std::size_t off = (b * c + ch) * plane;
                           for (std::size_t i = 0; i < plane; ++i) {
                             sum_g += self.grad[off + i];
                             sum_gx += self.grad[off + i] * xhat[off + i];
                           }
                         }
                         if (dg) (*dg)[ch] += sum_gx;
                         if (dbeta) (*dbeta)[ch] += sum_g;
                         if (!dx) continue;
                         const double gm = gamma.value()[ch];
                         const double k = gm * inv_std[ch] / m;
                         for (std::size_t b = 0; b < n; ++b) {
                           const std::size_t off = (b * c + ch) * plane;
                           for (std::size_t i = 0; i < plane; ++i) {
                             (*dx)[off + i] += k * (m * self.grad[off + i] - sum_g - xhat[off + i] * sum_gx);
                           }
                         }
                       }
                     });
}

Var sum_squares(const Var& x) {
  Tensor out({1}, {simd::kernels().sum_squares(x.value().data(), x.value().size())});
  return make_result(std::move(out), {&x}, [x](Node& self) {
    simd::kernels().axpy(2.0 * self.grad[0], x.value().data(), x.node()->grad_buffer().data(), x.value().size());
  });
}

Var sum(const Var& x) {
  double s = 0.0;
  for (double v : x.value().values()) s += v;
  Tensor out({1}, {s});
  return make_result(std::move(out), {&x}, [x](Node& self) {
    Tensor& dx = x.node()->grad_buffer();
    for (double& v : dx.values()) v += self.grad[0];
  });
}

Var soft_cross_entropy(const Var& logits, const Tensor& target_probs, double floor) {
  require_rank(logits, 2, "soft_cross_entropy logits");
  require_same_shape(logits.value(), target_probs, "soft_cross_entropy");
  const std::size_t n = logits.shape()[0], classes = logits.shape()[1];
  const double log_floor = std::log(floor);
  Tensor q(logits.shape());
  std::vector<char> active(logits.value().size());
  double total = 0.0;
  for (std::size_t b = 0; b < n; ++b) {
    const double* z = logits.value().data() + b * classes;
    const double zmax = *std::max_element(z, z + classes);
    double se = 0.0;
    for (std::size_t c = 0; c < classes; ++c) se += std::exp(z[c] - zmax);
    const double lse = zmax + std::log(se);
    for (std::size_t c = 0; c < classes; ++c) {
      const double logq = z[c] - lse;
      q[b * classes + c] = std::exp(logq);
      active[b * classes + c] = logq > log_floor;
      total -= target_probs[b * classes + c] * std::max(logq, log_floor);
    }
  }
  Tensor out({1}, {total / static_cast<double>(n)});
  return make_result(std::move(out), {&logits},
                     [logits, target_probs, q = std::move(q), active = std::move(active), n, classes](Node& self) {
                       Tensor& dz = logits.node()->grad_buffer();
                       const double scale_g = self.grad[0] / static_cast<double>(n);
                       for (std::size_t b = 0; b < n; ++b) {
                         double active_mass = 0.0;
                         for (std::size_t c = 0; c < classes; ++c) {
                           if (active[b * classes + c]) active_mass += target_probs[b * classes + c];
                         }
                         for (std::size_t c = 0; c < classes; ++c) {
                           const std::size_t i = b * classes + c;
                           const double own = active[i] ? target_probs[i] : 0.0;
                           dz[i] += scale_g * (q[i] * active_mass - own);
                         }
                       }
                     });
}

Var soft_quantize(const Var& x, const QuantizerConfig& config) {
  config.validate();
  Tensor out(x.shape());
  Tensor deriv(x.shape());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const SoftQuantized q = soft_quantize_value(x.value()[i], config);
    out[i] = q.value;
    deriv[i] = q.derivative;
  }
  return make_result(std::move(out), {&x}, [x, deriv = std::move(deriv)](Node& self) {
    simd::kernels().mul_acc(self.grad.data(), deriv.data(), x.node()->grad_buffer().data(), deriv.size());
  });
}

}  // namespace genpath::ad
