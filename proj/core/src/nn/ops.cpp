#include "xmodal/nn/ops.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <string>

#include "xmodal/errors.hpp"

namespace xmodal::nn {

namespace {

using RowMat = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<RowMat>;
using ConstMapMat = Eigen::Map<const RowMat>;

struct ConvGeom {
  int cin, h, w, k, stride, pad, ho, wo;
  [[nodiscard]] int rows() const { return cin * k * k; }
  [[nodiscard]] int cols() const { return ho * wo; }
  [[nodiscard]] bool pointwise() const { return k == 1 && stride == 1 && pad == 0; }
};

void im2col(const float* x, const ConvGeom& g, float* cols) {
  const int n_out = g.cols();
  for (int c = 0; c < g.cin; ++c) {
    const float* plane = x + static_cast<std::size_t>(c) * g.h * g.w;
    for (int ky = 0; ky < g.k; ++ky)
      for (int kx = 0; kx < g.k; ++kx) {
        float* row = cols + (static_cast<std::size_t>((c * g.k + ky) * g.k + kx)) * n_out;
        for (int oy = 0; oy < g.ho; ++oy) {
          const int iy = oy * g.stride - g.pad + ky;
          float* dst = row + static_cast<std::size_t>(oy) * g.wo;
          if (iy < 0 || iy >= g.h) {
            std::fill(dst, dst + g.wo, 0.0F);
            continue;
          }
          const float* src = plane + static_cast<std::size_t>(iy) * g.w;
          if (g.stride == 1) {
            // Contiguous run with zero fill at the borders.
            const int lo = std::max(0, g.pad - kx);
            const int hi = std::min(g.wo, g.w + g.pad - kx);
            std::fill(dst, dst + std::max(lo, 0), 0.0F);
            if (hi > lo) std::copy(src + lo - g.pad + kx, src + hi - g.pad + kx, dst + lo);
            std::fill(dst + std::max(hi, lo), dst + g.wo, 0.0F);
          } else {
            for (int ox = 0; ox < g.wo; ++ox) {
              const int ix = ox * g.stride - g.pad + kx;
              dst[ox] = (ix >= 0 && ix < g.w) ? src[ix] : 0.0F;
            }
          }
        }
      }
  }
}

void col2im(const float* cols, const ConvGeom& g, float* dx) {
  const int n_out = g.cols();
  for (int c = 0; c < g.cin; ++c) {
    float* plane = dx + static_cast<std::size_t>(c) * g.h * g.w;
    for (int ky = 0; ky < g.k; ++ky)
      for (int kx = 0; kx < g.k; ++kx) {
        const float* row = cols + (static_cast<std::size_t>((c * g.k + ky) * g.k + kx)) * n_out;
        for (int oy = 0; oy < g.ho; ++oy) {
          const int iy = oy * g.stride - g.pad + ky;
          if (iy < 0 || iy >= g.h) continue;
          const float* src = row + static_cast<std::size_t>(oy) * g.wo;
          float* dst = plane + static_cast<std::size_t>(iy) * g.w;
          for (int ox = 0; ox < g.wo; ++ox) {
            const int ix = ox * g.stride - g.pad + kx;
            if (ix >= 0 && ix < g.w) dst[ix] += src[ox];
          }
        }
      }
  }
}

template <typename F, typename D>
Tensor unary(const Tensor& x, F&& f, D&& dfdx_from_value_and_out) {
  std::vector<float> out(x.value().size());
  const auto in = x.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = f(in[i]);
  return make_result(x.shape(), std::move(out), {x}, [df = std::forward<D>(dfdx_from_value_and_out)](Node& self) {
    Node& p = *self.parents[0];
    auto& g = p.ensure_grad();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * df(p.value[i], self.value[i]);
  });
}

void require_same(const Tensor& a, const Tensor& b, const char* what) {
  if (!(a.shape() == b.shape())) {
    throw ArgumentError(std::string(what) + ": shape mismatch " + a.shape().str() + " vs " + b.shape().str());
  }
}

}  // namespace

Tensor conv2d(const Tensor& x, const Tensor& weight, const Tensor& bias, int stride, int padding) {
  const Shape xs = x.shape();
  const Shape ws = weight.shape();
  if (ws.c != xs.c || ws.h != ws.w) {
    throw ArgumentError("conv2d: weight " + ws.str() + " incompatible with input " + xs.str());
  }
  if (bias.shape().size() != static_cast<std::size_t>(ws.n)) throw ArgumentError("conv2d: bias size mismatch");
  if (stride < 1 || padding < 0) throw ArgumentError("conv2d: bad stride/padding");
  ConvGeom g{xs.c, xs.h, xs.w, ws.h, stride, padding, 0, 0};
  g.ho = (xs.h + 2 * padding - g.k) / stride + 1;
  g.wo = (xs.w + 2 * padding - g.k) / stride + 1;
  if (g.ho < 1 || g.wo < 1) throw ArgumentError("conv2d: output would be empty for input " + xs.str());
  const int cout = ws.n;
  const Shape ys{xs.n, cout, g.ho, g.wo};

  const bool keep_cols = grad_enabled() && weight.requires_grad() && !g.pointwise();
  auto saved = std::make_shared<std::vector<float>>();
  if (keep_cols) saved->resize(static_cast<std::size_t>(xs.n) * g.rows() * g.cols());
  std::vector<float> scratch(g.pointwise() || keep_cols ? 0 : static_cast<std::size_t>(g.rows()) * g.cols());

  std::vector<float> y(ys.size());
  const ConstMapMat wmat(weight.value().data(), cout, g.rows());
  const Eigen::Map<const Eigen::VectorXf> bvec(bias.value().data(), cout);
  for (int n = 0; n < xs.n; ++n) {
    const float* xn = x.value().data() + static_cast<std::size_t>(n) * xs.sample();
    const float* cols = xn;
    if (!g.pointwise()) {
      float* buf = keep_cols ? saved->data() + static_cast<std::size_t>(n) * g.rows() * g.cols() : scratch.data();
      im2col(xn, g, buf);
      cols = buf;
    }
    MapMat yn(y.data() + static_cast<std::size_t>(n) * ys.sample(), cout, g.cols());
    yn.noalias() = wmat * ConstMapMat(cols, g.rows(), g.cols());
    yn.colwise() += bvec;
  }

  return make_result(ys, std::move(y), {x, weight, bias}, [g, cout, xs, ys, saved, keep_cols](Node& self) {
    Node& xn = *self.parents[0];
    Node& wn = *self.parents[1];
    Node& bn = *self.parents[2];
    const ConstMapMat wmat(wn.value.data(), cout, g.rows());
    std::vector<float> cols_buf;
    std::vector<float> dcols(xn.requires_grad && !g.pointwise() ? static_cast<std::size_t>(g.rows()) * g.cols() : 0);
    for (int n = 0; n < xs.n; ++n) {
      const ConstMapMat dy(self.grad.data() + static_cast<std::size_t>(n) * ys.sample(), cout, g.cols());
      const float* xs_n = xn.value.data() + static_cast<std::size_t>(n) * xs.sample();
      if (bn.requires_grad) {
        // Plain loop: Eigen's reductions peel by pointer alignment, which
        // would make the summation order vary between runs.
        float* db = bn.ensure_grad().data();
        for (int o = 0; o < cout; ++o) {
          float acc = 0.0F;
          for (Eigen::Index j = 0; j < dy.cols(); ++j) acc += dy(o, j);
          db[o] += acc;
        }
      }
      if (wn.requires_grad) {
        const float* cols = xs_n;
        if (!g.pointwise()) {
          if (keep_cols) {
            cols = saved->data() + static_cast<std::size_t>(n) * g.rows() * g.cols();
          } else {
            cols_buf.resize(static_cast<std::size_t>(g.rows()) * g.cols());
            im2col(xs_n, g, cols_buf.data());
            cols = cols_buf.data();
          }
        }
        MapMat dw(wn.ensure_grad().data(), cout, g.rows());
        dw.noalias() += dy * ConstMapMat(cols, g.rows(), g.cols()).transpose();
      }
      if (xn.requires_grad) {
        float* dx = xn.ensure_grad().data() + static_cast<std::size_t>(n) * xs.sample();
        if (g.pointwise()) {
          MapMat dxm(dx, g.rows(), g.cols());
          dxm.noalias() += wmat.transpose() * dy;
        } else {
          MapMat dc(dcols.data(), g.rows(), g.cols());
          dc.noalias() = wmat.transpose() * dy;
          col2im(dcols.data(), g, dx);
        }
      }
    }
  });
}

Tensor max_pool2(const Tensor& x) {
  const Shape s = x.shape();
  if (s.h % 2 != 0 || s.w % 2 != 0) throw ArgumentError("max_pool2: odd spatial size " + s.str());
  const Shape ys{s.n, s.c, s.h / 2, s.w / 2};
  std::vector<float> y(ys.size());
  auto argmax = std::make_shared<std::vector<std::uint32_t>>(ys.size());
  const auto in = x.value();
  std::size_t o = 0;
  for (int nc = 0; nc < s.n * s.c; ++nc) {
    const std::size_t base = static_cast<std::size_t>(nc) * s.plane();
    for (int oy = 0; oy < ys.h; ++oy)
      for (int ox = 0; ox < ys.w; ++ox, ++o) {
        std::size_t best = base + static_cast<std::size_t>(2 * oy) * s.w + 2 * ox;
        for (int dy = 0; dy < 2; ++dy)
          for (int dx = 0; dx < 2; ++dx) {
            const std::size_t i = base + static_cast<std::size_t>(2 * oy + dy) * s.w + 2 * ox + dx;
            if (in[i] > in[best]) best = i;
          }
        y[o] = in[best];
        (*argmax)[o] = static_cast<std::uint32_t>(best);
      }
  }
  return make_result(ys, std::move(y), {x}, [argmax](Node& self) {
    auto& g = self.parents[0]->ensure_grad();
    for (std::size_t i = 0; i < self.grad.size(); ++i) g[(*argmax)[i]] += self.grad[i];
  });
}

Tensor upsample_nearest2(const Tensor& x) {
  const Shape s = x.shape();
  const Shape ys{s.n, s.c, s.h * 2, s.w * 2};
  std::vector<float> y(ys.size());
  const auto in = x.value();
  for (int nc = 0; nc < s.n * s.c; ++nc) {
    const float* src = in.data() + static_cast<std::size_t>(nc) * s.plane();
    float* dst = y.data() + static_cast<std::size_t>(nc) * ys.plane();
    for (int oy = 0; oy < ys.h; ++oy)
      for (int ox = 0; ox < ys.w; ++ox) dst[static_cast<std::size_t>(oy) * ys.w + ox] = src[(oy / 2) * s.w + ox / 2];
  }
  return make_result(ys, std::move(y), {x}, [s, ys](Node& self) {
    auto& g = self.parents[0]->ensure_grad();
    for (int nc = 0; nc < s.n * s.c; ++nc) {
      const float* src = self.grad.data() + static_cast<std::size_t>(nc) * ys.plane();
      float* dst = g.data() + static_cast<std::size_t>(nc) * s.plane();
      for (int oy = 0; oy < ys.h; ++oy)
        for (int ox = 0; ox < ys.w; ++ox) dst[(oy / 2) * s.w + ox / 2] += src[static_cast<std::size_t>(oy) * ys.w + ox];
    }
  });
}

Tensor relu(const Tensor& x) {
  return unary(x, [](float v) { return v > 0.0F ? v : 0.0F; },
               [](float in, float) { return in > 0.0F ? 1.0F : 0.0F; });
}

Tensor leaky_relu(const Tensor& x, float slope) {
  return unary(x, [slope](float v) { return v > 0.0F ? v : slope * v; },
               [slope](float in, float) { return in > 0.0F ? 1.0F : slope; });
}

Tensor tanh(const Tensor& x) {
  return unary(x, [](float v) { return std::tanh(v); }, [](float, float out) { return 1.0F - out * out; });
}

Tensor sigmoid(const Tensor& x) {
  return unary(x, [](float v) { return 1.0F / (1.0F + std::exp(-v)); },
               [](float, float out) { return out * (1.0F - out); });
}

Tensor add(const Tensor& a, const Tensor& b) {
  require_same(a, b, "add");
  std::vector<float> y(a.value().begin(), a.value().end());
  const auto bv = b.value();
  for (std::size_t i = 0; i < y.size(); ++i) y[i] += bv[i];
  return make_result(a.shape(), std::move(y), {a, b}, [](Node& self) {
    for (auto& p : self.parents) {
      if (!p->requires_grad) continue;
      auto& g = p->ensure_grad();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
    }
  });
}

Tensor lerp(const Tensor& a, const Tensor& b, float t) {
  require_same(a, b, "lerp");
  if (t == 1.0F) return b;
  std::vector<float> y(a.value().size());
  const auto av = a.value();
  const auto bv = b.value();
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = (1.0F - t) * av[i] + t * bv[i];
  return make_result(a.shape(), std::move(y), {a, b}, [t](Node& self) {
    const float scale[2] = {1.0F - t, t};
    for (int k = 0; k < 2; ++k) {
      auto& p = self.parents[k];
      if (!p->requires_grad) continue;
      auto& g = p->ensure_grad();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += scale[k] * self.grad[i];
    }
  });
}

Tensor concat_channels(const Tensor& a, const Tensor& b) {
  const Shape sa = a.shape();
  const Shape sb = b.shape();
  if (sa.n != sb.n || sa.h != sb.h || sa.w != sb.w) {
    throw ArgumentError("concat_channels: shape mismatch " + sa.str() + " vs " + sb.str());
  }
  const Shape ys{sa.n, sa.c + sb.c, sa.h, sa.w};
  std::vector<float> y(ys.size());
  for (int n = 0; n < sa.n; ++n) {
    auto dst = y.begin() + static_cast<std::ptrdiff_t>(n * ys.sample());
    const auto av = a.value().subspan(n * sa.sample(), sa.sample());
    const auto bv = b.value().subspan(n * sb.sample(), sb.sample());
    dst = std::copy(av.begin(), av.end(), dst);
    std::copy(bv.begin(), bv.end(), dst);
  }
  return make_result(ys, std::move(y), {a, b}, [sa, sb, ys](Node& self) {
    for (int n = 0; n < sa.n; ++n) {
      const float* src = self.grad.data() + static_cast<std::size_t>(n) * ys.sample();
      if (self.parents[0]->requires_grad) {
        float* g = self.parents[0]->ensure_grad().data() + static_cast<std::size_t>(n) * sa.sample();
        for (std::size_t i = 0; i < sa.sample(); ++i) g[i] += src[i];
      }
      if (self.parents[1]->requires_grad) {
        float* g = self.parents[1]->ensure_grad().data() + static_cast<std::size_t>(n) * sb.sample();
        for (std::size_t i = 0; i < sb.sample(); ++i) g[i] += src[sa.sample() + i];
      }
    }
  });
}

Tensor instance_norm(const Tensor& x, float eps) {
  const Shape s = x.shape();
  const std::size_t plane = s.plane();
  const int groups = s.n * s.c;
  std::vector<float> y(s.size());
  auto inv_std = std::make_shared<std::vector<float>>(groups);
  const auto in = x.value();
  for (int gidx = 0; gidx < groups; ++gidx) {
    const float* src = in.data() + static_cast<std::size_t>(gidx) * plane;
    double mean = 0.0;
    for (std::size_t i = 0; i < plane; ++i) mean += src[i];
    mean /= static_cast<double>(plane);
    double var = 0.0;
    for (std::size_t i = 0; i < plane; ++i) var += (src[i] - mean) * (src[i] - mean);
    var /= static_cast<double>(plane);
    const double is = 1.0 / std::sqrt(var + eps);
    (*inv_std)[gidx] = static_cast<float>(is);
    float* dst = y.data() + static_cast<std::size_t>(gidx) * plane;
    for (std::size_t i = 0; i < plane; ++i) dst[i] = static_cast<float>((src[i] - mean) * is);
  }
  return make_result(s, std::move(y), {x}, [inv_std, plane, groups](Node& self) {
    auto& g = self.parents[0]->ensure_grad();
    for (int gidx = 0; gidx < groups; ++gidx) {
      const std::size_t off = static_cast<std::size_t>(gidx) * plane;
      double mean_dy = 0.0;
      double mean_dy_y = 0.0;
      for (std::size_t i = 0; i < plane; ++i) {
        mean_dy += self.grad[off + i];
        mean_dy_y += static_cast<double>(self.grad[off + i]) * self.value[off + i];
      }
      mean_dy /= static_cast<double>(plane);
      mean_dy_y /= static_cast<double>(plane);
      const double is = (*inv_std)[gidx];
      for (std::size_t i = 0; i < plane; ++i) {
        g[off + i] += static_cast<float>(is * (self.grad[off + i] - mean_dy - self.value[off + i] * mean_dy_y));
      }
    }
  });
}

Tensor external_loss(const Tensor& x, const ExternalLoss& fn) {
  LossGrad lg = fn(x.value());
  if (lg.grad.size() != x.value().size()) throw ArgumentError("external_loss: gradient size mismatch");
  auto grad = std::make_shared<std::vector<double>>(std::move(lg.grad));
  return make_result(Shape{1, 1, 1, 1}, {static_cast<float>(lg.value)}, {x}, [grad](Node& self) {
    auto& g = self.parents[0]->ensure_grad();
    const double upstream = self.grad[0];
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += static_cast<float>(upstream * (*grad)[i]);
  });
}

Tensor external_loss(const Tensor& a, const Tensor& b, const ExternalPairLoss& fn) {
  PairLossGrad lg = fn(a.value(), b.value());
  if (lg.grad_a.size() != a.value().size() || lg.grad_b.size() != b.value().size()) {
    throw ArgumentError("external_loss: gradient size mismatch");
  }
  auto grads = std::make_shared<PairLossGrad>(std::move(lg));
  return make_result(Shape{1, 1, 1, 1}, {static_cast<float>(grads->value)}, {a, b}, [grads](Node& self) {
    const double upstream = self.grad[0];
    const std::vector<double>* src[2] = {&grads->grad_a, &grads->grad_b};
    for (int k = 0; k < 2; ++k) {
      if (!self.parents[k]->requires_grad) continue;
      auto& g = self.parents[k]->ensure_grad();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += static_cast<float>(upstream * (*src[k])[i]);
    }
  });
}

Tensor weighted_sum(const std::vector<Tensor>& scalars, const std::vector<double>& weights) {
  if (scalars.size() != weights.size() || scalars.empty()) throw ArgumentError("weighted_sum: size mismatch");
  double total = 0.0;
  for (std::size_t i = 0; i < scalars.size(); ++i) {
    if (scalars[i].value().size() != 1) throw ArgumentError("weighted_sum: non-scalar term");
    total += weights[i] * scalars[i].item();
  }
  return make_result(Shape{1, 1, 1, 1}, {static_cast<float>(total)}, scalars, [weights](Node& self) {
    for (std::size_t i = 0; i < self.parents.size(); ++i) {
      if (!self.parents[i]->requires_grad) continue;
      self.parents[i]->ensure_grad()[0] += static_cast<float>(weights[i] * self.grad[0]);
    }
  });
}

}  // namespace xmodal::nn
