#include "xmodal/losses.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace xmodal {

namespace {

// numpy-style "reflect" index (edge sample not repeated).
int reflect(int i, int n) {
  if (n == 1) return 0;
  const int period = 2 * (n - 1);
  i %= period;
  if (i < 0) i += period;
  return i < n ? i : period - i;
}

struct Window {
  int half = 0;
  int side = 0;
  std::vector<double> weights;  // side*side, row-major, sums to 1
};

Window make_window(const SsimConfig& cfg) {
  Window w;
  w.side = cfg.window;
  w.half = cfg.window / 2;
  w.weights.assign(static_cast<std::size_t>(w.side) * w.side, 1.0);
  if (cfg.gaussian) {
    const double s2 = 2.0 * cfg.gaussian_sigma * cfg.gaussian_sigma;
    for (int dy = -w.half; dy <= w.half; ++dy)
      for (int dx = -w.half; dx <= w.half; ++dx)
        w.weights[static_cast<std::size_t>(dy + w.half) * w.side + (dx + w.half)] = std::exp(-(dy * dy + dx * dx) / s2);
  }
  double total = 0.0;
  for (double v : w.weights) total += v;
  for (double& v : w.weights) v /= total;
  return w;
}

void check_pair(const Image& x, const Image& y, const SsimConfig& cfg) {
  cfg.validate();
  if (!x.same_shape(y)) throw ArgumentError("ssim: image shapes differ");
  if (x.height < 1 || x.width < 1) throw ArgumentError("ssim: empty image");
  if (cfg.window > x.height || cfg.window > x.width) {
    throw ArgumentError("ssim: window " + std::to_string(cfg.window) + " larger than image " +
                        std::to_string(x.height) + "x" + std::to_string(x.width));
  }
}

/// Weighted local moments at every pixel.
struct Moments {
  std::vector<double> mx, my, exx, eyy, exy;
};

class WindowOp {
 public:
  WindowOp(int h, int w, const SsimConfig& cfg) : h_(h), w_(w), win_(make_window(cfg)) {
    rows_.resize(static_cast<std::size_t>(h) + 2 * win_.half);
    cols_.resize(static_cast<std::size_t>(w) + 2 * win_.half);
    for (int i = -win_.half; i < h + win_.half; ++i) rows_[i + win_.half] = reflect(i, h);
    for (int i = -win_.half; i < w + win_.half; ++i) cols_[i + win_.half] = reflect(i, w);
  }

  /// Visit (weight, source index) for every tap of the window centred at (py, px).
  template <typename F>
  void for_taps(int py, int px, F&& f) const {
    const double* wt = win_.weights.data();
    for (int dy = 0; dy < win_.side; ++dy) {
      const std::size_t row = static_cast<std::size_t>(rows_[py + dy]) * w_;
      for (int dx = 0; dx < win_.side; ++dx) f(*wt++, row + cols_[px + dx]);
    }
  }

  Moments moments(const Image& x, const Image& y) const {
    const std::size_t n = x.size();
    Moments m{std::vector<double>(n), std::vector<double>(n), std::vector<double>(n), std::vector<double>(n),
              std::vector<double>(n)};
    for (int py = 0; py < h_; ++py)
      for (int px = 0; px < w_; ++px) {
        double sx = 0, sy = 0, sxx = 0, syy = 0, sxy = 0;
        for_taps(py, px, [&](double wt, std::size_t q) {
          const double a = x.data[q];
          const double b = y.data[q];
          sx += wt * a;
          sy += wt * b;
          sxx += wt * a * a;
          syy += wt * b * b;
          sxy += wt * a * b;
        });
        const std::size_t p = static_cast<std::size_t>(py) * w_ + px;
        m.mx[p] = sx;
        m.my[p] = sy;
        m.exx[p] = sxx;
        m.eyy[p] = syy;
        m.exy[p] = sxy;
      }
    return m;
  }

  /// Adjoint of the windowed average: out[q] += sum_p weight(p, q) * g[p].
  void adjoint(const std::vector<double>& g, std::vector<double>& out) const {
    for (int py = 0; py < h_; ++py)
      for (int px = 0; px < w_; ++px) {
        const double gp = g[static_cast<std::size_t>(py) * w_ + px];
        for_taps(py, px, [&](double wt, std::size_t q) { out[q] += wt * gp; });
      }
  }

 private:
  int h_;
  int w_;
  Window win_;
  std::vector<int> rows_;
  std::vector<int> cols_;
};

void check_batches(std::span<const double> a, const char* what) {
  if (a.empty()) throw ArgumentError(std::string(what) + ": empty batch");
}

}  // namespace

SsimConfig SsimConfig::for_range(double dynamic_range, int window) {
  SsimConfig c;
  c.window = window;
  c.dynamic_range = dynamic_range;
  c.c1 = (0.01 * dynamic_range) * (0.01 * dynamic_range);
  c.c2 = (0.03 * dynamic_range) * (0.03 * dynamic_range);
  return c;
}

void SsimConfig::validate() const {
  if (window < 3 || window % 2 == 0) throw ArgumentError("ssim window must be odd and >= 3");
  if (!(c1 > 0.0) || !(c2 > 0.0)) throw ArgumentError("ssim constants c1, c2 must be positive");
  if (!(dynamic_range > 0.0)) throw ArgumentError("ssim dynamic range must be positive");
  if (gaussian && !(gaussian_sigma > 0.0)) throw ArgumentError("gaussian_sigma must be positive");
}

Image ssim_map(const Image& x, const Image& y, const SsimConfig& cfg) {
  check_pair(x, y, cfg);
  const WindowOp op(x.height, x.width, cfg);
  const Moments m = op.moments(x, y);
  Image out(x.height, x.width);
  for (std::size_t p = 0; p < x.size(); ++p) {
    const double mx = m.mx[p];
    const double my = m.my[p];
    const double vx = m.exx[p] - mx * mx;
    const double vy = m.eyy[p] - my * my;
    const double cxy = m.exy[p] - mx * my;
    const double lum = (2.0 * mx * my + cfg.c1) / (mx * mx + my * my + cfg.c1);
    const double cs = (2.0 * cxy + cfg.c2) / (vx + vy + cfg.c2);
    out.data[p] = lum * cs;
  }
  return out;
}

double ssim_loss(const Image& x, const Image& y, const SsimConfig& cfg) {
  const Image s = ssim_map(x, y, cfg);
  double total = 0.0;
  for (double v : s.data) total += 1.0 - v;
  return total / static_cast<double>(s.size());
}

LossGrad ssim_loss_grad(const Image& x, const Image& y, const SsimConfig& cfg) {
  check_pair(x, y, cfg);
  const WindowOp op(x.height, x.width, cfg);
  const Moments m = op.moments(x, y);
  const std::size_t n = x.size();
  const double inv_n = 1.0 / static_cast<double>(n);

  // Partial derivatives of -SSIM(p)/N with respect to the local moments of x.
  std::vector<double> d_mx(n), d_exx(n), d_exy(n);
  double total = 0.0;
  for (std::size_t p = 0; p < n; ++p) {
    const double mx = m.mx[p];
    const double my = m.my[p];
    const double a = 2.0 * mx * my + cfg.c1;
    const double b = mx * mx + my * my + cfg.c1;
    const double c = 2.0 * (m.exy[p] - mx * my) + cfg.c2;
    const double d = (m.exx[p] - mx * mx) + (m.eyy[p] - my * my) + cfg.c2;
    const double lum = a / b;
    const double cs = c / d;
    total += 1.0 - lum * cs;

    const double dlum_dmx = 2.0 * my / b - a * 2.0 * mx / (b * b);
    const double dcs_dmx = -2.0 * my / d + c * 2.0 * mx / (d * d);
    d_mx[p] = -inv_n * (dlum_dmx * cs + lum * dcs_dmx);
    d_exx[p] = -inv_n * lum * (-c / (d * d));
    d_exy[p] = -inv_n * lum * (2.0 / d);
  }

  std::vector<double> g_mx(n, 0.0), g_exx(n, 0.0), g_exy(n, 0.0);
  op.adjoint(d_mx, g_mx);
  op.adjoint(d_exx, g_exx);
  op.adjoint(d_exy, g_exy);

  LossGrad out;
  out.value = total * inv_n;
  out.grad.resize(n);
  for (std::size_t q = 0; q < n; ++q) {
    out.grad[q] = g_mx[q] + 2.0 * x.data[q] * g_exx[q] + y.data[q] * g_exy[q];
  }
  return out;
}

double mse_loss(const Image& x, const Image& y) { return mse_loss_grad(x, y).value; }

LossGrad mse_loss_grad(const Image& x, const Image& y) {
  if (!x.same_shape(y)) throw ArgumentError("mse: image shapes differ");
  if (x.size() == 0) throw ArgumentError("mse: empty image");
  LossGrad out;
  out.grad.resize(x.size());
  const double inv_n = 1.0 / static_cast<double>(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double diff = x.data[i] - y.data[i];
    out.value += diff * diff;
    out.grad[i] = 2.0 * diff * inv_n;
  }
  out.value *= inv_n;
  return out;
}

double lsgan_discriminator_loss(std::span<const double> d_real, std::span<const double> d_fake) {
  return lsgan_discriminator_loss_grad(d_real, d_fake).value;
}

DiscriminatorLossGrad lsgan_discriminator_loss_grad(std::span<const double> d_real,
                                                    std::span<const double> d_fake) {
  check_batches(d_real, "lsgan_discriminator_loss (real)");
  check_batches(d_fake, "lsgan_discriminator_loss (fake)");
  DiscriminatorLossGrad out;
  const double inv_m = 1.0 / static_cast<double>(d_real.size());
  const double inv_n = 1.0 / static_cast<double>(d_fake.size());
  double real_term = 0.0;
  double fake_term = 0.0;
  out.grad_real.resize(d_real.size());
  out.grad_fake.resize(d_fake.size());
  for (std::size_t j = 0; j < d_real.size(); ++j) {
    const double r = d_real[j] - 1.0;
    real_term += r * r;
    out.grad_real[j] = 2.0 * r * inv_m;
  }
  for (std::size_t i = 0; i < d_fake.size(); ++i) {
    fake_term += d_fake[i] * d_fake[i];
    out.grad_fake[i] = 2.0 * d_fake[i] * inv_n;
  }
  out.value = real_term * inv_m + fake_term * inv_n;
  return out;
}

double lsgan_generator_loss(std::span<const double> d_fake) { return lsgan_generator_loss_grad(d_fake).value; }

LossGrad lsgan_generator_loss_grad(std::span<const double> d_fake) {
  check_batches(d_fake, "lsgan_generator_loss");
  LossGrad out;
  out.grad.resize(d_fake.size());
  const double inv_n = 1.0 / static_cast<double>(d_fake.size());
  for (std::size_t i = 0; i < d_fake.size(); ++i) {
    const double r = d_fake[i] - 1.0;
    out.value += r * r;
    out.grad[i] = 2.0 * r * inv_n;
  }
  out.value *= inv_n;
  return out;
}

double bce_loss(std::span<const double> pred, std::span<const std::uint8_t> target) {
  return bce_loss_grad(pred, target).value;
}

LossGrad bce_loss_grad(std::span<const double> pred, std::span<const std::uint8_t> target) {
  if (pred.size() != target.size()) throw ArgumentError("bce: prediction and target sizes differ");
  if (pred.empty()) throw ArgumentError("bce: empty input");
  LossGrad out;
  out.grad.resize(pred.size());
  const double inv_n = 1.0 / static_cast<double>(pred.size());
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (target[i] > 1) throw ArgumentError("bce: targets must be 0 or 1");
    const double raw = pred[i];
    const double p = std::clamp(raw, kBceEpsilon, 1.0 - kBceEpsilon);
    const bool t = target[i] == 1;
    out.value += t ? -std::log(p) : -std::log(1.0 - p);
    const bool clamped = raw < kBceEpsilon || raw > 1.0 - kBceEpsilon;
    out.grad[i] = clamped ? 0.0 : (t ? -1.0 / p : 1.0 / (1.0 - p)) * inv_n;
  }
  out.value *= inv_n;
  return out;
}

LossGrad bce_logits_loss_grad(std::span<const double> logits, std::span<const std::uint8_t> target) {
  if (logits.size() != target.size()) throw ArgumentError("bce: prediction and target sizes differ");
  if (logits.empty()) throw ArgumentError("bce: empty input");
  LossGrad out;
  out.grad.resize(logits.size());
  const double inv_n = 1.0 / static_cast<double>(logits.size());
  for (std::size_t i = 0; i < logits.size(); ++i) {
    if (target[i] > 1) throw ArgumentError("bce: targets must be 0 or 1");
    const double z = logits[i];
    const double sig = z >= 0.0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
    const double p = std::clamp(sig, kBceEpsilon, 1.0 - kBceEpsilon);
    const bool t = target[i] == 1;
    out.value += t ? -std::log(p) : -std::log(1.0 - p);
    out.grad[i] = (sig - (t ? 1.0 : 0.0)) * inv_n;
  }
  out.value *= inv_n;
  return out;
}

double dice_score(std::span<const std::uint8_t> a, std::span<const std::uint8_t> b) {
  if (a.size() != b.size()) throw ArgumentError("dice: mask sizes differ");
  std::size_t na = 0, nb = 0, both = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const bool x = a[i] != 0;
    const bool y = b[i] != 0;
    na += x;
    nb += y;
    both += x && y;
  }
  if (na + nb == 0) return 1.0;
  return 2.0 * static_cast<double>(both) / static_cast<double>(na + nb);
}

double dice_score(const Mask2D& a, const Mask2D& b) {
  if (!a.same_shape(b)) throw ArgumentError("dice: mask shapes differ");
  return dice_score(std::span<const std::uint8_t>(a.data), std::span<const std::uint8_t>(b.data));
}

double dice_score(const MaskVolume& a, const MaskVolume& b) {
  if (!(a.dims() == b.dims())) throw ArgumentError("dice: mask shapes differ");
  return dice_score(a.labels(), b.labels());
}

}  // namespace xmodal
