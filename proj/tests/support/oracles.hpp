#pragma once

// Independent reference implementations used only by the tests. They are
// written for clarity, not speed, and share no code with the library.

#include <cmath>
#include <cstdint>
#include <functional>
#include <vector>

#include "xmodal/losses.hpp"
#include "xmodal/rng.hpp"

namespace oracle {

// numpy-style "reflect" index (edge sample not repeated).
inline int reflect(int i, int n) {
  if (n == 1) return 0;
  const int period = 2 * (n - 1);
  i %= period;
  if (i < 0) i += period;
  return i < n ? i : period - i;
}

// Gathers every window explicitly and evaluates the structural similarity formula.
inline xmodal::Image ssim_map(const xmodal::Image& x, const xmodal::Image& y, int window, double c1, double c2) {
  const int r = window / 2;
  xmodal::Image out(x.height, x.width);
  for (int py = 0; py < x.height; ++py) {
    for (int px = 0; px < x.width; ++px) {
      std::vector<double> a;
      std::vector<double> b;
      for (int dy = -r; dy <= r; ++dy) {
        for (int dx = -r; dx <= r; ++dx) {
          const int yy = reflect(py + dy, x.height);
          const int xx = reflect(px + dx, x.width);
          a.push_back(x.at(yy, xx));
          b.push_back(y.at(yy, xx));
        }
      }
      const double n = static_cast<double>(a.size());
      double mx = 0, my = 0;
      for (std::size_t i = 0; i < a.size(); ++i) {
        mx += a[i];
        my += b[i];
      }
      mx /= n;
      my /= n;
      double vx = 0, vy = 0, cxy = 0;
      for (std::size_t i = 0; i < a.size(); ++i) {
        vx += (a[i] - mx) * (a[i] - mx);
        vy += (b[i] - my) * (b[i] - my);
        cxy += (a[i] - mx) * (b[i] - my);
      }
      vx /= n;
      vy /= n;
      cxy /= n;
      out.at(py, px) = ((2 * mx * my + c1) / (mx * mx + my * my + c1)) * ((2 * cxy + c2) / (vx + vy + c2));
    }
  }
  return out;
}

// Two-sided signed-rank p-value by enumerating all 2^n sign assignments of the
// (tie-averaged) ranks. Zero differences dropped.
inline double wilcoxon_enumerate(const std::vector<double>& a, const std::vector<double>& b) {
  std::vector<double> d;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i] != b[i]) d.push_back(a[i] - b[i]);
  }
  const std::size_t n = d.size();
  if (n == 0) return 1.0;
  std::vector<double> rank(n);
  for (std::size_t i = 0; i < n; ++i) {
    double less = 0, equal = 0;
    for (std::size_t j = 0; j < n; ++j) {
      if (std::abs(d[j]) < std::abs(d[i])) less += 1;
      if (std::abs(d[j]) == std::abs(d[i])) equal += 1;
    }
    rank[i] = less + (equal + 1) / 2.0;
  }
  double observed = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (d[i] > 0) observed += rank[i];
  }
  double le = 0, ge = 0;
  const std::uint64_t total = std::uint64_t{1} << n;
  for (std::uint64_t mask = 0; mask < total; ++mask) {
    double w = 0;
    for (std::size_t i = 0; i < n; ++i) {
      if (mask & (std::uint64_t{1} << i)) w += rank[i];
    }
    if (w <= observed + 1e-9) le += 1;
    if (w >= observed - 1e-9) ge += 1;
  }
  return std::min(1.0, 2.0 * std::min(le, ge) / static_cast<double>(total));
}

// Central differences of a scalar function of a vector.
inline std::vector<double> finite_difference(const std::function<double(const std::vector<double>&)>& f,
                                             std::vector<double> x, double eps) {
  std::vector<double> g(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double keep = x[i];
    x[i] = keep + eps;
    const double up = f(x);
    x[i] = keep - eps;
    const double down = f(x);
    x[i] = keep;
    g[i] = (up - down) / (2 * eps);
  }
  return g;
}

// ||a - b|| / max(||a||, ||b||, floor).
inline double relative_error(const std::vector<double>& a, const std::vector<double>& b, double floor = 1e-12) {
  double diff = 0, na = 0, nb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    diff += (a[i] - b[i]) * (a[i] - b[i]);
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  return std::sqrt(diff) / std::max({std::sqrt(na), std::sqrt(nb), floor});
}

inline xmodal::Image random_image(int h, int w, xmodal::Rng& rng, double lo = -1.0, double hi = 1.0) {
  xmodal::Image img(h, w);
  for (auto& v : img.data) v = rng.uniform(lo, hi);
  return img;
}

// Dice by explicit set construction.
inline double dice_sets(const std::vector<std::uint8_t>& a, const std::vector<std::uint8_t>& b) {
  std::vector<std::size_t> sa, sb, both;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i]) sa.push_back(i);
    if (b[i]) sb.push_back(i);
    if (a[i] && b[i]) both.push_back(i);
  }
  if (sa.empty() && sb.empty()) return 1.0;
  return 2.0 * static_cast<double>(both.size()) / static_cast<double>(sa.size() + sb.size());
}

}  // namespace oracle
