#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "xmodal/nn/ops.hpp"
#include "xmodal/rng.hpp"

namespace xmodal::nn {

/// Named parameter in a network's fixed checkpoint order.
struct NamedParameter {
  std::string name;
  Tensor tensor;
};
using ParameterList = std::vector<NamedParameter>;

void append_prefixed(ParameterList& out, const std::string& prefix, const ParameterList& params);

/// Weight init: N(0, stddev); stddev <= 0 selects He scaling sqrt(2 / fan_in).
struct Conv2d {
  Tensor weight;
  Tensor bias;
  int stride = 1;
  int padding = 0;

  Conv2d() = default;
  Conv2d(int in, int out, int kernel, int stride, int padding, Rng& rng, double stddev = -1.0);

  [[nodiscard]] Tensor operator()(const Tensor& x) const { return conv2d(x, weight, bias, stride, padding); }
  [[nodiscard]] ParameterList parameters() const { return {{"weight", weight}, {"bias", bias}}; }
  [[nodiscard]] int in_channels() const { return weight.shape().c; }
  [[nodiscard]] int out_channels() const { return weight.shape().n; }
  void zero();
};

/// out = shortcut(x) + conv2(act(norm(conv1(x)))) [-> norm]; shortcut is the
/// identity when channel counts match, a 1x1 projection otherwise.
struct ResidualBlock {
  Conv2d conv1;
  Conv2d conv2;
  std::optional<Conv2d> projection;
  bool normalize = false;

  ResidualBlock() = default;
  ResidualBlock(int in, int out, bool normalize, Rng& rng, double stddev = -1.0);

  [[nodiscard]] Tensor operator()(const Tensor& x) const;
  [[nodiscard]] ParameterList parameters() const;
  /// Zero the residual branch so the block reduces to its shortcut.
  void zero_branch() { conv2.zero(); }
};

/// Adam with bias correction over a fixed parameter list.
class Adam {
 public:
  struct Options {
    double lr = 2e-4;
    double beta1 = 0.5;
    double beta2 = 0.999;
    double eps = 1e-8;
  };

  Adam() = default;
  Adam(ParameterList params, Options opts);

  void zero_grad();
  void step();

  [[nodiscard]] const Options& options() const noexcept { return opts_; }
  void set_lr(double lr) noexcept { opts_.lr = lr; }
  [[nodiscard]] long long steps() const noexcept { return t_; }

  /// First/second moment buffers, parallel to the parameter list.
  [[nodiscard]] std::vector<std::vector<float>>& first_moments() noexcept { return m_; }
  [[nodiscard]] std::vector<std::vector<float>>& second_moments() noexcept { return v_; }
  void set_steps(long long t) noexcept { t_ = t; }

 private:
  ParameterList params_;
  Options opts_{};
  std::vector<std::vector<float>> m_;
  std::vector<std::vector<float>> v_;
  long long t_ = 0;
};

/// Toggle gradient tracking on every parameter (freezing a network for a pass).
void set_requires_grad(const ParameterList& params, bool on);

/// Sum of parameter element counts.
std::size_t parameter_count(const ParameterList& params);

/// true when every value (and gradient, if allocated) is finite.
bool all_finite(const ParameterList& params);

}  // namespace xmodal::nn
