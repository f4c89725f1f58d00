#include "xmodal/nn/layers.hpp"

#include <cmath>

namespace xmodal::nn {

void append_prefixed(ParameterList& out, const std::string& prefix, const ParameterList& params) {
  for (const auto& p : params) out.push_back({prefix + "." + p.name, p.tensor});
}

Conv2d::Conv2d(int in, int out, int kernel, int stride_, int padding_, Rng& rng, double stddev)
    : stride(stride_), padding(padding_) {
  const Shape ws{out, in, kernel, kernel};
  const double sd = stddev > 0.0 ? stddev : std::sqrt(2.0 / (static_cast<double>(in) * kernel * kernel));
  std::vector<float> w(ws.size());
  for (auto& v : w) v = static_cast<float>(sd * rng.normal());
  weight = Tensor::from(ws, std::move(w), true);
  bias = Tensor::zeros(Shape{1, out, 1, 1}, true);
}

void Conv2d::zero() {
  for (auto& v : weight.mutable_value()) v = 0.0F;
  for (auto& v : bias.mutable_value()) v = 0.0F;
}

ResidualBlock::ResidualBlock(int in, int out, bool normalize_, Rng& rng, double stddev)
    : conv1(in, out, 3, 1, 1, rng, stddev), conv2(out, out, 3, 1, 1, rng, stddev), normalize(normalize_) {
  if (in != out) projection.emplace(in, out, 1, 1, 0, rng, stddev);
}

Tensor ResidualBlock::operator()(const Tensor& x) const {
  Tensor h = conv1(x);
  if (normalize) h = instance_norm(h);
  h = relu(h);
  h = conv2(h);
  if (normalize) h = instance_norm(h);
  return add(projection ? (*projection)(x) : x, h);
}

ParameterList ResidualBlock::parameters() const {
  ParameterList out;
  append_prefixed(out, "conv1", conv1.parameters());
  append_prefixed(out, "conv2", conv2.parameters());
  if (projection) append_prefixed(out, "projection", projection->parameters());
  return out;
}

Adam::Adam(ParameterList params, Options opts) : params_(std::move(params)), opts_(opts) {
  for (const auto& p : params_) {
    m_.emplace_back(p.tensor.value().size(), 0.0F);
    v_.emplace_back(p.tensor.value().size(), 0.0F);
  }
}

void Adam::zero_grad() {
  for (auto& p : params_) p.tensor.zero_grad();
}

void Adam::step() {
  ++t_;
  const double bc1 = 1.0 - std::pow(opts_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(opts_.beta2, static_cast<double>(t_));
  const float b1 = static_cast<float>(opts_.beta1);
  const float b2 = static_cast<float>(opts_.beta2);
  const float step_size = static_cast<float>(opts_.lr / bc1);
  const float inv_bc2 = static_cast<float>(1.0 / bc2);
  const float eps = static_cast<float>(opts_.eps);
  for (std::size_t k = 0; k < params_.size(); ++k) {
    Tensor& t = params_[k].tensor;
    const auto g = t.grad();
    if (g.empty()) continue;
    auto val = t.mutable_value();
    auto& m = m_[k];
    auto& v = v_[k];
    for (std::size_t i = 0; i < val.size(); ++i) {
      m[i] = b1 * m[i] + (1.0F - b1) * g[i];
      v[i] = b2 * v[i] + (1.0F - b2) * g[i] * g[i];
      val[i] -= step_size * m[i] / (std::sqrt(v[i] * inv_bc2) + eps);
    }
  }
}

void set_requires_grad(const ParameterList& params, bool on) {
  for (const auto& p : params) p.tensor.node()->requires_grad = on;
}

std::size_t parameter_count(const ParameterList& params) {
  std::size_t n = 0;
  for (const auto& p : params) n += p.tensor.value().size();
  return n;
}

bool all_finite(const ParameterList& params) {
  for (const auto& p : params) {
    for (float v : p.tensor.value())
      if (!std::isfinite(v)) return false;
    for (float v : p.tensor.grad())
      if (!std::isfinite(v)) return false;
  }
  return true;
}

}  // namespace xmodal::nn
