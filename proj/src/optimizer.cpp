#include "colt/optimizer.hpp"

#include <cmath>
#include <stdexcept>

namespace colt {

void AdamW::step(std::size_t block, std::span<double> params, std::span<const double> grads) {
  if (params.size() != grads.size()) throw std::invalid_argument("AdamW: size mismatch");
  if (t_ == 0) throw std::logic_error("AdamW: begin_step() not called");
  auto& m = first_.at(block);
  auto& v = second_.at(block);
  if (m.empty()) {
    m.assign(params.size(), 0.0);
    v.assign(params.size(), 0.0);
  }
  const auto& o = options_;
  const double bias1 = 1.0 - std::pow(o.beta1, static_cast<double>(t_));
  const double bias2 = 1.0 - std::pow(o.beta2, static_cast<double>(t_));
  const double decay = 1.0 - o.learning_rate * o.weight_decay;
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double g = grads[i];
    m[i] = o.beta1 * m[i] + (1.0 - o.beta1) * g;
    v[i] = o.beta2 * v[i] + (1.0 - o.beta2) * g * g;
    const double m_hat = m[i] / bias1;
    const double v_hat = v[i] / bias2;
    if (o.weight_decay != 0.0) params[i] *= decay;
    params[i] -= o.learning_rate * m_hat / (std::sqrt(v_hat) + o.epsilon);
  }
}

}  // namespace colt
