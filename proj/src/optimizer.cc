#include "clinie/optimizer.h"

#include <cmath>

#include "clinie/errors.h"

namespace clinie {

AdamW::AdamW(const ad::ParamSet& params, AdamWConfig config) : config_(config) {
  for (const auto& p : params) {
    m_.emplace_back(p->value.rows(), p->value.cols());
    v_.emplace_back(p->value.rows(), p->value.cols());
  }
}

void AdamW::step(ad::ParamSet& params) {
  if (params.size() != m_.size()) throw TrainingError("optimizer state does not match parameters");
  ++t_;
  const double b1 = config_.beta1, b2 = config_.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(t_));
  for (std::size_t k = 0; k < params.size(); ++k) {
    ad::Param& p = params[k];
    auto& value = p.value.data();
    const auto& grad = p.grad.data();
    auto& m = m_[k].data();
    auto& v = v_[k].data();
    for (std::size_t i = 0; i < value.size(); ++i) {
      if (p.is_frozen(i)) continue;
      const double g = grad[i];
      m[i] = b1 * m[i] + (1.0 - b1) * g;
      v[i] = b2 * v[i] + (1.0 - b2) * g * g;
      const double update = (m[i] / c1) / (std::sqrt(v[i] / c2) + config_.epsilon);
      value[i] -= config_.learning_rate * (update + config_.weight_decay * value[i]);
    }
  }
}

double clip_grad_norm(ad::ParamSet& params, double max_norm) {
  const double norm = params.grad_norm();
  if (norm > max_norm && norm > 0.0) params.scale_grad(max_norm / norm);
  return norm;
}

}  // namespace clinie
