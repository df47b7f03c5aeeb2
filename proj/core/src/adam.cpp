#include <cmath>
#include <utility>
#include <vector>

#include "rest/errors.hpp"
#include "rest/training.hpp"

namespace rest {
namespace {

using Span = std::pair<double*, Eigen::Index>;

std::vector<Span> flat_views(ModelParameters& p) {
  std::vector<Span> out;
  p.visit([&](const std::string&, auto& t, bool) { out.emplace_back(t.data(), t.size()); });
  return out;
}

}  // namespace

Adam::Adam(const ModelParameters& shape, double learning_rate, double beta1, double beta2, double epsilon)
    : lr_(learning_rate), beta1_(beta1), beta2_(beta2), eps_(epsilon), m_(shape), v_(shape) {
  if (!(learning_rate > 0.0)) throw ValidationError("learning rate must be positive");
  m_.set_zero();
  v_.set_zero();
}

void Adam::step(ModelParameters& params, const ModelParameters& grad) {
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  const double step_size = lr_ / c1;
  const double inv_sqrt_c2 = 1.0 / std::sqrt(c2);

  auto p = flat_views(params);
  auto m = flat_views(m_);
  auto v = flat_views(v_);
  std::vector<std::pair<const double*, Eigen::Index>> g;
  grad.visit([&](const std::string&, const auto& t, bool) { g.emplace_back(t.data(), t.size()); });
  if (g.size() != p.size()) throw ValidationError("gradient layout does not match the parameters");

  for (std::size_t k = 0; k < p.size(); ++k) {
    if (g[k].second != p[k].second) throw ValidationError("gradient layout does not match the parameters");
    double* pk = p[k].first;
    double* mk = m[k].first;
    double* vk = v[k].first;
    const double* gk = g[k].first;
    for (Eigen::Index i = 0; i < p[k].second; ++i) {
      mk[i] = beta1_ * mk[i] + (1.0 - beta1_) * gk[i];
      vk[i] = beta2_ * vk[i] + (1.0 - beta2_) * gk[i] * gk[i];
      pk[i] -= step_size * mk[i] / (std::sqrt(vk[i]) * inv_sqrt_c2 + eps_);
    }
  }
}

}  // namespace rest
