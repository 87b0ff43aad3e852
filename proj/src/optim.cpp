#include "mcl/optim.hpp"

#include <cmath>

namespace mcl {

void OptimizerConfig::validate() const {
  if (lr_stages.empty()) throw std::invalid_argument("optimizer: lr_stages must be nonempty");
  if (lr_stages.front().start_epoch != 1)
    throw std::invalid_argument("optimizer: first lr stage must start at epoch 1");
  for (std::size_t i = 1; i < lr_stages.size(); ++i)
    if (lr_stages[i].start_epoch <= lr_stages[i - 1].start_epoch)
      throw std::invalid_argument("optimizer: lr stage start epochs must be strictly increasing");
  if (weight_decay < 0.0) throw std::invalid_argument("optimizer: weight_decay must be >= 0");
  if (batch_size == 0) throw std::invalid_argument("optimizer: batch_size must be positive");
}

double lr_at(const OptimizerConfig& cfg, std::size_t epoch) {
  cfg.validate();
  if (epoch < 1 || epoch > cfg.epochs)
    throw std::invalid_argument("epoch " + std::to_string(epoch) + " outside schedule of " +
                                std::to_string(cfg.epochs) + " epochs");
  double rate = cfg.lr_stages.front().rate;
  for (const LrStage& s : cfg.lr_stages)
    if (s.start_epoch <= epoch) rate = s.rate;
  return rate;
}

AdamState AdamState::for_params(const std::vector<std::span<double>>& params) {
  AdamState s;
  s.m.reserve(params.size());
  s.v.reserve(params.size());
  for (const auto& p : params) {
    s.m.emplace_back(p.size(), 0.0);
    s.v.emplace_back(p.size(), 0.0);
  }
  return s;
}

void adam_step(AdamState& state, const std::vector<std::span<double>>& params,
               const std::vector<std::span<const double>>& grads, double lr,
               const OptimizerConfig& cfg) {
  if (params.size() != grads.size() || params.size() != state.m.size())
    throw std::invalid_argument("adam_step: parameter/gradient/state block counts differ");

  state.t += 1;
  const double corr1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.t));
  const double corr2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.t));

  for (std::size_t b = 0; b < params.size(); ++b) {
    auto p = params[b];
    auto g = grads[b];
    auto& m = state.m[b];
    auto& v = state.v[b];
    if (p.size() != g.size() || p.size() != m.size())
      throw std::invalid_argument("adam_step: block size mismatch");
    for (std::size_t i = 0; i < p.size(); ++i) {
      if (!std::isfinite(g[i]))
        throw DivergenceError(0, "adam_step: non-finite gradient");
      const double eff = g[i] + cfg.weight_decay * p[i];
      m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * eff;
      v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * eff * eff;
      const double mhat = m[i] / corr1;
      const double vhat = v[i] / corr2;
      p[i] -= lr * mhat / (std::sqrt(vhat) + cfg.epsilon);
    }
  }
}

GradCheckReport finite_diff_check(const std::function<double()>& loss,
                                  std::span<double> params,
                                  std::span<const double> analytic_grad, double step,
                                  double tolerance) {
  if (params.size() != analytic_grad.size())
    throw std::invalid_argument("finite_diff_check: gradient size mismatch");
  if (step <= 0.0) throw std::invalid_argument("finite_diff_check: step must be positive");

  // Coordinates far below the block's gradient scale sit under the
  // central-difference noise floor; the scale floor keeps them from
  // dominating the worst-case relative error.
  double scale = 0.0;
  for (double g : analytic_grad) scale = std::max(scale, std::abs(g));
  const double floor = std::max(1e-3 * scale, 1e-12);

  GradCheckReport rep;
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double saved = params[i];
    params[i] = saved + step;
    const double up = loss();
    params[i] = saved - step;
    const double down = loss();
    params[i] = saved;

    const double fd = (up - down) / (2.0 * step);
    const double an = analytic_grad[i];
    const double denom = std::max({std::abs(fd), std::abs(an), floor});
    const double rel = std::abs(fd - an) / denom;
    if (rel > rep.worst_rel_err) {
      rep.worst_rel_err = rel;
      rep.worst_index = i;
      rep.analytic_at_worst = an;
      rep.numeric_at_worst = fd;
    }
  }
  rep.pass = rep.worst_rel_err <= tolerance;
  return rep;
}

}  // namespace mcl
