#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace mcl {

struct LrStage {
  std::size_t start_epoch = 1;  // 1-based, first epoch at this rate
  double rate = 1e-3;
};

struct OptimizerConfig {
  std::size_t epochs = 35;
  std::vector<LrStage> lr_stages{{1, 1e-3}};
  double weight_decay = 0.0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::size_t batch_size = 32;
  std::uint64_t seed = 1;

  void validate() const;
};

/// Rate of the last stage whose start_epoch <= epoch (1-based).
double lr_at(const OptimizerConfig& cfg, std::size_t epoch);

/// Thrown when a training loss goes non-finite.
class DivergenceError : public std::runtime_error {
 public:
  DivergenceError(std::size_t epoch, const std::string& what)
      : std::runtime_error(what), epoch_(epoch) {}
  std::size_t epoch() const { return epoch_; }

 private:
  std::size_t epoch_;
};

/// First/second-moment accumulators mirroring the parameter blocks.
struct AdamState {
  std::vector<std::vector<double>> m;
  std::vector<std::vector<double>> v;
  std::uint64_t t = 0;

  static AdamState for_params(const std::vector<std::span<double>>& params);
};

/// One Adam update with bias correction. Weight decay is coupled L2:
/// the effective gradient is grad + weight_decay * param.
void adam_step(AdamState& state, const std::vector<std::span<double>>& params,
               const std::vector<std::span<const double>>& grads, double lr,
               const OptimizerConfig& cfg);

struct GradCheckReport {
  bool pass = false;
  double worst_rel_err = 0.0;
  std::size_t worst_index = 0;
  double analytic_at_worst = 0.0;
  double numeric_at_worst = 0.0;
};

/// Central-difference check of an analytic gradient. `loss` re-evaluates
/// the objective at the current parameter values; params are perturbed in
/// place and restored. Relative error per coordinate is
/// |fd - analytic| / max(|fd|, |analytic|, 1e-3 * max|analytic|).
GradCheckReport finite_diff_check(const std::function<double()>& loss,
                                  std::span<double> params,
                                  std::span<const double> analytic_grad, double step,
                                  double tolerance);

}  // namespace mcl
