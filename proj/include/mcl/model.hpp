#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "mcl/data.hpp"
#include "mcl/optim.hpp"
#include "mcl/tensor.hpp"

namespace mcl {

/// One compressive-sensor configuration: sampling resolution I and
/// measurement dims M.
struct ConfigPoint {
  TensorShape resolution;    // I
  TensorShape measurements;  // M

  bool operator==(const ConfigPoint&) const = default;
  std::string str() const;  // "(4x4x2)/(2x2x1)"
};

/// Per-mode sensing factors, factor k of shape M_k x I_k.
struct SensingOperator {
  std::vector<FactorMatrix> factors;
};

/// Per-mode synthesis factors, factor k of shape Imax_k x M_k. The output
/// dims are fixed to the maximum feasible resolution for every
/// configuration.
struct SynthesisOperator {
  std::vector<FactorMatrix> factors;

  TensorShape output_shape() const;
};

/// Small fixed convolutional classifier: two conv blocks (3x3 kernels,
/// stride-2 average pooling), global average pool, linear layer. The
/// architecture is identical for every configuration because its input
/// shape is always the maximum resolution.
struct TaskHead {
  std::size_t class_count = 0;
  // Ordered parameter tensors:
  // conv1_w (C1,Cin,3,3), conv1_b (C1), conv2_w (C2,C1,3,3), conv2_b (C2),
  // fc_w (classes,C2), fc_b (classes)
  std::vector<DenseTensor> params;

  static TaskHead create(const TensorShape& input_shape, std::size_t class_count,
                         std::uint64_t seed);
};

struct MclModel {
  SensingOperator cs;
  SynthesisOperator fs;
  TaskHead head;
  ConfigPoint config;

  TensorShape max_resolution() const { return fs.output_shape(); }
  void validate() const;
};

DenseTensor sense(const MclModel& m, const DenseTensor& y);
DenseTensor synthesize(const MclModel& m, const DenseTensor& z);

/// Raw class scores of head(synthesize(sense(y))).
std::vector<double> forward(const MclModel& m, const DenseTensor& y);

std::vector<double> softmax(std::span<const double> scores);

// --- initialization and training ------------------------------------

struct InitPair {
  SensingOperator cs;
  SynthesisOperator fs;
};

/// Energy-preserving initialization from the dataset-level HOSVD: factor
/// k holds the top-M_k eigenvectors of the mode-k scatter matrix over the
/// training split. Only valid when config.I equals the dataset
/// resolution. The synthesis factors are the transposed sensing factors.
InitPair init_hosvd(const LabeledDataset& trainset, const ConfigPoint& config);

struct ReconInitResult {
  SensingOperator cs;
  SynthesisOperator fs;
  std::vector<double> epoch_mse;  // training MSE per epoch
};

/// Least-squares reconstruction initialization: optimizes the sensing and
/// synthesis factors so that synthesized features match the samples at
/// maximum resolution. Inputs are the training split down-sampled to
/// config.I; targets are the same samples at full resolution.
ReconInitResult init_reconstruction(const LabeledDataset& ds, const ConfigPoint& config,
                                    const OptimizerConfig& opt);

/// Trains the task head alone on full-resolution inputs with softmax
/// cross-entropy. The result is reused unchanged as the starting head for
/// every configuration.
TaskHead init_task_head(const LabeledDataset& ds, const OptimizerConfig& opt);

/// Joint training of sensing, synthesis, and head parameters on
/// cross-entropy. Validation accuracy is tracked per epoch and the
/// best-validation parameter snapshot is returned (the initial state
/// counts as a candidate).
MclModel train_joint(const MclModel& m, const LabeledDataset& ds, const OptimizerConfig& opt);

struct EvalResult {
  double accuracy = 0.0;
  double ce = 0.0;   // 1 - accuracy
  double mse = 0.0;  // per-element reconstruction MSE vs full resolution
};

/// Accuracy/CE/reconstruction-MSE over the given sample indices. The
/// dataset holds full-resolution samples; inputs are down-sampled to
/// config.I internally.
EvalResult evaluate(const MclModel& m, const LabeledDataset& ds,
                    std::span<const std::size_t> indices);

/// Per-element reconstruction MSE of FS(CS(.)) alone over the given
/// sample indices, inputs down-sampled to `resolution`. This is the
/// surrogate measured right after initialization, before any head exists.
double reconstruction_mse(const SensingOperator& cs, const SynthesisOperator& fs,
                          const LabeledDataset& ds, std::span<const std::size_t> indices,
                          const TensorShape& resolution);

// --- objectives with analytic gradients ------------------------------
//
// Shared by the trainers and the finite-difference checks. When `grads`
// is non-null the per-factor gradients are accumulated into it (blocks
// ordered Phi_1..Phi_K, Theta_1..Theta_K[, head params...]); buffers must
// be pre-sized and zeroed by the caller.

/// Mean per-element squared error of FS(CS(inputs[i])) against targets[i].
double reconstruction_loss(const SensingOperator& cs, const SynthesisOperator& fs,
                           std::span<const DenseTensor> inputs,
                           std::span<const DenseTensor> targets,
                           std::vector<std::span<double>>* grads = nullptr);

/// Mean softmax cross-entropy of the full pipeline on down-sampled inputs.
double pipeline_cross_entropy(const MclModel& m, std::span<const DenseTensor> inputs,
                              std::span<const std::size_t> labels,
                              std::vector<std::span<double>>* grads = nullptr);

/// Mean softmax cross-entropy of the head alone on full-resolution inputs.
double head_cross_entropy(const TaskHead& head, std::span<const DenseTensor> inputs,
                          std::span<const std::size_t> labels,
                          std::vector<std::span<double>>* grads = nullptr);

std::vector<std::span<double>> parameter_spans(SensingOperator& cs, SynthesisOperator& fs);
std::vector<std::span<double>> parameter_spans(TaskHead& head);
std::vector<std::span<double>> parameter_spans(MclModel& m);

// --- checkpoint -------------------------------------------------------
//
// Versioned binary container: magic "MCLM", u32 version, config dims,
// all factor matrices and head parameters as f64 little-endian.

void save_model(const std::filesystem::path& path, const MclModel& m);
MclModel load_model(const std::filesystem::path& path);

}  // namespace mcl
