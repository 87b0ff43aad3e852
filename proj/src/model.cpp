#include "mcl/model.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <stdexcept>

#include "binary_io.hpp"
#include "mcl/rng.hpp"

namespace mcl {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<RowMat>;
using ConstMapMat = Eigen::Map<const RowMat>;

constexpr std::size_t kConv1Channels = 8;
constexpr std::size_t kConv2Channels = 16;

// --- head geometry ----------------------------------------------------

struct HeadDims {
  std::size_t H = 1, W = 1, C = 1;
};

HeadDims head_dims(const TensorShape& s) {
  if (s.order() > 3)
    throw std::invalid_argument("task head supports tensors of up to 3 modes, got order " +
                                std::to_string(s.order()));
  HeadDims d;
  d.H = s.dims[0];
  if (s.order() >= 2) d.W = s.dims[1];
  if (s.order() == 3) d.C = s.dims[2];
  return d;
}

std::size_t pooled(std::size_t n) { return (n + 1) / 2; }

// --- conv / pool kernels (channels-last layout) -----------------------

void conv3x3_forward(const double* in, std::size_t H, std::size_t W, std::size_t Cin,
                     const double* w, const double* b, std::size_t Cout, double* out) {
  for (std::size_t y = 0; y < H; ++y)
    for (std::size_t x = 0; x < W; ++x)
      for (std::size_t co = 0; co < Cout; ++co) {
        double acc = b[co];
        for (std::size_t dy = 0; dy < 3; ++dy) {
          if (y + dy < 1 || y + dy > H) continue;
          const std::size_t yy = y + dy - 1;
          for (std::size_t dx = 0; dx < 3; ++dx) {
            if (x + dx < 1 || x + dx > W) continue;
            const std::size_t xx = x + dx - 1;
            const double* px = in + (yy * W + xx) * Cin;
            const double* wk = w + ((co * Cin) * 3 + dy) * 3 + dx;
            for (std::size_t ci = 0; ci < Cin; ++ci) acc += px[ci] * wk[ci * 9];
          }
        }
        out[(y * W + x) * Cout + co] = acc;
      }
}

void conv3x3_backward(const double* in, std::size_t H, std::size_t W, std::size_t Cin,
                      const double* w, std::size_t Cout, const double* dout, double* dw,
                      double* db, double* din) {
  for (std::size_t y = 0; y < H; ++y)
    for (std::size_t x = 0; x < W; ++x)
      for (std::size_t co = 0; co < Cout; ++co) {
        const double g = dout[(y * W + x) * Cout + co];
        if (db) db[co] += g;
        for (std::size_t dy = 0; dy < 3; ++dy) {
          if (y + dy < 1 || y + dy > H) continue;
          const std::size_t yy = y + dy - 1;
          for (std::size_t dx = 0; dx < 3; ++dx) {
            if (x + dx < 1 || x + dx > W) continue;
            const std::size_t xx = x + dx - 1;
            const std::size_t px = (yy * W + xx) * Cin;
            const std::size_t wk = ((co * Cin) * 3 + dy) * 3 + dx;
            for (std::size_t ci = 0; ci < Cin; ++ci) {
              if (dw) dw[wk + ci * 9] += g * in[px + ci];
              if (din) din[px + ci] += g * w[wk + ci * 9];
            }
          }
        }
      }
}

void avgpool2_forward(const double* in, std::size_t H, std::size_t W, std::size_t C,
                      double* out) {
  const std::size_t Ho = pooled(H), Wo = pooled(W);
  for (std::size_t j = 0; j < Ho; ++j)
    for (std::size_t i = 0; i < Wo; ++i) {
      const std::size_t y1 = std::min(2 * j + 2, H), x1 = std::min(2 * i + 2, W);
      const auto cnt = static_cast<double>((y1 - 2 * j) * (x1 - 2 * i));
      for (std::size_t c = 0; c < C; ++c) {
        double acc = 0.0;
        for (std::size_t y = 2 * j; y < y1; ++y)
          for (std::size_t x = 2 * i; x < x1; ++x) acc += in[(y * W + x) * C + c];
        out[(j * Wo + i) * C + c] = acc / cnt;
      }
    }
}

void avgpool2_backward(const double* dout, std::size_t H, std::size_t W, std::size_t C,
                       double* din) {
  const std::size_t Ho = pooled(H), Wo = pooled(W);
  for (std::size_t j = 0; j < Ho; ++j)
    for (std::size_t i = 0; i < Wo; ++i) {
      const std::size_t y1 = std::min(2 * j + 2, H), x1 = std::min(2 * i + 2, W);
      const auto cnt = static_cast<double>((y1 - 2 * j) * (x1 - 2 * i));
      for (std::size_t c = 0; c < C; ++c) {
        const double g = dout[(j * Wo + i) * C + c] / cnt;
        for (std::size_t y = 2 * j; y < y1; ++y)
          for (std::size_t x = 2 * i; x < x1; ++x) din[(y * W + x) * C + c] += g;
      }
    }
}

struct HeadCache {
  HeadDims d;
  std::size_t H2 = 1, W2 = 1, H4 = 1, W4 = 1;
  std::vector<double> pre1, act1, pool1, pre2, act2, pool2, gap, scores;
};

void head_forward(const TaskHead& head, const DenseTensor& input, HeadCache& c) {
  c.d = head_dims(input.shape());
  const auto [H, W, C] = c.d;
  c.H2 = pooled(H);
  c.W2 = pooled(W);
  c.H4 = pooled(c.H2);
  c.W4 = pooled(c.W2);

  const DenseTensor& w1 = head.params[0];
  const DenseTensor& b1 = head.params[1];
  const DenseTensor& w2 = head.params[2];
  const DenseTensor& b2 = head.params[3];
  const DenseTensor& fw = head.params[4];
  const DenseTensor& fb = head.params[5];
  if (w1.shape().dims[1] != C)
    throw std::invalid_argument("task head expects " + std::to_string(w1.shape().dims[1]) +
                                " input channels, got " + std::to_string(C));

  c.pre1.assign(H * W * kConv1Channels, 0.0);
  conv3x3_forward(input.data(), H, W, C, w1.data(), b1.data(), kConv1Channels, c.pre1.data());
  c.act1 = c.pre1;
  for (double& v : c.act1) v = std::max(0.0, v);
  c.pool1.assign(c.H2 * c.W2 * kConv1Channels, 0.0);
  avgpool2_forward(c.act1.data(), H, W, kConv1Channels, c.pool1.data());

  c.pre2.assign(c.H2 * c.W2 * kConv2Channels, 0.0);
  conv3x3_forward(c.pool1.data(), c.H2, c.W2, kConv1Channels, w2.data(), b2.data(),
                  kConv2Channels, c.pre2.data());
  c.act2 = c.pre2;
  for (double& v : c.act2) v = std::max(0.0, v);
  c.pool2.assign(c.H4 * c.W4 * kConv2Channels, 0.0);
  avgpool2_forward(c.act2.data(), c.H2, c.W2, kConv2Channels, c.pool2.data());

  c.gap.assign(kConv2Channels, 0.0);
  const auto area = static_cast<double>(c.H4 * c.W4);
  for (std::size_t p = 0; p < c.H4 * c.W4; ++p)
    for (std::size_t ch = 0; ch < kConv2Channels; ++ch)
      c.gap[ch] += c.pool2[p * kConv2Channels + ch] / area;

  c.scores.assign(head.class_count, 0.0);
  for (std::size_t k = 0; k < head.class_count; ++k) {
    double acc = fb[k];
    for (std::size_t ch = 0; ch < kConv2Channels; ++ch)
      acc += fw[k * kConv2Channels + ch] * c.gap[ch];
    c.scores[k] = acc;
  }
}

// Accumulates parameter gradients into `pg` (6 blocks, head order) and
// optionally returns the gradient w.r.t. the head input.
std::vector<double> head_backward(const TaskHead& head, const DenseTensor& input,
                                  const HeadCache& c, std::span<const double> dscores,
                                  std::span<std::span<double>> pg, bool want_dinput) {
  const auto [H, W, C] = c.d;
  const DenseTensor& w1 = head.params[0];
  const DenseTensor& w2 = head.params[2];
  const DenseTensor& fw = head.params[4];

  std::vector<double> dgap(kConv2Channels, 0.0);
  for (std::size_t k = 0; k < head.class_count; ++k) {
    for (std::size_t ch = 0; ch < kConv2Channels; ++ch) {
      if (!pg.empty()) pg[4][k * kConv2Channels + ch] += dscores[k] * c.gap[ch];
      dgap[ch] += dscores[k] * fw[k * kConv2Channels + ch];
    }
    if (!pg.empty()) pg[5][k] += dscores[k];
  }

  const auto area = static_cast<double>(c.H4 * c.W4);
  std::vector<double> dpool2(c.H4 * c.W4 * kConv2Channels);
  for (std::size_t p = 0; p < c.H4 * c.W4; ++p)
    for (std::size_t ch = 0; ch < kConv2Channels; ++ch)
      dpool2[p * kConv2Channels + ch] = dgap[ch] / area;

  std::vector<double> dact2(c.H2 * c.W2 * kConv2Channels, 0.0);
  avgpool2_backward(dpool2.data(), c.H2, c.W2, kConv2Channels, dact2.data());
  for (std::size_t i = 0; i < dact2.size(); ++i)
    if (c.pre2[i] <= 0.0) dact2[i] = 0.0;

  std::vector<double> dpool1(c.H2 * c.W2 * kConv1Channels, 0.0);
  conv3x3_backward(c.pool1.data(), c.H2, c.W2, kConv1Channels, w2.data(), kConv2Channels,
                   dact2.data(), pg.empty() ? nullptr : pg[2].data(),
                   pg.empty() ? nullptr : pg[3].data(), dpool1.data());

  std::vector<double> dact1(H * W * kConv1Channels, 0.0);
  avgpool2_backward(dpool1.data(), H, W, kConv1Channels, dact1.data());
  for (std::size_t i = 0; i < dact1.size(); ++i)
    if (c.pre1[i] <= 0.0) dact1[i] = 0.0;

  std::vector<double> din;
  if (want_dinput) din.assign(H * W * C, 0.0);
  conv3x3_backward(input.data(), H, W, C, w1.data(), kConv1Channels, dact1.data(),
                   pg.empty() ? nullptr : pg[0].data(), pg.empty() ? nullptr : pg[1].data(),
                   want_dinput ? din.data() : nullptr);
  return din;
}

// --- multilinear gradient helpers -------------------------------------

std::vector<FactorMatrix> transposed_all(const std::vector<FactorMatrix>& fs) {
  std::vector<FactorMatrix> out;
  out.reserve(fs.size());
  for (const auto& f : fs) out.push_back(f.transposed());
  return out;
}

DenseTensor multilinear_except(const DenseTensor& t, const std::vector<FactorMatrix>& factors,
                               std::size_t skip) {
  DenseTensor out = t;
  for (std::size_t k = 0; k < factors.size(); ++k)
    if (k != skip) out = mode_k_product(out, factors[k], k + 1);
  return out;
}

// grad += unfold(dout, mode) * unfold(partial, mode)^T
void accumulate_factor_grad(const DenseTensor& dout, const DenseTensor& partial,
                            std::size_t mode, std::span<double> grad) {
  const FactorMatrix a = unfold(dout, mode);
  const FactorMatrix b = unfold(partial, mode);
  MapMat g(grad.data(), static_cast<Eigen::Index>(a.rows), static_cast<Eigen::Index>(b.rows));
  ConstMapMat am(a.data.data(), static_cast<Eigen::Index>(a.rows),
                 static_cast<Eigen::Index>(a.cols));
  ConstMapMat bm(b.data.data(), static_cast<Eigen::Index>(b.rows),
                 static_cast<Eigen::Index>(b.cols));
  g.noalias() += am * bm.transpose();
}

double safe_log_prob(double p) { return std::log(std::max(p, 1e-300)); }

// --- training loop -----------------------------------------------------

// Shuffled mini-batches with Adam updates in fixed accumulation order.
// batch_fn(batch, grads) returns the mean batch loss with gradients
// accumulated into the zeroed buffers.
template <typename BatchFn, typename EpochFn>
void run_epochs(const OptimizerConfig& opt, std::size_t n_train, Rng& rng,
                const std::vector<std::span<double>>& params, BatchFn&& batch_fn,
                EpochFn&& on_epoch) {
  opt.validate();
  if (n_train == 0) throw std::invalid_argument("training split is empty");

  AdamState state = AdamState::for_params(params);
  std::vector<std::vector<double>> grad_store;
  grad_store.reserve(params.size());
  for (const auto& p : params) grad_store.emplace_back(p.size(), 0.0);

  std::vector<std::size_t> order(n_train);
  std::iota(order.begin(), order.end(), 0);

  for (std::size_t epoch = 1; epoch <= opt.epochs; ++epoch) {
    const double lr = lr_at(opt, epoch);
    rng.shuffle(order);
    double loss_sum = 0.0;
    for (std::size_t start = 0; start < n_train; start += opt.batch_size) {
      const std::size_t len = std::min(opt.batch_size, n_train - start);
      std::span<const std::size_t> batch(order.data() + start, len);

      std::vector<std::span<double>> grads;
      std::vector<std::span<const double>> cgrads;
      for (auto& g : grad_store) {
        std::fill(g.begin(), g.end(), 0.0);
        grads.emplace_back(g);
        cgrads.emplace_back(g);
      }

      const double loss = batch_fn(batch, &grads);
      if (!std::isfinite(loss))
        throw DivergenceError(epoch, "training diverged: non-finite loss at epoch " +
                                         std::to_string(epoch));
      loss_sum += loss * static_cast<double>(len);
      try {
        adam_step(state, params, cgrads, lr, opt);
      } catch (const DivergenceError&) {
        throw DivergenceError(epoch, "training diverged: non-finite gradient at epoch " +
                                         std::to_string(epoch));
      }
    }
    on_epoch(epoch, loss_sum / static_cast<double>(n_train));
  }
}

std::vector<DenseTensor> gather_downsampled(const LabeledDataset& ds,
                                            std::span<const std::size_t> indices,
                                            const TensorShape& target) {
  std::vector<DenseTensor> out;
  out.reserve(indices.size());
  for (std::size_t i : indices) out.push_back(downsample(ds.samples[i], target));
  return out;
}

EvalResult evaluate_prepared(const MclModel& m, std::span<const DenseTensor> inputs,
                             std::span<const DenseTensor* const> targets,
                             std::span<const std::size_t> labels) {
  std::size_t correct = 0;
  double se = 0.0;
  HeadCache cache;
  const double numel = static_cast<double>(targets.front()->numel());
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    const DenseTensor z = sense(m, inputs[i]);
    const DenseTensor feat = synthesize(m, z);
    head_forward(m.head, feat, cache);
    const std::size_t pred =
        static_cast<std::size_t>(std::max_element(cache.scores.begin(), cache.scores.end()) -
                                 cache.scores.begin());
    if (pred == labels[i]) ++correct;
    const auto& tv = targets[i]->values();
    for (std::size_t j = 0; j < tv.size(); ++j) {
      const double d = feat[j] - tv[j];
      se += d * d;
    }
  }
  EvalResult r;
  r.accuracy = static_cast<double>(correct) / static_cast<double>(inputs.size());
  r.ce = 1.0 - r.accuracy;
  r.mse = se / (numel * static_cast<double>(inputs.size()));
  return r;
}

}  // namespace

// --- basic model pieces ------------------------------------------------

std::string ConfigPoint::str() const {
  return "(" + resolution.str() + ")/(" + measurements.str() + ")";
}

TensorShape SynthesisOperator::output_shape() const {
  std::vector<std::size_t> dims;
  dims.reserve(factors.size());
  for (const auto& f : factors) dims.push_back(f.rows);
  return TensorShape{std::move(dims)};
}

void MclModel::validate() const {
  const std::size_t K = config.resolution.order();
  if (config.measurements.order() != K)
    throw std::invalid_argument("config: I and M orders differ");
  if (cs.factors.size() != K || fs.factors.size() != K)
    throw std::invalid_argument("model: factor count must equal tensor order");
  for (std::size_t k = 0; k < K; ++k) {
    if (cs.factors[k].rows != config.measurements.dims[k] ||
        cs.factors[k].cols != config.resolution.dims[k])
      throw std::invalid_argument("model: sensing factor " + std::to_string(k + 1) +
                                  " shape is inconsistent with the configuration");
    if (fs.factors[k].cols != config.measurements.dims[k])
      throw std::invalid_argument("model: synthesis factor " + std::to_string(k + 1) +
                                  " columns must equal M_" + std::to_string(k + 1));
  }
  if (head.params.size() != 6) throw std::invalid_argument("model: head has no parameters");
}

DenseTensor sense(const MclModel& m, const DenseTensor& y) {
  if (!(y.shape() == m.config.resolution))
    throw std::invalid_argument("sense: input shape " + y.shape().str() +
                                " does not match configured resolution " +
                                m.config.resolution.str());
  return multilinear_map(y, m.cs.factors);
}

DenseTensor synthesize(const MclModel& m, const DenseTensor& z) {
  if (!(z.shape() == m.config.measurements))
    throw std::invalid_argument("synthesize: input shape " + z.shape().str() +
                                " does not match measurement dims " +
                                m.config.measurements.str());
  return multilinear_map(z, m.fs.factors);
}

std::vector<double> forward(const MclModel& m, const DenseTensor& y) {
  HeadCache cache;
  head_forward(m.head, synthesize(m, sense(m, y)), cache);
  return cache.scores;
}

std::vector<double> softmax(std::span<const double> scores) {
  const double hi = *std::max_element(scores.begin(), scores.end());
  std::vector<double> p(scores.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    p[i] = std::exp(scores[i] - hi);
    sum += p[i];
  }
  for (double& v : p) v /= sum;
  return p;
}

TaskHead TaskHead::create(const TensorShape& input_shape, std::size_t class_count,
                          std::uint64_t seed) {
  if (class_count < 2) throw std::invalid_argument("task head needs at least 2 classes");
  const HeadDims d = head_dims(input_shape);
  Rng rng(seed);
  TaskHead head;
  head.class_count = class_count;

  auto gaussian_tensor = [&rng](TensorShape shape, double std_dev) {
    DenseTensor t(std::move(shape));
    for (double& x : t.values()) x = std_dev * rng.gaussian();
    return t;
  };

  head.params.push_back(
      gaussian_tensor({kConv1Channels, d.C, 3, 3}, std::sqrt(2.0 / (9.0 * double(d.C)))));
  head.params.emplace_back(TensorShape{kConv1Channels});
  head.params.push_back(gaussian_tensor({kConv2Channels, kConv1Channels, 3, 3},
                                        std::sqrt(2.0 / (9.0 * double(kConv1Channels)))));
  head.params.emplace_back(TensorShape{kConv2Channels});
  head.params.push_back(
      gaussian_tensor({class_count, kConv2Channels}, std::sqrt(1.0 / double(kConv2Channels))));
  head.params.emplace_back(TensorShape{class_count});
  return head;
}

// --- objectives ---------------------------------------------------------

double reconstruction_loss(const SensingOperator& cs, const SynthesisOperator& fs,
                           std::span<const DenseTensor> inputs,
                           std::span<const DenseTensor> targets,
                           std::vector<std::span<double>>* grads) {
  if (inputs.empty() || inputs.size() != targets.size())
    throw std::invalid_argument("reconstruction loss: empty or mismatched batch");
  const std::size_t K = cs.factors.size();
  const auto batch = static_cast<double>(inputs.size());
  const auto numel = static_cast<double>(targets.front().numel());

  std::vector<FactorMatrix> theta_t;
  if (grads) theta_t = transposed_all(fs.factors);

  double loss = 0.0;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    const DenseTensor z = multilinear_map(inputs[i], cs.factors);
    DenseTensor feat = multilinear_map(z, fs.factors);
    for (std::size_t j = 0; j < feat.numel(); ++j) feat[j] -= targets[i][j];
    double se = 0.0;
    for (double v : feat.values()) se += v * v;
    loss += se / (numel * batch);

    if (grads) {
      // feat now holds the residual; scale it into dL/dT.
      for (double& v : feat.values()) v *= 2.0 / (numel * batch);
      for (std::size_t k = 0; k < K; ++k)
        accumulate_factor_grad(feat, multilinear_except(z, fs.factors, k), k + 1,
                               (*grads)[K + k]);
      const DenseTensor dz = multilinear_map(feat, theta_t);
      for (std::size_t k = 0; k < K; ++k)
        accumulate_factor_grad(dz, multilinear_except(inputs[i], cs.factors, k), k + 1,
                               (*grads)[k]);
    }
  }
  return loss;
}

double pipeline_cross_entropy(const MclModel& m, std::span<const DenseTensor> inputs,
                              std::span<const std::size_t> labels,
                              std::vector<std::span<double>>* grads) {
  if (inputs.empty() || inputs.size() != labels.size())
    throw std::invalid_argument("pipeline cross-entropy: empty or mismatched batch");
  const std::size_t K = m.cs.factors.size();
  const auto batch = static_cast<double>(inputs.size());

  std::vector<FactorMatrix> theta_t;
  if (grads) theta_t = transposed_all(m.fs.factors);

  double loss = 0.0;
  HeadCache cache;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    const DenseTensor z = multilinear_map(inputs[i], m.cs.factors);
    const DenseTensor feat = multilinear_map(z, m.fs.factors);
    head_forward(m.head, feat, cache);
    const std::vector<double> p = softmax(cache.scores);
    loss -= safe_log_prob(p[labels[i]]) / batch;

    if (grads) {
      std::vector<double> dscores(p);
      dscores[labels[i]] -= 1.0;
      for (double& v : dscores) v /= batch;

      std::span<std::span<double>> head_grads(grads->data() + 2 * K, 6);
      std::vector<double> din =
          head_backward(m.head, feat, cache, dscores, head_grads, true);
      const DenseTensor dfeat(feat.shape(), std::move(din));

      for (std::size_t k = 0; k < K; ++k)
        accumulate_factor_grad(dfeat, multilinear_except(z, m.fs.factors, k), k + 1,
                               (*grads)[K + k]);
      const DenseTensor dz = multilinear_map(dfeat, theta_t);
      for (std::size_t k = 0; k < K; ++k)
        accumulate_factor_grad(dz, multilinear_except(inputs[i], m.cs.factors, k), k + 1,
                               (*grads)[k]);
    }
  }
  return loss;
}

double head_cross_entropy(const TaskHead& head, std::span<const DenseTensor> inputs,
                          std::span<const std::size_t> labels,
                          std::vector<std::span<double>>* grads) {
  if (inputs.empty() || inputs.size() != labels.size())
    throw std::invalid_argument("head cross-entropy: empty or mismatched batch");
  const auto batch = static_cast<double>(inputs.size());
  double loss = 0.0;
  HeadCache cache;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    head_forward(head, inputs[i], cache);
    const std::vector<double> p = softmax(cache.scores);
    loss -= safe_log_prob(p[labels[i]]) / batch;
    if (grads) {
      std::vector<double> dscores(p);
      dscores[labels[i]] -= 1.0;
      for (double& v : dscores) v /= batch;
      std::span<std::span<double>> head_grads(grads->data(), 6);
      head_backward(head, inputs[i], cache, dscores, head_grads, false);
    }
  }
  return loss;
}

std::vector<std::span<double>> parameter_spans(SensingOperator& cs, SynthesisOperator& fs) {
  std::vector<std::span<double>> out;
  for (auto& f : cs.factors) out.emplace_back(f.data);
  for (auto& f : fs.factors) out.emplace_back(f.data);
  return out;
}

std::vector<std::span<double>> parameter_spans(TaskHead& head) {
  std::vector<std::span<double>> out;
  for (auto& p : head.params) out.emplace_back(p.values());
  return out;
}

std::vector<std::span<double>> parameter_spans(MclModel& m) {
  std::vector<std::span<double>> out = parameter_spans(m.cs, m.fs);
  for (auto& p : m.head.params) out.emplace_back(p.values());
  return out;
}

// --- initialization ------------------------------------------------------

InitPair init_hosvd(const LabeledDataset& trainset, const ConfigPoint& config) {
  trainset.validate();
  if (trainset.split.train.empty())
    throw std::invalid_argument("init_hosvd: training split is empty");
  const TensorShape& shape = trainset.sample_shape();
  if (!(config.resolution == shape))
    throw std::invalid_argument("init_hosvd: applies only at the dataset resolution " +
                                shape.str() + ", configured " + config.resolution.str());
  const std::size_t K = shape.order();
  if (config.measurements.order() != K)
    throw std::invalid_argument("init_hosvd: M order differs from tensor order");
  for (std::size_t k = 0; k < K; ++k)
    if (config.measurements.dims[k] > shape.dims[k])
      throw std::invalid_argument("init_hosvd: M_" + std::to_string(k + 1) +
                                  " exceeds the mode extent");

  InitPair out;
  for (std::size_t k = 0; k < K; ++k) {
    FactorMatrix gram(shape.dims[k], shape.dims[k]);
    for (std::size_t i : trainset.split.train)
      accumulate_gram(trainset.samples[i], k + 1, gram);
    FactorMatrix phi = leading_eigenvectors(gram, config.measurements.dims[k]);
    out.fs.factors.push_back(phi.transposed());
    out.cs.factors.push_back(std::move(phi));
  }
  return out;
}

ReconInitResult init_reconstruction(const LabeledDataset& ds, const ConfigPoint& config,
                                    const OptimizerConfig& opt) {
  ds.validate();
  if (ds.split.train.empty())
    throw std::invalid_argument("init_reconstruction: training split is empty");
  const TensorShape& full = ds.sample_shape();
  const std::size_t K = full.order();
  if (config.resolution.order() != K || config.measurements.order() != K)
    throw std::invalid_argument("init_reconstruction: config order differs from data order");

  ReconInitResult res;
  if (config.resolution == full) {
    InitPair ip = init_hosvd(ds, config);
    res.cs = std::move(ip.cs);
    res.fs = std::move(ip.fs);
  } else {
    // No HOSVD start below full resolution; scaled Gaussian instead.
    Rng rng(derive_seed(opt.seed, 0x11d0));
    for (std::size_t k = 0; k < K; ++k) {
      FactorMatrix phi(config.measurements.dims[k], config.resolution.dims[k]);
      const double phi_std = 1.0 / std::sqrt(static_cast<double>(phi.cols));
      for (double& x : phi.data) x = phi_std * rng.gaussian();
      res.cs.factors.push_back(std::move(phi));

      FactorMatrix theta(full.dims[k], config.measurements.dims[k]);
      const double theta_std = 1.0 / std::sqrt(static_cast<double>(theta.cols));
      for (double& x : theta.data) x = theta_std * rng.gaussian();
      res.fs.factors.push_back(std::move(theta));
    }
  }

  const std::vector<DenseTensor> inputs =
      gather_downsampled(ds, ds.split.train, config.resolution);
  std::vector<const DenseTensor*> targets;
  targets.reserve(ds.split.train.size());
  for (std::size_t i : ds.split.train) targets.push_back(&ds.samples[i]);

  Rng rng(derive_seed(opt.seed, 0x5c0f));
  const std::vector<std::span<double>> params = parameter_spans(res.cs, res.fs);
  run_epochs(
      opt, inputs.size(), rng, params,
      [&](std::span<const std::size_t> batch, std::vector<std::span<double>>* grads) {
        std::vector<DenseTensor> bi, bt;
        bi.reserve(batch.size());
        bt.reserve(batch.size());
        for (std::size_t j : batch) {
          bi.push_back(inputs[j]);
          bt.push_back(*targets[j]);
        }
        return reconstruction_loss(res.cs, res.fs, bi, bt, grads);
      },
      [&](std::size_t, double mean_loss) { res.epoch_mse.push_back(mean_loss); });
  return res;
}

TaskHead init_task_head(const LabeledDataset& ds, const OptimizerConfig& opt) {
  ds.validate();
  if (ds.split.train.empty())
    throw std::invalid_argument("init_task_head: training split is empty");
  TaskHead head = TaskHead::create(ds.sample_shape(), ds.class_count, opt.seed);

  Rng rng(derive_seed(opt.seed, 0x7eAd));
  const std::vector<std::span<double>> params = parameter_spans(head);
  run_epochs(
      opt, ds.split.train.size(), rng, params,
      [&](std::span<const std::size_t> batch, std::vector<std::span<double>>* grads) {
        std::vector<DenseTensor> bi;
        std::vector<std::size_t> bl;
        bi.reserve(batch.size());
        bl.reserve(batch.size());
        for (std::size_t j : batch) {
          bi.push_back(ds.samples[ds.split.train[j]]);
          bl.push_back(ds.labels[ds.split.train[j]]);
        }
        return head_cross_entropy(head, bi, bl, grads);
      },
      [](std::size_t, double) {});
  return head;
}

MclModel train_joint(const MclModel& m, const LabeledDataset& ds, const OptimizerConfig& opt) {
  m.validate();
  ds.validate();
  MclModel cur = m;
  if (opt.epochs == 0) return cur;
  if (ds.split.train.empty())
    throw std::invalid_argument("train_joint: training split is empty");

  const std::vector<DenseTensor> train_in =
      gather_downsampled(ds, ds.split.train, cur.config.resolution);
  std::vector<std::size_t> train_labels;
  train_labels.reserve(ds.split.train.size());
  for (std::size_t i : ds.split.train) train_labels.push_back(ds.labels[i]);

  const std::vector<DenseTensor> val_in =
      gather_downsampled(ds, ds.split.val, cur.config.resolution);
  std::vector<const DenseTensor*> val_targets;
  std::vector<std::size_t> val_labels;
  for (std::size_t i : ds.split.val) {
    val_targets.push_back(&ds.samples[i]);
    val_labels.push_back(ds.labels[i]);
  }

  auto val_accuracy = [&]() {
    if (val_in.empty()) return -1.0;
    return evaluate_prepared(cur, val_in, val_targets, val_labels).accuracy;
  };

  MclModel best = cur;
  double best_acc = val_accuracy();

  Rng rng(derive_seed(opt.seed, 0x201f));
  const std::vector<std::span<double>> params = parameter_spans(cur);
  run_epochs(
      opt, train_in.size(), rng, params,
      [&](std::span<const std::size_t> batch, std::vector<std::span<double>>* grads) {
        std::vector<DenseTensor> bi;
        std::vector<std::size_t> bl;
        bi.reserve(batch.size());
        bl.reserve(batch.size());
        for (std::size_t j : batch) {
          bi.push_back(train_in[j]);
          bl.push_back(train_labels[j]);
        }
        return pipeline_cross_entropy(cur, bi, bl, grads);
      },
      [&](std::size_t, double) {
        const double acc = val_accuracy();
        if (acc > best_acc) {
          best_acc = acc;
          best = cur;
        }
      });

  // Without a validation split the final parameters stand.
  return val_in.empty() ? cur : best;
}

double reconstruction_mse(const SensingOperator& cs, const SynthesisOperator& fs,
                          const LabeledDataset& ds, std::span<const std::size_t> indices,
                          const TensorShape& resolution) {
  if (indices.empty()) throw std::invalid_argument("reconstruction_mse: empty split");
  double se = 0.0;
  const auto numel = static_cast<double>(ds.sample_shape().numel());
  for (std::size_t i : indices) {
    const DenseTensor x = downsample(ds.samples[i], resolution);
    const DenseTensor feat = multilinear_map(multilinear_map(x, cs.factors), fs.factors);
    const auto& tv = ds.samples[i].values();
    for (std::size_t j = 0; j < tv.size(); ++j) {
      const double d = feat[j] - tv[j];
      se += d * d;
    }
  }
  return se / (numel * static_cast<double>(indices.size()));
}

EvalResult evaluate(const MclModel& m, const LabeledDataset& ds,
                    std::span<const std::size_t> indices) {
  if (indices.empty()) throw std::invalid_argument("evaluate: empty split");
  const std::vector<DenseTensor> inputs = gather_downsampled(ds, indices, m.config.resolution);
  std::vector<const DenseTensor*> targets;
  std::vector<std::size_t> labels;
  targets.reserve(indices.size());
  labels.reserve(indices.size());
  for (std::size_t i : indices) {
    targets.push_back(&ds.samples[i]);
    labels.push_back(ds.labels[i]);
  }
  return evaluate_prepared(m, inputs, targets, labels);
}

// --- checkpoint -----------------------------------------------------------

namespace {

void put_factor(std::ostream& os, const FactorMatrix& f) {
  wire::put_u32(os, static_cast<std::uint32_t>(f.rows));
  wire::put_u32(os, static_cast<std::uint32_t>(f.cols));
  for (double x : f.data) wire::put_f64(os, x);
}

FactorMatrix get_factor(std::istream& is) {
  const std::uint32_t rows = wire::get_u32(is, "factor rows");
  const std::uint32_t cols = wire::get_u32(is, "factor cols");
  FactorMatrix f(rows, cols);
  for (double& x : f.data) x = wire::get_f64(is, "factor data");
  return f;
}

}  // namespace

void save_model(const std::filesystem::path& path, const MclModel& m) {
  m.validate();
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open " + path.string() + " for writing");
  wire::put_magic(os, "MCLM");
  wire::put_u32(os, 1);
  const std::size_t K = m.config.resolution.order();
  wire::put_u32(os, static_cast<std::uint32_t>(K));
  for (std::size_t d : m.config.resolution.dims) wire::put_u32(os, static_cast<std::uint32_t>(d));
  for (std::size_t d : m.config.measurements.dims)
    wire::put_u32(os, static_cast<std::uint32_t>(d));
  wire::put_u32(os, static_cast<std::uint32_t>(m.head.class_count));
  for (const auto& f : m.cs.factors) put_factor(os, f);
  for (const auto& f : m.fs.factors) put_factor(os, f);
  wire::put_u32(os, static_cast<std::uint32_t>(m.head.params.size()));
  for (const auto& p : m.head.params) {
    wire::put_u32(os, static_cast<std::uint32_t>(p.order()));
    for (std::size_t d : p.shape().dims) wire::put_u32(os, static_cast<std::uint32_t>(d));
    for (double x : p.values()) wire::put_f64(os, x);
  }
  if (!os) throw std::runtime_error("write failed for " + path.string());
}

MclModel load_model(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open " + path.string());
  wire::check_magic(is, "MCLM", path.string());
  const std::uint32_t version = wire::get_u32(is, "version");
  if (version != 1)
    throw std::runtime_error(path.string() + ": unsupported checkpoint version " +
                             std::to_string(version));
  const std::uint32_t K = wire::get_u32(is, "order");
  MclModel m;
  std::vector<std::size_t> rdims(K), mdims(K);
  for (auto& d : rdims) d = wire::get_u32(is, "resolution");
  for (auto& d : mdims) d = wire::get_u32(is, "measurements");
  m.config.resolution = TensorShape{std::move(rdims)};
  m.config.measurements = TensorShape{std::move(mdims)};
  m.head.class_count = wire::get_u32(is, "class count");
  for (std::uint32_t k = 0; k < K; ++k) m.cs.factors.push_back(get_factor(is));
  for (std::uint32_t k = 0; k < K; ++k) m.fs.factors.push_back(get_factor(is));
  const std::uint32_t n_params = wire::get_u32(is, "head param count");
  for (std::uint32_t i = 0; i < n_params; ++i) {
    const std::uint32_t order = wire::get_u32(is, "param order");
    std::vector<std::size_t> dims(order);
    for (auto& d : dims) d = wire::get_u32(is, "param dims");
    DenseTensor t{TensorShape{std::move(dims)}};
    for (double& x : t.values()) x = wire::get_f64(is, "param data");
    m.head.params.push_back(std::move(t));
  }
  m.validate();
  return m;
}

}  // namespace mcl
