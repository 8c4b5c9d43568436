#include "metagen/model.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace metagen {
namespace {

void check_input(const MlpParams& params, const Eigen::VectorXd& x) {
  if (static_cast<std::size_t>(x.size()) != params.shape.input_dim()) {
    throw std::invalid_argument("forward: input has dimension " + std::to_string(x.size()) +
                                ", network expects " +
                                std::to_string(params.shape.input_dim()));
  }
}

// Forward pass keeping every layer's pre-activation and activation.
struct Trace {
  std::vector<Eigen::VectorXd> pre;   // per layer
  std::vector<Eigen::VectorXd> post;  // post[0] = input, post[l+1] = act(pre[l])
};

void run_forward(const MlpParams& params, const Eigen::VectorXd& x, Trace& trace) {
  const std::size_t layers = params.shape.layers();
  trace.pre.resize(layers);
  trace.post.resize(layers + 1);
  trace.post[0] = x;
  for (std::size_t l = 0; l < layers; ++l) {
    trace.pre[l].noalias() = params.weight(l) * trace.post[l];
    trace.pre[l] += params.bias(l);
    const bool hidden = l + 1 < layers;
    if (hidden && params.shape.hidden == Activation::kReLU) {
      trace.post[l + 1] = trace.pre[l].cwiseMax(0.0);
    } else {
      trace.post[l + 1] = trace.pre[l];
    }
  }
}

double log_sum_exp(const Eigen::VectorXd& z) {
  const double top = z.maxCoeff();
  return top + std::log((z.array() - top).exp().sum());
}

// Loss over the batch; optionally records the sign pattern of every hidden
// ReLU pre-activation.
double batch_loss(const MlpParams& params, std::span<const LabeledExample> batch,
                  std::vector<bool>* gates) {
  Trace trace;
  double total = 0.0;
  if (gates) gates->clear();
  for (std::size_t b = 0; b < batch.size(); ++b) {
    check_input(params, batch[b].features);
    run_forward(params, batch[b].features, trace);
    const Eigen::VectorXd& z = trace.post.back();
    total += log_sum_exp(z) - z(batch[b].label);
    if (gates && params.shape.hidden == Activation::kReLU) {
      for (std::size_t l = 0; l + 1 < params.shape.layers(); ++l) {
        for (Eigen::Index u = 0; u < trace.pre[l].size(); ++u) {
          gates->push_back(trace.pre[l](u) > 0.0);
        }
      }
    }
  }
  return total / static_cast<double>(batch.size());
}

}  // namespace

std::size_t MlpShape::parameter_count() const {
  std::size_t n = 0;
  for (std::size_t l = 0; l < layers(); ++l) n += widths[l + 1] * (widths[l] + 1);
  return n;
}

std::size_t MlpShape::weight_offset(std::size_t layer) const {
  std::size_t off = 0;
  for (std::size_t l = 0; l < layer; ++l) off += widths[l + 1] * (widths[l] + 1);
  return off;
}

std::size_t MlpShape::bias_offset(std::size_t layer) const {
  return weight_offset(layer) + widths[layer + 1] * widths[layer];
}

MlpShape make_mlp_shape(std::size_t input, std::size_t hidden, std::size_t output,
                        std::size_t layers, Activation act) {
  if (layers == 0 || input == 0 || output == 0 || (layers > 1 && hidden == 0)) {
    throw std::invalid_argument("make_mlp_shape: all widths and the layer count must be >= 1");
  }
  MlpShape shape;
  shape.hidden = act;
  shape.widths.push_back(input);
  for (std::size_t l = 0; l + 1 < layers; ++l) shape.widths.push_back(hidden);
  shape.widths.push_back(output);
  return shape;
}

Eigen::Map<const Eigen::MatrixXd> MlpParams::weight(std::size_t layer) const {
  return {values.data() + shape.weight_offset(layer),
          static_cast<Eigen::Index>(shape.widths[layer + 1]),
          static_cast<Eigen::Index>(shape.widths[layer])};
}

Eigen::Map<Eigen::MatrixXd> MlpParams::weight(std::size_t layer) {
  return {values.data() + shape.weight_offset(layer),
          static_cast<Eigen::Index>(shape.widths[layer + 1]),
          static_cast<Eigen::Index>(shape.widths[layer])};
}

Eigen::Map<const Eigen::VectorXd> MlpParams::bias(std::size_t layer) const {
  return {values.data() + shape.bias_offset(layer),
          static_cast<Eigen::Index>(shape.widths[layer + 1])};
}

Eigen::Map<Eigen::VectorXd> MlpParams::bias(std::size_t layer) {
  return {values.data() + shape.bias_offset(layer),
          static_cast<Eigen::Index>(shape.widths[layer + 1])};
}

MlpParams zero_params(const MlpShape& shape) {
  return {shape, Eigen::VectorXd::Zero(static_cast<Eigen::Index>(shape.parameter_count()))};
}

MlpParams init_params(const MlpShape& shape, Rng& rng) {
  MlpParams p = zero_params(shape);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (std::size_t l = 0; l < shape.layers(); ++l) {
    const double scale = 1.0 / std::sqrt(static_cast<double>(shape.widths[l]));
    auto w = p.weight(l);
    for (Eigen::Index c = 0; c < w.cols(); ++c) {
      for (Eigen::Index r = 0; r < w.rows(); ++r) w(r, c) = scale * normal(rng);
    }
  }
  return p;
}

Eigen::VectorXd forward(const MlpParams& params, const Eigen::VectorXd& x) {
  check_input(params, x);
  Trace trace;
  run_forward(params, x, trace);
  return trace.post.back();
}

double cross_entropy(const MlpParams& params, std::span<const LabeledExample> batch) {
  if (batch.empty()) throw std::invalid_argument("cross_entropy: empty batch");
  return batch_loss(params, batch, nullptr);
}

LossGrad loss_and_grad(const MlpParams& params, std::span<const LabeledExample> batch) {
  if (batch.empty()) throw std::invalid_argument("loss_and_grad: empty batch");
  const std::size_t layers = params.shape.layers();
  const double inv_batch = 1.0 / static_cast<double>(batch.size());

  MlpParams grad = zero_params(params.shape);
  double total = 0.0;
  Trace trace;
  Eigen::VectorXd delta;
  for (std::size_t b = 0; b < batch.size(); ++b) {
    const LabeledExample& ex = batch[b];
    check_input(params, ex.features);
    if (ex.label < 0 || static_cast<std::size_t>(ex.label) >= params.shape.output_dim()) {
      throw std::invalid_argument("loss_and_grad: label " + std::to_string(ex.label) +
                                  " outside the output head");
    }
    run_forward(params, ex.features, trace);
    const Eigen::VectorXd& z = trace.post.back();
    const double lse = log_sum_exp(z);
    const double loss = lse - z(ex.label);
    if (!std::isfinite(loss)) {
      throw NonFiniteLossError(b, "loss_and_grad: non-finite loss at batch index " +
                                      std::to_string(b));
    }
    total += loss;

    // dL/dz = softmax(z) - onehot(label)
    delta = (z.array() - lse).exp().matrix();
    delta(ex.label) -= 1.0;
    for (std::size_t l = layers; l-- > 0;) {
      grad.weight(l).noalias() += inv_batch * delta * trace.post[l].transpose();
      grad.bias(l) += inv_batch * delta;
      if (l == 0) break;
      Eigen::VectorXd back = params.weight(l).transpose() * delta;
      if (params.shape.hidden == Activation::kReLU) {
        back.array() *= (trace.pre[l - 1].array() > 0.0).cast<double>();
      }
      delta = std::move(back);
    }
  }
  return {total * inv_batch, std::move(grad.values)};
}

int zero_one_loss(const MlpParams& params, const LabeledExample& example) {
  const Eigen::VectorXd z = forward(params, example.features);
  Eigen::Index best = 0;
  for (Eigen::Index k = 1; k < z.size(); ++k) {
    if (z(k) > z(best)) best = k;
  }
  return best == example.label ? 0 : 1;
}

GradCheckResult grad_check(const MlpParams& params, std::span<const LabeledExample> batch,
                           double eps) {
  return grad_check(params, batch, eps, loss_and_grad(params, batch).grad);
}

GradCheckResult grad_check(const MlpParams& params, std::span<const LabeledExample> batch,
                           double eps, const Eigen::VectorXd& analytic) {
  if (!(eps > 0.0 && eps <= 1e-3)) {
    throw std::invalid_argument("grad_check: eps must lie in (0, 1e-3]");
  }
  if (analytic.size() != params.values.size()) {
    throw std::invalid_argument("grad_check: gradient has the wrong length");
  }
  GradCheckResult result;
  std::vector<bool> base_gates, plus_gates, minus_gates;
  batch_loss(params, batch, &base_gates);

  MlpParams probe = params;
  for (Eigen::Index k = 0; k < probe.values.size(); ++k) {
    const double saved = probe.values(k);
    probe.values(k) = saved + eps;
    const double up = batch_loss(probe, batch, &plus_gates);
    probe.values(k) = saved - eps;
    const double down = batch_loss(probe, batch, &minus_gates);
    probe.values(k) = saved;
    if (plus_gates != base_gates || minus_gates != base_gates) {
      ++result.skipped_kinks;
      continue;
    }
    const double numeric = (up - down) / (2.0 * eps);
    const double abs_err = std::abs(numeric - analytic(k));
    const double denom = std::max({std::abs(numeric), std::abs(analytic(k)), kGradCheckFloor});
    result.max_abs_error = std::max(result.max_abs_error, abs_err);
    result.max_rel_error = std::max(result.max_rel_error, abs_err / denom);
    ++result.checked;
  }
  return result;
}

}  // namespace metagen
