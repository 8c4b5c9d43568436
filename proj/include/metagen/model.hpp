#pragma once

#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "metagen/rng.hpp"
#include "metagen/tasks.hpp"

namespace metagen {

// Fully-connected network with a fixed activation on hidden layers and a
// linear output layer producing logits.

enum class Activation { kReLU, kIdentity };

struct MlpShape {
  std::vector<std::size_t> widths;  // input, hidden..., output
  Activation hidden = Activation::kReLU;

  std::size_t layers() const { return widths.size() - 1; }
  std::size_t input_dim() const { return widths.front(); }
  std::size_t output_dim() const { return widths.back(); }
  std::size_t parameter_count() const;
  // Offset of layer l's weight block (out x in, column-major) followed by its bias.
  std::size_t weight_offset(std::size_t layer) const;
  std::size_t bias_offset(std::size_t layer) const;

  bool operator==(const MlpShape&) const = default;
};

// `layers` weight layers: input -> hidden x (layers-1) -> output.
MlpShape make_mlp_shape(std::size_t input, std::size_t hidden, std::size_t output,
                        std::size_t layers = 4, Activation act = Activation::kReLU);

// Parameters live in one flat vector so that noise injection, gradient
// stacking and covariance estimation act on a single contiguous block.
struct MlpParams {
  MlpShape shape;
  Eigen::VectorXd values;

  Eigen::Map<const Eigen::MatrixXd> weight(std::size_t layer) const;
  Eigen::Map<Eigen::MatrixXd> weight(std::size_t layer);
  Eigen::Map<const Eigen::VectorXd> bias(std::size_t layer) const;
  Eigen::Map<Eigen::VectorXd> bias(std::size_t layer);

  bool all_finite() const { return values.allFinite(); }
};

MlpParams zero_params(const MlpShape& shape);
// Weights ~ N(0, 1/fan_in), biases zero.
MlpParams init_params(const MlpShape& shape, Rng& rng);

class NonFiniteLossError : public std::runtime_error {
 public:
  NonFiniteLossError(std::size_t index, const std::string& what)
      : std::runtime_error(what), index_(index) {}
  std::size_t example_index() const { return index_; }

 private:
  std::size_t index_;
};

Eigen::VectorXd forward(const MlpParams& params, const Eigen::VectorXd& x);

struct LossGrad {
  double loss = 0.0;
  Eigen::VectorXd grad;  // same layout as MlpParams::values
};

// Mean softmax cross-entropy over the batch and its exact gradient.
LossGrad loss_and_grad(const MlpParams& params, std::span<const LabeledExample> batch);
double cross_entropy(const MlpParams& params, std::span<const LabeledExample> batch);

// 0 iff argmax(logits) == label; ties go to the lowest class index.
int zero_one_loss(const MlpParams& params, const LabeledExample& example);

struct GradCheckResult {
  double max_rel_error = 0.0;
  double max_abs_error = 0.0;
  std::size_t checked = 0;
  // Coordinates whose +/- eps perturbation flips a ReLU gate somewhere in
  // the batch; the loss is not differentiable across that interval.
  std::size_t skipped_kinks = 0;
};

// Relative error uses max(|analytic|, |numeric|, kGradCheckFloor) as the
// denominator.
inline constexpr double kGradCheckFloor = 1e-4;

GradCheckResult grad_check(const MlpParams& params, std::span<const LabeledExample> batch,
                           double eps);
// Compares an externally supplied gradient against central differences.
GradCheckResult grad_check(const MlpParams& params, std::span<const LabeledExample> batch,
                           double eps, const Eigen::VectorXd& analytic);

}  // namespace metagen
