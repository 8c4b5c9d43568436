#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "metagen/model.hpp"
#include "metagen/rng.hpp"
#include "metagen/tasks.hpp"

namespace metagen {

// Per-iteration value; t is 1-based and the last entry repeats past the end.
struct Schedule {
  std::vector<double> values{0.0};

  static Schedule constant(double v) { return Schedule{{v}}; }
  double at(std::size_t t) const;
};

struct AdaptConfig {
  std::size_t steps = 10;   // k
  double step_size = 0.1;
  double sigma = 0.0;       // 0 => plain gradient descent
};

struct SgldConfig {
  std::size_t iterations = 100;  // T
  Schedule eta = Schedule::constant(0.1);
  Schedule sigma = Schedule::constant(1e-3);
  std::size_t task_batch = 1;    // |I_t|
  std::size_t sample_batch = 1;  // |J_i|
  AdaptConfig adapt;
  bool track_covariance = true;
  std::size_t cov_resamples = 16;  // B
  std::size_t cov_max_dim = 512;   // raw samples kept only up to this stacked dimension
};

struct MamlConfig : SgldConfig {
  Schedule beta = Schedule::constant(0.1);
  std::size_t m_train = 1;
  std::size_t m_test = 1;
};

class DivergenceError : public std::runtime_error {
 public:
  DivergenceError(std::size_t step, const std::string& what)
      : std::runtime_error(what), step_(step) {}
  std::size_t step() const { return step_; }

 private:
  std::size_t step_;
};

// Monte-Carlo gradient resamples for one stacked gradient block. The B x B
// centered Gram matrix is always kept; it determines log|c*Cov + I| exactly
// at any stacked dimension. Raw samples are kept when dim <= cov_max_dim.
struct GradientBlock {
  std::size_t dim = 0;
  std::size_t resamples = 0;
  Eigen::MatrixXd gram;     // Xc Xc^T / (B-1)
  Eigen::MatrixXd samples;  // B x dim, possibly empty

  bool has_samples() const { return samples.size() > 0; }
  // dim x dim empirical covariance; requires retained samples.
  Eigen::MatrixXd covariance() const;
};

GradientBlock make_gradient_block(const Eigen::MatrixXd& samples, std::size_t max_dim);

struct GradientStep {
  double eta = 0.0;
  double sigma = 0.0;
  std::optional<double> beta;
  std::vector<std::size_t> task_batch;  // I_t
  // Joint mode: one block over (|I_t|+1)*d. MAML mode: inner block over
  // |I_t|*d followed by the outer block over d.
  std::vector<GradientBlock> blocks;
};

enum class TrajectoryMode { kJoint, kMaml };

struct GradientTrajectory {
  TrajectoryMode mode = TrajectoryMode::kJoint;
  std::size_t param_dim = 0;  // d
  std::vector<GradientStep> steps;
};

// Rows are independent draws of draw(rng).
Eigen::MatrixXd sample_gradients(const std::function<Eigen::VectorXd(Rng&)>& draw,
                                 std::size_t resamples, Rng& rng);
Eigen::MatrixXd empirical_covariance(const Eigen::MatrixXd& samples);
Eigen::MatrixXd estimate_step_covariance(const std::function<Eigen::VectorXd(Rng&)>& draw,
                                         std::size_t resamples, Rng& rng);

struct JointSgldResult {
  MlpParams meta;
  std::vector<MlpParams> task_params;
  GradientTrajectory trajectory;
};

// Joint SGLD: U and the selected W_i move together with
//   G_{W_i} = -grad of W_i's batch loss,  G_U = mean_{i in I_t} G_{W_i},
// plus isotropic N(0, sigma_t^2) noise on every updated coordinate.
JointSgldResult joint_sgld_train(std::span<const TaskSamples> meta_train, const MlpParams& init,
                                 const SgldConfig& cfg, Rng& rng);

struct MamlResult {
  MlpParams meta;
  GradientTrajectory trajectory;
};

// Noisy first-order MAML. Each task's first m_train samples form its in-task
// training split and the remaining m_test its in-task test split.
MamlResult maml_noisy_train(std::span<const TaskSamples> meta_train, const MlpParams& init,
                            const MamlConfig& cfg, Rng& rng);

// k full-batch (noisy) descent steps starting from W = U.
MlpParams adapt_task(const MlpParams& meta, std::span<const LabeledExample> task_train,
                     const AdaptConfig& cfg, Rng& rng);

}  // namespace metagen
