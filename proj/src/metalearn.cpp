#include "metagen/metalearn.hpp"

#include <algorithm>
#include <numeric>
#include <string>

namespace metagen {
namespace {

// Sorted uniform subset of {0..population-1} of the given size.
std::vector<std::size_t> random_subset(std::size_t population, std::size_t size, Rng& rng) {
  std::vector<std::size_t> idx(population);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  size = std::min(size, population);
  for (std::size_t k = 0; k < size; ++k) {
    const std::size_t pick = std::uniform_int_distribution<std::size_t>(k, population - 1)(rng);
    std::swap(idx[k], idx[pick]);
  }
  idx.resize(size);
  std::sort(idx.begin(), idx.end());
  return idx;
}

TaskSamples gather(const TaskSamples& task, std::span<const std::size_t> indices,
                   std::size_t offset = 0) {
  TaskSamples out;
  out.reserve(indices.size());
  for (std::size_t j : indices) out.push_back(task[offset + j]);
  return out;
}

Eigen::VectorXd batch_gradient(const MlpParams& at, const TaskSamples& task,
                               std::size_t population, std::size_t batch, std::size_t offset,
                               Rng& rng) {
  const auto idx = random_subset(population, batch, rng);
  return loss_and_grad(at, gather(task, idx, offset)).grad;
}

void add_noise(Eigen::VectorXd& v, double sigma, Rng& rng) {
  if (sigma == 0.0) return;
  std::normal_distribution<double> normal(0.0, sigma);
  for (Eigen::Index k = 0; k < v.size(); ++k) v(k) += normal(rng);
}

void check_finite(const Eigen::VectorXd& v, std::size_t step, const char* what) {
  if (!v.allFinite()) {
    throw DivergenceError(step, std::string(what) + ": non-finite parameters at step " +
                                    std::to_string(step));
  }
}

void validate(std::span<const TaskSamples> meta_train, const MlpParams& init,
              const SgldConfig& cfg) {
  if (meta_train.empty()) throw std::invalid_argument("trainer: empty meta-training set");
  for (const auto& task : meta_train) {
    if (task.empty()) throw std::invalid_argument("trainer: task without samples");
  }
  if (cfg.task_batch == 0 || cfg.sample_batch == 0) {
    throw std::invalid_argument("trainer: batch sizes must be >= 1");
  }
  if (init.values.size() == 0) throw std::invalid_argument("trainer: empty initial parameters");
  if (cfg.track_covariance && cfg.cov_resamples < 2) {
    throw std::invalid_argument("trainer: covariance tracking needs at least 2 resamples");
  }
}

}  // namespace

double Schedule::at(std::size_t t) const {
  if (values.empty()) return 0.0;
  const std::size_t k = t == 0 ? 0 : t - 1;
  return values[std::min(k, values.size() - 1)];
}

Eigen::MatrixXd GradientBlock::covariance() const {
  if (!has_samples()) {
    throw std::logic_error("GradientBlock: raw samples were not retained (dim " +
                           std::to_string(dim) + ")");
  }
  return empirical_covariance(samples);
}

GradientBlock make_gradient_block(const Eigen::MatrixXd& samples, std::size_t max_dim) {
  if (samples.rows() < 2) {
    throw std::invalid_argument("make_gradient_block: need at least 2 resamples");
  }
  GradientBlock block;
  block.dim = static_cast<std::size_t>(samples.cols());
  block.resamples = static_cast<std::size_t>(samples.rows());
  const Eigen::MatrixXd centered = samples.rowwise() - samples.colwise().mean();
  block.gram = (centered * centered.transpose()) / static_cast<double>(samples.rows() - 1);
  if (block.dim <= max_dim) block.samples = samples;
  return block;
}

Eigen::MatrixXd sample_gradients(const std::function<Eigen::VectorXd(Rng&)>& draw,
                                 std::size_t resamples, Rng& rng) {
  if (resamples < 2) {
    throw std::invalid_argument("sample_gradients: B must be >= 2");
  }
  Eigen::MatrixXd out;
  for (std::size_t b = 0; b < resamples; ++b) {
    const Eigen::VectorXd g = draw(rng);
    if (b == 0) out.resize(static_cast<Eigen::Index>(resamples), g.size());
    out.row(static_cast<Eigen::Index>(b)) = g.transpose();
  }
  return out;
}

Eigen::MatrixXd empirical_covariance(const Eigen::MatrixXd& samples) {
  if (samples.rows() < 2) {
    throw std::invalid_argument("empirical_covariance: need at least 2 samples");
  }
  const Eigen::MatrixXd centered = samples.rowwise() - samples.colwise().mean();
  Eigen::MatrixXd cov = (centered.transpose() * centered) / static_cast<double>(samples.rows() - 1);
  return 0.5 * (cov + cov.transpose());
}

Eigen::MatrixXd estimate_step_covariance(const std::function<Eigen::VectorXd(Rng&)>& draw,
                                         std::size_t resamples, Rng& rng) {
  return empirical_covariance(sample_gradients(draw, resamples, rng));
}

JointSgldResult joint_sgld_train(std::span<const TaskSamples> meta_train, const MlpParams& init,
                                 const SgldConfig& cfg, Rng& rng) {
  validate(meta_train, init, cfg);
  const std::size_t n = meta_train.size();
  const auto d = init.values.size();

  JointSgldResult out{init, std::vector<MlpParams>(n, init), {}};
  out.trajectory.mode = TrajectoryMode::kJoint;
  out.trajectory.param_dim = static_cast<std::size_t>(d);
  // Covariance resampling draws from its own stream so that tracking never
  // changes the trained parameters.
  Rng cov_rng(rng());

  for (std::size_t t = 1; t <= cfg.iterations; ++t) {
    const double eta = cfg.eta.at(t);
    const double sigma = cfg.sigma.at(t);
    const auto tasks = random_subset(n, cfg.task_batch, rng);

    std::vector<Eigen::VectorXd> grads;
    grads.reserve(tasks.size());
    for (std::size_t i : tasks) {
      const auto& data = meta_train[i];
      grads.push_back(batch_gradient(out.task_params[i], data, data.size(),
                                     cfg.sample_batch, 0, rng));
    }

    GradientStep step{eta, sigma, std::nullopt, tasks, {}};
    if (cfg.track_covariance) {
      // Stacked G^t = (G_U, G_{W_i}, i in I_t) at the fixed pre-update state;
      // only the sample batches J_i are redrawn.
      auto draw = [&](Rng& r) {
        Eigen::VectorXd stacked((static_cast<Eigen::Index>(tasks.size()) + 1) * d);
        Eigen::VectorXd mean = Eigen::VectorXd::Zero(d);
        for (std::size_t k = 0; k < tasks.size(); ++k) {
          const auto& data = meta_train[tasks[k]];
          const Eigen::VectorXd g = -batch_gradient(out.task_params[tasks[k]], data,
                                                    data.size(), cfg.sample_batch, 0, r);
          stacked.segment((static_cast<Eigen::Index>(k) + 1) * d, d) = g;
          mean += g;
        }
        stacked.head(d) = mean / static_cast<double>(tasks.size());
        return stacked;
      };
      step.blocks.push_back(make_gradient_block(
          sample_gradients(draw, cfg.cov_resamples, cov_rng), cfg.cov_max_dim));
    }

    Eigen::VectorXd meta_grad = Eigen::VectorXd::Zero(d);
    for (const auto& g : grads) meta_grad += g;
    meta_grad /= static_cast<double>(tasks.size());

    out.meta.values -= eta * meta_grad;
    add_noise(out.meta.values, sigma, rng);
    check_finite(out.meta.values, t, "joint_sgld_train");
    for (std::size_t k = 0; k < tasks.size(); ++k) {
      auto& w = out.task_params[tasks[k]].values;
      w -= eta * grads[k];
      add_noise(w, sigma, rng);
      check_finite(w, t, "joint_sgld_train");
    }
    out.trajectory.steps.push_back(std::move(step));
  }
  return out;
}

MamlResult maml_noisy_train(std::span<const TaskSamples> meta_train, const MlpParams& init,
                            const MamlConfig& cfg, Rng& rng) {
  validate(meta_train, init, cfg);
  if (cfg.m_test == 0 || cfg.m_train == 0) {
    throw std::invalid_argument("maml_noisy_train: both in-task splits must be nonempty");
  }
  for (const auto& task : meta_train) {
    if (task.size() != cfg.m_train + cfg.m_test) {
      throw std::invalid_argument("maml_noisy_train: m_train + m_test must equal the task size");
    }
  }
  const std::size_t n = meta_train.size();
  const auto d = init.values.size();

  MamlResult out{init, {}};
  out.trajectory.mode = TrajectoryMode::kMaml;
  out.trajectory.param_dim = static_cast<std::size_t>(d);
  Rng cov_rng(rng());
  const std::size_t tr_batch = std::min(cfg.sample_batch, cfg.m_train);
  const std::size_t te_batch = std::min(cfg.sample_batch, cfg.m_test);

  for (std::size_t t = 1; t <= cfg.iterations; ++t) {
    const double eta = cfg.eta.at(t);
    const double beta = cfg.beta.at(t);
    const double sigma = cfg.sigma.at(t);
    const auto tasks = random_subset(n, cfg.task_batch, rng);
    const MlpParams start = out.meta;

    // Inner loop: W_i = U - beta * grad_tr(U) + noise.
    std::vector<MlpParams> adapted;
    adapted.reserve(tasks.size());
    for (std::size_t i : tasks) {
      MlpParams w = start;
      w.values -= beta * batch_gradient(start, meta_train[i], cfg.m_train, tr_batch, 0, rng);
      add_noise(w.values, sigma, rng);
      check_finite(w.values, t, "maml_noisy_train");
      adapted.push_back(std::move(w));
    }
    // Outer loop: U <- U - eta * mean_i grad_te(W_i) + noise.
    Eigen::VectorXd outer = Eigen::VectorXd::Zero(d);
    for (std::size_t k = 0; k < tasks.size(); ++k) {
      outer += batch_gradient(adapted[k], meta_train[tasks[k]], cfg.m_test, te_batch,
                              cfg.m_train, rng);
    }
    outer /= static_cast<double>(tasks.size());

    GradientStep step{eta, sigma, beta, tasks, {}};
    if (cfg.track_covariance) {
      auto inner_draw = [&](Rng& r) {
        Eigen::VectorXd stacked(static_cast<Eigen::Index>(tasks.size()) * d);
        for (std::size_t k = 0; k < tasks.size(); ++k) {
          stacked.segment(static_cast<Eigen::Index>(k) * d, d) =
              -batch_gradient(start, meta_train[tasks[k]], cfg.m_train, tr_batch, 0, r);
        }
        return stacked;
      };
      auto outer_draw = [&](Rng& r) {
        Eigen::VectorXd mean = Eigen::VectorXd::Zero(d);
        for (std::size_t k = 0; k < tasks.size(); ++k) {
          mean -= batch_gradient(adapted[k], meta_train[tasks[k]], cfg.m_test, te_batch,
                                 cfg.m_train, r);
        }
        return Eigen::VectorXd(mean / static_cast<double>(tasks.size()));
      };
      step.blocks.push_back(make_gradient_block(
          sample_gradients(inner_draw, cfg.cov_resamples, cov_rng), cfg.cov_max_dim));
      step.blocks.push_back(make_gradient_block(
          sample_gradients(outer_draw, cfg.cov_resamples, cov_rng), cfg.cov_max_dim));
    }

    out.meta.values -= eta * outer;
    add_noise(out.meta.values, sigma, rng);
    check_finite(out.meta.values, t, "maml_noisy_train");
    out.trajectory.steps.push_back(std::move(step));
  }
  return out;
}

MlpParams adapt_task(const MlpParams& meta, std::span<const LabeledExample> task_train,
                     const AdaptConfig& cfg, Rng& rng) {
  MlpParams w = meta;
  if (cfg.steps == 0) return w;
  if (task_train.empty()) throw std::invalid_argument("adapt_task: empty task data");
  for (std::size_t s = 1; s <= cfg.steps; ++s) {
    w.values -= cfg.step_size * loss_and_grad(w, task_train).grad;
    add_noise(w.values, cfg.sigma, rng);
    check_finite(w.values, s, "adapt_task");
  }
  return w;
}

}  // namespace metagen
