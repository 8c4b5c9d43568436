#include <cmath>

#include "doctest.h"
#include "metagen/bounds.hpp"
#include "metagen/metalearn.hpp"

using namespace metagen;

namespace {

TaskSamples random_task(std::size_t count, std::size_t dim, Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  TaskSamples out(count);
  for (std::size_t k = 0; k < count; ++k) {
    out[k].features = Eigen::VectorXd(static_cast<Eigen::Index>(dim));
    for (Eigen::Index i = 0; i < out[k].features.size(); ++i) out[k].features(i) = normal(rng);
    out[k].label = static_cast<int>(k % 2);
  }
  return out;
}

MlpParams small_net(Rng& rng) { return init_params(make_mlp_shape(3, 4, 2, 2), rng); }

}  // namespace

TEST_CASE("schedule repeats its last value") {
  Schedule s{{0.5, 0.25}};
  CHECK(s.at(1) == 0.5);
  CHECK(s.at(2) == 0.25);
  CHECK(s.at(100) == 0.25);
}

TEST_CASE("joint SGLD: zero step and noise leave parameters unchanged") {
  Rng rng(1);
  const auto init = small_net(rng);
  std::vector<TaskSamples> tasks = {random_task(6, 3, rng), random_task(6, 3, rng)};
  SgldConfig cfg;
  cfg.iterations = 25;
  cfg.eta = Schedule::constant(0.0);
  cfg.sigma = Schedule::constant(0.0);
  cfg.task_batch = 2;
  cfg.sample_batch = 3;
  const auto r = joint_sgld_train(tasks, init, cfg, rng);
  CHECK(r.meta.values == init.values);
  for (const auto& w : r.task_params) CHECK(w.values == init.values);
  CHECK(r.trajectory.steps.size() == 25);
  CHECK(sgld_trajectory_bound(r.trajectory, 2, 6) == 0.0);
}

TEST_CASE("joint SGLD: one noiseless full-batch step is gradient descent") {
  Rng rng(2);
  const auto init = small_net(rng);
  std::vector<TaskSamples> tasks = {random_task(5, 3, rng)};
  SgldConfig cfg;
  cfg.iterations = 1;
  cfg.eta = Schedule::constant(0.3);
  cfg.sigma = Schedule::constant(0.0);
  cfg.sample_batch = 5;
  const auto r = joint_sgld_train(tasks, init, cfg, rng);
  const Eigen::VectorXd expect = init.values - 0.3 * loss_and_grad(init, tasks[0]).grad;
  CHECK((r.meta.values - expect).cwiseAbs().maxCoeff() < 1e-15);
  CHECK((r.task_params[0].values - expect).cwiseAbs().maxCoeff() < 1e-15);
  // full batch => every resample identical => zero covariance
  CHECK(r.trajectory.steps[0].blocks[0].gram.isZero(1e-20));
}

TEST_CASE("joint SGLD: unselected tasks keep their parameters") {
  Rng rng(3);
  const auto init = small_net(rng);
  std::vector<TaskSamples> tasks = {random_task(4, 3, rng), random_task(4, 3, rng),
                                    random_task(4, 3, rng)};
  SgldConfig cfg;
  cfg.iterations = 1;
  cfg.task_batch = 1;
  const auto r = joint_sgld_train(tasks, init, cfg, rng);
  const auto& chosen = r.trajectory.steps[0].task_batch;
  REQUIRE(chosen.size() == 1);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK((r.task_params[i].values == init.values) == (i != chosen[0]));
  }
  CHECK(r.trajectory.steps[0].blocks[0].dim == 2 * init.values.size());
}

TEST_CASE("joint SGLD: per-step noise statistics") {
  // eta = 0: every update is pure N(0, sigma^2) noise.
  const auto init = zero_params(make_mlp_shape(1, 1, 2, 1, Activation::kIdentity));
  TaskSamples flat = {{Eigen::VectorXd::Zero(1), 0}, {Eigen::VectorXd::Zero(1), 1}};
  std::vector<TaskSamples> tasks = {flat};
  SgldConfig cfg;
  cfg.iterations = 10000;
  cfg.eta = Schedule::constant(0.0);
  cfg.sigma = Schedule::constant(0.02);
  cfg.sample_batch = 2;
  cfg.track_covariance = false;

  // Replay the chain one step at a time to observe every increment.
  Rng rng(5);
  std::vector<double> deltas;
  MlpParams u = init;
  cfg.iterations = 1;
  for (int t = 0; t < 10000; ++t) {
    const auto step = joint_sgld_train(tasks, u, cfg, rng);
    for (Eigen::Index k = 0; k < u.values.size(); ++k) deltas.push_back(step.meta.values(k) - u.values(k));
    u = step.meta;
  }
  for (Eigen::Index k = 0; k < u.values.size(); ++k) {
    double mean = 0.0, ss = 0.0;
    const std::size_t dim = static_cast<std::size_t>(u.values.size());
    std::size_t count = 0;
    for (std::size_t t = static_cast<std::size_t>(k); t < deltas.size(); t += dim) {
      mean += deltas[t];
      ++count;
    }
    mean /= static_cast<double>(count);
    for (std::size_t t = static_cast<std::size_t>(k); t < deltas.size(); t += dim) {
      ss += (deltas[t] - mean) * (deltas[t] - mean);
    }
    const double sd = std::sqrt(ss / static_cast<double>(count - 1));
    CHECK(std::abs(sd - 0.02) <= 0.05 * 0.02);
  }
}

TEST_CASE("MAML: zero rates leave U unchanged") {
  Rng rng(6);
  const auto init = small_net(rng);
  std::vector<TaskSamples> tasks = {random_task(6, 3, rng)};
  MamlConfig cfg;
  cfg.iterations = 10;
  cfg.eta = Schedule::constant(0.0);
  cfg.beta = Schedule::constant(0.0);
  cfg.sigma = Schedule::constant(0.0);
  cfg.m_train = 3;
  cfg.m_test = 3;
  const auto r = maml_noisy_train(tasks, init, cfg, rng);
  CHECK(r.meta.values == init.values);
  CHECK(maml_trajectory_bound(r.trajectory, 1, 3) == 0.0);
}

TEST_CASE("MAML: one noiseless step matches the two-stage chain") {
  Rng rng(7);
  const auto init = small_net(rng);
  const TaskSamples task = random_task(6, 3, rng);
  std::vector<TaskSamples> tasks = {task};
  MamlConfig cfg;
  cfg.iterations = 1;
  cfg.eta = Schedule::constant(0.2);
  cfg.beta = Schedule::constant(0.1);
  cfg.sigma = Schedule::constant(0.0);
  cfg.sample_batch = 10;
  cfg.m_train = 4;
  cfg.m_test = 2;
  const auto r = maml_noisy_train(tasks, init, cfg, rng);
  const TaskSamples tr(task.begin(), task.begin() + 4), te(task.begin() + 4, task.end());
  MlpParams w = init;
  w.values -= 0.1 * loss_and_grad(init, tr).grad;
  const Eigen::VectorXd expect = init.values - 0.2 * loss_and_grad(w, te).grad;
  CHECK((r.meta.values - expect).cwiseAbs().maxCoeff() < 1e-15);
  REQUIRE(r.trajectory.steps[0].blocks.size() == 2);
  CHECK(r.trajectory.steps[0].blocks[0].dim == init.values.size());
  CHECK(r.trajectory.steps[0].blocks[1].dim == init.values.size());
  CHECK(r.trajectory.steps[0].beta.value() == 0.1);
}

TEST_CASE("MAML rejects a split that does not cover the task") {
  Rng rng(8);
  const auto init = small_net(rng);
  std::vector<TaskSamples> tasks = {random_task(6, 3, rng)};
  MamlConfig cfg;
  cfg.m_train = 2;
  cfg.m_test = 2;
  CHECK_THROWS_AS(maml_noisy_train(tasks, init, cfg, rng), std::invalid_argument);
}

TEST_CASE("adapt_task") {
  Rng rng(9);
  const auto u = small_net(rng);
  const TaskSamples data = random_task(5, 3, rng);
  AdaptConfig cfg;
  cfg.steps = 0;
  CHECK(adapt_task(u, data, cfg, rng).values == u.values);
  cfg.steps = 1;
  cfg.step_size = 0.4;
  const Eigen::VectorXd expect = u.values - 0.4 * loss_and_grad(u, data).grad;
  CHECK((adapt_task(u, data, cfg, rng).values - expect).cwiseAbs().maxCoeff() < 1e-15);
  cfg.steps = 5;
  cfg.sigma = 0.01;
  Rng a(3), b(3);
  CHECK(adapt_task(u, data, cfg, a).values == adapt_task(u, data, cfg, b).values);
}

TEST_CASE("descent on a convex problem") {
  // Single linear layer + cross-entropy is convex; noiseless steps reduce loss.
  Rng rng(10);
  const auto u = init_params(make_mlp_shape(3, 1, 2, 1, Activation::kIdentity), rng);
  const TaskSamples data = random_task(20, 3, rng);
  AdaptConfig cfg{20, 0.1, 0.0};
  CHECK(cross_entropy(adapt_task(u, data, cfg, rng), data) < cross_entropy(u, data));
}

TEST_CASE("determinism of both trainers") {
  Rng seed(11);
  const auto init = small_net(seed);
  std::vector<TaskSamples> tasks = {random_task(6, 3, seed), random_task(6, 3, seed)};
  SgldConfig cfg;
  cfg.iterations = 20;
  cfg.sample_batch = 2;
  Rng a(1), b(1);
  const auto r1 = joint_sgld_train(tasks, init, cfg, a);
  const auto r2 = joint_sgld_train(tasks, init, cfg, b);
  CHECK(r1.meta.values == r2.meta.values);
  CHECK(r1.trajectory.steps.back().blocks[0].gram == r2.trajectory.steps.back().blocks[0].gram);
  // covariance tracking uses its own stream
  cfg.track_covariance = false;
  Rng c(1);
  CHECK(joint_sgld_train(tasks, init, cfg, c).meta.values == r1.meta.values);

  MamlConfig mc;
  static_cast<SgldConfig&>(mc) = cfg;
  mc.m_train = 3;
  mc.m_test = 3;
  Rng d(2), e(2);
  CHECK(maml_noisy_train(tasks, init, mc, d).meta.values ==
        maml_noisy_train(tasks, init, mc, e).meta.values);
}

TEST_CASE("step covariance: constant gradient gives zero") {
  Rng rng(12);
  auto draw = [](Rng&) { return Eigen::VectorXd(Eigen::Vector3d(1, 2, 3)); };
  CHECK(estimate_step_covariance(draw, 8, rng).isZero(0.0));
  CHECK_THROWS_AS(estimate_step_covariance(draw, 1, rng), std::invalid_argument);
}

TEST_CASE("step covariance: least squares with batch size one") {
  // loss_k(w) = 0.5 (a_k . w - y_k)^2, gradient g_k = (a_k . w - y_k) a_k.
  Rng data_rng(13);
  std::normal_distribution<double> normal(0.0, 1.0);
  const int count = 6;
  std::vector<Eigen::Vector2d> a(count);
  std::vector<double> y(count);
  for (int k = 0; k < count; ++k) {
    a[k] = Eigen::Vector2d(normal(data_rng), normal(data_rng));
    y[k] = normal(data_rng);
  }
  const Eigen::Vector2d w(0.3, -0.7);
  std::vector<Eigen::Vector2d> g(count);
  Eigen::Vector2d mean = Eigen::Vector2d::Zero();
  for (int k = 0; k < count; ++k) {
    g[k] = (a[k].dot(w) - y[k]) * a[k];
    mean += g[k] / count;
  }
  Eigen::Matrix2d analytic = Eigen::Matrix2d::Zero();
  for (int k = 0; k < count; ++k) analytic += (g[k] - mean) * (g[k] - mean).transpose() / count;

  auto draw = [&](Rng& r) {
    const int k = std::uniform_int_distribution<int>(0, count - 1)(r);
    return Eigen::VectorXd(g[k]);
  };
  Rng rng(14);
  const Eigen::MatrixXd est = estimate_step_covariance(draw, 10000, rng);
  CHECK((est - analytic).norm() <= 0.05 * analytic.norm());
  CHECK((est - est.transpose()).cwiseAbs().maxCoeff() == 0.0);
  CHECK(Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(est).eigenvalues().minCoeff() >= -1e-10);
}

TEST_CASE("gradient block keeps the Gram matrix and optional samples") {
  Eigen::MatrixXd s(3, 4);
  s << 1, 2, 3, 4, 2, 2, 2, 2, 0, 1, 0, 1;
  const auto kept = make_gradient_block(s, 4);
  CHECK(kept.has_samples());
  const auto dropped = make_gradient_block(s, 3);
  CHECK_FALSE(dropped.has_samples());
  CHECK_THROWS_AS(dropped.covariance(), std::logic_error);
  // Same nonzero spectrum: log|cG + I_B| = log|cCov + I_D|.
  const double c = 0.7;
  const double via_cov =
      std::log((c * kept.covariance() + Eigen::MatrixXd::Identity(4, 4)).determinant());
  const double via_gram = std::log((c * kept.gram + Eigen::MatrixXd::Identity(3, 3)).determinant());
  CHECK(via_gram == doctest::Approx(via_cov).epsilon(1e-12));
}
