#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "metagen/idx.hpp"
#include "metagen/rng.hpp"

namespace metagen {

struct LabeledExample {
  Eigen::VectorXd features;
  int label = 0;
};

using TaskSamples = std::vector<LabeledExample>;

// How a task turns class-conditional data into a binary prediction problem.
//   kClassPair  - two distinct classes; label 0 is the lower class index.
//   kOneVsRest  - label 1 is the target class, label 0 a uniform mixture of
//                 the remaining classes.
enum class TaskMode { kClassPair, kOneVsRest };

std::string_view to_string(TaskMode mode);
TaskMode parse_task_mode(std::string_view text);

struct Task {
  std::size_t id = 0;
  TaskMode mode = TaskMode::kClassPair;
  int first_class = 0;    // label-0 class (class-pair) or target class (one-vs-rest)
  int second_class = -1;  // label-1 class (class-pair); -1 in one-vs-rest

  bool operator==(const Task&) const = default;
};

struct TaskDraw {
  Task task;
  TaskSamples examples;
};

// Thrown when an environment cannot supply the requested tasks or samples.
class CapacityError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Number of labels every task exposes to the model head.
inline constexpr std::size_t kTaskLabels = 2;

std::vector<Task> sample_tasks(std::size_t num_classes, std::size_t count, TaskMode mode, Rng& rng);

// Number of distinct tasks a mode admits over num_classes classes.
std::size_t distinct_task_count(std::size_t num_classes, TaskMode mode);

class TaskEnvironment {
 public:
  virtual ~TaskEnvironment() = default;

  virtual std::size_t feature_dim() const = 0;
  virtual std::size_t num_classes() const = 0;
  virtual TaskMode mode() const = 0;
  virtual std::string describe() const = 0;

  // Draws task_count independent tasks, each with samples_per_task i.i.d.
  // examples from that task's distribution. A finite environment never hands
  // out the same stored example twice within one call.
  virtual std::vector<TaskDraw> draw(std::size_t task_count, std::size_t samples_per_task,
                                     Rng& rng) const = 0;
};

class GaussianEnv final : public TaskEnvironment {
 public:
  static constexpr double kDefaultStd = 0.25;

  GaussianEnv(std::size_t num_classes, std::size_t dim, double std, TaskMode mode);

  std::size_t feature_dim() const override { return dim_; }
  std::size_t num_classes() const override { return centers_.size(); }
  TaskMode mode() const override { return mode_; }
  std::string describe() const override;

  double std() const { return std_; }
  const std::vector<Eigen::VectorXd>& centers() const { return centers_; }

  Eigen::VectorXd sample_class(int cls, Rng& rng) const;

  std::vector<TaskDraw> draw(std::size_t task_count, std::size_t samples_per_task,
                             Rng& rng) const override;

 private:
  std::size_t dim_;
  double std_;
  TaskMode mode_;
  std::vector<Eigen::VectorXd> centers_;
};

// Centers at hypercube vertices {-1,+1}^dim, enumerated in Gray-code order.
GaussianEnv make_gaussian_env(std::size_t num_classes, std::size_t dim,
                              double std = GaussianEnv::kDefaultStd,
                              TaskMode mode = TaskMode::kClassPair);

struct DatasetOptions {
  bool mean_center = false;
};

// Environment backed by a labelled image set; examples are drawn without
// replacement inside each draw() call.
class FiniteTaskEnv final : public TaskEnvironment {
 public:
  FiniteTaskEnv(std::vector<std::vector<Eigen::VectorXd>> pools, TaskMode mode,
                std::string source);

  std::size_t feature_dim() const override { return dim_; }
  std::size_t num_classes() const override { return pools_.size(); }
  TaskMode mode() const override { return mode_; }
  std::string describe() const override;

  std::size_t class_size(int cls) const { return pools_.at(static_cast<std::size_t>(cls)).size(); }
  std::size_t possible_tasks() const { return distinct_task_count(pools_.size(), mode_); }

  std::vector<TaskDraw> draw(std::size_t task_count, std::size_t samples_per_task,
                             Rng& rng) const override;

 private:
  std::vector<std::vector<Eigen::VectorXd>> pools_;
  TaskMode mode_;
  std::string source_;
  std::size_t dim_ = 0;
};

// images: 3-d uint8 tensor (count, rows, cols); labels: 1-d uint8 tensor.
// Pixels are rescaled to [0,1] and optionally mean-centered.
FiniteTaskEnv class_tasks_from_dataset(const IdxTensor& images, const IdxTensor& labels,
                                       TaskMode mode, const DatasetOptions& options = {});

}  // namespace metagen
