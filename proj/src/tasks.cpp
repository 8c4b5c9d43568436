#include "metagen/tasks.hpp"

#include <algorithm>
#include <sstream>

namespace metagen {
namespace {

int uniform_int(int lo, int hi, Rng& rng) {
  return std::uniform_int_distribution<int>(lo, hi)(rng);
}

std::size_t pair_id(std::size_t num_classes, std::size_t a, std::size_t b) {
  // Lexicographic rank of (a, b), a < b, among all unordered pairs.
  return a * (2 * num_classes - a - 1) / 2 + (b - a - 1);
}

// Class that generates the next example of `task`, together with its label.
std::pair<int, int> draw_class(const Task& task, std::size_t num_classes, Rng& rng) {
  const int label = std::bernoulli_distribution(0.5)(rng) ? 1 : 0;
  if (task.mode == TaskMode::kClassPair) {
    return {label == 1 ? task.second_class : task.first_class, label};
  }
  if (label == 1) {
    return {task.first_class, 1};
  }
  int other = uniform_int(0, static_cast<int>(num_classes) - 2, rng);
  if (other >= task.first_class) {
    ++other;
  }
  return {other, 0};
}

}  // namespace

std::string_view to_string(TaskMode mode) {
  return mode == TaskMode::kClassPair ? "class-pair" : "one-vs-rest";
}

TaskMode parse_task_mode(std::string_view text) {
  if (text == "class-pair") return TaskMode::kClassPair;
  if (text == "one-vs-rest") return TaskMode::kOneVsRest;
  throw std::invalid_argument("unknown task mode '" + std::string(text) + "'");
}

std::size_t distinct_task_count(std::size_t num_classes, TaskMode mode) {
  return mode == TaskMode::kClassPair ? num_classes * (num_classes - 1) / 2 : num_classes;
}

std::vector<Task> sample_tasks(std::size_t num_classes, std::size_t count, TaskMode mode,
                               Rng& rng) {
  if (num_classes < 2) {
    throw CapacityError("sample_tasks: at least two classes are required, got " +
                        std::to_string(num_classes));
  }
  std::vector<Task> tasks;
  tasks.reserve(count);
  const int last = static_cast<int>(num_classes) - 1;
  for (std::size_t t = 0; t < count; ++t) {
    Task task;
    task.mode = mode;
    if (mode == TaskMode::kClassPair) {
      int a = uniform_int(0, last, rng);
      int b = uniform_int(0, last - 1, rng);
      if (b >= a) ++b;
      if (a > b) std::swap(a, b);
      task.first_class = a;
      task.second_class = b;
      task.id = pair_id(num_classes, static_cast<std::size_t>(a), static_cast<std::size_t>(b));
    } else {
      task.first_class = uniform_int(0, last, rng);
      task.second_class = -1;
      task.id = static_cast<std::size_t>(task.first_class);
    }
    tasks.push_back(task);
  }
  return tasks;
}

// ---------------------------------------------------------------------------
// Synthetic Gaussian hypercube environment

GaussianEnv::GaussianEnv(std::size_t num_classes, std::size_t dim, double std, TaskMode mode)
    : dim_(dim), std_(std), mode_(mode) {
  if (!(std > 0.0)) {
    throw std::invalid_argument("make_gaussian_env: std must be positive");
  }
  if (dim == 0 || (dim < 63 && num_classes > (std::size_t{1} << dim))) {
    throw CapacityError("make_gaussian_env: " + std::to_string(num_classes) +
                        " classes exceed the " + std::to_string(dim) +
                        "-cube's vertex count");
  }
  centers_.reserve(num_classes);
  for (std::size_t k = 0; k < num_classes; ++k) {
    const std::uint64_t gray = k ^ (k >> 1);
    Eigen::VectorXd c(static_cast<Eigen::Index>(dim));
    for (std::size_t b = 0; b < dim; ++b) {
      c(static_cast<Eigen::Index>(b)) = (b < 64 && ((gray >> b) & 1U)) ? 1.0 : -1.0;
    }
    centers_.push_back(std::move(c));
  }
}

std::string GaussianEnv::describe() const {
  std::ostringstream out;
  out << "gaussian(classes=" << centers_.size() << ",dim=" << dim_ << ",std=" << std_
      << ",mode=" << to_string(mode_) << ")";
  return out.str();
}

Eigen::VectorXd GaussianEnv::sample_class(int cls, Rng& rng) const {
  std::normal_distribution<double> normal(0.0, std_);
  Eigen::VectorXd x = centers_.at(static_cast<std::size_t>(cls));
  for (Eigen::Index d = 0; d < x.size(); ++d) {
    x(d) += normal(rng);
  }
  return x;
}

std::vector<TaskDraw> GaussianEnv::draw(std::size_t task_count, std::size_t samples_per_task,
                                        Rng& rng) const {
  std::vector<TaskDraw> out;
  out.reserve(task_count);
  for (const Task& task : sample_tasks(num_classes(), task_count, mode_, rng)) {
    TaskDraw d{task, {}};
    d.examples.reserve(samples_per_task);
    for (std::size_t s = 0; s < samples_per_task; ++s) {
      const auto [cls, label] = draw_class(task, num_classes(), rng);
      d.examples.push_back({sample_class(cls, rng), label});
    }
    out.push_back(std::move(d));
  }
  return out;
}

GaussianEnv make_gaussian_env(std::size_t num_classes, std::size_t dim, double std,
                              TaskMode mode) {
  return GaussianEnv(num_classes, dim, std, mode);
}

// ---------------------------------------------------------------------------
// Finite labelled dataset

FiniteTaskEnv::FiniteTaskEnv(std::vector<std::vector<Eigen::VectorXd>> pools, TaskMode mode,
                             std::string source)
    : pools_(std::move(pools)), mode_(mode), source_(std::move(source)) {
  if (pools_.size() < 2) {
    throw CapacityError("dataset environment needs at least two classes");
  }
  for (const auto& pool : pools_) {
    if (!pool.empty()) {
      dim_ = static_cast<std::size_t>(pool.front().size());
      break;
    }
  }
}

std::string FiniteTaskEnv::describe() const {
  std::ostringstream out;
  out << "dataset(" << source_ << ",classes=" << pools_.size() << ",dim=" << dim_
      << ",mode=" << to_string(mode_) << ")";
  return out.str();
}

std::vector<TaskDraw> FiniteTaskEnv::draw(std::size_t task_count, std::size_t samples_per_task,
                                          Rng& rng) const {
  // Remaining (unused) indices per class for this draw.
  std::vector<std::vector<std::uint32_t>> remaining(pools_.size());
  for (std::size_t c = 0; c < pools_.size(); ++c) {
    remaining[c].resize(pools_[c].size());
    for (std::uint32_t k = 0; k < remaining[c].size(); ++k) remaining[c][k] = k;
  }

  auto take = [&](int cls) -> const Eigen::VectorXd& {
    auto& left = remaining[static_cast<std::size_t>(cls)];
    if (left.empty()) {
      throw CapacityError("class " + std::to_string(cls) + " exhausted after " +
                          std::to_string(pools_[static_cast<std::size_t>(cls)].size()) +
                          " draws without replacement");
    }
    const std::size_t pos =
        std::uniform_int_distribution<std::size_t>(0, left.size() - 1)(rng);
    const std::uint32_t idx = left[pos];
    left[pos] = left.back();
    left.pop_back();
    return pools_[static_cast<std::size_t>(cls)][idx];
  };

  std::vector<TaskDraw> out;
  out.reserve(task_count);
  for (const Task& task : sample_tasks(pools_.size(), task_count, mode_, rng)) {
    for (int cls : {task.first_class, task.second_class}) {
      if (cls >= 0 && class_size(cls) < samples_per_task) {
        throw CapacityError("class " + std::to_string(cls) + " holds " +
                            std::to_string(class_size(cls)) + " samples, task needs up to " +
                            std::to_string(samples_per_task));
      }
    }
    TaskDraw d{task, {}};
    d.examples.reserve(samples_per_task);
    for (std::size_t s = 0; s < samples_per_task; ++s) {
      const auto [cls, label] = draw_class(task, pools_.size(), rng);
      d.examples.push_back({take(cls), label});
    }
    out.push_back(std::move(d));
  }
  return out;
}

FiniteTaskEnv class_tasks_from_dataset(const IdxTensor& images, const IdxTensor& labels,
                                       TaskMode mode, const DatasetOptions& options) {
  if (images.rank() != 3 || labels.rank() != 1) {
    throw std::invalid_argument("class_tasks_from_dataset: expected 3-d images and 1-d labels");
  }
  const std::size_t count = images.dims[0];
  if (labels.dims[0] != count) {
    throw std::invalid_argument("class_tasks_from_dataset: image/label count mismatch");
  }
  const std::size_t pixels = static_cast<std::size_t>(images.dims[1]) * images.dims[2];

  int max_label = -1;
  for (std::uint8_t l : labels.data) max_label = std::max<int>(max_label, l);
  std::vector<std::vector<Eigen::VectorXd>> pools(static_cast<std::size_t>(max_label + 1));

  Eigen::VectorXd mean = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(pixels));
  std::vector<Eigen::VectorXd> all;
  all.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    Eigen::VectorXd x(static_cast<Eigen::Index>(pixels));
    for (std::size_t p = 0; p < pixels; ++p) {
      x(static_cast<Eigen::Index>(p)) = images.data[i * pixels + p] / 255.0;
    }
    mean += x;
    all.push_back(std::move(x));
  }
  if (count > 0) mean /= static_cast<double>(count);
  for (std::size_t i = 0; i < count; ++i) {
    if (options.mean_center) all[i] -= mean;
    pools[labels.data[i]].push_back(std::move(all[i]));
  }

  std::size_t populated = 0;
  for (const auto& pool : pools) populated += pool.empty() ? 0 : 1;
  if (populated < 2) {
    throw CapacityError("class_tasks_from_dataset: labels cover fewer than two classes");
  }
  return FiniteTaskEnv(std::move(pools), mode,
                       options.mean_center ? "idx,centered" : "idx");
}

}  // namespace metagen
