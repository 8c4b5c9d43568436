#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "metagen/bounds.hpp"
#include "metagen/infotheory.hpp"
#include "metagen/metalearn.hpp"
#include "metagen/tasks.hpp"

namespace metagen {

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

enum class EnvKind { kGaussian, kIdx };
enum class Trainer { kJointSgld, kNoisyMaml };

std::string_view to_string(EnvKind kind);
std::string_view to_string(Trainer trainer);

struct EnvSpec {
  EnvKind kind = EnvKind::kGaussian;
  std::size_t num_classes = 8;
  std::size_t dim = 8;
  double std = GaussianEnv::kDefaultStd;
  TaskMode mode = TaskMode::kClassPair;
  std::string images;  // IDX paths, kind == kIdx only
  std::string labels;
  bool center = false;
};

// Bound names in report order.
const std::vector<std::string>& known_bounds();

struct ExperimentConfig {
  EnvSpec env;
  std::vector<std::size_t> n_values{2};
  std::vector<std::size_t> m_values{10};
  std::size_t t1 = 5;
  std::size_t t2 = 10;
  Trainer trainer = Trainer::kJointSgld;
  SgldConfig sgld;
  Schedule beta = Schedule::constant(0.1);
  std::size_t m_test = 0;  // MAML in-task test split; 0 => m/2
  std::size_t hidden = 32;
  std::size_t layers = 4;
  std::vector<std::string> bounds = known_bounds();
  BoundParams params;
  MiOptions estimator;
  std::uint64_t seed = 0;
  std::string out = "out";
  std::size_t jobs = 1;

  // Throws ConfigError on any violated invariant.
  void validate() const;
};

// Flat `key = value` text; `#` starts a comment. n and m take comma lists.
ExperimentConfig parse_config(std::string_view text);
ExperimentConfig load_config(const std::filesystem::path& path);

// Canonical text of the single sweep point (n, m); the basis of config_hash.
std::string canonical_text(const ExperimentConfig& cfg, std::size_t n, std::size_t m);
std::string config_hash(const ExperimentConfig& cfg, std::size_t n, std::size_t m);

std::unique_ptr<TaskEnvironment> make_environment(const EnvSpec& spec);

}  // namespace metagen
