#pragma once

#include <cstddef>
#include <functional>
#include <limits>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "metagen/bounds.hpp"
#include "metagen/config.hpp"
#include "metagen/infotheory.hpp"
#include "metagen/supersample.hpp"

namespace metagen {

inline constexpr std::uint64_t kSupersampleTag = 0x5375706572ULL;
inline constexpr std::uint64_t kAdaptTag = 0x4164617074ULL;

std::uint64_t point_seed(std::uint64_t master, std::size_t n, std::size_t m);
std::uint64_t supersample_seed(std::uint64_t point, std::size_t t1_index);
std::uint64_t run_seed(std::uint64_t point, std::size_t t1_index, std::size_t t2_index);

struct RunRecord {
  std::size_t t1_index = 0;
  std::size_t t2_index = 0;
  bool failed = false;
  std::string failure;
  LossTable table;
  double empirical_risk = 0.0;
  double test_risk = 0.0;
  double trajectory_bound = std::numeric_limits<double>::quiet_NaN();
  std::size_t trajectory_steps = 0;
};

struct GapEstimate {
  double gap = 0.0;
  double std_err = 0.0;
};

// Mean over successful runs and cells of (-1)^{S_j} Delta_ij, with the
// standard error of the per-run means.
GapEstimate empirical_gap(std::span<const RunRecord> records);

// Per-cell plug-in estimates over a set of runs. Pooled kinds use every run;
// conditional kinds group runs by t1_index and average the group values.
struct CellEstimates {
  MiCellEstimates delta_mi;
  MiCellEstimates delta_cmi;
  MiCellEstimates pair_mi;
  MiCellEstimates single_mi;
  MiCellEstimates quad_mi;
  MiCellEstimates quad_cmi;
  // group key -> per-cell quad MI inside that group
  std::map<std::size_t, MiCellEstimates> quad_by_group;
  std::size_t groups = 0;
};

CellEstimates estimate_cells(std::span<const LossTable> tables, const MiOptions& options);

struct BoundValue {
  std::string name;
  double value = 0.0;
  std::string estimator;
};

struct BoundReport {
  std::string config_hash;
  std::size_t n = 0;
  std::size_t m = 0;
  std::size_t t1 = 0;
  std::size_t t2 = 0;
  Trainer trainer = Trainer::kJointSgld;
  TaskMode mode = TaskMode::kClassPair;
  std::string environment;
  std::vector<BoundValue> bounds;
  std::map<std::string, double> components;
  double empirical_risk = 0.0;
  double test_risk = 0.0;
  GapEstimate gap;
  std::size_t runs = 0;
  std::size_t failures = 0;

  const BoundValue* find(std::string_view name) const;
};

// Pure function of the configuration and the multiset of records of one
// sweep point; record order does not matter.
BoundReport aggregate(const ExperimentConfig& cfg, std::size_t n, std::size_t m,
                      std::vector<RunRecord> records);

struct PointResult {
  BoundReport report;
  std::vector<RunRecord> records;  // sorted by (t1_index, t2_index)
};

struct ExperimentResult {
  std::vector<PointResult> points;  // sweep order: n outer, m inner
};

// One run: memberships, meta-training, loss-table fill, trajectory bound.
RunRecord execute_run(const ExperimentConfig& cfg, const SuperSample& ss, std::size_t t1_index,
                      std::size_t t2_index, std::uint64_t seed);

using ProgressFn = std::function<void(std::size_t done, std::size_t total)>;

// Runs the full t1 x t2 protocol for every (n, m) in the sweep on cfg.jobs
// threads. Throws std::runtime_error when every run of a point fails.
ExperimentResult run_experiment(const ExperimentConfig& cfg, const ProgressFn& progress = {});

}  // namespace metagen
