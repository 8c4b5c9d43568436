#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <stdexcept>
#include <vector>

#include "metagen/model.hpp"
#include "metagen/rng.hpp"
#include "metagen/tasks.hpp"

namespace metagen {

// Position of one example inside the meta-supersample: task pair i, task
// slot a, sample pair j, sample slot b (all zero-based).
struct CellIndex {
  std::size_t task_pair = 0;
  int task_slot = 0;
  std::size_t sample_pair = 0;
  int sample_slot = 0;

  auto operator<=>(const CellIndex&) const = default;
};

class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// 2n tasks x 2m samples, arranged as n task pairs and m sample pairs.
class SuperSample {
 public:
  SuperSample(std::size_t n, std::size_t m, std::vector<Task> task_meta,
              std::vector<LabeledExample> cells);

  std::size_t n() const { return n_; }
  std::size_t m() const { return m_; }
  std::size_t size() const { return cells_.size(); }

  const LabeledExample& at(const CellIndex& c) const { return cells_.at(flat(c)); }
  const LabeledExample& at(std::size_t i, int a, std::size_t j, int b) const {
    return at(CellIndex{i, a, j, b});
  }
  const Task& task(std::size_t i, int a) const { return task_meta_.at(2 * i + static_cast<std::size_t>(a)); }

 private:
  std::size_t flat(const CellIndex& c) const;

  std::size_t n_;
  std::size_t m_;
  std::vector<Task> task_meta_;
  std::vector<LabeledExample> cells_;
};

SuperSample build_supersample(const TaskEnvironment& env, std::size_t n, std::size_t m, Rng& rng);

struct MembershipVectors {
  std::vector<std::uint8_t> s_tilde;  // n task-slot bits
  std::vector<std::uint8_t> s;        // m sample-slot bits

  int task_bit(std::size_t i) const { return s_tilde.at(i); }
  int sample_bit(std::size_t j) const { return s.at(j); }
  int task_complement(std::size_t i) const { return 1 - s_tilde.at(i); }
  int sample_complement(std::size_t j) const { return 1 - s.at(j); }
  // Psi_{i,j} = s_tilde_i XOR s_j
  int psi(std::size_t i, std::size_t j) const { return s_tilde.at(i) ^ s.at(j); }
};

MembershipVectors draw_memberships(std::size_t n, std::size_t m, Rng& rng);

// One task's share of a partition: the chosen slot of task pair i and the
// samples picked from it, in sample-pair order.
struct TaskPartition {
  std::size_t task_pair = 0;
  int task_slot = 0;
  std::vector<CellIndex> cells;
  TaskSamples examples;
};

using Partition = std::vector<TaskPartition>;

struct Partitions {
  Partition meta_train;       // (S~_i, S_j)
  Partition meta_test;        // (1-S~_i, 1-S_j)
  Partition heldout_train;    // (1-S~_i, S_j): training data of the meta-test task
  Partition train_task_test;  // (S~_i, 1-S_j)
};

Partitions select_partitions(const SuperSample& ss, const MembershipVectors& mv);

// Losses of one cell (i, j) over all four slot combinations; l_ab is the
// loss on example (i, a, j, b).
struct LossQuad {
  double l00 = 0.0;
  double l11 = 0.0;
  double l10 = 0.0;
  double l01 = 0.0;

  double at(int task_slot, int sample_slot) const;
  void set(int task_slot, int sample_slot, double value);
  bool valid() const;
  bool binary() const;
  bool operator==(const LossQuad&) const = default;
};

struct LossPair {
  double plus = 0.0;   // sample-slot-1 entry of the Psi-selected pair
  double minus = 0.0;  // sample-slot-0 entry
  double delta = 0.0;  // plus - minus
};

// With Psi = s_tilde XOR s: plus = l_{(1^Psi),1}, minus = l_{Psi,0}.
LossPair loss_pair_delta(const LossQuad& quad, int s_tilde_i, int s_j);

struct LossTable {
  std::size_t run_id = 0;
  std::size_t t1_index = 0;
  std::size_t t2_index = 0;
  std::size_t n = 0;
  std::size_t m = 0;
  std::vector<LossQuad> quads;  // row-major n x m
  MembershipVectors masks;

  const LossQuad& quad(std::size_t i, std::size_t j) const { return quads.at(i * m + j); }
  LossQuad& quad(std::size_t i, std::size_t j) { return quads.at(i * m + j); }
  LossPair pair(std::size_t i, std::size_t j) const {
    return loss_pair_delta(quad(i, j), masks.task_bit(i), masks.sample_bit(j));
  }
  double train_loss(std::size_t i, std::size_t j) const {
    return quad(i, j).at(masks.task_bit(i), masks.sample_bit(j));
  }
  double test_loss(std::size_t i, std::size_t j) const {
    return quad(i, j).at(masks.task_complement(i), masks.sample_complement(j));
  }
  double empirical_risk() const;
  double test_risk() const;
};

// Adapts the meta-parameters to one task of the supersample. task_slot tells
// which member of pair i is being adapted (for seeding).
using AdaptFn = std::function<MlpParams(const MlpParams& meta, std::span<const LabeledExample> train,
                                        std::size_t task_pair, int task_slot)>;
using LossFn = std::function<double(const MlpParams& params, const LabeledExample& example)>;

class AdaptationFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// For every task pair i, W is adapted on slot S~_i and W' on slot 1-S~_i,
// both from their slot-S_j samples. W fills l_{S~_i,*}, W' fills l_{1-S~_i,*}.
// Throws AdaptationFailure when an adapted model or a loss is non-finite.
LossTable fill_loss_table(const MlpParams& meta, const AdaptFn& adapt, const SuperSample& ss,
                          const MembershipVectors& mv, const LossFn& loss);

}  // namespace metagen
