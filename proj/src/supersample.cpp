#include "metagen/supersample.hpp"

#include <cmath>
#include <string>

#include "metagen/metalearn.hpp"

namespace metagen {
namespace {

void check_shapes(const SuperSample& ss, const MembershipVectors& mv) {
  if (mv.s_tilde.size() != ss.n() || mv.s.size() != ss.m()) {
    throw ShapeError("membership vectors (" + std::to_string(mv.s_tilde.size()) + ", " +
                     std::to_string(mv.s.size()) + ") do not match supersample (" +
                     std::to_string(ss.n()) + ", " + std::to_string(ss.m()) + ")");
  }
}

TaskPartition pick(const SuperSample& ss, std::size_t i, int task_slot,
                   const std::vector<int>& sample_slots) {
  TaskPartition part;
  part.task_pair = i;
  part.task_slot = task_slot;
  part.cells.reserve(ss.m());
  part.examples.reserve(ss.m());
  for (std::size_t j = 0; j < ss.m(); ++j) {
    CellIndex c{i, task_slot, j, sample_slots[j]};
    part.cells.push_back(c);
    part.examples.push_back(ss.at(c));
  }
  return part;
}

}  // namespace

SuperSample::SuperSample(std::size_t n, std::size_t m, std::vector<Task> task_meta,
                         std::vector<LabeledExample> cells)
    : n_(n), m_(m), task_meta_(std::move(task_meta)), cells_(std::move(cells)) {
  if (n == 0 || m == 0) throw ShapeError("supersample needs n, m >= 1");
  if (task_meta_.size() != 2 * n || cells_.size() != 4 * n * m) {
    throw ShapeError("supersample: expected " + std::to_string(2 * n) + " tasks and " +
                     std::to_string(4 * n * m) + " examples");
  }
  const auto dim = cells_.front().features.size();
  for (const auto& ex : cells_) {
    if (ex.features.size() != dim) throw ShapeError("supersample: inconsistent feature dimension");
  }
}

std::size_t SuperSample::flat(const CellIndex& c) const {
  if (c.task_pair >= n_ || c.sample_pair >= m_ || (c.task_slot & ~1) || (c.sample_slot & ~1)) {
    throw std::out_of_range("supersample cell index out of range");
  }
  return ((c.task_pair * 2 + static_cast<std::size_t>(c.task_slot)) * m_ + c.sample_pair) * 2 +
         static_cast<std::size_t>(c.sample_slot);
}

SuperSample build_supersample(const TaskEnvironment& env, std::size_t n, std::size_t m, Rng& rng) {
  if (n == 0 || m == 0) throw ShapeError("build_supersample: n and m must be >= 1");
  auto draws = env.draw(2 * n, 2 * m, rng);
  std::vector<Task> tasks;
  std::vector<LabeledExample> cells;
  tasks.reserve(2 * n);
  cells.reserve(4 * n * m);
  // Task (i, a) is draw 2i+a; its sample (j, b) is example 2j+b. This is
  // exactly the flat cell order.
  for (auto& d : draws) {
    tasks.push_back(d.task);
    for (auto& ex : d.examples) cells.push_back(std::move(ex));
  }
  return SuperSample(n, m, std::move(tasks), std::move(cells));
}

MembershipVectors draw_memberships(std::size_t n, std::size_t m, Rng& rng) {
  if (n == 0 || m == 0) throw ShapeError("draw_memberships: n and m must be >= 1");
  std::bernoulli_distribution coin(0.5);
  MembershipVectors mv;
  mv.s_tilde.resize(n);
  mv.s.resize(m);
  for (auto& b : mv.s_tilde) b = coin(rng) ? 1 : 0;
  for (auto& b : mv.s) b = coin(rng) ? 1 : 0;
  return mv;
}

Partitions select_partitions(const SuperSample& ss, const MembershipVectors& mv) {
  check_shapes(ss, mv);
  std::vector<int> train_slots(ss.m()), test_slots(ss.m());
  for (std::size_t j = 0; j < ss.m(); ++j) {
    train_slots[j] = mv.sample_bit(j);
    test_slots[j] = mv.sample_complement(j);
  }
  Partitions out;
  for (std::size_t i = 0; i < ss.n(); ++i) {
    const int chosen = mv.task_bit(i);
    const int other = mv.task_complement(i);
    out.meta_train.push_back(pick(ss, i, chosen, train_slots));
    out.meta_test.push_back(pick(ss, i, other, test_slots));
    out.heldout_train.push_back(pick(ss, i, other, train_slots));
    out.train_task_test.push_back(pick(ss, i, chosen, test_slots));
  }
  return out;
}

double LossQuad::at(int task_slot, int sample_slot) const {
  if (task_slot == 0) return sample_slot == 0 ? l00 : l01;
  return sample_slot == 0 ? l10 : l11;
}

void LossQuad::set(int task_slot, int sample_slot, double value) {
  if (task_slot == 0) {
    (sample_slot == 0 ? l00 : l01) = value;
  } else {
    (sample_slot == 0 ? l10 : l11) = value;
  }
}

bool LossQuad::valid() const {
  for (double v : {l00, l11, l10, l01}) {
    if (!(v >= 0.0 && v <= 1.0)) return false;
  }
  return true;
}

bool LossQuad::binary() const {
  for (double v : {l00, l11, l10, l01}) {
    if (v != 0.0 && v != 1.0) return false;
  }
  return true;
}

LossPair loss_pair_delta(const LossQuad& quad, int s_tilde_i, int s_j) {
  const int psi = (s_tilde_i ^ s_j) & 1;
  LossPair p;
  p.plus = quad.at(1 ^ psi, 1);
  p.minus = quad.at(psi, 0);
  p.delta = p.plus - p.minus;
  return p;
}

double LossTable::empirical_risk() const {
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < m; ++j) total += train_loss(i, j);
  return total / static_cast<double>(n * m);
}

double LossTable::test_risk() const {
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < m; ++j) total += test_loss(i, j);
  return total / static_cast<double>(n * m);
}

LossTable fill_loss_table(const MlpParams& meta, const AdaptFn& adapt, const SuperSample& ss,
                          const MembershipVectors& mv, const LossFn& loss) {
  check_shapes(ss, mv);
  if (meta.values.size() == 0) {
    throw std::logic_error("fill_loss_table: meta-parameters are empty (untrained state)");
  }
  const Partitions parts = select_partitions(ss, mv);

  LossTable table;
  table.n = ss.n();
  table.m = ss.m();
  table.masks = mv;
  table.quads.assign(ss.n() * ss.m(), LossQuad{});

  auto fill_slot = [&](const TaskPartition& train_part) {
    const std::size_t i = train_part.task_pair;
    const int a = train_part.task_slot;
    MlpParams w;
    try {
      w = adapt(meta, train_part.examples, i, a);
    } catch (const DivergenceError& e) {
      throw AdaptationFailure(e.what());
    }
    if (!w.all_finite()) {
      throw AdaptationFailure("adapted parameters for task (" + std::to_string(i) + ", " +
                              std::to_string(a) + ") are non-finite");
    }
    for (std::size_t j = 0; j < ss.m(); ++j) {
      for (int b : {0, 1}) {
        const double v = loss(w, ss.at(i, a, j, b));
        if (!std::isfinite(v)) {
          throw AdaptationFailure("non-finite loss at cell (" + std::to_string(i) + ", " +
                                  std::to_string(j) + ")");
        }
        table.quad(i, j).set(a, b, v);
      }
    }
  };

  for (std::size_t i = 0; i < ss.n(); ++i) {
    fill_slot(parts.meta_train[i]);     // W on the meta-training task
    fill_slot(parts.heldout_train[i]);  // W' on the meta-test task
  }
  return table;
}

}  // namespace metagen
