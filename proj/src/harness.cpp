#include "metagen/harness.hpp"

#include <algorithm>
#include <atomic>
#include <bit>
#include <cmath>
#include <exception>
#include <mutex>
#include <stdexcept>
#include <thread>

#include "metagen/metalearn.hpp"
#include "metagen/model.hpp"
#include "metagen/rng.hpp"

namespace metagen {
namespace {

Symbol scalar_symbol(double v) { return std::bit_cast<Symbol>(v + 0.0); }

class Interner {
 public:
  Symbol operator()(std::vector<double> key) {
    return ids_.emplace(std::move(key), static_cast<Symbol>(ids_.size())).first->second;
  }

 private:
  std::map<std::vector<double>, Symbol> ids_;
};

bool run_order(const RunRecord& a, const RunRecord& b) {
  return std::tie(a.t1_index, a.t2_index) < std::tie(b.t1_index, b.t2_index);
}

std::size_t maml_test_split(const ExperimentConfig& cfg, std::size_t m) {
  return cfg.m_test == 0 ? m / 2 : cfg.m_test;
}

MiCellEstimates empty_cells(std::size_t n, std::size_t m, MiKind kind) {
  return uniform_cells(n, m, kind, 0.0);
}

}  // namespace

std::uint64_t point_seed(std::uint64_t master, std::size_t n, std::size_t m) {
  return mix64(master, n, m);
}

std::uint64_t supersample_seed(std::uint64_t point, std::size_t t1_index) {
  return mix64(point, t1_index, kSupersampleTag);
}

std::uint64_t run_seed(std::uint64_t point, std::size_t t1_index, std::size_t t2_index) {
  return mix64(point, t1_index, t2_index);
}

GapEstimate empirical_gap(std::span<const RunRecord> records) {
  std::vector<double> per_run;
  for (const auto& r : records) {
    if (r.failed) continue;
    const auto& t = r.table;
    double total = 0.0;
    for (std::size_t i = 0; i < t.n; ++i) {
      for (std::size_t j = 0; j < t.m; ++j) {
        const double sign = t.masks.sample_bit(j) ? -1.0 : 1.0;
        total += sign * t.pair(i, j).delta;
      }
    }
    per_run.push_back(total / static_cast<double>(t.n * t.m));
  }
  if (per_run.empty()) throw std::invalid_argument("empirical_gap: no successful runs");
  GapEstimate out;
  for (double v : per_run) out.gap += v;
  out.gap /= static_cast<double>(per_run.size());
  if (per_run.size() > 1) {
    double ss = 0.0;
    for (double v : per_run) ss += (v - out.gap) * (v - out.gap);
    const double var = ss / static_cast<double>(per_run.size() - 1);
    out.std_err = std::sqrt(var / static_cast<double>(per_run.size()));
  }
  return out;
}

CellEstimates estimate_cells(std::span<const LossTable> tables, const MiOptions& options) {
  if (tables.empty()) throw std::invalid_argument("estimate_cells: no loss tables");
  const std::size_t n = tables.front().n;
  const std::size_t m = tables.front().m;
  for (const auto& t : tables) {
    if (t.n != n || t.m != m) throw ShapeError("estimate_cells: loss tables differ in shape");
  }

  CellEstimates out;
  out.delta_mi = empty_cells(n, m, MiKind::kDeltaMi);
  out.delta_cmi = empty_cells(n, m, MiKind::kDeltaCmi);
  out.pair_mi = empty_cells(n, m, MiKind::kPairMi);
  out.single_mi = empty_cells(n, m, MiKind::kSingleMi);
  out.quad_mi = empty_cells(n, m, MiKind::kQuadMi);
  out.quad_cmi = empty_cells(n, m, MiKind::kQuadCmi);
  for (const auto& t : tables) out.quad_by_group.try_emplace(t.t1_index, empty_cells(n, m, MiKind::kQuadMi));
  out.groups = out.quad_by_group.size();

  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < m; ++j) {
      Interner pairs, quads;
      JointCounter delta, pair, single, quad;
      std::map<std::size_t, JointCounter> delta_g, quad_g;
      for (const auto& t : tables) {
        const LossPair lp = t.pair(i, j);
        const LossQuad& q = t.quad(i, j);
        const Symbol s = t.masks.sample_bit(j);
        const Symbol st = 2 * t.masks.task_bit(i) + s;
        const Symbol d = scalar_symbol(lp.delta);
        const Symbol qs = quads({q.l00, q.l11, q.l10, q.l01});
        delta.add(d, s);
        pair.add(pairs({lp.plus, lp.minus}), s);
        single.add(scalar_symbol(lp.plus), s);
        quad.add(qs, st);
        delta_g[t.t1_index].add(d, s);
        quad_g[t.t1_index].add(qs, st);
      }
      const std::size_t k = i * m + j;
      out.delta_mi.values[k] = plugin_mi(delta.build(), options);
      out.pair_mi.values[k] = plugin_mi(pair.build(), options);
      out.single_mi.values[k] = plugin_mi(single.build(), options);
      out.quad_mi.values[k] = plugin_mi(quad.build(), options);

      GroupedJoint dg, qg;
      for (const auto& [g, c] : delta_g) dg.emplace(static_cast<std::int64_t>(g), c.build());
      for (const auto& [g, c] : quad_g) qg.emplace(static_cast<std::int64_t>(g), c.build());
      out.delta_cmi.values[k] = conditional_plugin_mi(dg, options).mean;
      const ConditionalMi qc = conditional_plugin_mi(qg, options);
      out.quad_cmi.values[k] = qc.mean;
      for (const auto& [g, v] : qc.per_group) {
        out.quad_by_group.at(static_cast<std::size_t>(g)).values[k] = v;
      }
    }
  }
  return out;
}

const BoundValue* BoundReport::find(std::string_view name) const {
  for (const auto& b : bounds) {
    if (b.name == name) return &b;
  }
  return nullptr;
}

BoundReport aggregate(const ExperimentConfig& cfg, std::size_t n, std::size_t m,
                      std::vector<RunRecord> records) {
  std::sort(records.begin(), records.end(), run_order);
  BoundReport rep;
  rep.config_hash = config_hash(cfg, n, m);
  rep.n = n;
  rep.m = m;
  rep.t1 = cfg.t1;
  rep.t2 = cfg.t2;
  rep.trainer = cfg.trainer;
  rep.mode = cfg.env.mode;

  std::vector<LossTable> tables;
  std::vector<double> trajectory;
  for (const auto& r : records) {
    if (r.failed) {
      ++rep.failures;
      continue;
    }
    tables.push_back(r.table);
    rep.empirical_risk += r.empirical_risk;
    rep.test_risk += r.test_risk;
    if (std::isfinite(r.trajectory_bound)) trajectory.push_back(r.trajectory_bound);
  }
  rep.runs = tables.size();
  if (tables.empty()) {
    throw std::runtime_error("all " + std::to_string(records.size()) + " runs failed for n=" +
                             std::to_string(n) + ", m=" + std::to_string(m));
  }
  rep.empirical_risk /= static_cast<double>(rep.runs);
  rep.test_risk /= static_cast<double>(rep.runs);
  rep.gap = empirical_gap(records);

  const CellEstimates cells = estimate_cells(tables, cfg.estimator);
  const double r_hat = rep.empirical_risk;

  BoundParams fast = cfg.params;
  if (fast.c1 == 0.0) fast.c1 = fast_rate_constants(fast.c2, fast.variant);
  BoundParams var = cfg.params;
  if (var.c1 == 0.0) var.c1 = variance_fast_rate_constants(var.c2, var.gamma);
  const double v_gamma = gamma_variance(tables, cfg.params.gamma);

  double min_term = 0.0;
  for (std::size_t k = 0; k < cells.pair_mi.values.size(); ++k) {
    min_term += std::min(cells.pair_mi.values[k], 2.0 * cells.single_mi.values[k]);
  }
  min_term /= static_cast<double>(cells.pair_mi.values.size());

  rep.components = {
      {"mean_delta_mi", cells.delta_mi.mean()},   {"mean_delta_cmi", cells.delta_cmi.mean()},
      {"mean_pair_mi", cells.pair_mi.mean()},     {"mean_single_mi", cells.single_mi.mean()},
      {"mean_quad_mi", cells.quad_mi.mean()},     {"mean_quad_cmi", cells.quad_cmi.mean()},
      {"mean_min_term", min_term},                {"gamma_variance", v_gamma},
      {"c1_fast_rate", fast.c1},                  {"c1_variance", var.c1},
      {"c2", cfg.params.c2},                      {"gamma", cfg.params.gamma},
      {"cmi_groups", static_cast<double>(cells.groups)},
  };

  const bool interpolating = r_hat == 0.0;
  auto selected = [&](std::string_view name) {
    return std::find(cfg.bounds.begin(), cfg.bounds.end(), name) != cfg.bounds.end();
  };
  // Emitted in known_bounds() order regardless of the selection order.
  for (const auto& name : known_bounds()) {
    if (!selected(name)) continue;
    BoundValue b{name, 0.0, ""};
    if (name == "sqrt_delta_mi") {
      b.value = sqrt_mi_bound(cells.delta_mi);
      b.estimator = "plugin pooled I(delta;S)";
    } else if (name == "sqrt_delta_cmi") {
      b.value = sqrt_mi_bound(cells.delta_cmi);
      b.estimator = "plugin t1-grouped I(delta;S|supersample)";
    } else if (name == "sqrt_quad_mi") {
      b.value = sqrt_mi_bound(cells.quad_mi);
      b.estimator = "plugin pooled I(L;S~,S)";
    } else if (name == "sqrt_quad_cmi") {
      for (const auto& [g, c] : cells.quad_by_group) b.value += sqrt_mi_bound(c);
      b.value /= static_cast<double>(cells.quad_by_group.size());
      b.estimator = "plugin t1-grouped I(L;S~,S|supersample), mean of sqrt";
    } else if (name == "kl_quad_mi") {
      b.value = kl_inversion_bound(r_hat, cells.quad_mi).gap_upper;
      b.estimator = "plugin pooled I(L;S~,S), binary-KL inversion";
    } else if (name == "fast_rate") {
      b.value = fast_rate_bound(r_hat, fast, cells.pair_mi, cells.single_mi);
      b.estimator = "plugin pooled min{I(pair;S), 2 I(single;S)}";
    } else if (name == "fast_rate_interpolating") {
      if (!interpolating) continue;
      b.value = fast_rate_interpolating_bound(cells.pair_mi, cells.single_mi);
      b.estimator = "plugin pooled min{I(pair;S), 2 I(single;S)}, zero empirical risk";
    } else if (name == "variance_fast_rate") {
      b.value = variance_fast_rate_bound(v_gamma, var, cells.pair_mi, cells.single_mi);
      b.estimator = "plugin pooled min{I(pair;S), 2 I(single;S)}, gamma-variance";
    } else if (name == "interpolating_risk") {
      if (!interpolating) continue;
      b.value = interpolating_risk(cells.delta_mi);
      b.estimator = "plugin pooled I(delta;S), zero empirical risk";
    } else if (name == "trajectory") {
      if (trajectory.empty()) continue;
      for (double v : trajectory) b.value += v;
      b.value /= static_cast<double>(trajectory.size());
      b.estimator = cfg.trainer == Trainer::kNoisyMaml
                        ? "gradient-covariance log-det, MAML blocks, mean over runs"
                        : "gradient-covariance log-det, joint block, mean over runs";
    }
    rep.bounds.push_back(std::move(b));
  }
  return rep;
}

RunRecord execute_run(const ExperimentConfig& cfg, const SuperSample& ss, std::size_t t1_index,
                      std::size_t t2_index, std::uint64_t seed) {
  RunRecord rec;
  rec.t1_index = t1_index;
  rec.t2_index = t2_index;
  Rng rng(seed);
  const std::size_t n = ss.n();
  const std::size_t m = ss.m();
  const MembershipVectors mv = draw_memberships(n, m, rng);
  const Partitions parts = select_partitions(ss, mv);
  std::vector<TaskSamples> train;
  train.reserve(n);
  for (const auto& tp : parts.meta_train) train.push_back(tp.examples);

  const auto dim = static_cast<std::size_t>(ss.at(0, 0, 0, 0).features.size());
  const MlpParams init = init_params(make_mlp_shape(dim, cfg.hidden, kTaskLabels, cfg.layers), rng);

  try {
    MlpParams meta;
    GradientTrajectory traj;
    if (cfg.trainer == Trainer::kJointSgld) {
      auto r = joint_sgld_train(train, init, cfg.sgld, rng);
      meta = std::move(r.meta);
      traj = std::move(r.trajectory);
    } else {
      MamlConfig mc;
      static_cast<SgldConfig&>(mc) = cfg.sgld;
      mc.beta = cfg.beta;
      mc.m_test = maml_test_split(cfg, m);
      mc.m_train = m - mc.m_test;
      auto r = maml_noisy_train(train, init, mc, rng);
      meta = std::move(r.meta);
      traj = std::move(r.trajectory);
    }

    const AdaptFn adapt = [&](const MlpParams& u, std::span<const LabeledExample> data,
                              std::size_t i, int a) {
      Rng r(mix64(seed, 2 * i + static_cast<std::size_t>(a), kAdaptTag));
      return adapt_task(u, data, cfg.sgld.adapt, r);
    };
    const LossFn loss = [](const MlpParams& w, const LabeledExample& ex) {
      return static_cast<double>(zero_one_loss(w, ex));
    };
    rec.table = fill_loss_table(meta, adapt, ss, mv, loss);
    rec.table.run_id = t1_index * cfg.t2 + t2_index;
    rec.table.t1_index = t1_index;
    rec.table.t2_index = t2_index;
    rec.empirical_risk = rec.table.empirical_risk();
    rec.test_risk = rec.table.test_risk();

    if (cfg.sgld.track_covariance) {
      rec.trajectory_steps = traj.steps.size();
      rec.trajectory_bound = cfg.trainer == Trainer::kJointSgld
                                 ? sgld_trajectory_bound(traj, n, m)
                                 : maml_trajectory_bound(traj, n, maml_test_split(cfg, m));
    }
  } catch (const AdaptationFailure& e) {
    rec.failed = true;
    rec.failure = e.what();
  } catch (const DivergenceError& e) {
    rec.failed = true;
    rec.failure = e.what();
  } catch (const NonFiniteLossError& e) {
    rec.failed = true;
    rec.failure = e.what();
  }
  return rec;
}

ExperimentResult run_experiment(const ExperimentConfig& cfg, const ProgressFn& progress) {
  cfg.validate();
  const auto env = make_environment(cfg.env);

  struct Point {
    std::size_t n, m;
    std::uint64_t seed;
    std::vector<SuperSample> supersamples;
  };
  std::vector<Point> points;
  for (std::size_t n : cfg.n_values) {
    for (std::size_t m : cfg.m_values) {
      Point p{n, m, point_seed(cfg.seed, n, m), {}};
      for (std::size_t a = 0; a < cfg.t1; ++a) {
        Rng rng(supersample_seed(p.seed, a));
        p.supersamples.push_back(build_supersample(*env, n, m, rng));
      }
      points.push_back(std::move(p));
    }
  }

  const std::size_t per_point = cfg.t1 * cfg.t2;
  const std::size_t total = points.size() * per_point;
  std::vector<RunRecord> records(total);
  std::atomic<std::size_t> next{0};
  std::atomic<std::size_t> done{0};
  std::mutex mu;
  std::exception_ptr error;

  auto worker = [&] {
    while (true) {
      const std::size_t item = next.fetch_add(1);
      if (item >= total) return;
      const auto& p = points[item / per_point];
      const std::size_t a = (item % per_point) / cfg.t2;
      const std::size_t b = item % cfg.t2;
      try {
        records[item] = execute_run(cfg, p.supersamples[a], a, b, run_seed(p.seed, a, b));
      } catch (...) {
        std::lock_guard lock(mu);
        if (!error) error = std::current_exception();
        next.store(total);
        return;
      }
      const std::size_t finished = done.fetch_add(1) + 1;
      if (progress) {
        std::lock_guard lock(mu);
        progress(finished, total);
      }
    }
  };

  const std::size_t threads = std::min(cfg.jobs, total);
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t k = 0; k < threads; ++k) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  if (error) std::rethrow_exception(error);

  ExperimentResult out;
  for (std::size_t pi = 0; pi < points.size(); ++pi) {
    std::vector<RunRecord> mine(records.begin() + static_cast<std::ptrdiff_t>(pi * per_point),
                                records.begin() + static_cast<std::ptrdiff_t>((pi + 1) * per_point));
    PointResult pr;
    pr.report = aggregate(cfg, points[pi].n, points[pi].m, mine);
    pr.report.environment = env->describe();
    std::sort(mine.begin(), mine.end(), run_order);
    pr.records = std::move(mine);
    out.points.push_back(std::move(pr));
  }
  return out;
}

}  // namespace metagen
