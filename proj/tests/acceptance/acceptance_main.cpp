// One PASS/FAIL line per acceptance criterion. Tolerances are fixed here.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "cli.hpp"
#include "metagen/bounds.hpp"
#include "metagen/config.hpp"
#include "metagen/harness.hpp"
#include "metagen/idx.hpp"
#include "metagen/infotheory.hpp"
#include "metagen/metalearn.hpp"
#include "metagen/model.hpp"
#include "metagen/report_io.hpp"
#include "metagen/rng.hpp"

using namespace metagen;

namespace {

constexpr double kLn2 = std::numbers::ln2;

constexpr double kGradTol = 1e-5;
constexpr double kGradSeconds = 10.0;
constexpr double kMiFormTol = 1e-12;
constexpr double kDpiSlack = 1e-12;
constexpr double kInterpTol = 1e-12;
constexpr double kInversionTol = 1e-9;
constexpr double kVarianceTol = 1e-12;
constexpr double kLogdetTol = 1e-8;
constexpr double kSweepSeconds = 15.0 * 60.0;
constexpr double kCoverShare = 0.95;
constexpr double kTightShare = 0.90;
constexpr double kLowRisk = 0.05;

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Verdict {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

// ---------------------------------------------------------------- 1
Verdict gradient_fidelity() {
  const auto t0 = Clock::now();
  const auto s = cli::gradcheck_suite(20, 1);
  const double secs = seconds_since(t0);
  return {s.nets == 20 && s.max_rel_error <= kGradTol && secs < kGradSeconds,
          "nets=" + std::to_string(s.nets) + " coords=" + std::to_string(s.checked) +
              " max_rel=" + fmt("%.3g", s.max_rel_error) + " time=" + fmt("%.2fs", secs)};
}

// ---------------------------------------------------------------- 2
Verdict mi_oracle() {
  const auto s = cli::oracle_suite(100, 0, 2024);
  return {s.joints == 100 && s.max_form_disagreement <= kMiFormTol && s.range_violations == 0,
          "joints=" + std::to_string(s.joints) + " max|kl-entropy|=" +
              fmt("%.3g", s.max_form_disagreement) +
              " range_violations=" + std::to_string(s.range_violations)};
}

// ---------------------------------------------------------------- 3, 4
ExperimentConfig sweep_config(std::size_t k) {
  Rng rng(mix64(0xACCE55ULL, k));
  std::uniform_int_distribution<std::size_t> pick_n(1, 3), pick_m(0, 3), pick_c(3, 6);
  const std::size_t ms[] = {2, 3, 4, 6};
  ExperimentConfig cfg;
  cfg.env.num_classes = pick_c(rng);
  cfg.env.dim = 3;
  cfg.env.mode = k % 2 ? TaskMode::kOneVsRest : TaskMode::kClassPair;
  cfg.trainer = k % 3 == 2 ? Trainer::kNoisyMaml : Trainer::kJointSgld;
  cfg.n_values = {pick_n(rng)};
  cfg.m_values = {ms[pick_m(rng)]};
  cfg.t1 = 2;
  cfg.t2 = 4;
  cfg.sgld.iterations = 12;
  cfg.sgld.eta = Schedule::constant(0.3);
  cfg.sgld.sigma = Schedule::constant(0.01);
  cfg.sgld.track_covariance = false;
  cfg.sgld.adapt.steps = 3;
  cfg.sgld.adapt.step_size = 0.3;
  cfg.hidden = 6;
  cfg.seed = k;
  cfg.validate();
  return cfg;
}

struct SweepOutcome {
  std::size_t configs = 0;
  std::size_t maml = 0;
  std::size_t one_vs_rest = 0;
  std::size_t runs = 0;
  std::size_t cells = 0;
  std::size_t dpi_violations = 0;
  std::size_t cap_violations = 0;
  std::size_t identity_violations = 0;
};

SweepOutcome run_sweep() {
  SweepOutcome o;
  for (std::size_t k = 0; k < 50; ++k) {
    const auto cfg = sweep_config(k);
    const auto res = run_experiment(cfg);
    ++o.configs;
    o.maml += cfg.trainer == Trainer::kNoisyMaml;
    o.one_vs_rest += cfg.env.mode == TaskMode::kOneVsRest;
    for (const auto& p : res.points) {
      std::vector<LossTable> tables;
      for (const auto& r : p.records) {
        if (r.failed) continue;
        ++o.runs;
        tables.push_back(r.table);
        const auto& t = r.table;
        for (std::size_t i = 0; i < t.n; ++i)
          for (std::size_t j = 0; j < t.m; ++j) {
            const double sign = t.masks.sample_bit(j) ? -1.0 : 1.0;
            if (t.test_loss(i, j) - t.train_loss(i, j) != sign * t.pair(i, j).delta) {
              ++o.identity_violations;
            }
          }
      }
      const auto cells = estimate_cells(tables, cfg.estimator);
      for (std::size_t c = 0; c < cells.delta_mi.values.size(); ++c) {
        ++o.cells;
        if (cells.delta_mi.values[c] > cells.pair_mi.values[c] + kDpiSlack) ++o.dpi_violations;
        if (cells.quad_mi.values[c] > 2.0 * kLn2 + kDpiSlack) ++o.cap_violations;
      }
    }
  }
  return o;
}

// ---------------------------------------------------------------- 5
// S uniform; Delta = +1 (S=0) or -1 (S=1) with probability alpha, else 0.
// Realised as interpolating loss tables: zero train loss, test loss 1 on
// an alpha share of runs.
Verdict interpolating_identity() {
  double worst = 0.0;
  bool pair_equal = true;
  std::string detail;
  for (double alpha : {0.1, 0.25, 0.5}) {
    const std::size_t per_bit = 40;
    const auto hits = static_cast<std::size_t>(std::lround(alpha * per_bit));
    std::vector<LossTable> tables;
    for (std::uint8_t s : {0, 1}) {
      for (std::size_t r = 0; r < per_bit; ++r) {
        LossTable t;
        t.n = 1;
        t.m = 1;
        t.masks = {{0}, {s}};
        LossQuad q{0, 0, 0, 0};
        q.set(1, 1 - s, r < hits ? 1.0 : 0.0);  // the meta-test cell
        t.quads = {q};
        t.t1_index = tables.size();
        tables.push_back(t);
      }
    }
    const auto cells = estimate_cells(tables, {});
    const double risk = interpolating_risk(cells.delta_mi);
    worst = std::max(worst, std::abs(risk - alpha));
    pair_equal = pair_equal && cells.delta_mi.values[0] == cells.pair_mi.values[0];
    detail += " a=" + fmt("%.2f", alpha) + ":" + fmt("%.15g", risk);
  }
  return {worst <= kInterpTol && pair_equal,
          "max|risk-alpha|=" + fmt("%.3g", worst) + (pair_equal ? " I(d)=I(pair)" : " I(d)!=I(pair)") +
              detail};
}

// ---------------------------------------------------------------- 6
Verdict kl_round_trip() {
  const auto s = cli::oracle_suite(0, 1000, 99);
  return {s.inversions == 1000 && s.max_inversion_error <= kInversionTol,
          "inversions=" + std::to_string(s.inversions) + " max_error=" +
              fmt("%.3g", s.max_inversion_error)};
}

// ---------------------------------------------------------------- 7
Verdict variance_identity() {
  Rng rng(77);
  double worst = 0.0;
  for (double gamma : {0.1, 0.5, 0.9}) {
    for (int trial = 0; trial < 20; ++trial) {
      std::uniform_int_distribution<std::size_t> dim(1, 6), runs(1, 15);
      std::uniform_real_distribution<double> rate(0.0, 1.0);
      const std::size_t n = dim(rng), m = dim(rng), t = runs(rng);
      std::bernoulli_distribution coin(rate(rng));
      std::vector<LossTable> tables;
      double mean_r = 0.0, mean_r2 = 0.0;
      for (std::size_t k = 0; k < t; ++k) {
        LossTable tab;
        tab.n = n;
        tab.m = m;
        tab.quads.resize(n * m);
        for (std::size_t i = 0; i < n; ++i) tab.masks.s_tilde.push_back(coin(rng));
        for (std::size_t j = 0; j < m; ++j) tab.masks.s.push_back(coin(rng));
        for (auto& q : tab.quads) q = {double(coin(rng)), double(coin(rng)), double(coin(rng)), double(coin(rng))};
        const double r = tab.empirical_risk();
        mean_r += r;
        mean_r2 += r * r;
        tables.push_back(std::move(tab));
      }
      mean_r /= double(t);
      mean_r2 /= double(t);
      const double v = gamma_variance(tables, gamma);
      worst = std::max(worst, std::abs(v - (mean_r - (1.0 - gamma * gamma) * mean_r2)));
    }
  }
  return {worst <= kVarianceTol, "gammas={0.1,0.5,0.9} trials=60 max_error=" + fmt("%.3g", worst)};
}

// ---------------------------------------------------------------- 8
struct SweepTrend {
  Verdict verdict;
  std::string table;
};

bool is_fast_family(const std::string& name) {
  return name == "fast_rate" || name == "variance_fast_rate" || name == "fast_rate_interpolating";
}

SweepTrend gaussian_sweep() {
  ExperimentConfig cfg = load_config(METAGEN_SOURCE_DIR "/configs/gaussian_sweep.cfg");
  cfg.jobs = std::max(1u, std::thread::hardware_concurrency());
  const auto t0 = Clock::now();
  const auto res = run_experiment(cfg);
  const double secs = seconds_since(t0);

  std::ostringstream table;
  // (a) monotone in m, per (n, bound)
  std::size_t series = 0, bad_series = 0;
  for (std::size_t n : cfg.n_values) {
    std::map<std::string, std::vector<double>> by_bound;
    for (std::size_t m : cfg.m_values) {
      for (const auto& p : res.points) {
        if (p.report.n != n || p.report.m != m) continue;
        for (const auto& b : p.report.bounds) by_bound[b.name].push_back(b.value);
      }
    }
    for (const auto& [name, vals] : by_bound) {
      if (vals.size() != cfg.m_values.size()) continue;  // not reported at every m
      ++series;
      std::size_t inversions = 0;
      for (std::size_t k = 1; k < vals.size(); ++k) inversions += vals[k] > vals[k - 1];
      if (inversions > 1) {
        ++bad_series;
        table << "    non-monotone: n=" << n << " " << name << "\n";
      }
    }
  }

  // (b) coverage, (c) tightness
  std::size_t pairs = 0, covered = 0, low_risk = 0, tight = 0;
  for (const auto& p : res.points) {
    const auto& r = p.report;
    table << "    n=" << r.n << " m=" << r.m << " R=" << fmt("%.4f", r.empirical_risk)
          << " gap=" << fmt("%.4f", r.gap.gap) << "+-" << fmt("%.4f", r.gap.std_err)
          << " fails=" << r.failures;
    for (const auto& b : r.bounds) {
      ++pairs;
      covered += b.value >= std::abs(r.gap.gap) - 2.0 * r.gap.std_err;
      table << " " << b.name << "=" << fmt("%.4f", b.value);
    }
    table << "\n";
    if (r.empirical_risk <= kLowRisk) {
      ++low_risk;
      double fast = INFINITY, other = INFINITY;
      for (const auto& b : r.bounds) {
        // the zero-risk identity is an equality, not a competing bound
        if (b.name == "interpolating_risk") continue;
        (is_fast_family(b.name) ? fast : other) = std::min(is_fast_family(b.name) ? fast : other, b.value);
      }
      tight += fast <= other;
    }
  }
  const double cover = pairs ? double(covered) / double(pairs) : 0.0;
  const double tight_share = low_risk ? double(tight) / double(low_risk) : 0.0;
  const bool ok_a = bad_series == 0 && series > 0;
  const bool ok_b = cover >= kCoverShare;
  const bool ok_c = low_risk > 0 && tight_share >= kTightShare;
  const bool ok_t = secs <= kSweepSeconds;
  std::string d = "(a) " + std::to_string(series - bad_series) + "/" + std::to_string(series) +
                  " series monotone; (b) coverage " + fmt("%.3f", cover) + "; (c) fast tightest in " +
                  std::to_string(tight) + "/" + std::to_string(low_risk) +
                  " low-risk configs; time " + fmt("%.1fs", secs);
  return {{ok_a && ok_b && ok_c && ok_t, d}, table.str()};
}

// ---------------------------------------------------------------- 9
Verdict trajectory_numerics() {
  Rng rng(909);
  std::normal_distribution<double> z(0.0, 1.0);
  std::uniform_int_distribution<int> dim(1, 20);
  double worst = 0.0;
  std::size_t fischer_violations = 0;
  for (int k = 0; k < 100; ++k) {
    const int d = dim(rng);
    Eigen::MatrixXd a(d, d + 2);
    for (int i = 0; i < a.rows(); ++i)
      for (int j = 0; j < a.cols(); ++j) a(i, j) = z(rng);
    const Eigen::MatrixXd spd = a * a.transpose() / double(d) + 1e-3 * Eigen::MatrixXd::Identity(d, d);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(spd);
    const double oracle = es.eigenvalues().array().log().sum();
    worst = std::max(worst, std::abs(logdet_psd(spd) - oracle));
    if (d >= 2) {
      const int h = 1 + k % (d - 1);
      const double lhs = logdet_psd(spd);
      const double rhs = logdet_psd(spd.topLeftCorner(h, h)) +
                         logdet_psd(spd.bottomRightCorner(d - h, d - h));
      fischer_violations += lhs > rhs + 1e-10;
    }
  }

  // frozen trajectory from a real joint-SGLD run
  const auto env = make_gaussian_env(4, 3);
  Rng data_rng(910);
  std::vector<TaskSamples> tasks;
  for (auto& d : env.draw(2, 5, data_rng)) tasks.push_back(d.examples);
  SgldConfig sc;
  sc.iterations = 8;
  sc.eta = Schedule::constant(0.2);
  sc.sigma = Schedule::constant(0.02);
  sc.cov_resamples = 6;
  const auto init = init_params(make_mlp_shape(3, 5, 2, 4), data_rng);
  auto traj = joint_sgld_train(tasks, init, sc, data_rng).trajectory;
  std::vector<double> values;
  for (double mult : {1.0, 2.0, 4.0}) {
    for (auto& s : traj.steps) s.sigma = 0.02 * mult;
    values.push_back(sgld_trajectory_bound(traj, 2, 5));
  }
  const bool mono = values[0] >= values[1] && values[1] >= values[2];
  return {worst <= kLogdetTol && fischer_violations == 0 && mono,
          "max|logdet-eig|=" + fmt("%.3g", worst) + " fischer_violations=" +
              std::to_string(fischer_violations) + " bound(sigma,2sigma,4sigma)=" +
              fmt("%.4g", values[0]) + "," + fmt("%.4g", values[1]) + "," + fmt("%.4g", values[2])};
}

// ---------------------------------------------------------------- 10
std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream b;
  b << in.rdbuf();
  return b.str();
}

Verdict determinism() {
  const auto base = std::filesystem::temp_directory_path() / "metagen_acceptance_jobs";
  std::filesystem::remove_all(base);
  std::vector<std::string> csvs;
  bool ran = true;
  for (const char* jobs : {"1", "2", "8"}) {
    const auto out = (base / jobs).string();
    std::vector<const char*> argv = {"metagen", "run", "--config", METAGEN_SOURCE_DIR "/configs/small.cfg",
                                     "--seed", "17", "--jobs", jobs, "--out", out.c_str(), "--quiet"};
    std::ostringstream so, se;
    ran = ran && cli::cli_main(static_cast<int>(argv.size()), argv.data(), so, se) == 0;
    csvs.push_back(slurp(base / jobs / "results.csv"));
  }
  std::filesystem::remove_all(base);
  const bool same = !csvs[0].empty() && csvs[0] == csvs[1] && csvs[0] == csvs[2];
  return {ran && same, std::string("jobs 1/2/8 ") + (same ? "byte-identical" : "differ") + ", " +
                           std::to_string(csvs[0].size()) + " bytes"};
}

// ---------------------------------------------------------------- 11
Verdict idx_ingestion() {
  const std::string dir = METAGEN_SOURCE_DIR "/tests/fixtures/";
  bool ok = true;
  const auto px = load_idx_file(dir + "single_pixel.idx");
  ok = ok && px.dims == std::vector<std::uint32_t>{1, 1, 1} && px.data == std::vector<std::uint8_t>{0x7F};
  const auto lab = load_idx_file(dir + "labels_small.idx");
  ok = ok && lab.dims == std::vector<std::uint32_t>{3} && lab.data == std::vector<std::uint8_t>{0, 1, 9};
  const auto img = load_idx_file(dir + "images_2x2x3.idx");
  std::vector<std::uint8_t> seq(12);
  for (std::uint8_t k = 0; k < 12; ++k) seq[k] = k;
  ok = ok && img.dims == std::vector<std::uint32_t>{2, 2, 3} && img.data == seq;

  std::vector<IdxErrorKind> kinds;
  for (const char* f : {"wrong_magic.idx", "truncated.idx", "overflow.idx"}) {
    try {
      load_idx_file(dir + f);
      ok = false;
    } catch (const IdxError& e) {
      kinds.push_back(e.kind());
    }
  }
  const bool distinct = kinds == std::vector<IdxErrorKind>{IdxErrorKind::kWrongMagic, IdxErrorKind::kTruncated,
                                                           IdxErrorKind::kDimensionOverflow};
  return {ok && distinct, std::string("valid fixtures ") + (ok ? "match" : "mismatch") +
                              ", malformed kinds " + (distinct ? "wrong_magic/truncated/overflow" : "wrong")};
}

}  // namespace

int main() {
  int failures = 0;
  auto report = [&](int id, const std::string& name, const std::function<Verdict()>& fn) {
    Verdict v;
    try {
      v = fn();
    } catch (const std::exception& e) {
      v = {false, std::string("exception: ") + e.what()};
    }
    failures += !v.pass;
    std::printf("%s  %2d  %-28s %s\n", v.pass ? "PASS" : "FAIL", id, name.c_str(), v.detail.c_str());
    std::fflush(stdout);
  };

  report(1, "gradient fidelity", gradient_fidelity);
  report(2, "MI oracle equivalence", mi_oracle);

  SweepOutcome sweep;
  std::string sweep_error;
  try {
    sweep = run_sweep();
  } catch (const std::exception& e) {
    sweep_error = e.what();
  }
  report(3, "empirical DPI suite", [&]() -> Verdict {
    if (!sweep_error.empty()) return {false, "exception: " + sweep_error};
    return {sweep.configs == 50 && sweep.maml > 0 && sweep.one_vs_rest > 0 &&
                sweep.dpi_violations == 0 && sweep.cap_violations == 0,
            "configs=" + std::to_string(sweep.configs) + " (maml " + std::to_string(sweep.maml) +
                ", one-vs-rest " + std::to_string(sweep.one_vs_rest) + ") cells=" +
                std::to_string(sweep.cells) + " dpi_violations=" + std::to_string(sweep.dpi_violations) +
                " cap_violations=" + std::to_string(sweep.cap_violations)};
  });
  report(4, "gap identity", [&]() -> Verdict {
    if (!sweep_error.empty()) return {false, "exception: " + sweep_error};
    return {sweep.runs > 0 && sweep.identity_violations == 0,
            "runs=" + std::to_string(sweep.runs) + " violations=" + std::to_string(sweep.identity_violations)};
  });
  report(5, "interpolating identity", interpolating_identity);
  report(6, "KL inversion round trip", kl_round_trip);
  report(7, "gamma-variance identity", variance_identity);
  std::string sweep_table;
  report(8, "gaussian m-sweep trends", [&] {
    auto f = gaussian_sweep();
    sweep_table = f.table;
    return f.verdict;
  });
  if (!sweep_table.empty()) std::printf("%s", sweep_table.c_str());
  report(9, "trajectory-bound numerics", trajectory_numerics);
  report(10, "determinism across jobs", determinism);
  report(11, "IDX ingestion", idx_ingestion);

  std::printf("%d of 11 criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
