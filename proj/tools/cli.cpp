#include "cli.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <exception>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "metagen/config.hpp"
#include "metagen/harness.hpp"
#include "metagen/infotheory.hpp"
#include "metagen/model.hpp"
#include "metagen/plot.hpp"
#include "metagen/report_io.hpp"
#include "metagen/rng.hpp"

namespace metagen::cli {
namespace {

std::string fixed(double v, int digits = 6) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.*g", digits, v);
  return buf;
}

int do_run(const std::string& config_path, const std::uint64_t* seed, const std::string* out_dir,
           const std::size_t* jobs, bool quiet, std::ostream& out) {
  ExperimentConfig cfg = load_config(config_path);
  if (seed) cfg.seed = *seed;
  if (out_dir) cfg.out = *out_dir;
  if (jobs) cfg.jobs = *jobs;
  cfg.validate();

  ProgressFn progress;
  if (!quiet) {
    progress = [&out](std::size_t done, std::size_t total) {
      if (done == total || done % 10 == 0) out << "  runs " << done << "/" << total << "\n";
    };
  }
  const ExperimentResult result = run_experiment(cfg, progress);
  write_outputs(cfg, result, cfg.out);

  for (const auto& p : result.points) {
    const auto& r = p.report;
    out << "n=" << r.n << " m=" << r.m << " runs=" << r.runs << " failures=" << r.failures
        << " R_hat=" << fixed(r.empirical_risk) << " gap=" << fixed(r.gap.gap) << " +/- "
        << fixed(r.gap.std_err) << "\n";
    for (const auto& b : r.bounds) out << "  " << b.name << " = " << fixed(b.value) << "\n";
  }
  out << "wrote " << (std::filesystem::path(cfg.out) / "results.csv").string() << "\n";
  return 0;
}

}  // namespace

GradcheckSummary gradcheck_suite(std::size_t nets, std::uint64_t seed, double eps) {
  GradcheckSummary s;
  for (std::size_t k = 0; k < nets; ++k) {
    Rng rng(mix64(seed, k));
    std::uniform_int_distribution<std::size_t> width(2, 32), batch_size(1, 8), out_dim(2, 4);
    const std::size_t in = width(rng);
    const std::size_t hidden = width(rng);
    const std::size_t classes = out_dim(rng);
    const MlpParams params = init_params(make_mlp_shape(in, hidden, classes, 4), rng);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::uniform_int_distribution<int> label(0, static_cast<int>(classes) - 1);
    std::vector<LabeledExample> batch(batch_size(rng));
    for (auto& ex : batch) {
      ex.features = Eigen::VectorXd(static_cast<Eigen::Index>(in));
      for (Eigen::Index i = 0; i < ex.features.size(); ++i) ex.features(i) = normal(rng);
      ex.label = label(rng);
    }
    const GradCheckResult r = grad_check(params, batch, eps);
    s.max_rel_error = std::max(s.max_rel_error, r.max_rel_error);
    s.checked += r.checked;
    s.skipped_kinks += r.skipped_kinks;
    ++s.nets;
  }
  return s;
}

OracleSummary oracle_suite(std::size_t joints, std::size_t inversions, std::uint64_t seed) {
  OracleSummary s;
  Rng rng(seed);
  std::uniform_int_distribution<std::size_t> rows(1, 6), cols(1, 4);
  std::uniform_int_distribution<std::uint64_t> count(0, 20);
  for (std::size_t k = 0; k < joints; ++k) {
    const std::size_t nx = rows(rng), ny = cols(rng);
    std::vector<Symbol> sx(nx), sy(ny);
    for (std::size_t x = 0; x < nx; ++x) sx[x] = static_cast<Symbol>(x);
    for (std::size_t y = 0; y < ny; ++y) sy[y] = static_cast<Symbol>(y);
    std::vector<std::vector<std::uint64_t>> counts(nx, std::vector<std::uint64_t>(ny));
    std::uint64_t total = 0;
    for (auto& row : counts) {
      for (auto& c : row) total += (c = count(rng));
    }
    if (total == 0) counts[0][0] = 1;
    const auto joint = DiscreteJoint::from_counts(sx, sy, counts);
    const double kl = plugin_mi(joint);
    const double ent = plugin_mi_entropy_form(joint);
    s.max_form_disagreement = std::max(s.max_form_disagreement, std::abs(kl - ent));
    const double cap = std::min(entropy_x(joint), entropy_y(joint));
    if (kl < 0.0 || kl > cap + 1e-12) ++s.range_violations;
    ++s.joints;
  }
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  while (s.inversions < inversions) {
    double p = unit(rng), q = unit(rng);
    if (p > q) std::swap(p, q);
    if (!(p < q)) continue;
    const double c = binary_kl(p, 0.5 * (p + q));
    s.max_inversion_error = std::max(s.max_inversion_error, std::abs(invert_kl_risk(p, c) - q));
    ++s.inversions;
  }
  return s;
}

int cli_main(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Information-theoretic meta-generalization bounds: experiments and oracles",
               "metagen"};
  app.require_subcommand(1);

  auto* run = app.add_subcommand("run", "run the t1 x t2 protocol for every sweep point");
  std::string config_path;
  std::uint64_t seed = 0;
  std::string out_dir;
  std::size_t jobs = 1;
  bool quiet = false;
  run->add_option("--config", config_path, "configuration file (key = value)")
      ->required()
      ->check(CLI::ExistingFile);
  auto* seed_opt = run->add_option("--seed", seed, "override the master seed");
  auto* out_opt = run->add_option("--out", out_dir, "override the output directory");
  auto* jobs_opt = run->add_option("--jobs", jobs, "worker threads")->check(CLI::PositiveNumber);
  run->add_flag("--quiet", quiet, "suppress progress lines");

  auto* gc = app.add_subcommand("gradcheck", "finite-difference check of the MLP gradient");
  std::size_t nets = 20;
  std::uint64_t gc_seed = 1;
  double eps = 1e-6;
  double gc_tol = 1e-5;
  gc->add_option("--nets", nets, "number of random networks")->check(CLI::PositiveNumber);
  gc->add_option("--seed", gc_seed, "seed");
  gc->add_option("--eps", eps, "central-difference step")->check(CLI::Range(1e-12, 1e-3));
  gc->add_option("--tol", gc_tol, "maximum accepted relative error");

  auto* oracle = app.add_subcommand("oracle", "brute-force MI and KL-inversion oracles");
  std::size_t joints = 100, inversions = 1000;
  std::uint64_t or_seed = 7;
  oracle->add_option("--joints", joints, "random discrete joints");
  oracle->add_option("--inversions", inversions, "random KL inversions");
  oracle->add_option("--seed", or_seed, "seed");

  auto* plot = app.add_subcommand("plot", "SVG chart of bounds and gap against m");
  std::string csv_path, svg_path;
  plot->add_option("--csv", csv_path, "results.csv from a run")->required()->check(CLI::ExistingFile);
  plot->add_option("--out", svg_path, "output SVG path")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n" << app.help();
    return 2;
  }

  try {
    if (*run) {
      return do_run(config_path, *seed_opt ? &seed : nullptr, *out_opt ? &out_dir : nullptr,
                    *jobs_opt ? &jobs : nullptr, quiet, out);
    }
    if (*gc) {
      const auto s = gradcheck_suite(nets, gc_seed, eps);
      out << "nets=" << s.nets << " checked=" << s.checked << " skipped_kinks=" << s.skipped_kinks
          << " max_rel_error=" << fixed(s.max_rel_error, 3) << "\n";
      return s.max_rel_error <= gc_tol ? 0 : 1;
    }
    if (*oracle) {
      const auto s = oracle_suite(joints, inversions, or_seed);
      out << "joints=" << s.joints << " max|I_kl - I_entropy|=" << fixed(s.max_form_disagreement, 3)
          << " range_violations=" << s.range_violations << "\n"
          << "inversions=" << s.inversions << " max_error=" << fixed(s.max_inversion_error, 3)
          << "\n";
      const bool ok = s.max_form_disagreement <= 1e-12 && s.range_violations == 0 &&
                      s.max_inversion_error <= 1e-9;
      return ok ? 0 : 1;
    }
    if (*plot) {
      write_svg(read_csv(csv_path), svg_path);
      out << "wrote " << svg_path << "\n";
      return 0;
    }
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}

}  // namespace metagen::cli
