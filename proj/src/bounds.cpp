#include "metagen/bounds.hpp"

#include <cmath>
#include <numbers>
#include <string>

namespace metagen {
namespace {

constexpr double kLog2 = std::numbers::ln2;
constexpr double kCapSlack = 1e-12;

void require_same_shape(const MiCellEstimates& a, const MiCellEstimates& b) {
  if (a.n != b.n || a.m != b.m) {
    throw std::invalid_argument("bound: pair and single cell tables differ in shape");
  }
}

double min_term_mean(const MiCellEstimates& pair_cells, const MiCellEstimates& single_cells) {
  pair_cells.validate();
  single_cells.validate();
  require_same_shape(pair_cells, single_cells);
  double total = 0.0;
  for (std::size_t k = 0; k < pair_cells.values.size(); ++k) {
    total += std::min(pair_cells.values[k], 2.0 * single_cells.values[k]);
  }
  return total / static_cast<double>(pair_cells.values.size());
}

void check_c2_half_log2(double c2) {
  if (!(c2 > 0.0 && c2 < kLog2 / 2.0)) {
    throw BoundConfigError("C2 must satisfy 0 < C2 < log(2)/2, got " + std::to_string(c2));
  }
}

double step_ratio(double step_size, double sigma, const GradientBlock& block) {
  if (sigma > 0.0) return (step_size * step_size) / (sigma * sigma);
  if (step_size == 0.0 || block.gram.isZero(0.0)) return 0.0;
  throw std::domain_error("trajectory bound: sigma_t must be positive when gradients vary");
}

}  // namespace

std::string_view to_string(MiKind kind) {
  switch (kind) {
    case MiKind::kDeltaMi: return "delta_mi";
    case MiKind::kDeltaCmi: return "delta_cmi";
    case MiKind::kPairMi: return "pair_mi";
    case MiKind::kSingleMi: return "single_mi";
    case MiKind::kQuadMi: return "quad_mi";
    case MiKind::kQuadCmi: return "quad_cmi";
  }
  return "unknown";
}

double mi_cap(MiKind kind) {
  return (kind == MiKind::kQuadMi || kind == MiKind::kQuadCmi) ? 2.0 * kLog2 : kLog2;
}

double MiCellEstimates::mean() const {
  double total = 0.0;
  for (double v : values) total += v;
  return total / static_cast<double>(values.size());
}

void MiCellEstimates::validate() const {
  if (n == 0 || m == 0 || values.size() != n * m) {
    throw std::invalid_argument("MiCellEstimates: expected " + std::to_string(n * m) +
                                " values, got " + std::to_string(values.size()));
  }
  const double cap = mi_cap(kind) + kCapSlack;
  for (double v : values) {
    if (!(v >= 0.0)) {
      throw std::invalid_argument("MiCellEstimates: negative or NaN cell value " + std::to_string(v));
    }
    if (v > cap) {
      throw std::invalid_argument("MiCellEstimates: value " + std::to_string(v) +
                                  " exceeds the cap for " + std::string(to_string(kind)));
    }
  }
}

MiCellEstimates uniform_cells(std::size_t n, std::size_t m, MiKind kind, double value) {
  return {n, m, kind, std::vector<double>(n * m, value)};
}

std::string_view to_string(ConstantVariant variant) {
  return variant == ConstantVariant::kProof ? "proof" : "statement";
}

double sqrt_mi_bound(const MiCellEstimates& cells, double scale) {
  cells.validate();
  if (!(scale > 0.0)) throw std::invalid_argument("sqrt_mi_bound: scale must be positive");
  double total = 0.0;
  for (double v : cells.values) total += std::sqrt(scale * v);
  return total / static_cast<double>(cells.values.size());
}

double subgaussian_mi_bound(std::span<const double> mi_per_subset, double sigma,
                            std::size_t zeta, std::size_t xi) {
  if (mi_per_subset.empty()) throw std::invalid_argument("subgaussian_mi_bound: no values");
  if (zeta == 0 || xi == 0 || !(sigma > 0.0)) {
    throw std::invalid_argument("subgaussian_mi_bound: sigma, zeta, xi must be positive");
  }
  double total = 0.0;
  for (double v : mi_per_subset) {
    if (!(v >= 0.0)) throw std::invalid_argument("subgaussian_mi_bound: negative value");
    total += std::sqrt(2.0 * sigma * sigma * v / static_cast<double>(zeta * xi));
  }
  return total / static_cast<double>(mi_per_subset.size());
}

KlBound kl_inversion_bound(double p_hat, const MiCellEstimates& cells) {
  cells.validate();
  KlBound out;
  out.budget = cells.mean();
  out.risk_upper = invert_kl_risk(p_hat, out.budget);
  out.gap_upper = out.risk_upper - p_hat;
  return out;
}

double fast_rate_constants(double c2, ConstantVariant variant) {
  check_c2_half_log2(c2);
  const double e = variant == ConstantVariant::kProof ? std::exp(2.0 * c2) : std::exp(c2);
  return -std::log(2.0 - e) / (2.0 * c2) - 1.0;
}

double cmi_fast_rate_constants(double c2) {
  if (!(c2 > 0.0 && c2 < kLog2)) {
    throw BoundConfigError("C2 must satisfy 0 < C2 < log(2), got " + std::to_string(c2));
  }
  return -std::log(2.0 - std::exp(c2)) / c2 - 1.0;
}

double variance_fast_rate_constants(double c2, double gamma) {
  check_c2_half_log2(c2);
  if (!(gamma > 0.0 && gamma < 1.0)) {
    throw BoundConfigError("gamma must lie in (0, 1), got " + std::to_string(gamma));
  }
  const double g2 = gamma * gamma;
  return -std::log(2.0 - std::exp(2.0 * c2)) / (2.0 * c2 * g2) - 1.0 / g2;
}

double fast_rate_bound(double r_hat, const BoundParams& params, const MiCellEstimates& pair_cells,
                       const MiCellEstimates& single_cells) {
  const double c1_min = fast_rate_constants(params.c2, params.variant);
  if (params.c1 < c1_min) {
    throw BoundConfigError("C1 = " + std::to_string(params.c1) +
                           " violates C1 >= -log(2 - e^{" +
                           (params.variant == ConstantVariant::kProof ? "2C2" : "C2") +
                           "})/(2 C2) - 1 = " + std::to_string(c1_min));
  }
  return params.c1 * r_hat + min_term_mean(pair_cells, single_cells) / params.c2;
}

double fast_rate_interpolating_bound(const MiCellEstimates& pair_cells,
                                     const MiCellEstimates& single_cells) {
  return 2.0 * min_term_mean(pair_cells, single_cells) / kLog2;
}

double cmi_fast_rate_bound(double r_hat, const BoundParams& params, const MiCellEstimates& cells) {
  const double c1_min = cmi_fast_rate_constants(params.c2);
  if (params.c1 < c1_min) {
    throw BoundConfigError("C1 = " + std::to_string(params.c1) +
                           " violates C1 >= -log(2 - e^{C2})/C2 - 1 = " + std::to_string(c1_min));
  }
  cells.validate();
  return params.c1 * r_hat + cells.mean() / params.c2;
}

double gamma_variance(std::span<const LossTable> tables, double gamma) {
  if (tables.empty()) throw std::invalid_argument("gamma_variance: no runs");
  if (!(gamma > 0.0 && gamma < 1.0)) {
    throw BoundConfigError("gamma must lie in (0, 1), got " + std::to_string(gamma));
  }
  double total = 0.0;
  for (const auto& table : tables) {
    const double r_run = table.empirical_risk();
    double acc = 0.0;
    for (std::size_t i = 0; i < table.n; ++i) {
      for (std::size_t j = 0; j < table.m; ++j) {
        const double dev = table.train_loss(i, j) - (1.0 + gamma) * r_run;
        acc += dev * dev;
      }
    }
    total += acc / static_cast<double>(table.n * table.m);
  }
  return total / static_cast<double>(tables.size());
}

double variance_fast_rate_bound(double v, const BoundParams& params,
                                const MiCellEstimates& pair_cells,
                                const MiCellEstimates& single_cells) {
  const double c1_min = variance_fast_rate_constants(params.c2, params.gamma);
  if (params.c1 < c1_min) {
    throw BoundConfigError("C1 = " + std::to_string(params.c1) +
                           " violates C1 >= -log(2 - e^{2C2})/(2 C2 gamma^2) - 1/gamma^2 = " +
                           std::to_string(c1_min));
  }
  if (!(v >= 0.0)) throw std::invalid_argument("variance_fast_rate_bound: V must be >= 0");
  return params.c1 * v + min_term_mean(pair_cells, single_cells) / params.c2;
}

double interpolating_risk(const MiCellEstimates& delta_cells) {
  delta_cells.validate();
  return delta_cells.mean() / kLog2;
}

double logdet_psd(const Eigen::MatrixXd& m) {
  if (m.rows() != m.cols()) throw std::invalid_argument("logdet_psd: matrix is not square");
  if (m.size() == 0) return 0.0;
  Eigen::LLT<Eigen::MatrixXd> llt(m);
  if (llt.info() != Eigen::Success) {
    throw NotPositiveDefiniteError("logdet_psd: Cholesky factorization failed");
  }
  const Eigen::MatrixXd& l = llt.matrixLLT();
  double total = 0.0;
  for (Eigen::Index k = 0; k < l.rows(); ++k) total += std::log(l(k, k));
  return 2.0 * total;
}

double block_logdet(const GradientBlock& block, double ratio) {
  if (ratio == 0.0) return 0.0;
  const auto b = block.gram.rows();
  // |I_D + r Xc^T Xc/(B-1)| = |I_B + r Xc Xc^T/(B-1)|
  return logdet_psd(ratio * block.gram + Eigen::MatrixXd::Identity(b, b));
}

double sgld_trajectory_bound(const GradientTrajectory& traj, std::size_t n, std::size_t m) {
  if (traj.mode != TrajectoryMode::kJoint) {
    throw std::invalid_argument("sgld_trajectory_bound: expects a joint-mode trajectory");
  }
  if (n == 0 || m == 0) throw std::invalid_argument("sgld_trajectory_bound: n, m must be >= 1");
  double total = 0.0;
  for (std::size_t t = 0; t < traj.steps.size(); ++t) {
    const auto& step = traj.steps[t];
    if (step.blocks.size() != 1) {
      throw std::invalid_argument("sgld_trajectory_bound: step " + std::to_string(t + 1) +
                                  " carries no gradient samples");
    }
    const auto& block = step.blocks.front();
    const std::size_t expected = (step.task_batch.size() + 1) * traj.param_dim;
    if (traj.param_dim != 0 && block.dim != expected) {
      throw std::invalid_argument("sgld_trajectory_bound: stacked dimension mismatch");
    }
    total += 0.5 * block_logdet(block, step_ratio(step.eta, step.sigma, block));
  }
  return std::sqrt(std::max(total, 0.0)) / std::sqrt(static_cast<double>(n * m));
}

double maml_trajectory_bound(const GradientTrajectory& traj, std::size_t n, std::size_t m_test) {
  if (traj.mode != TrajectoryMode::kMaml) {
    throw std::invalid_argument("maml_trajectory_bound: expects a MAML-mode trajectory");
  }
  if (n == 0 || m_test == 0) {
    throw std::invalid_argument("maml_trajectory_bound: n, m_test must be >= 1");
  }
  double total = 0.0;
  for (std::size_t t = 0; t < traj.steps.size(); ++t) {
    const auto& step = traj.steps[t];
    if (step.blocks.size() != 2 || !step.beta) {
      throw std::invalid_argument("maml_trajectory_bound: step " + std::to_string(t + 1) +
                                  " lacks inner/outer gradient blocks");
    }
    const auto& inner = step.blocks[0];
    const auto& outer = step.blocks[1];
    if (traj.param_dim != 0 && (inner.dim != step.task_batch.size() * traj.param_dim ||
                                outer.dim != traj.param_dim)) {
      throw std::invalid_argument("maml_trajectory_bound: block dimension mismatch");
    }
    total += block_logdet(inner, step_ratio(*step.beta, step.sigma, inner));
    total += block_logdet(outer, step_ratio(step.eta, step.sigma, outer));
  }
  return std::sqrt(std::max(total, 0.0)) / std::sqrt(static_cast<double>(n * m_test));
}

}  // namespace metagen
