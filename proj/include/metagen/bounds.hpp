#pragma once

#include <cstddef>
#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "metagen/infotheory.hpp"
#include "metagen/metalearn.hpp"
#include "metagen/supersample.hpp"

namespace metagen {

// Which estimated information quantity a table of per-cell values holds.
enum class MiKind {
  kDeltaMi,   // I(Delta_ij; S_j)
  kDeltaCmi,  // I(Delta_ij; S_j | supersample)
  kPairMi,    // I((L+, L-)_ij; S_j)
  kSingleMi,  // I(L+_ij; S_j)
  kQuadMi,    // I(L_ij; S~_i, S_j)
  kQuadCmi,   // I(L_ij; S~_i, S_j | supersample)
};

std::string_view to_string(MiKind kind);
// Largest value the kind admits: 2 log 2 for quad kinds, log 2 otherwise.
double mi_cap(MiKind kind);

struct MiCellEstimates {
  std::size_t n = 0;
  std::size_t m = 0;
  MiKind kind = MiKind::kDeltaMi;
  std::vector<double> values;  // row-major n x m, nats

  double at(std::size_t i, std::size_t j) const { return values.at(i * m + j); }
  double mean() const;
  // Throws std::invalid_argument on shape errors or negative/over-cap values.
  void validate() const;
};

MiCellEstimates uniform_cells(std::size_t n, std::size_t m, MiKind kind, double value);

enum class ConstantVariant {
  kStatement,  // -log(2 - e^{C2}) / (2 C2) - 1
  kProof,      // -log(2 - e^{2 C2}) / (2 C2) - 1
};

std::string_view to_string(ConstantVariant variant);

struct BoundParams {
  double sigma = 0.5;  // sub-gaussian scale; range/2 for [0,1] losses
  double c1 = 0.0;     // weight constant; see fast_rate_constants
  double c2 = 0.3;
  double gamma = 0.9;
  std::size_t zeta = 1;
  std::size_t xi = 1;
  ConstantVariant variant = ConstantVariant::kProof;
};

class BoundConfigError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// (1/nm) sum_ij sqrt(scale * I_ij). Used with delta/quad cells, conditional
// or not.
double sqrt_mi_bound(const MiCellEstimates& cells, double scale = 2.0);

// Mean over subset draws of sqrt(2 sigma^2 I_k / (zeta xi)), one entry per
// supplied information value.
double subgaussian_mi_bound(std::span<const double> mi_per_subset, double sigma,
                            std::size_t zeta, std::size_t xi);

struct KlBound {
  double risk_upper = 0.0;
  double gap_upper = 0.0;
  double budget = 0.0;  // c = mean cell value
};

KlBound kl_inversion_bound(double p_hat, const MiCellEstimates& cells);

// Smallest admissible C1 for the loss-difference fast-rate bound.
double fast_rate_constants(double c2, ConstantVariant variant);
// Same for the parameter-space variant: C2 in (0, log 2),
// C1 >= -log(2 - e^{C2}) / C2 - 1.
double cmi_fast_rate_constants(double c2);
// gamma-variance variant: C1 >= -log(2 - e^{2 C2}) / (2 C2 gamma^2) - 1/gamma^2.
double variance_fast_rate_constants(double c2, double gamma);

// C1 * R_hat + (1/nm) sum min{pair, 2 single} / C2.
double fast_rate_bound(double r_hat, const BoundParams& params, const MiCellEstimates& pair_cells,
                       const MiCellEstimates& single_cells);
// Zero empirical risk: (1/nm) sum 2 min{pair, 2 single} / log 2.
double fast_rate_interpolating_bound(const MiCellEstimates& pair_cells,
                                     const MiCellEstimates& single_cells);
// C1 * R_hat + (1/nm) sum I_ij / C2 over parameter-space CMI cells.
double cmi_fast_rate_bound(double r_hat, const BoundParams& params, const MiCellEstimates& cells);

// Mean over runs of (1/nm) sum_ij (train loss - (1+gamma) R_hat_run)^2.
double gamma_variance(std::span<const LossTable> tables, double gamma);

double variance_fast_rate_bound(double v, const BoundParams& params,
                                const MiCellEstimates& pair_cells,
                                const MiCellEstimates& single_cells);

// Exact population risk at zero empirical risk: (1/nm) sum I(Delta;S) / log 2.
double interpolating_risk(const MiCellEstimates& delta_cells);

class NotPositiveDefiniteError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// log|M| through a Cholesky factorization.
double logdet_psd(const Eigen::MatrixXd& m);

// log|ratio * Cov + I| for one gradient block, evaluated on the B x B Gram
// matrix (identical to the dim x dim determinant).
double block_logdet(const GradientBlock& block, double ratio);

double sgld_trajectory_bound(const GradientTrajectory& traj, std::size_t n, std::size_t m);
double maml_trajectory_bound(const GradientTrajectory& traj, std::size_t n, std::size_t m_test);

}  // namespace metagen
