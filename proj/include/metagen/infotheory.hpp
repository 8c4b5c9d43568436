#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

namespace metagen {

// Discrete information measures in nats over empirical counts.

using Symbol = std::int64_t;

// Empirical joint law of (X, Y). Symbols with zero count are never stored.
class JointCounter;

class DiscreteJoint {
 public:
  DiscreteJoint() = default;
  static DiscreteJoint from_pairs(std::span<const std::pair<Symbol, Symbol>> observations);
  static DiscreteJoint from_counts(std::vector<Symbol> support_x, std::vector<Symbol> support_y,
                                   std::vector<std::vector<std::uint64_t>> counts);

  const std::vector<Symbol>& support_x() const { return support_x_; }
  const std::vector<Symbol>& support_y() const { return support_y_; }
  std::uint64_t count(std::size_t x, std::size_t y) const { return counts_[x][y]; }
  std::uint64_t total() const { return total_; }
  bool empty() const { return total_ == 0; }

  std::vector<double> marginal_x() const;
  std::vector<double> marginal_y() const;
  double pmf(std::size_t x, std::size_t y) const {
    return static_cast<double>(counts_[x][y]) / static_cast<double>(total_);
  }

 private:
  friend class JointCounter;

  std::vector<Symbol> support_x_;
  std::vector<Symbol> support_y_;
  std::vector<std::vector<std::uint64_t>> counts_;
  std::uint64_t total_ = 0;
};

class JointCounter {
 public:
  void add(Symbol x, Symbol y, std::uint64_t count = 1) { counts_[{x, y}] += count; }
  bool empty() const { return counts_.empty(); }
  DiscreteJoint build() const;

 private:
  std::map<std::pair<Symbol, Symbol>, std::uint64_t> counts_;
};

class EmptyJointError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct MiOptions {
  // Adds the Miller-Madow bias term to every entropy; result clamped at 0.
  bool miller_madow = false;
};

double entropy(std::span<const double> pmf);
double entropy_x(const DiscreteJoint& joint);
double entropy_y(const DiscreteJoint& joint);
double joint_entropy(const DiscreteJoint& joint);

// D(P_XY || P_X P_Y).
double plugin_mi(const DiscreteJoint& joint, const MiOptions& options = {});
// H(X) + H(Y) - H(X,Y); the same quantity by a second route.
double plugin_mi_entropy_form(const DiscreteJoint& joint);

// Conditional MI as the unweighted mean of per-group plug-in MI, one group
// per conditioning realization.
using GroupedJoint = std::map<std::int64_t, DiscreteJoint>;

struct ConditionalMi {
  double mean = 0.0;
  std::map<std::int64_t, double> per_group;
};

ConditionalMi conditional_plugin_mi(const GroupedJoint& groups, const MiOptions& options = {});

// Binary relative entropy d(p||q). Returns +infinity when q sits at an
// endpoint that p puts mass against.
double binary_kl(double p, double q);
// gamma*p - log(1 - q + q*e^gamma); its supremum over gamma is binary_kl.
double d_gamma(double p, double q, double gamma);

// Largest R in [p_hat, 1] with d(p_hat || (p_hat + R)/2) <= c.
double invert_kl_risk(double p_hat, double c);
inline constexpr double kInversionTolerance = 1e-12;

// Observations of (A, B, S) for interaction information.
struct TripleObservation {
  Symbol a = 0;
  Symbol b = 0;
  Symbol s = 0;
};

// 2*I(A;S) - I((A,B);S). May be negative.
double interaction_information(std::span<const TripleObservation> observations,
                               const MiOptions& options = {});

}  // namespace metagen
