#include "metagen/infotheory.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace metagen {
namespace {

double xlogx_ratio(double p, double q) {
  // p * log(p / q) with 0 log 0 = 0
  return p == 0.0 ? 0.0 : p * std::log(p / q);
}

std::size_t nonzero(std::span<const double> pmf) {
  return static_cast<std::size_t>(std::count_if(pmf.begin(), pmf.end(), [](double v) { return v > 0.0; }));
}

void require_nonempty(const DiscreteJoint& joint, const char* who) {
  if (joint.empty()) throw EmptyJointError(std::string(who) + ": empty joint");
}

void check_probability(double v, const char* name) {
  if (!(v >= 0.0 && v <= 1.0)) {
    throw std::domain_error(std::string(name) + " must lie in [0, 1], got " + std::to_string(v));
  }
}

}  // namespace

DiscreteJoint DiscreteJoint::from_pairs(std::span<const std::pair<Symbol, Symbol>> observations) {
  JointCounter counter;
  for (const auto& [x, y] : observations) counter.add(x, y);
  return counter.build();
}

DiscreteJoint DiscreteJoint::from_counts(std::vector<Symbol> support_x, std::vector<Symbol> support_y,
                                         std::vector<std::vector<std::uint64_t>> counts) {
  if (counts.size() != support_x.size()) {
    throw std::invalid_argument("DiscreteJoint: count rows do not match support_x");
  }
  JointCounter counter;
  for (std::size_t x = 0; x < support_x.size(); ++x) {
    if (counts[x].size() != support_y.size()) {
      throw std::invalid_argument("DiscreteJoint: count columns do not match support_y");
    }
    for (std::size_t y = 0; y < support_y.size(); ++y) {
      if (counts[x][y] > 0) counter.add(support_x[x], support_y[y], counts[x][y]);
    }
  }
  return counter.build();
}

DiscreteJoint JointCounter::build() const {
  DiscreteJoint joint;
  std::map<Symbol, std::size_t> xs, ys;
  for (const auto& [key, c] : counts_) {
    if (c == 0) continue;
    xs.emplace(key.first, 0);
    ys.emplace(key.second, 0);
  }
  std::size_t k = 0;
  for (auto& [sym, idx] : xs) {
    idx = k++;
    joint.support_x_.push_back(sym);
  }
  k = 0;
  for (auto& [sym, idx] : ys) {
    idx = k++;
    joint.support_y_.push_back(sym);
  }
  joint.counts_.assign(xs.size(), std::vector<std::uint64_t>(ys.size(), 0));
  for (const auto& [key, c] : counts_) {
    if (c == 0) continue;
    joint.counts_[xs[key.first]][ys[key.second]] += c;
    joint.total_ += c;
  }
  return joint;
}

std::vector<double> DiscreteJoint::marginal_x() const {
  std::vector<double> px(support_x_.size(), 0.0);
  for (std::size_t x = 0; x < px.size(); ++x) {
    std::uint64_t row = 0;
    for (std::uint64_t c : counts_[x]) row += c;
    px[x] = static_cast<double>(row) / static_cast<double>(total_);
  }
  return px;
}

std::vector<double> DiscreteJoint::marginal_y() const {
  std::vector<double> py(support_y_.size(), 0.0);
  for (std::size_t y = 0; y < py.size(); ++y) {
    std::uint64_t col = 0;
    for (const auto& row : counts_) col += row[y];
    py[y] = static_cast<double>(col) / static_cast<double>(total_);
  }
  return py;
}

double entropy(std::span<const double> pmf) {
  double h = 0.0;
  for (double p : pmf) {
    if (p > 0.0) h -= p * std::log(p);
  }
  return h;
}

double entropy_x(const DiscreteJoint& joint) {
  require_nonempty(joint, "entropy_x");
  const auto px = joint.marginal_x();
  return entropy(px);
}

double entropy_y(const DiscreteJoint& joint) {
  require_nonempty(joint, "entropy_y");
  const auto py = joint.marginal_y();
  return entropy(py);
}

double joint_entropy(const DiscreteJoint& joint) {
  require_nonempty(joint, "joint_entropy");
  double h = 0.0;
  for (std::size_t x = 0; x < joint.support_x().size(); ++x) {
    for (std::size_t y = 0; y < joint.support_y().size(); ++y) {
      const double p = joint.pmf(x, y);
      if (p > 0.0) h -= p * std::log(p);
    }
  }
  return h;
}

double plugin_mi(const DiscreteJoint& joint, const MiOptions& options) {
  require_nonempty(joint, "plugin_mi");
  const auto px = joint.marginal_x();
  const auto py = joint.marginal_y();
  double mi = 0.0;
  std::size_t cells = 0;
  for (std::size_t x = 0; x < px.size(); ++x) {
    for (std::size_t y = 0; y < py.size(); ++y) {
      const double p = joint.pmf(x, y);
      if (p > 0.0) ++cells;
      mi += xlogx_ratio(p, px[x] * py[y]);
    }
  }
  if (options.miller_madow) {
    const double n = static_cast<double>(joint.total());
    mi += (static_cast<double>(nonzero(px)) + static_cast<double>(nonzero(py)) -
           static_cast<double>(cells) - 1.0) /
          (2.0 * n);
  }
  return std::max(mi, 0.0);
}

double plugin_mi_entropy_form(const DiscreteJoint& joint) {
  return entropy_x(joint) + entropy_y(joint) - joint_entropy(joint);
}

ConditionalMi conditional_plugin_mi(const GroupedJoint& groups, const MiOptions& options) {
  if (groups.empty()) throw EmptyJointError("conditional_plugin_mi: no groups");
  ConditionalMi out;
  for (const auto& [key, joint] : groups) {
    const double v = plugin_mi(joint, options);
    out.per_group.emplace(key, v);
    out.mean += v;
  }
  out.mean /= static_cast<double>(groups.size());
  return out;
}

double binary_kl(double p, double q) {
  check_probability(p, "binary_kl: p");
  check_probability(q, "binary_kl: q");
  constexpr double inf = std::numeric_limits<double>::infinity();
  double d = 0.0;
  if (p > 0.0) {
    if (q == 0.0) return inf;
    d += p * std::log(p / q);
  }
  if (p < 1.0) {
    if (q == 1.0) return inf;
    d += (1.0 - p) * std::log((1.0 - p) / (1.0 - q));
  }
  return d;
}

double d_gamma(double p, double q, double gamma) {
  check_probability(p, "d_gamma: p");
  check_probability(q, "d_gamma: q");
  return gamma * p - std::log1p(q * std::expm1(gamma));
}

double invert_kl_risk(double p_hat, double c) {
  check_probability(p_hat, "invert_kl_risk: p_hat");
  if (!(c >= 0.0)) throw std::domain_error("invert_kl_risk: c must be >= 0");
  auto divergence = [p_hat](double r) { return binary_kl(p_hat, 0.5 * (p_hat + r)); };
  if (divergence(1.0) <= c) return 1.0;
  // d(p_hat || (p_hat + R)/2) is nondecreasing in R on [p_hat, 1].
  double lo = p_hat;
  double hi = 1.0;
  while (hi - lo > kInversionTolerance) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    if (divergence(mid) <= c) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return lo;
}

double interaction_information(std::span<const TripleObservation> observations,
                               const MiOptions& options) {
  if (observations.empty()) throw EmptyJointError("interaction_information: no observations");
  std::map<std::pair<Symbol, Symbol>, Symbol> pair_ids;
  JointCounter single, both;
  for (const auto& o : observations) {
    const auto it =
        pair_ids.emplace(std::make_pair(o.a, o.b), static_cast<Symbol>(pair_ids.size())).first;
    single.add(o.a, o.s);
    both.add(it->second, o.s);
  }
  return 2.0 * plugin_mi(single.build(), options) - plugin_mi(both.build(), options);
}

}  // namespace metagen
