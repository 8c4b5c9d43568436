#pragma once

#include <cstddef>
#include <cstdint>
#include <ostream>

namespace metagen::cli {

struct GradcheckSummary {
  std::size_t nets = 0;
  std::size_t checked = 0;
  std::size_t skipped_kinks = 0;
  double max_rel_error = 0.0;
};

// Random 4-layer ReLU nets, widths <= 32, batches <= 8.
GradcheckSummary gradcheck_suite(std::size_t nets, std::uint64_t seed, double eps = 1e-6);

struct OracleSummary {
  std::size_t joints = 0;
  double max_form_disagreement = 0.0;  // |KL form - entropy form|
  std::size_t range_violations = 0;    // MI outside [0, min(H(X), H(Y))]
  std::size_t inversions = 0;
  double max_inversion_error = 0.0;    // |invert(p, d(p||(p+q)/2)) - q|
};

// Random joints with supports up to 6 x 4 and random (p, q) inversions.
OracleSummary oracle_suite(std::size_t joints, std::size_t inversions, std::uint64_t seed);

int cli_main(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace metagen::cli
