#ifndef TADA_APP_CHECKS_HPP
#define TADA_APP_CHECKS_HPP

#include <string>
#include <vector>

namespace tada::app {

/// One verification record: the check passes when observed < tolerance.
struct CheckResult {
  std::string name;
  double tolerance = 0.0;
  double observed = 0.0;
  bool pass = false;
};

/// Every registered dynamics/sampler/analysis check whose name contains
/// `filter` (empty matches all). Deterministic; safe to call repeatedly.
std::vector<CheckResult> run_checks(const std::string& filter);

std::vector<std::string> check_names();

}  // namespace tada::app

#endif  // TADA_APP_CHECKS_HPP
