#pragma once

// Built-in numerical self-checks run by the `validate` command.

#include <functional>
#include <string>
#include <vector>

namespace immkl {

struct CheckResult {
  std::string name;
  bool passed = false;
  std::string detail;
};

// Integral of f over (0, inf) for a scalar density-like integrand.
double integrate_half_line(const std::function<double(double)>& f);

std::vector<CheckResult> run_self_checks();

}  // namespace immkl
