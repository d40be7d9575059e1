#pragma once

// Named finite-difference suites over the differentiable modules. Shared by
// the gradcheck CLI command and the release gate so both run the exact same
// checks with the same thresholds.

#include <string>
#include <vector>

#include "hgin/gradcheck.hpp"

namespace hgin {

struct SuiteResult {
    std::string name;
    GradCheckResult check;
    double eps = 0;
    double threshold = 0;
    bool passed() const { return check.max_rel_err < threshold; }
};

// module is one of "all", "hypergraph", "gated", "losses"; "all" additionally
// runs the sampled end-to-end generator check. Throws on an unknown name.
std::vector<SuiteResult> run_gradcheck_suites(const std::string& module);

std::string format_suite_result(const SuiteResult& r);

}  // namespace hgin
