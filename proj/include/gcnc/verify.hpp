#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "gcnc/config.hpp"

namespace gcnc {

struct CheckResult {
    std::string name;
    bool passed = false;
    std::string detail;
};

/// Oracle checks: finite-difference agreement of gradients, Jacobians and
/// the GC penalty gradient; exact GC of linear maps; unbiasedness of the
/// sampled GC estimators; ridge solutions against an explicit inverse; and
/// the NC and generalization-bound inequalities on a run of `cfg`.
std::vector<CheckResult> run_verification(const ExperimentConfig& cfg, std::ostream& log);

}  // namespace gcnc
